use std::sync::OnceLock;

use proptest::prelude::*;
use vpl_core::collision::{CollisionAssembly, NullBasis};
use vpl_core::grid::{Maxwellian, VelocityGrid};
use vpl_core::macroscopic::MacroContext;

const NV: usize = 6;
const LEN: usize = 2 * NV * NV * NV;

struct Setup {
    grid: VelocityGrid,
    ops: CollisionAssembly,
    basis: NullBasis,
    macro_ctx: MacroContext,
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let grid = VelocityGrid::new(NV, 5.0).unwrap();
        let ops = CollisionAssembly::new(&grid, -1.0).unwrap();
        let basis = NullBasis::new(&grid, &Maxwellian::new(&grid));
        let macro_ctx = MacroContext::new(&grid);
        Setup { grid, ops, basis, macro_ctx }
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn field() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, LEN)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn l_is_symmetric_and_nonpositive(f in field(), g in field()) {
        let s = setup();
        let lf = s.ops.apply_l(&f);
        let lg = s.ops.apply_l(&g);
        let scale = norm(&lf) * norm(&g) + norm(&lg) * norm(&f);
        prop_assert!((dot(&g, &lf) - dot(&f, &lg)).abs() <= 1e-12 * scale);
        prop_assert!(dot(&f, &lf) <= 1e-12 * norm(&lf) * norm(&f));
    }

    #[test]
    fn l_output_carries_no_invariant_content(f in field()) {
        let s = setup();
        let lf = s.ops.apply_l(&f);
        let w = s.grid.weight();
        for q in &s.basis.analytic {
            let c = w * dot(q, &lf);
            prop_assert!(c.abs() <= 1e-11 * w * norm(q) * norm(&lf), "{c}");
        }
    }

    #[test]
    fn l_annihilates_the_projected_part(f in field()) {
        let s = setup();
        let pf = s.macro_ctx.project(&f);
        let lpf = s.ops.apply_l(&pf);
        prop_assert!(norm(&lpf) <= 1e-10 * norm(&pf).max(1e-300));
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal(f in field()) {
        let s = setup();
        let pf = s.macro_ctx.project(&f);
        let ppf = s.macro_ctx.project(&pf);
        let perp: Vec<f64> = f.iter().zip(&pf).map(|(a, b)| a - b).collect();
        prop_assert!(pf.iter().zip(&ppf).all(|(a, b)| (a - b).abs() <= 1e-12 * norm(&f)));
        prop_assert!(dot(&perp, &pf).abs() <= 1e-12 * norm(&f) * norm(&f));
    }
}
