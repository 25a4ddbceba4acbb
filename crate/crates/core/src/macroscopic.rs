//! Macroscopic projection, fluid moments and the moment-system residuals.
//!
//! Phase-space fields are flat slices indexed `(ix·2 + species)·n_v + iv`, so
//! every spatial point carries one contiguous two-species velocity field.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::collision::NullBasis;
use crate::error::{Result, VplError};
use crate::grid::{norm2, Maxwellian, VelocityGrid};
use crate::spectral::{solve_poisson, Spectral};

/// Velocity test functions of the moment systems.
#[derive(Debug, Clone)]
pub struct MomentWeights {
    pub sqrt_mu: Vec<f64>,
    /// `v_j√μ`.
    pub v: [Vec<f64>; 3],
    /// `(|v|²-3)√μ`.
    pub energy: Vec<f64>,
    /// `(v_j v_k - 1)√μ`.
    pub theta: [[Vec<f64>; 3]; 3],
    /// `(1/10)(|v|²-5) v_j√μ`.
    pub lambda: [Vec<f64>; 3],
}

impl MomentWeights {
    pub fn new(grid: &VelocityGrid, maxwellian: &Maxwellian) -> Self {
        let sm = &maxwellian.sqrt_mu;
        let tab = |f: &dyn Fn([f64; 3]) -> f64| -> Vec<f64> { grid.coords().iter().zip(sm).map(|(&v, s)| f(v) * s).collect() };
        let v = [0, 1, 2].map(|j| tab(&|u: [f64; 3]| u[j]));
        let energy = tab(&|u| norm2(u) - 3.0);
        let theta = [0, 1, 2].map(|j| [0, 1, 2].map(|k| tab(&|u: [f64; 3]| u[j] * u[k] - 1.0)));
        let lambda = [0, 1, 2].map(|j| tab(&|u: [f64; 3]| 0.1 * (norm2(u) - 5.0) * u[j]));
        Self { sqrt_mu: sm.clone(), v, energy, theta, lambda }
    }
}

/// Fluid coefficients of one two-species velocity field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointMoments {
    pub a_plus: f64,
    pub a_minus: f64,
    pub b: [f64; 3],
    pub c: f64,
}

/// Projection machinery on one velocity grid.
#[derive(Debug, Clone)]
pub struct MacroContext {
    pub grid: VelocityGrid,
    pub maxwellian: Maxwellian,
    pub basis: NullBasis,
    pub weights: MomentWeights,
}

impl MacroContext {
    pub fn new(grid: &VelocityGrid) -> Self {
        let maxwellian = Maxwellian::new(grid);
        let basis = NullBasis::new(grid, &maxwellian);
        let weights = MomentWeights::new(grid, &maxwellian);
        Self { grid: grid.clone(), maxwellian, basis, weights }
    }

    pub fn nv(&self) -> usize {
        self.grid.len()
    }

    /// `a± = (√μ, f±)`, `b = ½(v√μ, f₊+f₋)`, `c = (1/12)((|v|²-3)√μ, f₊+f₋)`.
    pub fn point_moments(&self, f2: &[f64]) -> PointMoments {
        let n = self.nv();
        let (fp, fm) = f2.split_at(n);
        let g = &self.grid;
        let w = &self.weights;
        let sum: Vec<f64> = fp.iter().zip(fm).map(|(a, b)| a + b).collect();
        PointMoments {
            a_plus: g.dot(&w.sqrt_mu, fp),
            a_minus: g.dot(&w.sqrt_mu, fm),
            b: [0, 1, 2].map(|j| 0.5 * g.dot(&w.v[j], &sum)),
            c: g.dot(&w.energy, &sum) / 12.0,
        }
    }

    /// `P f` for a two-species velocity field.
    pub fn project(&self, f2: &[f64]) -> Vec<f64> {
        self.basis.project(f2)
    }

    /// `(Pf, (I-P)f)` over a whole phase field.
    pub fn split(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut pf = Vec::with_capacity(f.len());
        let mut perp = Vec::with_capacity(f.len());
        for chunk in f.chunks(2 * self.nv()) {
            let p = self.project(chunk);
            perp.extend(chunk.iter().zip(&p).map(|(a, b)| a - b));
            pf.extend(p);
        }
        (pf, perp)
    }

    /// `(ζ, F_s)_{L²_v}` at every spatial point.
    pub fn moment(&self, zeta: &[f64], f: &[f64], species: usize) -> Vec<f64> {
        let n = self.nv();
        f.chunks(2 * n).map(|c| self.grid.dot(zeta, &c[species * n..(species + 1) * n])).collect()
    }

    pub fn macro_state(&self, f: &[f64]) -> MacroState {
        let nx = f.len() / (2 * self.nv());
        let mut s = MacroState::zeros(nx);
        let (_, perp) = self.split(f);
        let w = &self.weights;
        for (ix, chunk) in f.chunks(2 * self.nv()).enumerate() {
            let m = self.point_moments(chunk);
            s.a_plus[ix] = m.a_plus;
            s.a_minus[ix] = m.a_minus;
            s.c[ix] = m.c;
            for j in 0..3 {
                s.b[j][ix] = m.b[j];
            }
        }
        for j in 0..3 {
            let (up, um) = (self.moment(&w.v[j], &perp, 0), self.moment(&w.v[j], &perp, 1));
            s.g[j] = up.iter().zip(&um).map(|(a, b)| a - b).collect();
            let (lp, lm) = (self.moment(&w.lambda[j], &perp, 0), self.moment(&w.lambda[j], &perp, 1));
            s.lambda[j] = lp.iter().zip(&lm).map(|(a, b)| a + b).collect();
            for k in 0..3 {
                let (tp, tm) = (self.moment(&w.theta[j][k], &perp, 0), self.moment(&w.theta[j][k], &perp, 1));
                s.theta[j][k] = tp.iter().zip(&tm).map(|(a, b)| a + b).collect();
            }
        }
        s
    }
}

/// Macroscopic fields over the spatial grid. `theta` and `lambda` are the
/// high-order moments of `(I-P)f·(1,1)`; `g = (v√μ, (I-P)f·(1,-1))`.
#[derive(Debug, Clone, Serialize)]
pub struct MacroState {
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
    pub b: [Vec<f64>; 3],
    pub c: Vec<f64>,
    pub theta: [[Vec<f64>; 3]; 3],
    pub lambda: [Vec<f64>; 3],
    pub g: [Vec<f64>; 3],
}

impl MacroState {
    fn zeros(nx: usize) -> Self {
        let z = || vec![0.0; nx];
        Self {
            a_plus: z(),
            a_minus: z(),
            b: [z(), z(), z()],
            c: z(),
            theta: [[z(), z(), z()], [z(), z(), z()], [z(), z(), z()]],
            lambda: [z(), z(), z()],
            g: [z(), z(), z()],
        }
    }

    pub fn charge(&self) -> Vec<f64> {
        self.a_plus.iter().zip(&self.a_minus).map(|(a, b)| a - b).collect()
    }
}

/// A stored state of a trajectory.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub f: Vec<f64>,
}

/// `L f` and the forcing `g` of a state, both phase fields.
pub struct Sources {
    pub lf: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualRecord {
    pub equation_id: String,
    pub t: f64,
    pub max_residual: f64,
    pub l2_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub records: Vec<ResidualRecord>,
    /// Largest `L²_x` residual over time for each line.
    pub worst_l2: BTreeMap<String, f64>,
}

/// Moment fields of one snapshot that enter time derivatives.
struct Level {
    a: [Vec<f64>; 2],
    b: [Vec<f64>; 3],
    c: Vec<f64>,
    /// `(v_j√μ, u_s)`.
    vu: [[Vec<f64>; 3]; 2],
    /// `((|v|²-3)√μ, u_s)`.
    eu: [Vec<f64>; 2],
    th: [[[Vec<f64>; 3]; 3]; 2],
    la: [[Vec<f64>; 3]; 2],
}

fn level(ctx: &MacroContext, f: &[f64]) -> (Level, Vec<f64>) {
    let w = &ctx.weights;
    let st = ctx.macro_state(f);
    let (_, u) = ctx.split(f);
    let mom = |z: &[f64], s: usize| ctx.moment(z, &u, s);
    let lv = Level {
        a: [st.a_plus, st.a_minus],
        b: st.b,
        c: st.c,
        vu: [0, 1].map(|s| [0, 1, 2].map(|j| mom(&w.v[j], s))),
        eu: [0, 1].map(|s| mom(&w.energy, s)),
        th: [0, 1].map(|s| [0, 1, 2].map(|j| [0, 1, 2].map(|k| mom(&w.theta[j][k], s)))),
        la: [0, 1].map(|s| [0, 1, 2].map(|j| mom(&w.lambda[j], s))),
    };
    (lv, u)
}

type Field = Vec<f64>;

fn lin(terms: &[(f64, &[f64])]) -> Field {
    let n = terms[0].1.len();
    let mut out = vec![0.0; n];
    for (c, f) in terms {
        for (o, a) in out.iter_mut().zip(f.iter()) {
            *o += c * a;
        }
    }
    out
}

/// Residuals of every line of the moment systems along a trajectory with
/// uniformly spaced snapshots, time derivatives by central differences.
pub fn moment_residuals(
    ctx: &MacroContext,
    spec: &Spectral,
    snaps: &[Snapshot],
    sources: &dyn Fn(&[f64]) -> Sources,
) -> Result<ResidualReport> {
    if snaps.len() < 3 {
        return Err(VplError::Insufficient(format!("moment residuals need 3 snapshots, got {}", snaps.len())));
    }
    let dt = snaps[1].t - snaps[0].t;
    if !(dt > 0.0) || snaps.windows(2).any(|p| ((p[1].t - p[0].t) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(VplError::Config("moment residuals need uniformly spaced snapshots".into()));
    }
    let w = &ctx.weights;
    let g = &ctx.grid;
    let vm: Vec<[f64; 3]> = g.coords().to_vec();
    // Test functions multiplied by v_m, for the transport fluxes.
    let times_v = |z: &[f64], m: usize| -> Vec<f64> { z.iter().zip(&vm).map(|(a, v)| a * v[m]).collect() };
    let levels: Vec<Level> = snaps.iter().map(|s| level(ctx, &s.f).0).collect();
    let dx = spec.grid.cell_volume();
    let mut records = Vec::new();
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for k in 1..snaps.len() - 1 {
        let t = snaps[k].t;
        let (lo, mid, hi) = (&levels[k - 1], &levels[k], &levels[k + 1]);
        let dtf = |a: &Field, b: &Field| -> Field { a.iter().zip(b).map(|(x, y)| (y - x) / (2.0 * dt)).collect() };
        let f = &snaps[k].f;
        let (_, u) = ctx.split(f);
        let src = sources(f);
        let mom = |z: &[f64], field: &[f64], s: usize| ctx.moment(z, field, s);
        let d = |x: &Field, a: usize| spec.derivative(x, a);
        // Σ_m ∂_m (ζ v_m, u_s)
        let flux = |z: &[f64], s: usize| -> Field {
            let mut out = vec![0.0; spec.len()];
            for m in 0..spec.grid.dim {
                for (o, a) in out.iter_mut().zip(d(&mom(&times_v(z, m), &u, s), m)) {
                    *o += a;
                }
            }
            out
        };
        // (ζ, g_s + h_s) with h_s = -v·∇u_s + L_s f.
        let gh = |z: &[f64], s: usize| -> Field { lin(&[(1.0, &mom(z, &src.g, s)), (1.0, &mom(z, &src.lf, s)), (-1.0, &flux(z, s))]) };
        let field = solve_poisson(spec, &lin(&[(1.0, &mid.a[0]), (-1.0, &mid.a[1])]));
        let div_b = spec.divergence(&mid.b);
        let mut lines: Vec<(String, Vec<Field>)> = Vec::new();
        for s in 0..2 {
            let sign = if s == 0 { 1.0 } else { -1.0 };
            let tag = if s == 0 { "+" } else { "-" };
            let dvu: Field = (0..spec.grid.dim).fold(vec![0.0; spec.len()], |acc, m| lin(&[(1.0, &acc), (1.0, &d(&mid.vu[s][m], m))]));
            lines.push((format!("mass{tag}"), vec![lin(&[(1.0, &dtf(&lo.a[s], &hi.a[s])), (1.0, &div_b), (1.0, &dvu)])]));
            let mut l2 = Vec::new();
            let mut l4 = Vec::new();
            let mut l5 = Vec::new();
            let mut l6 = Vec::new();
            for j in 0..3 {
                let q_lo = lin(&[(1.0, &lo.b[j]), (1.0, &lo.vu[s][j])]);
                let q_hi = lin(&[(1.0, &hi.b[j]), (1.0, &hi.vu[s][j])]);
                let pot = lin(&[(1.0, &mid.a[s]), (2.0, &mid.c)]);
                let rhs = lin(&[(1.0, &mom(&w.v[j], &src.lf, s)), (1.0, &mom(&w.v[j], &src.g, s))]);
                l2.push(lin(&[
                    (1.0, &dtf(&q_lo, &q_hi)),
                    (1.0, &d(&pot, j)),
                    (-sign, &field.e[j]),
                    (1.0, &flux(&w.v[j], s)),
                    (-1.0, &rhs),
                ]));
                let q_lo = lin(&[(1.0, &lo.th[s][j][j]), (2.0, &lo.c)]);
                let q_hi = lin(&[(1.0, &hi.th[s][j][j]), (2.0, &hi.c)]);
                l4.push(lin(&[(1.0, &dtf(&q_lo, &q_hi)), (2.0, &d(&mid.b[j], j)), (-1.0, &gh(&w.theta[j][j], s))]));
                for kk in j + 1..3 {
                    l5.push(lin(&[
                        (1.0, &dtf(&lo.th[s][j][kk], &hi.th[s][j][kk])),
                        (1.0, &d(&mid.b[kk], j)),
                        (1.0, &d(&mid.b[j], kk)),
                        (1.0, &dvu),
                        (-1.0, &gh(&w.theta[j][kk], s)),
                        (-1.0, &mom(&w.sqrt_mu, &src.g, s)),
                    ]));
                }
                l6.push(lin(&[(1.0, &dtf(&lo.la[s][j], &hi.la[s][j])), (1.0, &d(&mid.c, j)), (-1.0, &gh(&w.lambda[j], s))]));
            }
            lines.push((format!("momentum{tag}"), l2));
            let q_lo = lin(&[(1.0, &lo.c), (1.0 / 6.0, &lo.eu[s])]);
            let q_hi = lin(&[(1.0, &hi.c), (1.0 / 6.0, &hi.eu[s])]);
            let rhs = lin(&[(1.0, &mom(&w.energy, &src.lf, s)), (1.0, &mom(&w.energy, &src.g, s))]);
            lines.push((
                format!("energy{tag}"),
                vec![lin(&[(1.0, &dtf(&q_lo, &q_hi)), (1.0 / 3.0, &div_b), (1.0 / 6.0, &flux(&w.energy, s)), (-1.0 / 6.0, &rhs)])],
            ));
            lines.push((format!("stress_diag{tag}"), l4));
            lines.push((format!("stress_off{tag}"), l5));
            lines.push((format!("heat_flux{tag}"), l6));
        }
        let sum2 = |x: &[Field; 2]| lin(&[(1.0, &x[0]), (1.0, &x[1])]);
        let gsum = |z: &[f64]| lin(&[(1.0, &mom(z, &src.g, 0)), (1.0, &mom(z, &src.g, 1))]);
        let ghsum = |z: &[f64]| lin(&[(1.0, &gh(z, 0)), (1.0, &gh(z, 1))]);
        let a_avg = |l: &Level| lin(&[(0.5, &l.a[0]), (0.5, &l.a[1])]);
        lines.push(("avg.mass".into(), vec![lin(&[(1.0, &dtf(&a_avg(lo), &a_avg(hi))), (1.0, &div_b)])]));
        let mut avg_momentum = Vec::new();
        let mut avg_heat = Vec::new();
        let mut avg_stress = Vec::new();
        let mut current = Vec::new();
        let charge = lin(&[(1.0, &mid.a[0]), (-1.0, &mid.a[1])]);
        for j in 0..3 {
            let mut terms: Vec<Field> = vec![
                dtf(&lo.b[j], &hi.b[j]),
                d(&lin(&[(1.0, &a_avg(mid)), (2.0, &mid.c)]), j),
                lin(&[(-0.5, &gsum(&w.v[j]))]),
            ];
            let mut current_terms: Vec<Field> = vec![
                dtf(&lin(&[(1.0, &lo.vu[0][j]), (-1.0, &lo.vu[1][j])]), &lin(&[(1.0, &hi.vu[0][j]), (-1.0, &hi.vu[1][j])])),
                d(&charge, j),
                lin(&[(-2.0, &field.e[j])]),
                lin(&[
                    (-1.0, &mom(&w.v[j], &src.g, 0)),
                    (-1.0, &mom(&w.v[j], &src.lf, 0)),
                    (1.0, &mom(&w.v[j], &src.g, 1)),
                    (1.0, &mom(&w.v[j], &src.lf, 1)),
                ]),
            ];
            for kk in 0..spec.grid.dim {
                terms.push(lin(&[(0.5, &d(&sum2(&[mid.th[0][j][kk].clone(), mid.th[1][j][kk].clone()]), kk))]));
                current_terms.push(d(&lin(&[(1.0, &mid.th[0][j][kk]), (-1.0, &mid.th[1][j][kk])]), kk));
            }
            avg_momentum.push(terms.iter().fold(vec![0.0; spec.len()], |acc, x| lin(&[(1.0, &acc), (1.0, x)])));
            current.push(current_terms.iter().fold(vec![0.0; spec.len()], |acc, x| lin(&[(1.0, &acc), (1.0, x)])));
            for kk in j..3 {
                let delta = if j == kk { 2.0 } else { 0.0 };
                let q_lo = lin(&[(0.5, &lo.th[0][j][kk]), (0.5, &lo.th[1][j][kk]), (delta, &lo.c)]);
                let q_hi = lin(&[(0.5, &hi.th[0][j][kk]), (0.5, &hi.th[1][j][kk]), (delta, &hi.c)]);
                avg_stress.push(lin(&[
                    (1.0, &dtf(&q_lo, &q_hi)),
                    (1.0, &d(&mid.b[kk], j)),
                    (1.0, &d(&mid.b[j], kk)),
                    (-0.5, &ghsum(&w.theta[j][kk])),
                ]));
            }
            let q_lo = lin(&[(0.5, &lo.la[0][j]), (0.5, &lo.la[1][j])]);
            let q_hi = lin(&[(0.5, &hi.la[0][j]), (0.5, &hi.la[1][j])]);
            avg_heat.push(lin(&[(1.0, &dtf(&q_lo, &q_hi)), (1.0, &d(&mid.c, j)), (-0.5, &ghsum(&w.lambda[j]))]));
        }
        lines.push(("avg.momentum".into(), avg_momentum));
        let dla: Field = (0..spec.grid.dim)
            .fold(vec![0.0; spec.len()], |acc, j| lin(&[(1.0, &acc), (1.0, &d(&sum2(&[mid.la[0][j].clone(), mid.la[1][j].clone()]), j))]));
        lines.push((
            "avg.energy".into(),
            vec![lin(&[(1.0, &dtf(&lo.c, &hi.c)), (1.0 / 3.0, &div_b), (5.0 / 6.0, &dla), (-1.0 / 12.0, &gsum(&w.energy))])],
        ));
        lines.push(("avg.stress".into(), avg_stress));
        lines.push(("avg.heat_flux".into(), avg_heat));
        let gfield = |l: &Level| [0, 1, 2].map(|j| lin(&[(1.0, &l.vu[0][j]), (-1.0, &l.vu[1][j])]));
        let charge_lo = lin(&[(1.0, &lo.a[0]), (-1.0, &lo.a[1])]);
        let charge_hi = lin(&[(1.0, &hi.a[0]), (-1.0, &hi.a[1])]);
        lines.push(("charge.continuity".into(), vec![lin(&[(1.0, &dtf(&charge_lo, &charge_hi)), (1.0, &spec.divergence(&gfield(mid)))])]));
        lines.push(("charge.current".into(), current));
        for (id, comps) in lines {
            let max_residual = comps.iter().flatten().fold(0.0f64, |m, a| m.max(a.abs()));
            let l2_residual = (comps.iter().flatten().map(|a| a * a).sum::<f64>() * dx).sqrt();
            let e = worst.entry(id.clone()).or_insert(0.0);
            *e = e.max(l2_residual);
            records.push(ResidualRecord { equation_id: id, t, max_residual, l2_residual });
        }
    }
    Ok(ResidualReport { records, worst_l2: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use proptest::prelude::*;

    fn ctx() -> MacroContext {
        MacroContext::new(&VelocityGrid::new(16, 6.0).unwrap())
    }

    fn both(x: &[f64]) -> Vec<f64> {
        [x.to_vec(), x.to_vec()].concat()
    }

    #[test]
    fn gaussian_moments() {
        let c = ctx();
        let w = &c.weights;
        let m = c.point_moments(&both(&w.sqrt_mu));
        // Quadrature and box truncation cost about 1e-8 at this resolution.
        assert!((m.a_plus - 1.0).abs() < 1e-7 && (m.a_minus - 1.0).abs() < 1e-7);
        assert!(m.b.iter().all(|b| b.abs() < 1e-14) && m.c.abs() < 1e-7);
        let m = c.point_moments(&both(&w.v[0]));
        assert!((m.b[0] - 1.0).abs() < 1e-7 && m.b[1].abs() < 1e-14);
        assert!(m.a_plus.abs() < 1e-14 && m.c.abs() < 1e-14);
        let m = c.point_moments(&both(&w.energy));
        assert!((m.c - 1.0).abs() < 1e-6, "{}", m.c);
    }

    #[test]
    fn zero_state_has_zero_residuals() {
        let c = MacroContext::new(&VelocityGrid::new(8, 5.0).unwrap());
        let spec = Spectral::new(&SpatialGrid::new(1, 8, 1.0).unwrap());
        let len = 2 * c.nv() * 8;
        let snaps: Vec<Snapshot> = (0..4).map(|k| Snapshot { t: 0.1 * k as f64, f: vec![0.0; len] }).collect();
        let src = |f: &[f64]| Sources { lf: vec![0.0; f.len()], g: vec![0.0; f.len()] };
        let rep = moment_residuals(&c, &spec, &snaps, &src).unwrap();
        assert!(rep.records.iter().all(|r| r.max_residual == 0.0));
        assert_eq!(rep.worst_l2.len(), 19);
    }

    #[test]
    fn two_snapshots_are_insufficient() {
        let c = MacroContext::new(&VelocityGrid::new(8, 5.0).unwrap());
        let spec = Spectral::new(&SpatialGrid::new(1, 4, 1.0).unwrap());
        let snaps = vec![Snapshot { t: 0.0, f: vec![0.0; 8 * c.nv()] }; 2];
        let src = |f: &[f64]| Sources { lf: vec![0.0; f.len()], g: vec![0.0; f.len()] };
        assert!(matches!(moment_residuals(&c, &spec, &snaps, &src), Err(VplError::Insufficient(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn projection_is_idempotent_and_orthogonal(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let c = MacroContext::new(&VelocityGrid::new(8, 5.0).unwrap());
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f: Vec<f64> = (0..2 * c.nv()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = c.project(&f);
            let pp = c.project(&p);
            let nf = c.grid.dot(&f, &f);
            let err: f64 = p.iter().zip(&pp).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(err < 1e-10 * nf.sqrt() / c.grid.weight().sqrt());
            let perp: Vec<f64> = f.iter().zip(&p).map(|(a, b)| a - b).collect();
            prop_assert!(c.grid.dot(&p, &perp).abs() < 1e-10 * nf);
        }
    }
}
