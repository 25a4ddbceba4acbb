//! Initial data on the phase grid. Noise is drawn from ChaCha keyed by the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VplError};
use crate::grid::{norm2, Maxwellian, PhaseGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Macroscopic,
    Noise,
    File,
}

impl std::str::FromStr for InitialKind {
    type Err = VplError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macroscopic" => Ok(Self::Macroscopic),
            "noise" => Ok(Self::Noise),
            "file" => Ok(Self::File),
            other => Err(VplError::Config(format!("unknown initial_data '{other}' (macroscopic | noise | file)"))),
        }
    }
}

fn index(phase: &PhaseGrid, ix: usize, s: usize, iv: usize) -> usize {
    (ix * 2 + s) * phase.v.len() + iv
}

/// Smooth macroscopic profile: opposite charge waves, a compressive flow, a
/// temperature wave, plus off-diagonal stress and heat-flux content so that
/// every moment line carries signal.
pub fn macroscopic(phase: &PhaseGrid, amplitude: f64) -> Vec<f64> {
    let m = Maxwellian::new(&phase.v);
    let mut f = vec![0.0; 2 * phase.len()];
    for ix in 0..phase.x.len() {
        let x = phase.x.coord(ix);
        let wave = x[0].cos() + if phase.x.dim > 1 { 0.5 * x[1].sin() } else { 0.0 };
        for (iv, &v) in phase.v.coords().iter().enumerate() {
            let e = norm2(v);
            let base = 0.3 * (2.0 * x[0]).sin() * v[0] + 0.2 * x[0].sin() * (e - 3.0);
            f[index(phase, ix, 0, iv)] = amplitude * m.sqrt_mu[iv] * (wave + base + 0.1 * v[0] * v[1]);
            f[index(phase, ix, 1, iv)] = amplitude * m.sqrt_mu[iv] * (-0.5 * wave + base + 0.05 * v[2] * e);
        }
    }
    f
}

/// `amplitude · noise(v) · √μ`, rough in `v` after `passes` three-point
/// averages per axis, on the lowest spatial modes, with zero net charge.
pub fn noise(phase: &PhaseGrid, amplitude: f64, seed: u64, passes: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = &phase.v;
    let n = grid.len();
    let m = Maxwellian::new(grid);
    let mut draw = || -> Vec<f64> {
        let mut g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..passes {
            for axis in 0..3 {
                g = smooth(grid, &g, axis);
            }
        }
        g
    };
    // Two species times (constant, cos, sin) of the first mode along axis 0.
    let profiles: Vec<[Vec<f64>; 3]> = (0..2).map(|_| [draw(), draw(), draw()]).collect();
    let mut f = vec![0.0; 2 * phase.len()];
    for ix in 0..phase.x.len() {
        let x = phase.x.coord(ix)[0];
        let (c, s) = (x.cos(), x.sin());
        for (sp, p) in profiles.iter().enumerate() {
            for iv in 0..n {
                f[index(phase, ix, sp, iv)] = amplitude * m.sqrt_mu[iv] * (p[0][iv] + c * p[1][iv] + s * p[2][iv]);
            }
        }
    }
    neutralize(phase, &m, &mut f);
    f
}

/// Shift `±q/2 · √μ / |√μ|²` between the species so that the spatial mean
/// of `a₊ - a₋` vanishes.
fn neutralize(phase: &PhaseGrid, m: &Maxwellian, f: &mut [f64]) {
    let n = phase.v.len();
    let nx = phase.x.len();
    let mut q = 0.0;
    for ix in 0..nx {
        q += phase.v.dot(&m.sqrt_mu, &f[index(phase, ix, 0, 0)..index(phase, ix, 0, 0) + n])
            - phase.v.dot(&m.sqrt_mu, &f[index(phase, ix, 1, 0)..index(phase, ix, 1, 0) + n]);
    }
    q /= nx as f64;
    let norm = phase.v.dot(&m.sqrt_mu, &m.sqrt_mu);
    for ix in 0..nx {
        for iv in 0..n {
            let d = 0.5 * q * m.sqrt_mu[iv] / norm;
            f[index(phase, ix, 0, iv)] -= d;
            f[index(phase, ix, 1, iv)] += d;
        }
    }
}

fn smooth(grid: &crate::grid::VelocityGrid, g: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.n;
    let stride = match axis {
        0 => n * n,
        1 => n,
        _ => 1,
    };
    (0..g.len())
        .map(|idx| {
            let t = grid.unindex(idx)[axis];
            let lo = if t > 0 { g[idx - stride] } else { g[idx] };
            let hi = if t + 1 < n { g[idx + stride] } else { g[idx] };
            0.25 * lo + 0.5 * g[idx] + 0.25 * hi
        })
        .collect()
}

/// `cos(k·x) g(v)` on both species with `g` given per species.
pub fn single_mode(phase: &PhaseGrid, k_index: [usize; 3], g: [&[f64]; 2]) -> Result<Vec<f64>> {
    let n = phase.v.len();
    if g[0].len() != n || g[1].len() != n {
        return Err(VplError::Config("mode profile does not match the velocity grid".into()));
    }
    let mut f = vec![0.0; 2 * phase.len()];
    for ix in 0..phase.x.len() {
        let x = phase.x.coord(ix);
        let phase_arg: f64 = (0..phase.x.dim).map(|a| phase.x.wavenumber(k_index[a]) * x[a]).sum();
        let c = phase_arg.cos();
        for s in 0..2 {
            for iv in 0..n {
                f[index(phase, ix, s, iv)] = c * g[s][iv];
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use crate::macroscopic::MacroContext;

    #[test]
    fn noise_is_reproducible_and_neutral() {
        let phase = PhaseGrid::new(&GridConfig { nv: 8, vmax: 5.0, nx: 8, lx: 3.0, dim_x: 1 }).unwrap();
        let a = noise(&phase, 1e-3, 7, 1);
        let b = noise(&phase, 1e-3, 7, 1);
        let c = noise(&phase, 1e-3, 8, 1);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let ctx = MacroContext::new(&phase.v);
        let charge = ctx.macro_state(&a).charge();
        let scale = charge.iter().map(|q| q.abs()).fold(0.0, f64::max);
        let q: f64 = charge.iter().sum();
        assert!(q.abs() < 1e-13 * scale, "{q} vs {scale}");
    }
}
