//! Discrete norms: `L²_v`, `L²_{v,x}`, the anisotropic σ-norm and `Z₁`.

use crate::error::{Result, VplError};
use crate::grid::{japanese, PhaseGrid, VelocityGrid, VelocityWeight};
use crate::kernel::p_v_project;

/// Derivative of a velocity field along `axis`: central differences inside,
/// second-order one-sided differences on the box faces.
pub fn diff_v(grid: &VelocityGrid, g: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.n;
    let stride = match axis {
        0 => n * n,
        1 => n,
        _ => 1,
    };
    let inv = 0.5 / grid.h;
    let mut out = vec![0.0; g.len()];
    for idx in 0..g.len() {
        let t = grid.unindex(idx)[axis];
        out[idx] = if t == 0 {
            (-3.0 * g[idx] + 4.0 * g[idx + stride] - g[idx + 2 * stride]) * inv
        } else if t == n - 1 {
            (3.0 * g[idx] - 4.0 * g[idx - stride] + g[idx - 2 * stride]) * inv
        } else {
            (g[idx + stride] - g[idx - stride]) * inv
        };
    }
    out
}

pub fn gradient_v(grid: &VelocityGrid, g: &[f64]) -> [Vec<f64>; 3] {
    [diff_v(grid, g, 0), diff_v(grid, g, 1), diff_v(grid, g, 2)]
}

pub fn l2_v(grid: &VelocityGrid, g: &[f64]) -> f64 {
    grid.dot(g, g).sqrt()
}

/// `‖f‖_{L²_{v,x}}` of a phase-space field.
pub fn l2_vx(phase: &PhaseGrid, f: &[f64]) -> f64 {
    let s: f64 = f.iter().map(|a| a * a).sum();
    (s * phase.v.weight() * phase.x.cell_volume()).sqrt()
}

/// `‖ ‖f‖_{L¹_x} ‖_{L²_v}`.
pub fn z1(phase: &PhaseGrid, f: &[f64]) -> f64 {
    let nv = phase.v.len();
    let mut l1 = vec![0.0; nv];
    for block in f.chunks(nv) {
        for (acc, a) in l1.iter_mut().zip(block) {
            *acc += a.abs();
        }
    }
    let dx = phase.x.cell_volume();
    for a in l1.iter_mut() {
        *a *= dx;
    }
    l2_v(&phase.v, &l1)
}

/// Per-node weights of the σ-norm: `(w^{2l}⟨v⟩^γ, w^{2l}⟨v⟩^{γ+2})`.
pub fn sigma_weights(grid: &VelocityGrid, l: f64, gamma: f64) -> Result<Vec<(f64, f64)>> {
    let w = VelocityWeight::new(gamma)?;
    let out: Vec<(f64, f64)> = grid
        .coords()
        .iter()
        .map(|&v| {
            let wl = w.pow(v, 2.0 * l);
            let jv = japanese(v);
            (wl * jv.powf(gamma), wl * jv.powf(gamma + 2.0))
        })
        .collect();
    if out.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(VplError::Numerical(format!("sigma-norm weights overflow at the box corners (l = {l}, gamma = {gamma})")));
    }
    Ok(out)
}

/// Square of the σ-norm `|g|_{σ,l}` with precomputed weights.
pub fn sigma_norm_sq_with(grid: &VelocityGrid, g: &[f64], weights: &[(f64, f64)]) -> f64 {
    let d = gradient_v(grid, g);
    let mut acc = 0.0;
    for (idx, &(wpar, wperp)) in weights.iter().enumerate() {
        let v = grid.coord(idx);
        let dg = [d[0][idx], d[1][idx], d[2][idx]];
        let par = p_v_project(dg, v);
        let perp = [dg[0] - par[0], dg[1] - par[1], dg[2] - par[2]];
        let p2 = par[0] * par[0] + par[1] * par[1] + par[2] * par[2];
        let q2 = perp[0] * perp[0] + perp[1] * perp[1] + perp[2] * perp[2];
        acc += wpar * p2 + wperp * (q2 + g[idx] * g[idx]);
    }
    acc * grid.weight()
}

/// `|g|_{σ,l}`: parallel gradient with `⟨v⟩^{γ/2}`, perpendicular gradient and the
/// function itself with `⟨v⟩^{(γ+2)/2}`, all times `w^l`.
pub fn sigma_norm(grid: &VelocityGrid, g: &[f64], l: f64, gamma: f64) -> Result<f64> {
    let w = sigma_weights(grid, l, gamma)?;
    Ok(sigma_norm_sq_with(grid, g, &w).sqrt())
}

/// Handles for all norms on one phase grid at a fixed `γ`.
#[derive(Debug, Clone)]
pub struct NormSuite {
    pub phase: PhaseGrid,
    pub gamma: f64,
}

impl NormSuite {
    pub fn new(phase: PhaseGrid, gamma: f64) -> Self {
        Self { phase, gamma }
    }

    pub fn l2_v(&self, g: &[f64]) -> f64 {
        l2_v(&self.phase.v, g)
    }

    pub fn l2_vx(&self, f: &[f64]) -> f64 {
        l2_vx(&self.phase, f)
    }

    pub fn sigma(&self, g: &[f64], l: f64) -> Result<f64> {
        sigma_norm(&self.phase.v, g, l, self.gamma)
    }

    pub fn z1(&self, f: &[f64]) -> f64 {
        z1(&self.phase, f)
    }
}
