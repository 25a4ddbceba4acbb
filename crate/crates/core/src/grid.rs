//! Phase-space grids: a cell-centred velocity box times a periodic spatial torus.
//!
//! Velocity fields are flat `Vec<f64>` of length `n³` in row-major `(i, j, k)`
//! order. Phase-space fields are `n_x_total` consecutive velocity blocks.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VplError};

/// Grid parameters as they appear in a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nv: usize,
    pub vmax: f64,
    pub nx: usize,
    pub lx: f64,
    #[serde(default = "default_dim_x")]
    pub dim_x: usize,
}

fn default_dim_x() -> usize {
    1
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nv: 16, vmax: 6.0, nx: 32, lx: std::f64::consts::PI, dim_x: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct VelocityGrid {
    pub n: usize,
    pub vmax: f64,
    pub h: f64,
    /// Cell centres along one axis.
    pub nodes: Vec<f64>,
    coords: Vec<[f64; 3]>,
}

impl VelocityGrid {
    pub fn new(n: usize, vmax: f64) -> Result<Self> {
        if n < 2 || n % 2 == 1 {
            return Err(VplError::Config(format!("nv = {n} must be even (v -> -v symmetry)")));
        }
        if !(vmax > 0.0) || !vmax.is_finite() {
            return Err(VplError::Config(format!("vmax = {vmax} must be positive")));
        }
        let h = 2.0 * vmax / n as f64;
        let nodes: Vec<f64> = (0..n).map(|i| -vmax + (i as f64 + 0.5) * h).collect();
        let mut coords = Vec::with_capacity(n * n * n);
        for &a in &nodes {
            for &b in &nodes {
                for &c in &nodes {
                    coords.push([a, b, c]);
                }
            }
        }
        Ok(Self { n, vmax, h, nodes, coords })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Quadrature weight of one cell (midpoint rule).
    #[inline]
    pub fn weight(&self) -> f64 {
        self.h * self.h * self.h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    #[inline]
    pub fn coord(&self, idx: usize) -> [f64; 3] {
        self.coords[idx]
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    /// Index of the mirror node `-v`.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        let [i, j, k] = self.unindex(idx);
        let m = self.n - 1;
        self.index(m - i, m - j, m - k)
    }

    /// Midpoint quadrature of a tabulated integrand.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        self.weight() * g.iter().sum::<f64>()
    }

    /// Discrete L² inner product.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weight() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Tabulate a function of velocity.
    pub fn tabulate(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        self.coords.iter().map(|&v| f(v)).collect()
    }
}

/// Periodic grid on `[-lx, lx)^dim` with `n` points per axis.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    pub dim: usize,
    pub n: usize,
    pub lx: f64,
    pub dx: f64,
}

impl SpatialGrid {
    pub fn new(dim: usize, n: usize, lx: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(VplError::Config(format!("dim_x = {dim} must be 1, 2 or 3")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(VplError::Config(format!("nx = {n} must be a power of two")));
        }
        if !(lx > 0.0) || !lx.is_finite() {
            return Err(VplError::Config(format!("lx = {lx} must be positive")));
        }
        Ok(Self { dim, n, lx, dx: 2.0 * lx / n as f64 })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.dim]
    }

    /// Volume element of one spatial cell.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    /// Signed integer frequency of DFT index `j` (Nyquist maps to `-n/2`).
    #[inline]
    pub fn freq_int(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    #[inline]
    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Wavenumber of DFT index `j`; zero at Nyquist, which carries no conjugate partner.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> f64 {
        if self.is_nyquist(j) {
            0.0
        } else {
            self.freq_int(j) as f64 * std::f64::consts::PI / self.lx
        }
    }

    /// Resolved integer frequencies along one axis: 0, ±1, ..., ±(n/2 - 1).
    pub fn frequencies(&self) -> Vec<i64> {
        (0..self.n).filter(|&j| !self.is_nyquist(j)).map(|j| self.freq_int(j)).collect()
    }

    /// Multi-index of a flat spatial index.
    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut r = idx;
        for a in (0..self.dim).rev() {
            out[a] = r % self.n;
            r /= self.n;
        }
        out
    }

    pub fn coord(&self, idx: usize) -> [f64; 3] {
        let m = self.unindex(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = -self.lx + m[a] as f64 * self.dx;
        }
        x
    }
}

#[derive(Debug, Clone)]
pub struct PhaseGrid {
    pub v: VelocityGrid,
    pub x: SpatialGrid,
}

impl PhaseGrid {
    pub fn new(cfg: &GridConfig) -> Result<Self> {
        if cfg.nv < 8 {
            return Err(VplError::Config(format!("nv = {} must be at least 8", cfg.nv)));
        }
        Ok(Self { v: VelocityGrid::new(cfg.nv, cfg.vmax)?, x: SpatialGrid::new(cfg.dim_x, cfg.nx, cfg.lx)? })
    }

    /// Number of degrees of freedom of one species.
    pub fn len(&self) -> usize {
        self.v.len() * self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `μ = (2π)^{-3/2} exp(-|v|²/2)` on the velocity grid.
#[derive(Debug, Clone)]
pub struct Maxwellian {
    pub mu: Vec<f64>,
    pub sqrt_mu: Vec<f64>,
    /// Discrete mass `Σ ω μ`.
    pub mass: f64,
}

impl Maxwellian {
    pub fn new(grid: &VelocityGrid) -> Self {
        let norm = (2.0 * std::f64::consts::PI).powf(-1.5);
        let mu = grid.tabulate(|v| norm * (-0.5 * norm2(v)).exp());
        let sqrt_mu = mu.iter().map(|m| m.sqrt()).collect();
        let mass = grid.integrate(&mu);
        Self { mu, sqrt_mu, mass }
    }

    pub fn value_at(v: [f64; 3]) -> f64 {
        (2.0 * std::f64::consts::PI).powf(-1.5) * (-0.5 * norm2(v)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Hard,
    Soft,
}

/// The velocity weight `w`: `⟨v⟩` for hard potentials, `⟨v⟩^{-γ}` for soft ones.
#[derive(Debug, Clone, Copy)]
pub struct VelocityWeight {
    pub gamma: f64,
    pub branch: Branch,
}

impl VelocityWeight {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(-3.0..=1.0).contains(&gamma) {
            return Err(VplError::Config(format!("gamma = {gamma} outside [-3, 1]")));
        }
        let branch = if gamma + 2.0 >= 0.0 { Branch::Hard } else { Branch::Soft };
        Ok(Self { gamma, branch })
    }

    #[inline]
    pub fn w(&self, v: [f64; 3]) -> f64 {
        match self.branch {
            Branch::Hard => japanese(v),
            Branch::Soft => japanese(v).powf(-self.gamma),
        }
    }

    /// `w(v)^l`.
    #[inline]
    pub fn pow(&self, v: [f64; 3], l: f64) -> f64 {
        if l == 0.0 {
            1.0
        } else {
            self.w(v).powf(l)
        }
    }

    pub fn tabulate(&self, grid: &VelocityGrid, l: f64) -> Vec<f64> {
        grid.tabulate(|v| self.pow(v, l))
    }
}

#[inline]
pub fn norm2(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// `⟨v⟩ = (1 + |v|²)^{1/2}`.
#[inline]
pub fn japanese(v: [f64; 3]) -> f64 {
    (1.0 + norm2(v)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_box_volume() {
        let g = VelocityGrid::new(16, 6.0).unwrap();
        let total = g.weight() * g.len() as f64;
        assert!((total - 1728.0).abs() < 1e-9);
    }

    #[test]
    fn grid_echo_and_frequencies() {
        let p = PhaseGrid::new(&GridConfig { nv: 16, vmax: 6.0, nx: 32, lx: std::f64::consts::PI, dim_x: 1 }).unwrap();
        assert_eq!(p.v.len(), 4096);
        assert_eq!(p.x.len(), 32);
        let f = p.x.frequencies();
        assert_eq!(f.len(), 31);
        assert!(f.contains(&0));
        for k in 1..=15 {
            assert!(f.contains(&k) && f.contains(&-k));
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(VelocityGrid::new(15, 6.0).is_err());
        assert!(VelocityGrid::new(16, 0.0).is_err());
        assert!(VelocityGrid::new(16, -1.0).is_err());
        assert!(SpatialGrid::new(1, 12, 1.0).is_err());
        let cfg = GridConfig { nv: 6, ..GridConfig::default() };
        assert!(PhaseGrid::new(&cfg).is_err());
    }

    #[test]
    fn grid_is_symmetric() {
        let g = VelocityGrid::new(8, 3.0).unwrap();
        for idx in 0..g.len() {
            let v = g.coord(idx);
            let w = g.coord(g.mirror(idx));
            for a in 0..3 {
                assert_eq!(v[a], -w[a]);
            }
        }
    }

    #[test]
    fn maxwellian_mass_against_one_dimensional_oracle() {
        let g = VelocityGrid::new(24, 6.0).unwrap();
        let m = Maxwellian::new(&g);
        // 1D midpoint Gaussian sum, cubed.
        let s1: f64 = g.nodes.iter().map(|&x| (-0.5 * x * x).exp()).sum::<f64>() * g.h
            / (2.0 * std::f64::consts::PI).sqrt();
        assert!((m.mass - s1.powi(3)).abs() < 1e-13);
        assert!((m.mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn maxwellian_origin_and_evenness() {
        assert!((Maxwellian::value_at([0.0; 3]) - 0.063_493_635_934_240_97).abs() < 1e-15);
        let g = VelocityGrid::new(10, 5.0).unwrap();
        let m = Maxwellian::new(&g);
        for idx in 0..g.len() {
            assert_eq!(m.mu[idx], m.mu[g.mirror(idx)]);
            assert!(m.mu[idx] > 0.0);
        }
    }

    #[test]
    fn weight_branches() {
        let hard = VelocityWeight::new(0.0).unwrap();
        let soft = VelocityWeight::new(-2.5).unwrap();
        assert_eq!(hard.branch, Branch::Hard);
        assert_eq!(soft.branch, Branch::Soft);
        let v = [1.0, 2.0, 2.0];
        assert!((hard.w(v) - 10f64.sqrt()).abs() < 1e-14);
        assert!((soft.w(v) - 10f64.powf(1.25)).abs() < 1e-12);
        assert!(VelocityWeight::new(-3.5).is_err());
    }

    #[test]
    fn odd_integrands_vanish() {
        let g = VelocityGrid::new(16, 6.0).unwrap();
        let m = Maxwellian::new(&g);
        let odd: Vec<f64> = g.coords().iter().zip(&m.mu).map(|(v, mu)| v[0] * v[1] * v[1] * mu).collect();
        assert!(g.integrate(&odd).abs() < 1e-16);
    }
}
