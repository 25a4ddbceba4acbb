//! The Landau kernel `Φ(z) = |z|^{γ+2}(I - z⊗z/|z|²)`, the projection `P_v`
//! and the diffusion coefficients `σ = Φ ⋆ μ`.

use crate::error::{Result, VplError};
use crate::fft::{sym, MatrixConvolver};
use crate::grid::{norm2, Maxwellian, VelocityGrid};

#[derive(Debug, Clone, Copy)]
pub struct KernelTable {
    pub gamma: f64,
    /// Lattice spacing of the difference grid.
    pub h: f64,
    /// Floor on `|z|` in the power factor; the self-cell `z = 0` is excluded.
    pub eps_reg: f64,
}

impl KernelTable {
    pub fn new(gamma: f64, h: f64) -> Self {
        Self { gamma, h, eps_reg: 0.5 * 3f64.sqrt() * h }
    }

    /// `Φ(z)` in symmetric storage; zero at `z = 0`.
    #[inline]
    pub fn eval(&self, z: [f64; 3]) -> [f64; 6] {
        let r2 = norm2(z);
        if r2 == 0.0 {
            return [0.0; 6];
        }
        let r = r2.sqrt().max(self.eps_reg);
        let s = r.powf(self.gamma + 2.0);
        let inv = 1.0 / r2;
        [
            s * (1.0 - z[0] * z[0] * inv),
            -s * z[0] * z[1] * inv,
            -s * z[0] * z[2] * inv,
            s * (1.0 - z[1] * z[1] * inv),
            -s * z[1] * z[2] * inv,
            s * (1.0 - z[2] * z[2] * inv),
        ]
    }

    /// `Φ` at an integer lattice offset.
    #[inline]
    pub fn at_offset(&self, d: [i64; 3]) -> [f64; 6] {
        self.eval([d[0] as f64 * self.h, d[1] as f64 * self.h, d[2] as f64 * self.h])
    }
}

/// Component of `h` along `v`; zero at `v = 0`.
pub fn p_v_project(h: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    let r2 = norm2(v);
    if r2 == 0.0 {
        return [0.0; 3];
    }
    let s = (h[0] * v[0] + h[1] * v[1] + h[2] * v[2]) / r2;
    [s * v[0], s * v[1], s * v[2]]
}

#[inline]
pub fn sym_matvec(s: &[f64; 6], x: [f64; 3]) -> [f64; 3] {
    [
        s[0] * x[0] + s[1] * x[1] + s[2] * x[2],
        s[1] * x[0] + s[3] * x[1] + s[4] * x[2],
        s[2] * x[0] + s[4] * x[1] + s[5] * x[2],
    ]
}

/// Eigenvalues of a symmetric 3×3 matrix, ascending.
pub fn sym3_eigenvalues(s: &[f64; 6]) -> [f64; 3] {
    let (a, b, c, d, e, f) = (s[0], s[1], s[2], s[3], s[4], s[5]);
    let p1 = b * b + c * c + e * e;
    let q = (a + d + f) / 3.0;
    if p1 <= 1e-300 {
        let mut v = [a, d, f];
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        return v;
    }
    let p2 = (a - q).powi(2) + (d - q).powi(2) + (f - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let (ba, bd, bf) = ((a - q) / p, (d - q) / p, (f - q) / p);
    let (bb, bc, be) = (b / p, c / p, e / p);
    let det = ba * (bd * bf - be * be) - bb * (bb * bf - be * bc) + bc * (bb * be - bd * bc);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e3, e2, e1]
}

/// `σ^{ij}` tabulated on a set of nodes, symmetric storage per node.
#[derive(Debug, Clone)]
pub struct SigmaTable {
    pub gamma: f64,
    pub values: Vec<[f64; 6]>,
}

impl SigmaTable {
    /// Reject tables that are not positive semidefinite at some node.
    pub fn check_psd(&self) -> Result<()> {
        for (idx, s) in self.values.iter().enumerate() {
            let ev = sym3_eigenvalues(s);
            let scale = ev[2].abs().max(1e-300);
            if ev[0] < -1e-10 * scale {
                return Err(VplError::Numerical(format!(
                    "sigma not positive semidefinite at node {idx} (eigenvalue {:.3e}); eps_reg too small",
                    ev[0]
                )));
            }
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|s| s.iter().copied()).collect()
    }

    pub fn from_flat(gamma: f64, flat: &[f64]) -> Result<Self> {
        if flat.len() % 6 != 0 {
            return Err(VplError::Config("sigma table length not a multiple of 6".into()));
        }
        let values = flat.chunks(6).map(|c| [c[0], c[1], c[2], c[3], c[4], c[5]]).collect();
        Ok(Self { gamma, values })
    }
}

/// `σ(v) = Σ ω Φ(v - v*) μ(v*)` at an arbitrary point by direct summation.
pub fn sigma_at(kernel: &KernelTable, grid: &VelocityGrid, mu: &[f64], v: [f64; 3]) -> [f64; 6] {
    let w = grid.weight();
    let mut acc = [0.0; 6];
    for (u, &m) in grid.coords().iter().zip(mu) {
        let k = kernel.eval([v[0] - u[0], v[1] - u[1], v[2] - u[2]]);
        for s in 0..6 {
            acc[s] += w * k[s] * m;
        }
    }
    acc
}

/// Cubic lattice of `m³` points with spacing `h` starting at `origin` on each axis.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    pub m: usize,
    pub h: f64,
    pub origin: f64,
}

impl Lattice {
    pub fn cell_centres(grid: &VelocityGrid) -> Self {
        Self { m: grid.n, h: grid.h, origin: grid.nodes[0] }
    }

    /// Interior vertices of the velocity cells.
    pub fn corners(grid: &VelocityGrid) -> Self {
        Self { m: grid.n - 1, h: grid.h, origin: -grid.vmax + grid.h }
    }

    pub fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.m;
        let (i, j, k) = (idx / (m * m), (idx / m) % m, idx % m);
        [
            self.origin + i as f64 * self.h,
            self.origin + j as f64 * self.h,
            self.origin + k as f64 * self.h,
        ]
    }

    pub fn maxwellian(&self) -> Vec<f64> {
        (0..self.len()).map(|i| Maxwellian::value_at(self.point(i))).collect()
    }
}

/// `σ` on a lattice from the lattice's own Maxwellian samples, by FFT convolution.
pub fn assemble_sigma_fft(kernel: &KernelTable, lat: &Lattice) -> SigmaTable {
    let conv = MatrixConvolver::new(lat.m, |d| kernel.at_offset(d));
    let w = lat.h.powi(3);
    let mu: Vec<f64> = lat.maxwellian().iter().map(|m| m * w).collect();
    let comps = conv.apply_scalar(&mu);
    let values = (0..lat.len()).map(|i| std::array::from_fn(|s| comps[s][i])).collect();
    SigmaTable { gamma: kernel.gamma, values }
}

/// Same as [`assemble_sigma_fft`] by direct summation; `O(m⁶)`.
pub fn assemble_sigma_direct(kernel: &KernelTable, lat: &Lattice) -> SigmaTable {
    let w = lat.h.powi(3);
    let mu = lat.maxwellian();
    let m = lat.m as i64;
    let values = (0..lat.len())
        .map(|i| {
            let a = [i as i64 / (m * m), (i as i64 / m) % m, i as i64 % m];
            let mut acc = [0.0; 6];
            for (j, &mj) in mu.iter().enumerate() {
                let b = [j as i64 / (m * m), (j as i64 / m) % m, j as i64 % m];
                let k = kernel.at_offset([a[0] - b[0], a[1] - b[1], a[2] - b[2]]);
                for s in 0..6 {
                    acc[s] += w * k[s] * mj;
                }
            }
            acc
        })
        .collect();
    SigmaTable { gamma: kernel.gamma, values }
}

/// `σ` at the cell centres of the velocity grid, checked for semidefiniteness.
pub fn assemble_sigma(grid: &VelocityGrid, gamma: f64) -> Result<SigmaTable> {
    let kernel = KernelTable::new(gamma, grid.h);
    let table = assemble_sigma_fft(&kernel, &Lattice::cell_centres(grid));
    table.check_psd()?;
    Ok(table)
}

/// Full symmetric matrix from symmetric storage.
pub fn sym_full(s: &[f64; 6]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = s[sym(i, j)];
        }
    }
    out
}
