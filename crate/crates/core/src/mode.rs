//! Fourier-mode operators of the homogeneous linearized system.
//!
//! For a spatial frequency `y` the perturbation `f̂(v)` obeys `∂_t f̂ = B(y) f̂`
//! with `B(y) = -i v·y ∓ i (v·y) √μ φ̂ + L` and `φ̂ = |y|^{-2}(√μ, f̂₊ - f̂₋)`.
//! In sum/difference variables only the difference block sees the field,
//! and reflections of the velocity axes orthogonal to `y` split each block
//! into parity sectors.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use ndarray::Array2;
use ndarray_linalg::Inverse;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collision::{Block, CollisionAssembly};
use crate::error::{Result, VplError};
use crate::grid::{VelocityGrid, VelocityWeight};
use crate::symmetry::{OrbitColumns, Sector};

pub type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Time integrators shared by the mode evolution and the full solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Implicit midpoint on the whole linear part.
    ImplicitMidpoint,
    /// Crank-Nicolson on `L`, explicit midpoint on transport and field.
    /// Stable only while `Δt·max|v·y|` stays small against the collisional damping.
    CnImex,
}

impl std::str::FromStr for Scheme {
    type Err = VplError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit-midpoint" => Ok(Self::ImplicitMidpoint),
            "cn-imex" => Ok(Self::CnImex),
            other => Err(VplError::Config(format!("unknown scheme '{other}' (implicit-midpoint | cn-imex)"))),
        }
    }
}

/// One parity sector of one block with its `-L` matrix.
pub struct SectorBlock {
    pub block: Block,
    pub sector: Sector,
    pub neg_l: Array2<f64>,
    /// Restriction of `√μ` (nonzero only in the fully even sector).
    pub sqrt_mu: Vec<f64>,
    /// `v` at the sector representatives.
    pub v: Vec<[f64; 3]>,
}

/// Caches the `-L` sector blocks per reflection mask; shared across frequencies.
pub struct ModeFactory<'a> {
    pub asm: &'a CollisionAssembly,
    cols: [OrbitColumns; 2],
    cache: RefCell<HashMap<u8, Rc<Vec<SectorBlock>>>>,
}

/// Reflections of the velocity axes orthogonal to `y`.
pub fn mask_for(y: [f64; 3]) -> u8 {
    (0..3).filter(|&a| y[a] == 0.0).fold(0u8, |m, a| m | (1 << a))
}

impl<'a> ModeFactory<'a> {
    pub fn new(asm: &'a CollisionAssembly) -> Self {
        Self { asm, cols: [asm.orbit_columns(Block::Sum), asm.orbit_columns(Block::Diff)], cache: RefCell::new(HashMap::new()) }
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.asm.grid
    }

    pub fn sectors(&self, mask: u8) -> Rc<Vec<SectorBlock>> {
        if let Some(s) = self.cache.borrow().get(&mask) {
            return s.clone();
        }
        let grid = &self.asm.grid;
        let mut out = Vec::new();
        for (bi, block) in [Block::Sum, Block::Diff].into_iter().enumerate() {
            for parity in (0..8u8).filter(|p| p & !mask == 0) {
                let sector = Sector::new(grid, mask, parity);
                let neg_l = self.cols[bi].sector(&sector);
                let sqrt_mu = sector.restrict(&self.asm.maxwellian.sqrt_mu);
                let v = sector.reps.iter().map(|&k| grid.coord(k)).collect();
                out.push(SectorBlock { block, sector, neg_l, sqrt_mu, v });
            }
        }
        let rc = Rc::new(out);
        self.cache.borrow_mut().insert(mask, rc.clone());
        rc
    }

    pub fn operator(&self, y: [f64; 3]) -> ModeOperator {
        let mask = mask_for(y);
        ModeOperator { y, grid: self.asm.grid.clone(), sectors: self.sectors(mask) }
    }
}

/// `B(y)` in sector form.
pub struct ModeOperator {
    pub y: [f64; 3],
    pub grid: VelocityGrid,
    pub sectors: Rc<Vec<SectorBlock>>,
}

impl ModeOperator {
    pub fn y_norm2(&self) -> f64 {
        self.y.iter().map(|a| a * a).sum()
    }

    fn vy(&self, s: &SectorBlock) -> Vec<f64> {
        s.v.iter().map(|v| v[0] * self.y[0] + v[1] * self.y[1] + v[2] * self.y[2]).collect()
    }

    /// Whether the field couples into sector `idx`.
    fn has_field(&self, idx: usize) -> bool {
        let s = &self.sectors[idx];
        s.block == Block::Diff && s.sector.parity == 0 && self.y_norm2() > 0.0
    }

    /// Transport and field part of `B(y)` on sector `idx`.
    pub fn transport_matrix(&self, idx: usize) -> Array2<C64> {
        let s = &self.sectors[idx];
        let n = s.sector.len();
        let vy = self.vy(s);
        let mut t = Array2::<C64>::zeros((n, n));
        for r in 0..n {
            t[[r, r]] = -I * vy[r];
        }
        if self.has_field(idx) {
            let c = 2.0 * self.grid.weight() / self.y_norm2();
            for r in 0..n {
                for q in 0..n {
                    t[[r, q]] -= I * (c * vy[r] * s.sqrt_mu[r] * s.sqrt_mu[q]);
                }
            }
        }
        t
    }

    /// `B(y)` on sector `idx`.
    pub fn sector_matrix(&self, idx: usize) -> Array2<C64> {
        let mut b = self.transport_matrix(idx);
        b.zip_mut_with(&self.sectors[idx].neg_l, |x, &m| *x -= m);
        b
    }

    /// The implicit part `A` of a scheme on sector `idx`.
    pub fn implicit_part(&self, idx: usize, scheme: Scheme) -> Array2<C64> {
        match scheme {
            Scheme::ImplicitMidpoint => self.sector_matrix(idx),
            Scheme::CnImex => self.sectors[idx].neg_l.mapv(|m| C64::new(-m, 0.0)),
        }
    }

    /// `(I - Δt/2 A)^{-1}` on sector `idx`.
    pub fn stage_inverse(&self, idx: usize, dt: f64, scheme: Scheme) -> Result<Array2<C64>> {
        let a = self.implicit_part(idx, scheme);
        let n = a.nrows();
        let mut m = a.mapv(|x| -x * (0.5 * dt));
        for r in 0..n {
            m[[r, r]] += 1.0;
        }
        m.inv().map_err(|e| VplError::Linalg(format!("stage matrix: {e}")))
    }

    /// One-step propagator of the scheme on sector `idx` (the linear system only).
    pub fn propagator(&self, idx: usize, dt: f64, scheme: Scheme) -> Result<Array2<C64>> {
        let inv = self.stage_inverse(idx, dt, scheme)?;
        let n = inv.nrows();
        let eye = Array2::<C64>::eye(n);
        Ok(match scheme {
            // 2 (I - Δt/2 B)^{-1} - I
            Scheme::ImplicitMidpoint => inv.mapv(|x| x * 2.0) - eye,
            // I + Δt (L + T) (I - Δt/2 L)^{-1} (I + Δt/2 T)
            Scheme::CnImex => {
                let t = self.transport_matrix(idx);
                let b = self.sector_matrix(idx);
                let pre = &eye + &t.mapv(|x| x * (0.5 * dt));
                eye + b.dot(&inv.dot(&pre)).mapv(|x| x * dt)
            }
        })
    }

    /// Split a full complex two-species field into sector coordinates.
    pub fn to_sectors(&self, u: &[C64]) -> Vec<Vec<C64>> {
        let n = self.grid.len();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s: Vec<C64> = (0..n).map(|i| (u[i] + u[n + i]) * r).collect();
        let d: Vec<C64> = (0..n).map(|i| (u[i] - u[n + i]) * r).collect();
        self.sectors
            .iter()
            .map(|sb| {
                let src = if sb.block == Block::Sum { &s } else { &d };
                let re: Vec<f64> = src.iter().map(|z| z.re).collect();
                let im: Vec<f64> = src.iter().map(|z| z.im).collect();
                sb.sector.restrict(&re).into_iter().zip(sb.sector.restrict(&im)).map(|(a, b)| C64::new(a, b)).collect()
            })
            .collect()
    }

    pub fn from_sectors(&self, x: &[Vec<C64>]) -> Vec<C64> {
        let n = self.grid.len();
        let mut s = vec![C64::new(0.0, 0.0); n];
        let mut d = vec![C64::new(0.0, 0.0); n];
        for (sb, xs) in self.sectors.iter().zip(x) {
            let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
            let im: Vec<f64> = xs.iter().map(|z| z.im).collect();
            let (fr, fi) = (sb.sector.extend(&re), sb.sector.extend(&im));
            let dst = if sb.block == Block::Sum { &mut s } else { &mut d };
            for i in 0..n {
                dst[i] += C64::new(fr[i], fi[i]);
            }
        }
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut out: Vec<C64> = (0..n).map(|i| (s[i] + d[i]) * r).collect();
        out.extend((0..n).map(|i| (s[i] - d[i]) * r));
        out
    }

    /// `B(y) u` for a full two-species field.
    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        let xs = self.to_sectors(u);
        let ys: Vec<Vec<C64>> = xs.iter().enumerate().map(|(i, x)| matvec(&self.sector_matrix(i), x)).collect();
        self.from_sectors(&ys)
    }

    /// `|w^l f̂|²_{L²_v} + |Ê|²` from sector coordinates; `weight2l` is
    /// `w^{2l}` at the representatives of each sector (`None` for `l = 0`).
    pub fn energy(&self, x: &[Vec<C64>], weight2l: Option<&[Vec<f64>]>) -> f64 {
        let h3 = self.grid.weight();
        let mut e = 0.0;
        for (idx, xs) in x.iter().enumerate() {
            e += match weight2l {
                Some(w) => xs.iter().zip(&w[idx]).map(|(z, wi)| wi * z.norm_sqr()).sum::<f64>(),
                None => xs.iter().map(|z| z.norm_sqr()).sum::<f64>(),
            } * h3;
            if self.has_field(idx) {
                let s = &self.sectors[idx].sqrt_mu;
                let proj: C64 = xs.iter().zip(s).map(|(z, a)| z * a).sum();
                e += 2.0 * h3 * h3 * proj.norm_sqr() / self.y_norm2();
            }
        }
        e
    }

    /// `w^{2l}` tabulated per sector.
    pub fn weights(&self, gamma: f64, l: f64) -> Result<Vec<Vec<f64>>> {
        let w = VelocityWeight::new(gamma)?;
        Ok(self.sectors.iter().map(|s| s.v.iter().map(|&v| w.pow(v, 2.0 * l)).collect()).collect())
    }
}

pub fn matvec(a: &Array2<C64>, x: &[C64]) -> Vec<C64> {
    let n = a.nrows();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (r, o) in out.iter_mut().enumerate() {
        let row = a.row(r);
        let mut acc = C64::new(0.0, 0.0);
        for (aij, xj) in row.iter().zip(x) {
            acc += aij * xj;
        }
        *o = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::NullBasis;
    use crate::dense::eigvalsh;

    fn setup(gamma: f64) -> CollisionAssembly {
        CollisionAssembly::new(&VelocityGrid::new(8, 5.0).unwrap(), gamma).unwrap()
    }

    fn complexify(f: &[f64]) -> Vec<C64> {
        f.iter().map(|&a| C64::new(a, 0.0)).collect()
    }

    #[test]
    fn zero_frequency_is_l() {
        let asm = setup(0.0);
        let fac = ModeFactory::new(&asm);
        let op = fac.operator([0.0; 3]);
        let basis = NullBasis::new(&asm.grid, &asm.maxwellian);
        for xi in &basis.analytic {
            let r = op.apply(&complexify(xi));
            let rn: f64 = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let xn: f64 = xi.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(rn < 1e-12 * xn);
        }
        let f: Vec<f64> = (0..2 * asm.n()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let lf = asm.apply_l(&f);
        let bf = op.apply(&complexify(&f));
        for (a, b) in lf.iter().zip(&bf) {
            assert!((a - b.re).abs() < 1e-10 * (1.0 + a.abs()) && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn transport_of_even_field_is_odd() {
        let asm = setup(0.0);
        let fac = ModeFactory::new(&asm);
        let op = fac.operator([1.0, 0.0, 0.0]);
        let grid = &asm.grid;
        let even: Vec<f64> = grid.coords().iter().map(|v| (-(v[0] * v[0] + v[1] * v[1] + 2.0 * v[2] * v[2]) / 4.0).exp()).collect();
        let u = complexify(&[even.clone(), vec![0.0; grid.len()]].concat());
        let bu = op.apply(&u);
        let lu = asm.apply_l(&[even, vec![0.0; grid.len()]].concat());
        // Transport part = B u - L u, purely imaginary and odd in v_1.
        for i in 0..grid.len() {
            let t = bu[i] - lu[i];
            let j = crate::symmetry::flip(grid, i, 1);
            assert!(t.re.abs() < 1e-10);
            assert!((t.im + (bu[j] - lu[j]).im).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_part_is_dissipative_in_energy_norm() {
        let asm = setup(0.0);
        let fac = ModeFactory::new(&asm);
        for y in [0.3, 1.0, 4.0] {
            let op = fac.operator([y, 0.0, 0.0]);
            for idx in 0..op.sectors.len() {
                let b = op.sector_matrix(idx);
                let n = b.nrows();
                // Energy Gram W = h³ (I + field), B dissipative iff W B + B* W ≤ 0.
                let h3 = op.grid.weight();
                let mut w = Array2::<C64>::eye(n).mapv(|z| z * h3);
                if op.has_field(idx) {
                    let s = &op.sectors[idx].sqrt_mu;
                    for r in 0..n {
                        for q in 0..n {
                            w[[r, q]] += C64::new(2.0 * h3 * h3 * s[r] * s[q] / (y * y), 0.0);
                        }
                    }
                }
                let wb = w.dot(&b);
                let herm = &wb + &wb.t().mapv(|z| z.conj());
                // Real symmetric embedding of the Hermitian matrix.
                let big = Array2::from_shape_fn((2 * n, 2 * n), |(i, j)| {
                    let z = herm[[i % n, j % n]];
                    match (i < n, j < n) {
                        (true, true) | (false, false) => z.re,
                        (true, false) => -z.im,
                        (false, true) => z.im,
                    }
                });
                let ev = eigvalsh(&big).unwrap();
                let scale = ev.iter().fold(0.0f64, |m, a| m.max(a.abs()));
                assert!(ev[2 * n - 1] < 1e-10 * scale, "y {y} sector {idx}: {}", ev[2 * n - 1]);
            }
        }
    }

    #[test]
    fn sector_round_trip() {
        let asm = setup(-1.0);
        let fac = ModeFactory::new(&asm);
        let op = fac.operator([0.0, 0.7, 0.0]);
        let u: Vec<C64> = (0..2 * asm.n()).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let back = op.from_sectors(&op.to_sectors(&u));
        for (a, b) in u.iter().zip(&back) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
