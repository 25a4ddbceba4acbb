//! Reduced-dimension pseudo-differential calculus: tabulated symbols,
//! quantization on a periodic velocity box, first-order composition and the
//! bracket decomposition `{θ, v·y} = b̃ + R₁ + R₂`.
//!
//! Conventions: `op_t a u(v) = ∫∫ e^{2πi(v-v')·η} a((1-t)v + tv', η) u(v') dv' dη`,
//! `{a,b} = ∂_η a·∂_v b - ∂_v a·∂_η b`.
//!
//! Quantized operators live on `n` nodes per axis, `v_j = -V + j h`, `h = 2V/n`,
//! with the DFT frequencies `η_k = (k - n/2)/(2V)`. The box is periodic, so the
//! Weyl midpoint of `(v_j, v_j')` is taken along the shorter arc. Midpoints fall
//! on the periodic half-step lattice: quantizable tables carry `2n` velocity
//! samples per axis and node `j` sits at table index `2j`.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, VplError};
use crate::mode::C64;

pub const DENSE_CAP_1D: usize = 64;
pub const DENSE_CAP_2D_AXIS: usize = 32;
const POWER_MAX_STEPS: usize = 1000;
const POWER_TOL: f64 = 1e-12;
const POWER_BLOCK: usize = 4;
const POWER_SQUARINGS: usize = 4;

/// Uniform axis `start + i·step`, `i < n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub n: usize,
}

impl Axis {
    pub fn at(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    /// `n` points covering `[-r, r]`.
    pub fn symmetric(r: f64, n: usize) -> Self {
        Self { start: -r, step: 2.0 * r / (n - 1) as f64, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolGrid {
    pub dim: usize,
    pub v: Axis,
    pub eta: Axis,
    /// Node count per axis when the grid supports quantization.
    pub dft_nodes: Option<usize>,
}

impl SymbolGrid {
    /// Quantizable grid on the box `[-vmax, vmax)^dim` with `n` nodes per axis.
    pub fn dft(dim: usize, n: usize, vmax: f64) -> Result<Self> {
        check_dim(dim)?;
        if n < 4 || n % 2 != 0 {
            return Err(VplError::Config(format!("dense quantization needs an even node count >= 4, got {n}")));
        }
        if !(vmax > 0.0) {
            return Err(VplError::Config("vmax must be positive".into()));
        }
        let h = 2.0 * vmax / n as f64;
        Ok(Self {
            dim,
            v: Axis { start: -vmax, step: 0.5 * h, n: 2 * n },
            eta: Axis { start: -(n as f64 / 2.0) / (2.0 * vmax), step: 1.0 / (2.0 * vmax), n },
            dft_nodes: Some(n),
        })
    }

    /// Plain tabulation grid; not quantizable.
    pub fn uniform(dim: usize, v: Axis, eta: Axis) -> Result<Self> {
        check_dim(dim)?;
        if v.n < 3 || eta.n < 3 {
            return Err(VplError::Config("symbol grids need at least 3 points per axis".into()));
        }
        Ok(Self { dim, v, eta, dft_nodes: None })
    }

    pub fn v_points(&self) -> usize {
        self.v.n.pow(self.dim as u32)
    }

    pub fn eta_points(&self) -> usize {
        self.eta.n.pow(self.dim as u32)
    }

    fn point(axis: &Axis, dim: usize, flat: usize) -> [f64; 2] {
        match dim {
            1 => [axis.at(flat), 0.0],
            _ => [axis.at(flat / axis.n), axis.at(flat % axis.n)],
        }
    }

    pub fn v_point(&self, flat: usize) -> [f64; 2] {
        Self::point(&self.v, self.dim, flat)
    }

    pub fn eta_point(&self, flat: usize) -> [f64; 2] {
        Self::point(&self.eta, self.dim, flat)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(VplError::Config(format!("weyl calculus runs in dimension 1 or 2, got {dim}")))
    }
}

/// Parameters of the cutoff construction. `l0` here is the symbol exponent
/// `γ δ₂`, unrelated to the run-level weight exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymbolParams {
    pub gamma: f64,
    pub k0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub l0: f64,
}

impl SymbolParams {
    pub fn new(gamma: f64, k0: f64, delta1: f64) -> Result<Self> {
        if !(delta1 > 0.0 && delta1 <= 0.5) {
            return Err(VplError::Config(format!("delta1 must lie in (0, 1/2], got {delta1}")));
        }
        if !gamma.is_finite() || !(k0 > 0.0) {
            return Err(VplError::Config("gamma must be finite and K0 positive".into()));
        }
        let delta2 = 1.0 - delta1;
        Ok(Self { gamma, k0, delta1, delta2, l0: gamma * delta2 })
    }
}

fn bracket_of(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|a| a * a).sum::<f64>()).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quintic smoothstep cutoff: 1 on `|z| < 1/2`, 0 on `|z| ≥ 1`, C².
pub fn chi0(z: f64) -> f64 {
    let z = z.abs();
    if z < 0.5 {
        1.0
    } else if z >= 1.0 {
        0.0
    } else {
        let s = 2.0 * z - 1.0;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

pub fn chi0_prime(z: f64) -> f64 {
    let a = z.abs();
    if !(0.5..1.0).contains(&a) {
        return 0.0;
    }
    let s = 2.0 * a - 1.0;
    -60.0 * s * s * (1.0 - s) * (1.0 - s) * z.signum()
}

/// Pointwise symbols in reduced dimension; `v`, `eta`, `y` have equal length.
pub mod pointwise {
    use super::*;

    pub fn a_tilde(p: &SymbolParams, v: &[f64], eta: &[f64]) -> f64 {
        let bv = bracket_of(v);
        bv.powf(p.gamma) * (1.0 + dot(eta, eta) + dot(v, v)) + p.k0 * bv.powf(p.gamma + 2.0)
    }

    pub fn b_tilde(p: &SymbolParams, v: &[f64], y: &[f64]) -> f64 {
        bracket_of(v).powf(p.l0) * dot(y, y).sqrt().powf(p.delta1)
    }

    fn z(p: &SymbolParams, v: &[f64], eta: &[f64], y: &[f64]) -> f64 {
        bracket_of(eta) * bracket_of(v).powf(p.l0) / dot(y, y).sqrt().powf(p.delta2)
    }

    pub fn chi(p: &SymbolParams, v: &[f64], eta: &[f64], y: &[f64]) -> f64 {
        chi0(z(p, v, eta, y))
    }

    /// `∂_η χ`, one entry per axis.
    pub fn chi_grad_eta(p: &SymbolParams, v: &[f64], eta: &[f64], y: &[f64]) -> Vec<f64> {
        let scale = bracket_of(v).powf(p.l0) / dot(y, y).sqrt().powf(p.delta2);
        let d = chi0_prime(z(p, v, eta, y)) * scale / bracket_of(eta);
        eta.iter().map(|e| d * e).collect()
    }

    pub fn theta(p: &SymbolParams, v: &[f64], eta: &[f64], y: &[f64]) -> f64 {
        let ny = dot(y, y).sqrt();
        bracket_of(v).powf(p.l0) * ny.powf(-1.0 - p.delta2) * dot(y, eta) * chi(p, v, eta, y)
    }

    pub fn r1(p: &SymbolParams, v: &[f64], eta: &[f64], y: &[f64]) -> f64 {
        let ny = dot(y, y).sqrt();
        bracket_of(v).powf(p.l0) * ny.powf(1.0 - p.delta2) * (chi(p, v, eta, y) - 1.0)
    }

    pub fn r2(p: &SymbolParams, v: &[f64], eta: &[f64], y: &[f64]) -> f64 {
        let ny = dot(y, y).sqrt();
        let g = chi_grad_eta(p, v, eta, y);
        bracket_of(v).powf(p.l0) * ny.powf(-1.0 - p.delta2) * dot(y, eta) * dot(&g, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymbolKind {
    ATilde,
    BTilde,
    Chi,
    Theta,
    Custom,
}

impl std::str::FromStr for SymbolKind {
    type Err = VplError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a_tilde" => Ok(Self::ATilde),
            "b_tilde" => Ok(Self::BTilde),
            "chi" => Ok(Self::Chi),
            "theta" => Ok(Self::Theta),
            "custom" => Ok(Self::Custom),
            other => Err(VplError::Config(format!("unknown symbol kind '{other}'"))),
        }
    }
}

/// Weight class tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeightClass {
    /// Bounded with bounded derivatives.
    S1,
    /// Dominated by `ã`.
    ATilde,
    Unclassified,
}

#[derive(Debug, Clone)]
pub struct SymbolTable {
    pub grid: SymbolGrid,
    pub kind: SymbolKind,
    pub class: WeightClass,
    pub params: SymbolParams,
    pub y: Option<Vec<f64>>,
    /// Row-major: velocity sample outer, frequency inner.
    pub values: Vec<C64>,
    pub sup: f64,
}

impl SymbolTable {
    pub fn from_fn(
        grid: &SymbolGrid,
        params: SymbolParams,
        class: WeightClass,
        y: Option<Vec<f64>>,
        f: impl Fn(&[f64], &[f64]) -> C64,
    ) -> Result<Self> {
        let d = grid.dim;
        let ne = grid.eta_points();
        let mut values = Vec::with_capacity(grid.v_points() * ne);
        for iv in 0..grid.v_points() {
            let v = grid.v_point(iv);
            for ie in 0..ne {
                values.push(f(&v[..d], &grid.eta_point(ie)[..d]));
            }
        }
        Self::assemble(grid.clone(), SymbolKind::Custom, class, params, y, values)
    }

    fn assemble(
        grid: SymbolGrid,
        kind: SymbolKind,
        class: WeightClass,
        params: SymbolParams,
        y: Option<Vec<f64>>,
        values: Vec<C64>,
    ) -> Result<Self> {
        if let Some(bad) = values.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(VplError::Numerical(format!("non-finite symbol value at table index {bad}")));
        }
        let sup = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok(Self { grid, kind, class, params, y, values, sup })
    }

    pub fn at(&self, iv: usize, ie: usize) -> C64 {
        self.values[iv * self.grid.eta_points() + ie]
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|z| z.im == 0.0)
    }

    /// CSV rows `v_1[,v_2],eta_1[,eta_2],re,im`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let d = self.grid.dim;
        let head: Vec<String> = (1..=d)
            .map(|a| format!("v{a}"))
            .chain((1..=d).map(|a| format!("eta{a}")))
            .chain(["re".to_string(), "im".to_string()])
            .collect();
        writeln!(w, "{}", head.join(","))?;
        for iv in 0..self.grid.v_points() {
            let v = self.grid.v_point(iv);
            for ie in 0..self.grid.eta_points() {
                let e = self.grid.eta_point(ie);
                let z = self.at(iv, ie);
                let cols: Vec<String> = v[..d].iter().chain(&e[..d]).chain(&[z.re, z.im]).map(|x| format!("{x:e}")).collect();
                writeln!(w, "{}", cols.join(","))?;
            }
        }
        Ok(())
    }
}

fn need_y(kind: SymbolKind, dim: usize, y: Option<&[f64]>) -> Result<Vec<f64>> {
    let y = y.ok_or_else(|| VplError::Config(format!("symbol {kind:?} needs the frequency parameter y")))?;
    if y.len() != dim {
        return Err(VplError::Config(format!("y has {} components, grid dimension is {dim}", y.len())));
    }
    if dot(y, y) == 0.0 {
        return Err(VplError::Config("y must be nonzero".into()));
    }
    Ok(y.to_vec())
}

pub fn make_symbol(kind: SymbolKind, grid: &SymbolGrid, params: SymbolParams, y: Option<&[f64]>) -> Result<SymbolTable> {
    use pointwise::*;
    let p = params;
    let (class, yv, f): (WeightClass, Option<Vec<f64>>, Box<dyn Fn(&[f64], &[f64], &[f64]) -> f64>) = match kind {
        SymbolKind::ATilde => (WeightClass::ATilde, None, Box::new(move |v, e, _| a_tilde(&p, v, e))),
        SymbolKind::BTilde => {
            (WeightClass::Unclassified, Some(need_y(kind, grid.dim, y)?), Box::new(move |v, _, y| b_tilde(&p, v, y)))
        }
        SymbolKind::Chi => (WeightClass::S1, Some(need_y(kind, grid.dim, y)?), Box::new(move |v, e, y| chi(&p, v, e, y))),
        SymbolKind::Theta => {
            (WeightClass::S1, Some(need_y(kind, grid.dim, y)?), Box::new(move |v, e, y| theta(&p, v, e, y)))
        }
        SymbolKind::Custom => {
            return Err(VplError::Config("custom symbols are built with SymbolTable::from_fn".into()));
        }
    };
    let yy = yv.clone().unwrap_or_default();
    let mut table = SymbolTable::from_fn(grid, params, class, yv, |v, e| C64::new(f(v, e, &yy), 0.0))?;
    table.kind = kind;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    V,
    Eta,
}

/// Second-order difference along one axis; one-sided three-point stencils at
/// the ends.
fn diff(t: &SymbolTable, dir: Dir, axis: usize) -> Vec<C64> {
    let g = &t.grid;
    let ne = g.eta_points();
    let (ax, outer_stride) = match dir {
        Dir::V => (g.v, ne),
        Dir::Eta => (g.eta, 1),
    };
    let n = ax.n;
    let stride = outer_stride * if g.dim == 2 && axis == 0 { n } else { 1 };
    let inv = 1.0 / (2.0 * ax.step);
    let f = &t.values;
    (0..f.len())
        .map(|idx| {
            let inner = match dir {
                Dir::V => idx / ne,
                Dir::Eta => idx % ne,
            };
            let pos = if g.dim == 2 && axis == 0 { inner / n } else { inner % n };
            if pos == 0 {
                (-3.0 * f[idx] + 4.0 * f[idx + stride] - f[idx + 2 * stride]) * inv
            } else if pos == n - 1 {
                (3.0 * f[idx] - 4.0 * f[idx - stride] + f[idx - 2 * stride]) * inv
            } else {
                (f[idx + stride] - f[idx - stride]) * inv
            }
        })
        .collect()
}

fn same_grid(a: &SymbolTable, b: &SymbolTable) -> Result<()> {
    if a.grid != b.grid {
        return Err(VplError::Config("symbols live on different grids".into()));
    }
    Ok(())
}

/// Finite-difference Poisson bracket; antisymmetric in floating point.
pub fn poisson_bracket(a: &SymbolTable, b: &SymbolTable) -> Result<SymbolTable> {
    same_grid(a, b)?;
    let mut out = vec![C64::new(0.0, 0.0); a.values.len()];
    for axis in 0..a.grid.dim {
        let (ea, va) = (diff(a, Dir::Eta, axis), diff(a, Dir::V, axis));
        let (eb, vb) = (diff(b, Dir::Eta, axis), diff(b, Dir::V, axis));
        for i in 0..out.len() {
            out[i] += ea[i] * vb[i] - va[i] * eb[i];
        }
    }
    SymbolTable::assemble(a.grid.clone(), SymbolKind::Custom, WeightClass::Unclassified, a.params, a.y.clone(), out)
}

/// `a #₁ b = ab + {a,b}/(4πi)`.
pub fn compose_first_order(a: &SymbolTable, b: &SymbolTable) -> Result<SymbolTable> {
    let br = poisson_bracket(a, b)?;
    let c = C64::new(0.0, -1.0 / (4.0 * PI));
    let values = a.values.iter().zip(&b.values).zip(&br.values).map(|((x, y), z)| x * y + c * z).collect();
    SymbolTable::assemble(a.grid.clone(), SymbolKind::Custom, WeightClass::Unclassified, a.params, a.y.clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuantRule {
    /// `t = 0`.
    Standard,
    /// `t = 1/2`.
    Weyl,
}

#[derive(Debug, Clone)]
pub struct QuantizedOperator {
    pub rule: QuantRule,
    pub dim: usize,
    pub nodes: usize,
    pub vmax: f64,
    pub matrix: Array2<C64>,
    /// `max |A - A^H|` before symmetrization (Weyl of real symbols only).
    pub raw_asymmetry: f64,
}

impl QuantizedOperator {
    /// Node coordinates, flattened like the matrix rows.
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let h = 2.0 * self.vmax / self.nodes as f64;
        let x = |j: usize| -self.vmax + j as f64 * h;
        match self.dim {
            1 => (0..self.nodes).map(|j| [x(j), 0.0]).collect(),
            _ => (0..self.nodes * self.nodes).map(|j| [x(j / self.nodes), x(j % self.nodes)]).collect(),
        }
    }

    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        self.matrix.dot(&ndarray::ArrayView1::from(u)).to_vec()
    }

    /// `max |A - A^H|`.
    pub fn asymmetry(&self) -> f64 {
        let a = &self.matrix;
        let mut m: f64 = 0.0;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                m = m.max((a[[i, j]] - a[[j, i]].conj()).norm());
            }
        }
        m
    }
}

pub fn quantize(sym: &SymbolTable, rule: QuantRule) -> Result<QuantizedOperator> {
    let cap = if sym.grid.dim == 1 { DENSE_CAP_1D } else { DENSE_CAP_2D_AXIS };
    quantize_with_cap(sym, rule, cap)
}

/// Midpoint quadrature of the kernel integral on the DFT frequencies.
pub fn quantize_with_cap(sym: &SymbolTable, rule: QuantRule, cap_per_axis: usize) -> Result<QuantizedOperator> {
    let g = &sym.grid;
    let n = g.dft_nodes.ok_or_else(|| VplError::Config("symbol grid is not a quantization grid".into()))?;
    if n > cap_per_axis {
        return Err(VplError::Config(format!("{n} nodes per axis exceeds the dense cap {cap_per_axis}")));
    }
    let d = g.dim;
    let nodes = n.pow(d as u32);
    let ne = g.eta_points();
    let roots: Vec<C64> = (0..n).map(|m| C64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64)).collect();
    let phase = |dj: i64, k: usize| roots[(dj * (k as i64 - n as i64 / 2)).rem_euclid(n as i64) as usize];
    let split = |j: usize| -> [usize; 2] {
        if d == 1 {
            [j, 0]
        } else {
            [j / n, j % n]
        }
    };
    let vrow = |a: [usize; 2]| -> usize {
        if d == 1 {
            a[0]
        } else {
            a[0] * g.v.n + a[1]
        }
    };
    let weight = 1.0 / nodes as f64;
    let (ni, half) = (n as i64, n as i64 / 2);
    // Half-lattice midpoint indices of (j, j') on one axis; two candidates at
    // the antipodal separation, averaged.
    let mids = |j: usize, jp: usize| -> ([usize; 2], usize) {
        if rule == QuantRule::Standard {
            return ([2 * j, 2 * j], 1);
        }
        let d = (j as i64 - jp as i64).rem_euclid(ni);
        let wrap = |x: i64| x.rem_euclid(2 * ni) as usize;
        if d < half {
            ([wrap(2 * j as i64 - d), 0], 1)
        } else if d > half {
            ([wrap(2 * j as i64 - (d - ni)), 0], 1)
        } else {
            ([wrap(2 * j as i64 - half), wrap(2 * j as i64 + half)], 2)
        }
    };
    let mut m = Array2::<C64>::zeros((nodes, nodes));
    for j in 0..nodes {
        let jj = split(j);
        for jp in 0..nodes {
            let jjp = split(jp);
            let dj = [jj[0] as i64 - jjp[0] as i64, jj[1] as i64 - jjp[1] as i64];
            let (m0, c0) = mids(jj[0], jjp[0]);
            let (m1, c1) = if d == 2 { mids(jj[1], jjp[1]) } else { ([0, 0], 1) };
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..c0 {
                for b in 0..c1 {
                    let row = vrow([m0[a], m1[b]]) * ne;
                    for ie in 0..ne {
                        let kk = split(ie);
                        let mut e = phase(dj[0], kk[0]);
                        if d == 2 {
                            e *= phase(dj[1], kk[1]);
                        }
                        acc += e * sym.values[row + ie];
                    }
                }
            }
            m[[j, jp]] = acc * (weight / (c0 * c1) as f64);
        }
    }
    let mut op = QuantizedOperator { rule, dim: d, nodes: n, vmax: -g.v.start, matrix: m, raw_asymmetry: 0.0 };
    if rule == QuantRule::Weyl && sym.is_real() {
        op.raw_asymmetry = op.asymmetry();
        let h = op.matrix.t().mapv(|z| z.conj());
        op.matrix = (&op.matrix + &h) * C64::new(0.5, 0.0);
    }
    Ok(op)
}

/// Largest singular value by block power iteration on `(A^H A)^{2^s}`, the
/// power formed by repeated squaring. A block of `POWER_BLOCK` vectors with a
/// Rayleigh-Ritz step keeps near-degenerate top pairs (odd symbols come in ±
/// pairs) from stalling the iteration.
pub fn operator_norm_probe(op: &QuantizedOperator) -> Result<f64> {
    use ndarray_linalg::{EigValsh, UPLO};
    let a = &op.matrix;
    let n = a.ncols();
    let ata = a.t().mapv(|z| z.conj()).dot(a);
    let mut b = ata.clone();
    for _ in 0..POWER_SQUARINGS {
        let s = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if s == 0.0 {
            return Ok(0.0);
        }
        b.mapv_inplace(|z| z / s);
        b = b.dot(&b);
    }
    let k = POWER_BLOCK.min(n);
    let mut x = Array2::<C64>::from_shape_fn((n, k), |(i, j)| {
        C64::new(1.0 + 0.25 * ((0.7 + j as f64) * i as f64).sin(), 0.1 * ((1.3 + 0.5 * j as f64) * i as f64).cos())
    });
    orthonormalize(&mut x);
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_STEPS {
        x = b.dot(&x);
        if !orthonormalize(&mut x) {
            return Ok(0.0);
        }
        let xh = x.t().mapv(|z| z.conj());
        let ritz = xh.dot(&ata).dot(&x);
        let ritz = (&ritz + &ritz.t().mapv(|z| z.conj())) * C64::new(0.5, 0.0);
        let top = ritz.eigvalsh(UPLO::Lower)?.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt();
        if (top - sigma).abs() <= POWER_TOL * top {
            return Ok(top);
        }
        sigma = top;
    }
    Err(VplError::Numerical(format!("power iteration did not converge in {POWER_MAX_STEPS} steps")))
}

/// Modified Gram-Schmidt on the columns; false when the block collapses.
fn orthonormalize(x: &mut Array2<C64>) -> bool {
    let k = x.ncols();
    for j in 0..k {
        for i in 0..j {
            let (qi, mut qj) = {
                let (l, r) = x.view_mut().split_at(ndarray::Axis(1), j);
                (l.column(i).to_owned(), r)
            };
            let mut col = qj.column_mut(0);
            let proj: C64 = qi.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
            col.zip_mut_with(&qi, |c, q| *c -= proj * q);
        }
        let nrm = x.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            return false;
        }
        x.column_mut(j).mapv_inplace(|z| z / nrm);
    }
    true
}

/// Spectral norm from the full eigendecomposition of `A^H A`.
pub fn dense_norm(a: &Array2<C64>) -> Result<f64> {
    use ndarray_linalg::{EigValsh, UPLO};
    let ata = a.t().mapv(|z| z.conj()).dot(a);
    let ev = ata.eigvalsh(UPLO::Lower)?;
    Ok(ev.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt())
}

/// `y` with norm `r` along the diagonal direction.
pub fn y_vector(dim: usize, r: f64) -> Vec<f64> {
    vec![r / (dim as f64).sqrt(); dim]
}

pub fn dyadic_sweep() -> Vec<f64> {
    (-4..=4).map(|k| 2f64.powi(k)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketReport {
    pub y: f64,
    pub n_eta: usize,
    pub eta_step: f64,
    /// `max |{θ, v·y}_h - (b̃ + R₁ + R₂)|`.
    pub max_discrepancy: f64,
    /// Root mean square of the same over the grid. The quintic cutoff has a
    /// jump in its third derivative, so the max norm converges at second order
    /// only up to an alignment factor; the mean square does not see it.
    pub rms_discrepancy: f64,
    /// Same, restricted to stencils inside `χ ≡ 1`, against `b̃`.
    pub chi_one_discrepancy: f64,
    pub chi_one_points: usize,
    pub r1_over_a: f64,
    pub r2_over_a: f64,
    pub theta_sup: f64,
    pub b_sup: f64,
}

/// Grid covering `[-vmax, vmax]` in `v` and the whole cutoff transition in `η`.
pub fn bracket_grid(p: &SymbolParams, dim: usize, y: f64, vmax: f64, nv: usize, n_eta: usize) -> Result<SymbolGrid> {
    let reach = (1.0 + dim as f64 * vmax * vmax).sqrt().powf(-p.l0) * y.powf(p.delta2);
    SymbolGrid::uniform(dim, Axis::symmetric(vmax, nv), Axis::symmetric(1.25 * reach + 1.0, n_eta))
}

pub fn bracket_decomposition_check(p: &SymbolParams, grid: &SymbolGrid, y: f64) -> Result<BracketReport> {
    use pointwise::*;
    let d = grid.dim;
    let yv = y_vector(d, y);
    let theta = make_symbol(SymbolKind::Theta, grid, *p, Some(&yv))?;
    let vy = SymbolTable::from_fn(grid, *p, WeightClass::Unclassified, None, |v, _| C64::new(dot(v, &yv), 0.0))?;
    let br = poisson_bracket(&theta, &vy)?;
    let ne = grid.eta_points();
    let mut rep = BracketReport {
        y,
        n_eta: grid.eta.n,
        eta_step: grid.eta.step,
        max_discrepancy: 0.0,
        rms_discrepancy: 0.0,
        chi_one_discrepancy: 0.0,
        chi_one_points: 0,
        r1_over_a: 0.0,
        r2_over_a: 0.0,
        theta_sup: theta.sup,
        b_sup: 0.0,
    };
    let he = grid.eta.step;
    let mut sq = 0.0;
    for iv in 0..grid.v_points() {
        let vp = grid.v_point(iv);
        let v = &vp[..d];
        for ie in 0..ne {
            let ep = grid.eta_point(ie);
            let e = &ep[..d];
            let b = b_tilde(p, v, &yv);
            let (r1, r2) = (r1(p, v, e, &yv), r2(p, v, e, &yv));
            let num = br.at(iv, ie);
            let gap = (num - C64::new(b + r1 + r2, 0.0)).norm();
            rep.max_discrepancy = rep.max_discrepancy.max(gap);
            sq += gap * gap;
            rep.b_sup = rep.b_sup.max(b);
            let a = a_tilde(p, v, e);
            rep.r1_over_a = rep.r1_over_a.max(r1.abs() / a);
            rep.r2_over_a = rep.r2_over_a.max(r2.abs() / a);
            // Every stencil point strictly inside the plateau.
            let inside = (0..d).all(|ax| {
                [-1.0, 1.0].iter().all(|s| {
                    let mut q = [e[0], if d == 2 { e[1] } else { 0.0 }];
                    q[ax] += s * he;
                    let z = bracket_of(&q[..d]) * bracket_of(v).powf(p.l0) / y.powf(p.delta2);
                    z < 0.5
                })
            }) && chi(p, v, e, &yv) == 1.0;
            let interior = (0..d).all(|ax| {
                let pos = if d == 2 && ax == 0 { ie / grid.eta.n } else { ie % grid.eta.n };
                pos > 0 && pos + 1 < grid.eta.n
            });
            if inside && interior {
                rep.chi_one_points += 1;
                rep.chi_one_discrepancy = rep.chi_one_discrepancy.max((num - C64::new(b, 0.0)).norm());
            }
        }
    }
    rep.rms_discrepancy = (sq / (grid.v_points() * ne) as f64).sqrt();
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct NormSweep {
    pub nodes: usize,
    pub ys: Vec<f64>,
    pub norms: Vec<f64>,
    pub sup: f64,
}

/// `‖θ^w‖` across `ys` on an `n`-node box.
pub fn theta_norm_sweep(p: &SymbolParams, dim: usize, n: usize, vmax: f64, ys: &[f64]) -> Result<NormSweep> {
    let grid = SymbolGrid::dft(dim, n, vmax)?;
    let norms = ys
        .iter()
        .map(|&y| {
            let t = make_symbol(SymbolKind::Theta, &grid, *p, Some(&y_vector(dim, y)))?;
            operator_norm_probe(&quantize(&t, QuantRule::Weyl)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let sup = norms.iter().cloned().fold(0.0, f64::max);
    Ok(NormSweep { nodes: n, ys: ys.to_vec(), norms, sup })
}

/// `max ‖(ã^{1/2})^w f‖ / |f|_σ` over seeded band-limited `f` in one
/// dimension, with `|f|_σ² = |⟨v⟩^{(γ+2)/2} f|² + |⟨v⟩^{γ/2} ∂_v f|²`.
pub fn sigma_bound_constant(p: &SymbolParams, n: usize, vmax: f64, samples: usize, seed: u64) -> Result<f64> {
    let grid = SymbolGrid::dft(1, n, vmax)?;
    let sym = SymbolTable::from_fn(&grid, *p, WeightClass::Unclassified, None, |v, e| {
        C64::new(pointwise::a_tilde(p, v, e).sqrt(), 0.0)
    })?;
    let op = quantize(&sym, QuantRule::Weyl)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = op.nodes();
    let kmax = (n / 4) as i64;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let coef: Vec<(i64, C64)> = (-kmax..=kmax)
            .map(|k| {
                let s = 1.0 / (1.0 + k.abs() as f64);
                (k, C64::new(rng.random_range(-1.0..1.0) * s, rng.random_range(-1.0..1.0) * s))
            })
            .collect();
        let (mut f, mut df) = (Vec::with_capacity(nodes.len()), Vec::with_capacity(nodes.len()));
        for x in &nodes {
            let mut a = C64::new(0.0, 0.0);
            let mut b = C64::new(0.0, 0.0);
            for &(k, c) in &coef {
                let w = 2.0 * PI * k as f64 / (2.0 * vmax);
                let e = C64::from_polar(1.0, w * x[0]) * c;
                a += e;
                b += e * C64::new(0.0, w);
            }
            f.push(a);
            df.push(b);
        }
        let af = op.apply(&f);
        let lhs: f64 = af.iter().map(|z| z.norm_sqr()).sum();
        let rhs: f64 = nodes
            .iter()
            .zip(f.iter().zip(&df))
            .map(|(x, (a, b))| {
                let bv = bracket_of(&x[..1]);
                bv.powf(p.gamma + 2.0) * a.norm_sqr() + bv.powf(p.gamma) * b.norm_sqr()
            })
            .sum();
        worst = worst.max((lhs / rhs).sqrt());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct InterpolationReport {
    pub alpha: usize,
    pub beta: usize,
    pub delta: f64,
    /// `C_{0,δ}` from Young's inequality.
    pub c0: f64,
    /// `max LHS/RHS` of the `b̃` display over the `(t, v, y)` samples.
    pub b_display_ratio: f64,
    /// `max LHS/RHS` of the `ã^{1/2}` display over `(v, η)` samples.
    pub a_display_ratio: f64,
    pub samples: usize,
}

/// Samples the two Young-type interpolation displays in one dimension.
///
/// With `s = N(|α|-3)` and `2s - 1 = 2|α|/δ₁` the `b̃` display reads
/// `t^{s-1/2} ≤ δ b̃^{1/2} t^s + C₀ ⟨v⟩^{-l₀|α|/δ₁}|y|^{-|α|}` with
/// `C₀ = δ^{-(2s-1)}/(2s)`; for `|α| ≤ 3` the left side is 1 and
/// `C₀ = (1-η)δ^{-2|α|/δ₁}`. The `ã` display, for `|β| ≤ 3`, is
/// `⟨v⟩^{-l₀|α|/δ₁} ≤ (δ/C₀)ã^{1/2} + C_δ⟨v⟩^{C_K}⟨η⟩^{-|β|}`.
pub fn interpolation_check(p: &SymbolParams, alpha: usize, beta: usize, delta: f64) -> Result<InterpolationReport> {
    if beta > 3 {
        return Err(VplError::Config("the a-tilde display is sampled for |beta| <= 3".into()));
    }
    let a = alpha as f64;
    let d1 = p.delta1;
    let w_exp = -p.l0 * a / d1;
    let (s, c0) = if alpha > 3 {
        let n = (2.0 * a / d1 + 1.0) / (2.0 * (a - 3.0));
        let s = n * (a - 3.0);
        (Some(s), delta.powf(-(2.0 * s - 1.0)) / (2.0 * s))
    } else {
        // η/(2(1-η)) = |α|/δ₁
        let r = 2.0 * a / d1;
        let eta = r / (1.0 + r);
        (None, (1.0 - eta) * delta.powf(-r))
    };
    let ts: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
    let vs: Vec<f64> = (0..=40).map(|i| -10.0 + 0.5 * i as f64).collect();
    let ys: Vec<f64> = (-12..=12).map(|k| 2f64.powf(0.5 * k as f64)).collect();
    let mut b_ratio: f64 = 0.0;
    let mut count = 0;
    for &t in &ts {
        for &v in &vs {
            for &y in &ys {
                let bh = pointwise::b_tilde(p, &[v], &[y]).sqrt();
                let wv = bracket_of(&[v]).powf(w_exp) * y.powf(-a);
                let (lhs, rhs) = match s {
                    Some(s) => (t.powf(s - 0.5), delta * bh * t.powf(s) + c0 * wv),
                    None => (1.0, delta * bh + c0 * wv),
                };
                b_ratio = b_ratio.max(lhs / rhs);
                count += 1;
            }
        }
    }
    // ã display: η/(1-η) = |β|, C_K = -γ|β|/2 + (1+|β|)(-l₀|α|/δ₁).
    let bt = beta as f64;
    let eta = bt / (1.0 + bt);
    let ck = -p.gamma * bt / 2.0 + (1.0 + bt) * w_exp;
    let c_delta = (1.0 - eta) * (delta / c0).powf(-bt);
    let mut a_ratio: f64 = 0.0;
    for &v in &vs {
        for i in 0..=40 {
            let e = -20.0 + i as f64;
            let lhs = bracket_of(&[v]).powf(w_exp);
            let rhs = delta / c0 * pointwise::a_tilde(p, &[v], &[e]).sqrt()
                + c_delta * bracket_of(&[v]).powf(ck) * bracket_of(&[e]).powf(-bt);
            a_ratio = a_ratio.max(lhs / rhs);
            count += 1;
        }
    }
    Ok(InterpolationReport { alpha, beta, delta, c0, b_display_ratio: b_ratio, a_display_ratio: a_ratio, samples: count })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompositionReport {
    pub width: f64,
    /// `‖Q(ab) - Q(a)Q(b)‖`.
    pub zeroth_order: f64,
    /// `‖Q(a#₁b) - Q(a)Q(b)‖`.
    pub first_order: f64,
}

/// Gaussian bumps `exp(-|v - c|²/(2w²) - |η - e|²/(2(w/2)²))` with offset
/// centres, compared in operator norm.
pub fn composition_check(n: usize, vmax: f64, width: f64) -> Result<CompositionReport> {
    let grid = SymbolGrid::dft(1, n, vmax)?;
    let p = SymbolParams::new(0.0, 1.0, 0.5)?;
    let bump = |c: f64, e0: f64| {
        move |v: &[f64], e: &[f64]| {
            let sw = 0.5 * width;
            C64::new((-(v[0] - c).powi(2) / (2.0 * width * width) - (e[0] - e0).powi(2) / (2.0 * sw * sw)).exp(), 0.0)
        }
    };
    let a = SymbolTable::from_fn(&grid, p, WeightClass::S1, None, bump(-0.5, 0.2))?;
    let b = SymbolTable::from_fn(&grid, p, WeightClass::S1, None, bump(0.5, -0.2))?;
    let prod = quantize(&a, QuantRule::Weyl)?.matrix.dot(&quantize(&b, QuantRule::Weyl)?.matrix);
    let ab = SymbolTable::from_fn(&grid, p, WeightClass::Unclassified, None, |v, e| bump(-0.5, 0.2)(v, e) * bump(0.5, -0.2)(v, e))?;
    let c1 = compose_first_order(&a, &b)?;
    let err = |s: &SymbolTable| -> Result<f64> { dense_norm(&(&quantize(s, QuantRule::Weyl)?.matrix - &prod)) };
    Ok(CompositionReport { width, zeroth_order: err(&ab)?, first_order: err(&c1)? })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylSuiteConfig {
    pub gamma: f64,
    pub k0: f64,
    pub delta1: f64,
    pub dim: usize,
    pub vmax: f64,
    /// Node counts per axis for the θ^w refinements; the last one is used
    /// for the exactness checks.
    pub refinements: Vec<usize>,
    /// Frequency resolutions of the bracket check.
    pub bracket_eta: [usize; 2],
    pub bracket_nv: usize,
    pub seed: u64,
    pub samples: usize,
}

impl Default for WeylSuiteConfig {
    fn default() -> Self {
        Self {
            gamma: -2.5,
            k0: 1.0,
            delta1: 0.5,
            dim: 1,
            vmax: 6.0,
            refinements: vec![32, 48, 64],
            bracket_eta: [401, 801],
            bracket_nv: 61,
            seed: 0,
            samples: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylReport {
    pub config: WeylSuiteConfig,
    pub params: SymbolParams,
    pub identity_error: f64,
    pub multiplication_error: f64,
    pub derivative_error: f64,
    pub multiplication_norm: f64,
    pub hermitian_residual: f64,
    pub diagonal_agreement: f64,
    pub bracket_coarse: Vec<BracketReport>,
    pub bracket_fine: Vec<BracketReport>,
    /// Worst observed order of the mean-square discrepancy over the sweep.
    pub bracket_order: f64,
    pub chi_one_discrepancy: f64,
    pub r1_constant: f64,
    pub r2_constant: f64,
    pub theta_sweeps: Vec<NormSweep>,
    /// max/min of the sweep suprema across refinements.
    pub theta_sup_ratio: f64,
    pub sigma_constant: f64,
    pub interpolation: Vec<InterpolationReport>,
    pub composition: Vec<CompositionReport>,
}

pub const EXACT_TOL: f64 = 1e-6;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const BRACKET_ORDER_MIN: f64 = 1.8;

impl WeylReport {
    /// Failed acceptance clauses, empty when all hold.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("identity quantization", self.identity_error),
            ("multiplication quantization", self.multiplication_error),
            ("derivative quantization", self.derivative_error),
        ] {
            if !(v <= EXACT_TOL) {
                out.push(format!("{name} error {v:.3e} > {EXACT_TOL:e}"));
            }
        }
        if !(self.hermitian_residual < HERMITIAN_TOL) {
            out.push(format!("hermitian residual {:.3e}", self.hermitian_residual));
        }
        if !(self.bracket_order >= BRACKET_ORDER_MIN) {
            out.push(format!("bracket discrepancy order {:.3} < {BRACKET_ORDER_MIN}", self.bracket_order));
        }
        if !(self.chi_one_discrepancy <= 1e-9) {
            out.push(format!("bracket on the cutoff plateau off by {:.3e}", self.chi_one_discrepancy));
        }
        if !(self.theta_sup_ratio < 2.0) {
            out.push(format!("theta norm suprema ratio {:.3} >= 2", self.theta_sup_ratio));
        }
        if !(self.r1_constant.is_finite() && self.r2_constant.is_finite()) {
            out.push("remainder domination constants not finite".into());
        }
        out
    }
}

pub fn weyl_suite(cfg: &WeylSuiteConfig) -> Result<WeylReport> {
    let p = SymbolParams::new(cfg.gamma, cfg.k0, cfg.delta1)?;
    let d = cfg.dim;
    let n = *cfg.refinements.last().ok_or_else(|| VplError::Config("no refinements given".into()))?;
    let grid = SymbolGrid::dft(d, n, cfg.vmax)?;
    let one = SymbolTable::from_fn(&grid, p, WeightClass::S1, None, |_, _| C64::new(1.0, 0.0))?;
    let vsym = SymbolTable::from_fn(&grid, p, WeightClass::Unclassified, None, |v, _| C64::new(v[0], 0.0))?;
    let esym = SymbolTable::from_fn(&grid, p, WeightClass::Unclassified, None, |_, e| C64::new(e[0], 0.0))?;

    let id = quantize(&one, QuantRule::Weyl)?;
    let nodes = id.nodes();
    let mut identity_error: f64 = 0.0;
    for ((i, j), z) in id.matrix.indexed_iter() {
        let want = if i == j { 1.0 } else { 0.0 };
        identity_error = identity_error.max((z - want).norm());
    }
    let vop = quantize(&vsym, QuantRule::Weyl)?;
    let mut multiplication_error: f64 = 0.0;
    for ((i, j), z) in vop.matrix.indexed_iter() {
        let want = if i == j { nodes[i][0] } else { 0.0 };
        multiplication_error = multiplication_error.max((z - want).norm());
    }
    // Band-limited field without Nyquist content along axis 0.
    let eop = quantize(&esym, QuantRule::Weyl)?;
    let kmax = (n / 2 - 1) as i64;
    let field = |x: &[f64; 2], deriv: bool| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in -kmax..=kmax {
            let w = k as f64 / (2.0 * cfg.vmax);
            let c = C64::new(1.0 / (1.0 + (k * k) as f64), 0.3 * k as f64 / (1.0 + (k * k * k * k) as f64));
            let e = C64::from_polar(1.0, 2.0 * PI * w * x[0]) * c * C64::from_polar(1.0, 0.4 * x[1]);
            acc += if deriv { e * w } else { e };
        }
        acc
    };
    let u: Vec<C64> = nodes.iter().map(|x| field(x, false)).collect();
    let du: Vec<C64> = nodes.iter().map(|x| field(x, true)).collect();
    let derivative_error = eop.apply(&u).iter().zip(&du).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let multiplication_norm = operator_norm_probe(&vop)?;

    let mut hermitian_residual: f64 = 0.0;
    let mut diagonal_agreement: f64 = 0.0;
    for s in [&one, &vsym, &esym, &make_symbol(SymbolKind::ATilde, &grid, p, None)?] {
        let w = quantize(s, QuantRule::Weyl)?;
        hermitian_residual = hermitian_residual.max(w.asymmetry());
        if s.kind != SymbolKind::ATilde {
            let st = quantize(s, QuantRule::Standard)?;
            diagonal_agreement = diagonal_agreement.max((&w.matrix - &st.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }

    let ys = dyadic_sweep();
    let mut bracket_coarse = Vec::new();
    let mut bracket_fine = Vec::new();
    for &y in &ys {
        let coarse = bracket_grid(&p, d, y, cfg.vmax, cfg.bracket_nv, cfg.bracket_eta[0])?;
        let fine = bracket_grid(&p, d, y, cfg.vmax, cfg.bracket_nv, cfg.bracket_eta[1])?;
        bracket_coarse.push(bracket_decomposition_check(&p, &coarse, y)?);
        bracket_fine.push(bracket_decomposition_check(&p, &fine, y)?);
    }
    let mut bracket_order = f64::INFINITY;
    for (c, f) in bracket_coarse.iter().zip(&bracket_fine) {
        // Discrepancies at roundoff carry no order information.
        if c.rms_discrepancy > 1e-10 * c.b_sup.max(1.0) {
            let ratio = (c.rms_discrepancy / f.rms_discrepancy).log2() / (c.eta_step / f.eta_step).log2();
            bracket_order = bracket_order.min(ratio);
        }
    }
    let all = bracket_coarse.iter().chain(&bracket_fine);
    let chi_one_discrepancy = all.clone().map(|r| r.chi_one_discrepancy / r.b_sup.max(1.0)).fold(0.0, f64::max);
    let r1_constant = all.clone().map(|r| r.r1_over_a).fold(0.0, f64::max);
    let r2_constant = all.map(|r| r.r2_over_a).fold(0.0, f64::max);

    let theta_sweeps =
        cfg.refinements.iter().map(|&m| theta_norm_sweep(&p, d, m, cfg.vmax, &ys)).collect::<Result<Vec<_>>>()?;
    let sups: Vec<f64> = theta_sweeps.iter().map(|s| s.sup).collect();
    let smax = sups.iter().cloned().fold(0.0, f64::max);
    let smin = sups.iter().cloned().fold(f64::INFINITY, f64::min);
    let theta_sup_ratio = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let sigma_constant = sigma_bound_constant(&p, n, cfg.vmax, cfg.samples, cfg.seed)?;
    let interpolation = [(2, 1), (4, 2), (5, 3), (6, 0)]
        .iter()
        .map(|&(a, b)| interpolation_check(&p, a, b, 0.5))
        .collect::<Result<Vec<_>>>()?;
    let composition = [1.0, 2.0].iter().map(|&w| composition_check(n, cfg.vmax, w)).collect::<Result<Vec<_>>>()?;

    Ok(WeylReport {
        config: cfg.clone(),
        params: p,
        identity_error,
        multiplication_error,
        derivative_error,
        multiplication_norm,
        hermitian_residual,
        diagonal_agreement,
        bracket_coarse,
        bracket_fine,
        bracket_order,
        chi_one_discrepancy,
        r1_constant,
        r2_constant,
        theta_sweeps,
        theta_sup_ratio,
        sigma_constant,
        interpolation,
        composition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn params() -> SymbolParams {
        SymbolParams::new(-2.5, 1.0, 0.5).unwrap()
    }

    #[test]
    fn a_tilde_at_origin() {
        let p = SymbolParams::new(-1.0, 3.0, 0.5).unwrap();
        assert_eq!(pointwise::a_tilde(&p, &[0.0, 0.0], &[0.0, 0.0]), 4.0);
    }

    #[test]
    fn rejects_bad_delta1() {
        assert!(SymbolParams::new(0.0, 1.0, 0.0).is_err());
        assert!(SymbolParams::new(0.0, 1.0, 0.6).is_err());
        assert!(SymbolParams::new(0.0, 1.0, 0.5).is_ok());
    }

    #[test]
    fn cutoff_plateau_and_theta_bound() {
        let p = params();
        for y in dyadic_sweep() {
            let g = bracket_grid(&p, 1, y, 6.0, 41, 201).unwrap();
            let yv = [y];
            let chi = make_symbol(SymbolKind::Chi, &g, p, Some(&yv)).unwrap();
            let theta = make_symbol(SymbolKind::Theta, &g, p, Some(&yv)).unwrap();
            assert!(theta.sup <= 1.0 + 1e-12, "sup theta {}", theta.sup);
            for iv in 0..g.v_points() {
                for ie in 0..g.eta_points() {
                    let (v, e) = (g.v_point(iv)[0], g.eta_point(ie)[0]);
                    let z = (1.0 + e * e).sqrt() * (1.0 + v * v).sqrt().powf(p.l0) / y.powf(p.delta2);
                    if z < 0.5 {
                        assert_eq!(chi.at(iv, ie).re, 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn chi0_is_c1_at_the_joins() {
        for z in [0.5, 1.0] {
            let h = 1e-6;
            assert!((chi0(z + h) - chi0(z - h)).abs() < 1e-9);
            assert!(chi0_prime(z + h).abs() < 1e-9 && chi0_prime(z - h).abs() < 1e-9);
        }
        let z = 0.73;
        let fd = (chi0(z + 1e-6) - chi0(z - 1e-6)) / 2e-6;
        assert!((fd - chi0_prime(z)).abs() < 1e-7);
    }

    #[test]
    fn identity_and_multiplication_are_exact() {
        let g = SymbolGrid::dft(1, 64, 6.0).unwrap();
        let p = params();
        let one = SymbolTable::from_fn(&g, p, WeightClass::S1, None, |_, _| C64::new(1.0, 0.0)).unwrap();
        let id = quantize(&one, QuantRule::Weyl).unwrap();
        for ((i, j), z) in id.matrix.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((z - want).norm() < 1e-12);
        }
        assert!((operator_norm_probe(&id).unwrap() - 1.0).abs() < 1e-12);
        let v = SymbolTable::from_fn(&g, p, WeightClass::Unclassified, None, |v, _| C64::new(v[0], 0.0)).unwrap();
        let vo = quantize(&v, QuantRule::Weyl).unwrap();
        assert!((operator_norm_probe(&vo).unwrap() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn eta_symbol_is_scaled_derivative() {
        // Oracle: direct DFT derivative of a random band-limited field.
        let n = 32;
        let vmax = 3.0;
        let g = SymbolGrid::dft(1, n, vmax).unwrap();
        let e = SymbolTable::from_fn(&g, params(), WeightClass::Unclassified, None, |_, e| C64::new(e[0], 0.0)).unwrap();
        let op = quantize(&e, QuantRule::Standard).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coef: Vec<C64> = (0..n - 1).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let h = 2.0 * vmax / n as f64;
        let u: Vec<C64> = (0..n)
            .map(|j| {
                let x = -vmax + j as f64 * h;
                coef.iter().enumerate().map(|(i, c)| c * C64::from_polar(1.0, PI * (i as f64 - 15.0) * x / vmax)).sum()
            })
            .collect();
        let du = op.apply(&u);
        for j in 0..n {
            let x = -vmax + j as f64 * h;
            let want: C64 = coef
                .iter()
                .enumerate()
                .map(|(i, c)| c * ((i as f64 - 15.0) / (2.0 * vmax)) * C64::from_polar(1.0, PI * (i as f64 - 15.0) * x / vmax))
                .sum();
            assert!((du[j] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn weyl_and_standard_agree_on_diagonal_symbols() {
        let g = SymbolGrid::dft(2, 8, 2.0).unwrap();
        let p = params();
        for s in [
            SymbolTable::from_fn(&g, p, WeightClass::Unclassified, None, |v, _| C64::new(v[0] * v[1] + v[1].sin(), 0.0)).unwrap(),
            SymbolTable::from_fn(&g, p, WeightClass::Unclassified, None, |_, e| C64::new(e[0] - e[1] * e[1], 0.0)).unwrap(),
        ] {
            let w = quantize(&s, QuantRule::Weyl).unwrap();
            let st = quantize(&s, QuantRule::Standard).unwrap();
            let d = (&w.matrix - &st.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(d < 1e-12, "{d}");
        }
    }

    #[test]
    fn weyl_of_real_symbol_is_hermitian() {
        let g = SymbolGrid::dft(1, 32, 4.0).unwrap();
        let t = make_symbol(SymbolKind::Theta, &g, params(), Some(&[0.5])).unwrap();
        let op = quantize(&t, QuantRule::Weyl).unwrap();
        assert!(op.asymmetry() < 1e-14);
        assert!(op.raw_asymmetry < 1e-10);
    }

    #[test]
    fn polynomial_bracket_and_composition() {
        let g = SymbolGrid::uniform(1, Axis::symmetric(2.0, 9), Axis::symmetric(3.0, 11)).unwrap();
        let p = params();
        let a = SymbolTable::from_fn(&g, p, WeightClass::Unclassified, None, |v, _| C64::new(v[0], 0.0)).unwrap();
        let b = SymbolTable::from_fn(&g, p, WeightClass::Unclassified, None, |_, e| C64::new(e[0], 0.0)).unwrap();
        let br = poisson_bracket(&a, &b).unwrap();
        assert!(br.values.iter().all(|z| (z - C64::new(-1.0, 0.0)).norm() < 1e-12));
        let c = compose_first_order(&a, &b).unwrap();
        for iv in 0..g.v_points() {
            for ie in 0..g.eta_points() {
                // v η - 1/(4πi) = v η + i/(4π)
                let want = C64::new(g.v_point(iv)[0] * g.eta_point(ie)[0], 1.0 / (4.0 * PI));
                assert!((c.at(iv, ie) - want).norm() < 1e-12);
            }
        }
        let one = SymbolTable::from_fn(&g, p, WeightClass::S1, None, |_, _| C64::new(1.0, 0.0)).unwrap();
        let c = compose_first_order(&one, &b).unwrap();
        assert!(c.values.iter().zip(&b.values).all(|(x, y)| (x - y).norm() < 1e-14));
    }

    #[test]
    fn first_order_composition_beats_product() {
        for w in [1.0, 2.0] {
            let r = composition_check(64, 6.0, w).unwrap();
            assert!(r.first_order < 0.5 * r.zeroth_order, "{r:?}");
        }
    }

    #[test]
    fn bracket_identity_converges_at_second_order() {
        let p = params();
        for y in [0.25, 1.0, 8.0] {
            let c = bracket_decomposition_check(&p, &bracket_grid(&p, 1, y, 6.0, 31, 401).unwrap(), y).unwrap();
            let f = bracket_decomposition_check(&p, &bracket_grid(&p, 1, y, 6.0, 31, 801).unwrap(), y).unwrap();
            let order = (c.rms_discrepancy / f.rms_discrepancy).log2() / (c.eta_step / f.eta_step).log2();
            assert!(order > 1.8, "y {y}: {} -> {} order {order}", c.rms_discrepancy, f.rms_discrepancy);
            // Pointwise: O(h²) with a bounded constant.
            assert!(f.max_discrepancy < 0.5 * c.max_discrepancy);
            assert!(c.chi_one_points > 0);
            assert!(c.chi_one_discrepancy < 1e-10 * c.b_sup.max(1.0));
        }
    }

    #[test]
    fn bracket_check_in_two_dimensions() {
        let p = params();
        let g = bracket_grid(&p, 2, 2.0, 3.0, 7, 121).unwrap();
        let r = bracket_decomposition_check(&p, &g, 2.0).unwrap();
        assert!(r.rms_discrepancy < 0.01 * r.b_sup, "{r:?}");
        assert!(r.chi_one_discrepancy < 1e-10 * r.b_sup);
    }

    #[test]
    fn interpolation_displays_hold() {
        let p = params();
        for (a, b) in [(0, 0), (3, 3), (4, 1), (7, 2)] {
            let r = interpolation_check(&p, a, b, 0.5).unwrap();
            assert!(r.b_display_ratio <= 1.0 + 1e-12, "{r:?}");
            assert!(r.a_display_ratio <= 1.0 + 1e-12, "{r:?}");
        }
    }

    #[test]
    fn power_iteration_matches_dense_singular_value() {
        let g = SymbolGrid::dft(1, 32, 5.0).unwrap();
        let t = make_symbol(SymbolKind::Theta, &g, params(), Some(&[2.0])).unwrap();
        let op = quantize(&t, QuantRule::Weyl).unwrap();
        let exact = dense_norm(&op.matrix).unwrap();
        let probe = operator_norm_probe(&op).unwrap();
        assert!((probe - exact).abs() < 1e-5 * exact, "{probe} vs {exact}");
    }

    proptest! {
        #[test]
        fn bracket_is_antisymmetric(c in prop::collection::vec(-2.0f64..2.0, 6)) {
            let g = SymbolGrid::uniform(1, Axis::symmetric(1.5, 7), Axis::symmetric(2.0, 9)).unwrap();
            let p = params();
            let a = SymbolTable::from_fn(&g, p, WeightClass::Unclassified, None, |v, e| {
                C64::new(c[0] * v[0] * e[0] + c[1] * (v[0] * e[0]).sin() + c[2] * e[0].powi(3), 0.0)
            }).unwrap();
            let b = SymbolTable::from_fn(&g, p, WeightClass::Unclassified, None, |v, e| {
                C64::new(c[3] * v[0].powi(2) + c[4] * (v[0] - e[0]).cos(), c[5] * e[0])
            }).unwrap();
            let ab = poisson_bracket(&a, &b).unwrap();
            let ba = poisson_bracket(&b, &a).unwrap();
            for (x, y) in ab.values.iter().zip(&ba.values) {
                prop_assert_eq!(*x, -*y);
            }
        }
    }
}
