//! Numerical coercivity of `-L` in the σ-norm.
//!
//! `λ_h = min (-Lg, g) / |g|²_{σ,0}` over the orthogonal complement of the
//! discrete kernel. Both forms commute with the reflections `v_a → -v_a`, so the
//! minimum is taken sector by sector on the pencil
//! `(M + cΠ, (I-Π) G (I-Π) + Π)` whose kernel directions are pushed to `c`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::collision::{Block, CollisionAssembly, NullBasis};
use crate::dense::{cholesky_lower, dot, lanczos_top, matvec, norm, solve_lower, solve_lower_t};
use crate::error::{Result, VplError};
use crate::grid::{norm2, VelocityGrid};
use crate::kernel::p_v_project;
use crate::norms::{sigma_norm_sq_with, sigma_weights};
use crate::symmetry::{OrbitColumns, Sector};

const LANCZOS_TOL: f64 = 1e-10;
const SHIFT_FACTOR: f64 = 10.0;

/// Coefficients of `∂_a` at node `p`, as `(node, coefficient)` pairs.
fn stencil(grid: &VelocityGrid, p: usize, axis: usize) -> ([(usize, f64); 3], usize) {
    let n = grid.n;
    let stride = [n * n, n, 1][axis];
    let inv = 0.5 / grid.h;
    let t = grid.unindex(p)[axis];
    if t == 0 {
        ([(p, -3.0 * inv), (p + stride, 4.0 * inv), (p + 2 * stride, -inv)], 3)
    } else if t == n - 1 {
        ([(p, 3.0 * inv), (p - stride, -4.0 * inv), (p - 2 * stride, inv)], 3)
    } else {
        ([(p + stride, inv), (p - stride, -inv), (0, 0.0)], 2)
    }
}

/// Column `G e_k` of the σ-norm Gram matrix, `|g|²_{σ,l} = h³ gᵀ G g`.
pub fn sigma_gram_column(grid: &VelocityGrid, weights: &[(f64, f64)], k: usize) -> Vec<f64> {
    let n = grid.n;
    let mut col = vec![0.0; grid.len()];
    col[k] += weights[k].1;
    let ck = grid.unindex(k);
    for axis in 0..3 {
        let stride = [n * n, n, 1][axis];
        let lo = ck[axis].saturating_sub(2);
        let hi = (ck[axis] + 2).min(n - 1);
        for t in lo..=hi {
            let p = k + t * stride - ck[axis] * stride;
            let (st, len) = stencil(grid, p, axis);
            let Some(&(_, c)) = st[..len].iter().find(|(q, _)| *q == k) else { continue };
            let v = grid.coord(p);
            let mut e = [0.0; 3];
            e[axis] = c;
            let par = p_v_project(e, v);
            let (wpar, wperp) = weights[p];
            let u = [0, 1, 2].map(|b| wpar * par[b] + wperp * (e[b] - par[b]));
            for (b, ub) in u.iter().enumerate() {
                let (sb, lb) = stencil(grid, p, b);
                for &(q, s) in &sb[..lb] {
                    col[q] += ub * s;
                }
            }
        }
    }
    col
}

/// Smallest eigenvalue of `(a, b)` restricted to the complement of the
/// Euclidean-orthonormal columns `kernel`, with `b = I` when `None`.
fn pencil_min(a: &Array2<f64>, b: Option<&Array2<f64>>, kernel: &[Vec<f64>], seed: u64) -> Result<PencilMin> {
    let n = a.nrows();
    let project_out = |x: &[f64]| {
        let mut y = x.to_vec();
        for q in kernel {
            let c = dot(&y, q);
            y.iter_mut().zip(q).for_each(|(u, v)| *u -= c * v);
        }
        y
    };
    let d_apply = |x: &[f64]| {
        let px = project_out(x);
        let mut y = match b {
            Some(b) => project_out(&matvec(b, &px)),
            None => px,
        };
        for q in kernel {
            let c = dot(x, q);
            y.iter_mut().zip(q).for_each(|(u, v)| *u += c * v);
        }
        y
    };
    // Any Rayleigh quotient on the complement bounds the minimum from above.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let probe = project_out(&(0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
    let num = dot(&matvec(a, &probe), &probe);
    let den = dot(&d_apply(&probe), &probe);
    let shift = SHIFT_FACTOR * (num / den).abs().max(1e-300);
    let mut shifted = a.clone();
    for q in kernel {
        for i in 0..n {
            for j in 0..n {
                shifted[[i, j]] += shift * q[i] * q[j];
            }
        }
    }
    let chol = cholesky_lower(&shifted).map_err(|_| {
        VplError::Numerical("-L is not positive definite on the kernel complement (lambda_h <= 0)".into())
    })?;
    let op = |x: &[f64]| {
        let y = solve_lower_t(&chol, x);
        let z = d_apply(&y);
        solve_lower(&chol, &z)
    };
    let r = lanczos_top(op, n, n, LANCZOS_TOL, seed)?;
    if r.top[0] <= 0.0 {
        return Err(VplError::Numerical("non-positive pencil eigenvalue".into()));
    }
    Ok(PencilMin {
        lowest: r.top.iter().filter(|&&t| t > 0.0).map(|t| 1.0 / t).filter(|&l| l < shift).collect(),
        iterations: r.iterations,
    })
}

struct PencilMin {
    lowest: Vec<f64>,
    iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorSpectrum {
    pub block: String,
    /// Bit `a` set: odd in `v_a`.
    pub parity: u8,
    pub size: usize,
    pub kernel_dim: usize,
    /// Largest `‖M ξ‖/‖M‖_F` over the kernel vectors of the sector.
    pub kernel_residual: f64,
    /// Smallest generalized eigenvalues against the σ-norm, ascending.
    pub lowest: Vec<f64>,
    /// Smallest eigenvalue of `-L` against `L²_v` on the complement.
    pub l2_gap: f64,
    pub lanczos_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub gamma: f64,
    pub nv: usize,
    pub lambda_h: f64,
    /// Largest Rayleigh quotient of `L` on the kernel complement in `L²_v`.
    pub max_rayleigh_l: f64,
    pub sectors: Vec<SectorSpectrum>,
}

fn kernel_vectors(grid: &VelocityGrid, sqrt_mu: &[f64], block: Block, sector: &Sector) -> Vec<Vec<f64>> {
    let mut raw: Vec<Vec<f64>> = vec![sqrt_mu.to_vec()];
    if block == Block::Sum {
        for i in 0..3 {
            raw.push(grid.coords().iter().zip(sqrt_mu).map(|(v, s)| v[i] * s).collect());
        }
        raw.push(grid.coords().iter().zip(sqrt_mu).map(|(&v, s)| norm2(v) * s).collect());
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for r in raw {
        let full = norm(&r);
        let mut x = sector.restrict(&r);
        if norm(&x) < 1e-10 * full {
            continue;
        }
        for _ in 0..2 {
            for q in &out {
                let c = dot(&x, q);
                x.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|a| *a /= nx);
        out.push(x);
    }
    out
}

/// Measure `λ_h` over both blocks and all eight parity sectors.
pub fn coercivity_probe(asm: &CollisionAssembly) -> Result<CoercivityReport> {
    let grid = &asm.grid;
    let weights = sigma_weights(grid, 0.0, asm.gamma)?;
    let gram = OrbitColumns::new(grid, |k| sigma_gram_column(grid, &weights, k));
    let mut sectors = Vec::new();
    for block in [Block::Sum, Block::Diff] {
        let cols = asm.orbit_columns(block);
        for parity in 0..8u8 {
            let sector = Sector::new(grid, 7, parity);
            let m = cols.sector(&sector);
            let g = gram.sector(&sector);
            let kernel = kernel_vectors(grid, &asm.maxwellian.sqrt_mu, block, &sector);
            let mnorm = m.iter().map(|a| a * a).sum::<f64>().sqrt();
            let kernel_residual = kernel.iter().map(|q| norm(&matvec(&m, q)) / mnorm).fold(0.0, f64::max);
            let seed = 1000 + parity as u64 + if block == Block::Sum { 0 } else { 8 };
            let sigma = pencil_min(&m, Some(&g), &kernel, seed)?;
            let l2 = pencil_min(&m, None, &kernel, seed + 100)?;
            sectors.push(SectorSpectrum {
                block: format!("{block:?}").to_lowercase(),
                parity,
                size: sector.len(),
                kernel_dim: kernel.len(),
                kernel_residual,
                lowest: sigma.lowest.clone(),
                l2_gap: l2.lowest.first().copied().unwrap_or(f64::NAN),
                lanczos_iterations: sigma.iterations,
            });
        }
    }
    let lambda_h = sectors.iter().filter_map(|s| s.lowest.first().copied()).fold(f64::INFINITY, f64::min);
    let gap = sectors.iter().map(|s| s.l2_gap).fold(f64::INFINITY, f64::min);
    if !(lambda_h > 0.0) {
        return Err(VplError::Numerical(format!("lambda_h = {lambda_h} is not positive")));
    }
    Ok(CoercivityReport { gamma: asm.gamma, nv: grid.n, lambda_h, max_rayleigh_l: -gap, sectors })
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub samples: usize,
    /// Smallest `(-Lg, g) - λ_h |(I-P)g|²_{σ,0}` over the samples.
    pub min_margin: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Seeded random two-species fields of unit `L²_v` norm: white noise,
/// Gaussian-weighted polynomials and localized bumps in turn.
pub fn random_fields(grid: &VelocityGrid, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len();
    let vmax = grid.vmax;
    (0..count)
        .map(|s| {
            let mut f: Vec<f64> = match s % 3 {
                0 => (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                1 => {
                    let c: Vec<f64> = (0..2 * 20).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let mut out = Vec::with_capacity(2 * n);
                    for sp in 0..2 {
                        out.extend(grid.coords().iter().map(|&v| {
                            let mono = [
                                1.0, v[0], v[1], v[2], v[0] * v[0], v[1] * v[1], v[2] * v[2], v[0] * v[1],
                                v[1] * v[2], v[0] * v[2], v[0] * v[1] * v[2], v[0].powi(3), v[1].powi(3),
                                v[2].powi(3), v[0] * v[0] * v[1], v[1] * v[1] * v[2], v[2] * v[2] * v[0],
                                norm2(v) * norm2(v), v[0] * norm2(v), v[1] * norm2(v),
                            ];
                            let p: f64 = mono.iter().zip(&c[sp * 20..]).map(|(a, b)| a * b).sum();
                            p * (-norm2(v) / 4.0).exp()
                        }));
                    }
                    out
                }
                _ => {
                    let c: [f64; 3] = [0, 1, 2].map(|_| rng.random_range(-0.6 * vmax..0.6 * vmax));
                    let w = rng.random_range(0.5..2.0);
                    let amp = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                    let mut out = Vec::with_capacity(2 * n);
                    for a in amp {
                        out.extend(grid.coords().iter().map(|&v| {
                            let d = [v[0] - c[0], v[1] - c[1], v[2] - c[2]];
                            a * (-norm2(d) / (w * w)).exp()
                        }));
                    }
                    out
                }
            };
            let nrm = (grid.weight() * dot(&f, &f)).sqrt();
            f.iter_mut().for_each(|a| *a /= nrm);
            f
        })
        .collect()
}

/// `(-Lg, g) ≥ λ_h |(I-P)g|²_{σ,0} - tol` on seeded random fields, with `P`
/// the orthogonal projection onto the kernel.
pub fn coercivity_inequality(asm: &CollisionAssembly, lambda_h: f64, samples: usize, seed: u64, tol: f64) -> Result<InequalityCheck> {
    let grid = &asm.grid;
    let n = grid.len();
    let weights = sigma_weights(grid, 0.0, asm.gamma)?;
    let basis = NullBasis::new(grid, &asm.maxwellian);
    let mut min_margin = f64::INFINITY;
    for g in random_fields(grid, samples, seed) {
        let lg = asm.apply_l(&g);
        let form = -grid.weight() * dot(&lg, &g);
        let pg = basis.project(&g);
        let perp: Vec<f64> = g.iter().zip(&pg).map(|(a, b)| a - b).collect();
        let s2 = sigma_norm_sq_with(grid, &perp[..n], &weights) + sigma_norm_sq_with(grid, &perp[n..], &weights);
        min_margin = min_margin.min(form - lambda_h * s2);
    }
    Ok(InequalityCheck { samples, min_margin, tolerance: tol, holds: min_margin >= -tol })
}
