//! Dense linear-algebra helpers on top of LAPACK.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Cholesky, Eigh, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, VplError};

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(a: &Array2<f64>) -> Result<Array2<f64>> {
    a.cholesky(UPLO::Lower).map_err(|e| VplError::Linalg(format!("cholesky: {e}")))
}

/// Solve `L x = b` for lower-triangular `L` (row-major).
pub fn solve_lower(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = b.to_vec();
    for i in 0..n {
        let row = l.row(i);
        let row = row.as_slice().expect("contiguous row");
        let mut s = x[i];
        for j in 0..i {
            s -= row[j] * x[j];
        }
        x[i] = s / row[i];
    }
    x
}

/// Solve `Lᵀ x = b` for lower-triangular `L` (row-major).
pub fn solve_lower_t(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[[i, i]];
        let xi = x[i];
        let row = l.row(i);
        let row = row.as_slice().expect("contiguous row");
        for j in 0..i {
            x[j] -= row[j] * xi;
        }
    }
    x
}

pub fn matvec(a: &Array2<f64>, x: &[f64]) -> Vec<f64> {
    a.dot(&Array1::from(x.to_vec())).to_vec()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn eigvalsh(a: &Array2<f64>) -> Result<Vec<f64>> {
    let (e, _) = a.eigh(UPLO::Lower).map_err(|e| VplError::Linalg(format!("eigh: {e}")))?;
    Ok(e.to_vec())
}

/// Generalized symmetric-definite eigenvalues of `(a, b)`, ascending.
pub fn generalized_eigvalsh(a: &Array2<f64>, b: &Array2<f64>) -> Result<Vec<f64>> {
    let (e, _) = (a.clone(), b.clone()).eigh(UPLO::Lower).map_err(|e| VplError::Linalg(format!("sygv: {e}")))?;
    Ok(e.to_vec())
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    /// Largest Ritz values, descending.
    pub top: Vec<f64>,
    pub iterations: usize,
    /// Residual bound of the largest Ritz pair.
    pub residual: f64,
}

/// Largest eigenvalues of a symmetric operator by Lanczos with full
/// reorthogonalisation.
pub fn lanczos_top(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    n: usize,
    max_iter: usize,
    rel_tol: f64,
    seed: u64,
) -> Result<LanczosResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nrm = norm(&q);
    q.iter_mut().for_each(|a| *a /= nrm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let max_iter = max_iter.min(n);
    let mut last = LanczosResult { top: vec![], iterations: 0, residual: f64::INFINITY };
    for k in 0..max_iter {
        let mut w = apply(&basis[k]);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let bnext = norm(&w);
        let check = k + 1 == max_iter || bnext < 1e-14 * a.abs().max(1e-300) || (k + 1) % 5 == 0;
        if check {
            let m = alpha.len();
            let t = Array2::from_shape_fn((m, m), |(i, j)| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let (ev, vecs) = t.eigh(UPLO::Lower).map_err(|e| VplError::Linalg(format!("tridiagonal eigh: {e}")))?;
            let theta = ev[m - 1];
            let resid = bnext * vecs[[m - 1, m - 1]].abs();
            let top: Vec<f64> = ev.iter().rev().take(4).copied().collect();
            last = LanczosResult { top, iterations: k + 1, residual: resid };
            if resid <= rel_tol * theta.abs() || bnext < 1e-14 * theta.abs() {
                return Ok(last);
            }
        }
        if k + 1 == max_iter {
            break;
        }
        beta.push(bnext);
        basis.push(w.iter().map(|x| x / bnext).collect());
    }
    if last.residual.is_finite() && last.iterations == n {
        return Ok(last);
    }
    Err(VplError::Numerical(format!(
        "Lanczos did not converge in {} iterations (residual {:.3e})",
        last.iterations, last.residual
    )))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
