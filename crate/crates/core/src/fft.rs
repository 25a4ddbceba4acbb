//! Multi-dimensional FFTs and zero-padded convolution on cubic grids.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Separable n-dimensional FFT over a row-major array.
pub struct FftNd {
    shape: Vec<usize>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self { shape: shape.to_vec(), fwd, inv }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform including the `1/N` normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let s = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len());
        let total = self.len();
        let mut line = Vec::new();
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.shape[axis];
            if n == 1 {
                continue;
            }
            let stride: usize = self.shape[axis + 1..].iter().product();
            let block = n * stride;
            line.resize(n, Complex64::new(0.0, 0.0));
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (t, z) in line.iter_mut().enumerate() {
                        *z = data[base + t * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (t, z) in line.iter().enumerate() {
                        data[base + t * stride] = *z;
                    }
                }
            }
        }
    }
}

/// Index of the symmetric 3×3 component `(i, j)` in `[xx, xy, xz, yy, yz, zz]` order.
#[inline]
pub const fn sym(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    match (a, b) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

/// Linear (non-periodic) convolution `(Φ ⋆ g)(c) = Σ_{c'} Φ(c - c') g(c')` on an
/// `m³` grid with a symmetric-matrix-valued kernel, via zero padding to `(2m)³`.
pub struct MatrixConvolver {
    m: usize,
    p: usize,
    fft: FftNd,
    kernel_hat: [Vec<Complex64>; 6],
}

impl MatrixConvolver {
    /// `kernel(d)` returns the six components at integer offset `d`, `|d_a| < m`.
    pub fn new(m: usize, kernel: impl Fn([i64; 3]) -> [f64; 6]) -> Self {
        let p = 2 * m;
        let fft = FftNd::new(&[p, p, p]);
        let mut comps: [Vec<Complex64>; 6] = Default::default();
        for c in comps.iter_mut() {
            *c = vec![Complex64::new(0.0, 0.0); p * p * p];
        }
        let wrap = |d: i64| -> usize { d.rem_euclid(p as i64) as usize };
        let r = m as i64 - 1;
        for a in -r..=r {
            for b in -r..=r {
                for c in -r..=r {
                    let k = kernel([a, b, c]);
                    let idx = (wrap(a) * p + wrap(b)) * p + wrap(c);
                    for s in 0..6 {
                        comps[s][idx] = Complex64::new(k[s], 0.0);
                    }
                }
            }
        }
        for c in comps.iter_mut() {
            fft.forward(c);
        }
        Self { m, p, fft, kernel_hat: comps }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn pad(&self, g: &[f64]) -> Vec<Complex64> {
        let (m, p) = (self.m, self.p);
        let mut out = vec![Complex64::new(0.0, 0.0); p * p * p];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    out[(i * p + j) * p + k] = Complex64::new(g[(i * m + j) * m + k], 0.0);
                }
            }
        }
        self.fft.forward(&mut out);
        out
    }

    fn unpad(&self, mut z: Vec<Complex64>) -> Vec<f64> {
        let (m, p) = (self.m, self.p);
        self.fft.inverse(&mut z);
        let mut out = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    out[(i * m + j) * m + k] = z[(i * p + j) * p + k].re;
                }
            }
        }
        out
    }

    /// `out_i = Σ_j Φ^{ij} ⋆ g_j`.
    pub fn apply_vector(&self, g: [&[f64]; 3]) -> [Vec<f64>; 3] {
        let hats: Vec<Vec<Complex64>> = g.iter().map(|c| self.pad(c)).collect();
        let n = self.p * self.p * self.p;
        let mut out: [Vec<f64>; 3] = Default::default();
        for i in 0..3 {
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for (j, h) in hats.iter().enumerate() {
                let k = &self.kernel_hat[sym(i, j)];
                for t in 0..n {
                    acc[t] += k[t] * h[t];
                }
            }
            out[i] = self.unpad(acc);
        }
        out
    }

    /// `out^{ij} = Φ^{ij} ⋆ g` in symmetric storage.
    pub fn apply_scalar(&self, g: &[f64]) -> [Vec<f64>; 6] {
        let h = self.pad(g);
        let mut out: [Vec<f64>; 6] = Default::default();
        for s in 0..6 {
            let prod: Vec<Complex64> = self.kernel_hat[s].iter().zip(&h).map(|(a, b)| a * b).collect();
            out[s] = self.unpad(prod);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = FftNd::new(&[4, 6, 5]);
        let data: Vec<Complex64> = (0..120).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut z = data.clone();
        f.forward(&mut z);
        f.inverse(&mut z);
        for (a, b) in z.iter().zip(&data) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let m = 5;
        let kern = |d: [i64; 3]| -> [f64; 6] {
            let r = (d[0] * d[0] + 2 * d[1] * d[1] + 3 * d[2] * d[2]) as f64;
            [r, 0.1 * d[0] as f64, 0.2, 1.0 / (1.0 + r), (d[1] * d[2]) as f64, -r * 0.5]
        };
        let conv = MatrixConvolver::new(m, kern);
        let g: Vec<f64> = (0..m * m * m).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let out = conv.apply_scalar(&g);
        let vec_out = conv.apply_vector([&g, &g, &g]);
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let mut direct = [0.0; 6];
                    for a in 0..m {
                        for b in 0..m {
                            for c in 0..m {
                                let d = [i as i64 - a as i64, j as i64 - b as i64, k as i64 - c as i64];
                                let kv = kern(d);
                                for s in 0..6 {
                                    direct[s] += kv[s] * g[(a * m + b) * m + c];
                                }
                            }
                        }
                    }
                    let idx = (i * m + j) * m + k;
                    for s in 0..6 {
                        assert!((out[s][idx] - direct[s]).abs() < 1e-9 * (1.0 + direct[s].abs()));
                    }
                    let row0 = direct[sym(0, 0)] + direct[sym(0, 1)] + direct[sym(0, 2)];
                    assert!((vec_out[0][idx] - row0).abs() < 1e-9 * (1.0 + row0.abs()));
                }
            }
        }
    }
}
