//! Fourier differentiation and the Poisson solve on the periodic `x` grid.

use num_complex::Complex64;

use crate::fft::FftNd;
use crate::grid::SpatialGrid;

/// Spectral calculus on one spatial grid. Modes with a Nyquist index on any
/// axis carry no derivative and are treated as unresolved.
pub struct Spectral {
    pub grid: SpatialGrid,
    fft: FftNd,
    /// Wavevector of every DFT index.
    pub k: Vec<[f64; 3]>,
    pub unresolved: Vec<bool>,
}

impl Spectral {
    pub fn new(grid: &SpatialGrid) -> Self {
        let fft = FftNd::new(&grid.shape());
        let mut k = Vec::with_capacity(grid.len());
        let mut unresolved = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let m = grid.unindex(idx);
            let mut kv = [0.0; 3];
            let mut nyq = false;
            for a in 0..grid.dim {
                kv[a] = grid.wavenumber(m[a]);
                nyq |= grid.is_nyquist(m[a]);
            }
            k.push(kv);
            unresolved.push(nyq);
        }
        Self { grid: grid.clone(), fft, k, unresolved }
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut z: Vec<Complex64> = f.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        self.fft.forward(&mut z);
        z
    }

    pub fn forward_complex(&self, z: &mut [Complex64]) {
        self.fft.forward(z);
    }

    pub fn inverse_complex(&self, z: &mut [Complex64]) {
        self.fft.inverse(z);
    }

    /// Real part of the inverse transform.
    pub fn inverse(&self, mut z: Vec<Complex64>) -> Vec<f64> {
        self.fft.inverse(&mut z);
        z.into_iter().map(|c| c.re).collect()
    }

    /// `∂_{x_axis} f`; zero for axes beyond the grid dimension.
    pub fn derivative(&self, f: &[f64], axis: usize) -> Vec<f64> {
        if axis >= self.grid.dim {
            return vec![0.0; f.len()];
        }
        let mut z = self.forward(f);
        for (zi, k) in z.iter_mut().zip(&self.k) {
            *zi *= Complex64::new(0.0, k[axis]);
        }
        self.inverse(z)
    }

    pub fn gradient(&self, f: &[f64]) -> [Vec<f64>; 3] {
        [self.derivative(f, 0), self.derivative(f, 1), self.derivative(f, 2)]
    }

    pub fn divergence(&self, e: &[Vec<f64>; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (a, comp) in e.iter().enumerate().take(self.grid.dim) {
            for (o, d) in out.iter_mut().zip(self.derivative(comp, a)) {
                *o += d;
            }
        }
        out
    }

    /// Drop unresolved modes.
    pub fn band_limit(&self, f: &[f64]) -> Vec<f64> {
        let mut z = self.forward(f);
        for (zi, &u) in z.iter_mut().zip(&self.unresolved) {
            if u {
                *zi = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse(z)
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / f.len() as f64
    }

    /// `‖f‖_{L²_x}`.
    pub fn l2(&self, f: &[f64]) -> f64 {
        (f.iter().map(|a| a * a).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }
}

/// Potential, field and charge after one Poisson solve.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub phi: Vec<f64>,
    /// `E = -∇φ`; components beyond the grid dimension are zero.
    pub e: [Vec<f64>; 3],
    /// Charge actually used: the input with its mean and unresolved modes removed.
    pub rho: Vec<f64>,
    pub removed_mean: f64,
    /// `L²_x` norm of the removed unresolved part.
    pub removed_unresolved: f64,
}

/// `-Δφ = ρ` with zero-mean `φ`, `E = -∇φ`, all spectral.
pub fn solve_poisson(spec: &Spectral, rho: &[f64]) -> FieldState {
    let mut z = spec.forward(rho);
    let n = rho.len() as f64;
    let removed_mean = z[0].re / n;
    z[0] = Complex64::new(0.0, 0.0);
    let mut dropped = vec![Complex64::new(0.0, 0.0); z.len()];
    for (i, &u) in spec.unresolved.iter().enumerate() {
        if u {
            dropped[i] = z[i];
            z[i] = Complex64::new(0.0, 0.0);
        }
    }
    let removed_unresolved = spec.l2(&spec.inverse(dropped));
    let rho_used = spec.inverse(z.clone());
    let mut phi_hat = z;
    for (p, k) in phi_hat.iter_mut().zip(&spec.k) {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        *p = if k2 > 0.0 { *p / k2 } else { Complex64::new(0.0, 0.0) };
    }
    let mut e: [Vec<f64>; 3] = Default::default();
    for (a, comp) in e.iter_mut().enumerate() {
        if a < spec.grid.dim {
            let d: Vec<Complex64> = phi_hat.iter().zip(&spec.k).map(|(p, k)| *p * Complex64::new(0.0, -k[a])).collect();
            *comp = spec.inverse(d);
        } else {
            *comp = vec![0.0; rho.len()];
        }
    }
    FieldState { phi: spec.inverse(phi_hat), e, rho: rho_used, removed_mean, removed_unresolved }
}
