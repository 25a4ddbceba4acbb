//! Mode evolution and the whole-space decay emulation.
//!
//! `‖∇^m_x w^l f(t)‖² = (2π)^{-3} ∫ |y|^{2m} E_l(t, y) dy` is evaluated for
//! radial data from a sweep of `|y|` along one axis with the surface factor
//! `4π|y|²`, then a power law is fitted on a late time window.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Result, VplError};
use crate::grid::{norm2, VelocityWeight};
use crate::mode::{matvec, ModeFactory, ModeOperator, Scheme, C64};

/// Samples of one mode evolution.
#[derive(Debug, Clone, Serialize)]
pub struct ModeTrajectory {
    pub y: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `|w^l f̂|² + |Ê|²` at the sample times.
    pub functional: Vec<f64>,
    /// `(-L f̂, f̂)` at the sample times.
    pub dissipation: Vec<f64>,
    pub steps: usize,
    /// Steps where the functional grew by more than roundoff.
    pub violations: usize,
    /// Largest growth divided by ten times the local truncation bound.
    pub worst_violation_ratio: f64,
    /// Full two-species states at the sample times, when requested.
    #[serde(skip)]
    pub states: Vec<Vec<C64>>,
}

impl ModeTrajectory {
    pub fn monotone_within_tolerance(&self) -> bool {
        self.worst_violation_ratio <= 1.0
    }

    /// Signals growth of the functional beyond ten local truncation errors.
    pub fn check_monotone(&self) -> Result<()> {
        if self.monotone_within_tolerance() {
            Ok(())
        } else {
            Err(VplError::Numerical(format!(
                "mode functional at |y| = {} grew by {:.3} x 10 LTE",
                self.y, self.worst_violation_ratio
            )))
        }
    }
}

/// Options of [`evolve_mode`].
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub dt: f64,
    pub scheme: Scheme,
    /// Weight exponent `l` of the functional.
    pub l: f64,
    pub gamma: f64,
    /// Estimate the local truncation error by step doubling.
    pub monitor: bool,
    pub record_states: bool,
}

/// Relative growth per step attributed to roundoff.
const ROUNDOFF: f64 = 1e-12;

/// Evolve sector data `u0` (one vector per sector, `None` where zero) and
/// sample the functional at `times`, which must be multiples of `dt`.
pub fn evolve_mode(op: &ModeOperator, u0: &[Option<Vec<C64>>], times: &[f64], opt: &EvolveOptions) -> Result<ModeTrajectory> {
    let dt = opt.dt;
    let mut sample_steps = Vec::with_capacity(times.len());
    for &t in times {
        let k = (t / dt).round();
        if ((k * dt) - t).abs() > 1e-9 * t.max(1.0) {
            return Err(VplError::Config(format!("sample time {t} is not a multiple of dt = {dt}")));
        }
        sample_steps.push(k as usize);
    }
    if sample_steps.windows(2).any(|w| w[1] < w[0]) {
        return Err(VplError::Config("sample times must be increasing".into()));
    }
    let active: Vec<usize> = (0..u0.len()).filter(|&i| u0[i].is_some()).collect();
    let mut prop: Vec<Option<Array2<C64>>> = vec![None; u0.len()];
    let mut half2: Vec<Option<Array2<C64>>> = vec![None; u0.len()];
    for &i in &active {
        let p = op.propagator(i, dt, opt.scheme)?;
        if opt.scheme == Scheme::CnImex {
            crate::solver::check_stable(op, i, dt)?;
        }
        prop[i] = Some(p);
        if opt.monitor {
            let h = op.propagator(i, 0.5 * dt, opt.scheme)?;
            half2[i] = Some(h.dot(&h));
        }
    }
    let weights = if opt.l != 0.0 { Some(op.weights(opt.gamma, opt.l)?) } else { None };
    let mut state: Vec<Vec<C64>> = u0.iter().map(|u| u.clone().unwrap_or_default()).collect();
    let energy = |x: &[Vec<C64>]| op.energy(x, weights.as_deref());
    let w_norm = |x: &[Vec<C64>]| op.energy(x, None).sqrt();
    let dissipation = |x: &[Vec<C64>]| -> f64 {
        let h3 = op.grid.weight();
        active
            .iter()
            .map(|&i| {
                let m = &op.sectors[i].neg_l;
                let xs = &x[i];
                let mut acc = 0.0;
                for r in 0..xs.len() {
                    let mut row = C64::new(0.0, 0.0);
                    for q in 0..xs.len() {
                        row += xs[q] * m[[r, q]];
                    }
                    acc += (xs[r].conj() * row).re;
                }
                acc * h3
            })
            .sum()
    };
    let last = sample_steps.last().copied().unwrap_or(0);
    let mut traj = ModeTrajectory {
        y: op.y_norm2().sqrt(),
        dt,
        times: Vec::new(),
        functional: Vec::new(),
        dissipation: Vec::new(),
        steps: last,
        violations: 0,
        worst_violation_ratio: 0.0,
        states: Vec::new(),
    };
    let mut next = 0;
    let mut e_now = energy(&state);
    for step in 0..=last {
        while next < sample_steps.len() && sample_steps[next] == step {
            traj.times.push(times[next]);
            traj.functional.push(e_now);
            traj.dissipation.push(dissipation(&state));
            if opt.record_states {
                traj.states.push(op.from_sectors(&state));
            }
            next += 1;
        }
        if step == last {
            break;
        }
        let mut new_state = state.clone();
        let mut lte = 0.0;
        for &i in &active {
            new_state[i] = matvec(prop[i].as_ref().expect("propagator"), &state[i]);
        }
        if opt.monitor {
            let mut diff = vec![Vec::new(); state.len()];
            for &i in &active {
                let fine = matvec(half2[i].as_ref().expect("half step"), &state[i]);
                diff[i] = fine.iter().zip(&new_state[i]).map(|(a, b)| (a - b) * (4.0 / 3.0)).collect();
            }
            lte = w_norm(&diff);
        }
        let e_new = energy(&new_state);
        let growth = e_new - e_now;
        if growth > ROUNDOFF * e_now {
            traj.violations += 1;
            let bound = 10.0 * (2.0 * e_now.sqrt() * lte + lte * lte);
            let ratio = if bound > 0.0 { growth / bound } else { f64::INFINITY };
            traj.worst_violation_ratio = traj.worst_violation_ratio.max(ratio);
        }
        state = new_state;
        e_now = e_new;
    }
    Ok(traj)
}

/// Configuration of [`whole_space_decay`].
#[derive(Debug, Clone, Serialize)]
pub struct DecayConfig {
    pub m: u32,
    pub l: f64,
    /// Extra data weight: the initial datum is `w^{-(l + l*)} g₀`.
    pub l_star: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub amplitude: f64,
    /// Base step; the step at `|y|` is `dt_base / max(1, ⌈|y|⌉)`.
    pub dt_base: f64,
    pub scheme: Scheme,
    /// Fit samples per decade of `t`.
    pub samples_per_decade: usize,
    pub monitor: bool,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            m: 0,
            l: 0.0,
            l_star: 0.0,
            y_min: 0.005,
            y_max: 8.0,
            ny: 48,
            t_lo: 10.0,
            t_hi: 100.0,
            amplitude: 1e-2,
            dt_base: 0.05,
            scheme: Scheme::ImplicitMidpoint,
            samples_per_decade: 30,
            monitor: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerFit {
    pub slope: f64,
    /// Normal-approximation 95% interval.
    pub slope_ci: [f64; 2],
    pub r2: f64,
    pub intercept: f64,
}

/// Least-squares line through `(ln t, ln y)`.
pub fn fit_power_law(t: &[f64], y: &[f64]) -> Result<PowerFit> {
    if t.len() < 3 || t.len() != y.len() {
        return Err(VplError::Insufficient("power-law fit needs at least 3 samples".into()));
    }
    let xs: Vec<f64> = t.iter().map(|a| a.ln()).collect();
    let ys: Vec<f64> = y.iter().map(|a| a.ln()).collect();
    if ys.iter().any(|a| !a.is_finite()) {
        return Err(VplError::Numerical("non-positive values in power-law fit".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let se = (sse / (n - 2.0) / sxx).sqrt();
    Ok(PowerFit { slope, slope_ci: [slope - 1.96 * se, slope + 1.96 * se], r2, intercept })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub gamma: f64,
    pub m: u32,
    pub l: f64,
    pub l_star: f64,
    pub slope: f64,
    pub slope_ci: [f64; 2],
    pub r2: f64,
    pub y_grid: Vec<f64>,
    pub t_window: [f64; 2],
    pub times: Vec<f64>,
    /// `‖∇^m w^l f(t)‖` at `times`.
    pub norms: Vec<f64>,
    pub modes: Vec<ModeTrajectory>,
}

impl DecayReport {
    /// Signals a fit window without an algebraic regime.
    pub fn check_algebraic(&self) -> Result<()> {
        if self.r2 < 0.98 {
            return Err(VplError::Numerical(format!("no algebraic regime on the fit window (R² = {:.4})", self.r2)));
        }
        Ok(())
    }
}

/// Log-spaced nodes and trapezoid weights in `ln y`.
pub fn log_grid(y_min: f64, y_max: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (y_min.ln(), y_max.ln());
    let h = (b - a) / (n - 1) as f64;
    let y: Vec<f64> = (0..n).map(|j| (a + h * j as f64).exp()).collect();
    let w: Vec<f64> = (0..n).map(|j| if j == 0 || j == n - 1 { 0.5 * h } else { h }).collect();
    (y, w)
}

/// Sample times: a coarse uniform grid from 0 plus log-spaced fit times, all
/// multiples of `quantum`.
pub fn sample_times(t_lo: f64, t_hi: f64, per_decade: usize, quantum: f64) -> (Vec<f64>, Vec<f64>) {
    let q = |t: f64| (t / quantum).round() * quantum;
    let decades = (t_hi / t_lo).log10();
    let nfit = (decades * per_decade as f64).ceil() as usize + 1;
    let mut fit: Vec<f64> = (0..nfit).map(|k| q(t_lo * (t_hi / t_lo).powf(k as f64 / (nfit - 1) as f64))).collect();
    fit.dedup_by(|a, b| (*a - *b).abs() < 0.5 * quantum);
    let mut all: Vec<f64> = (0..=(t_hi.ceil() as usize)).map(|k| q(k as f64)).filter(|&t| t <= t_hi).collect();
    all.extend(fit.iter().copied());
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    all.dedup_by(|a, b| (*a - *b).abs() < 0.5 * quantum);
    (all, fit)
}

/// Default datum `g₀ = ε (|v|²-3)√μ (1,1)` weighted by `w^{-(l+l*)}`, as a full two-species field.
pub fn initial_datum(fac: &ModeFactory, cfg: &DecayConfig) -> Result<Vec<f64>> {
    let grid = fac.grid();
    let w = VelocityWeight::new(fac.asm.gamma)?;
    let sm = &fac.asm.maxwellian.sqrt_mu;
    let half: Vec<f64> = grid
        .coords()
        .iter()
        .zip(sm)
        .map(|(&v, s)| cfg.amplitude * (norm2(v) - 3.0) * s * w.pow(v, -(cfg.l + cfg.l_star)))
        .collect();
    Ok([half.clone(), half].concat())
}

pub fn whole_space_decay(fac: &ModeFactory, cfg: &DecayConfig) -> Result<DecayReport> {
    if cfg.ny < 2 || !(cfg.y_min > 0.0 && cfg.y_max > cfg.y_min) {
        return Err(VplError::Config("decay needs 0 < y_min < y_max and ny >= 2".into()));
    }
    let quantum = cfg.dt_base;
    let (times, fit_times) = sample_times(cfg.t_lo, cfg.t_hi, cfg.samples_per_decade, quantum);
    let (ys, wq) = log_grid(cfg.y_min, cfg.y_max, cfg.ny);
    let f0 = initial_datum(fac, cfg)?;
    let u0: Vec<C64> = f0.iter().map(|&a| C64::new(a, 0.0)).collect();
    let mut norms2 = vec![0.0; times.len()];
    let mut modes = Vec::with_capacity(ys.len());
    for (&y, &wj) in ys.iter().zip(&wq) {
        let op = fac.operator([y, 0.0, 0.0]);
        let xs = op.to_sectors(&u0);
        let data: Vec<Option<Vec<C64>>> =
            xs.into_iter().map(|x| if x.iter().any(|z| z.norm_sqr() > 0.0) { Some(x) } else { None }).collect();
        let dt = cfg.dt_base / y.ceil().max(1.0);
        let opt = EvolveOptions { dt, scheme: cfg.scheme, l: cfg.l, gamma: fac.asm.gamma, monitor: cfg.monitor, record_states: false };
        let traj = evolve_mode(&op, &data, &times, &opt)?;
        // dy = y d(ln y); surface 4π y²; Parseval (2π)^{-3}.
        let factor = wj * y * 4.0 * std::f64::consts::PI * y * y * y.powi(2 * cfg.m as i32) / (2.0 * std::f64::consts::PI).powi(3);
        for (acc, e) in norms2.iter_mut().zip(&traj.functional) {
            *acc += factor * e;
        }
        modes.push(traj);
    }
    let norms: Vec<f64> = norms2.iter().map(|a| a.sqrt()).collect();
    let (ft, fv): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&norms)
        .filter(|(t, _)| fit_times.iter().any(|f| (*f - **t).abs() < 0.5 * quantum))
        .map(|(t, v)| (*t, *v))
        .unzip();
    let fit = fit_power_law(&ft, &fv)?;
    Ok(DecayReport {
        gamma: fac.asm.gamma,
        m: cfg.m,
        l: cfg.l,
        l_star: cfg.l_star,
        slope: fit.slope,
        slope_ci: fit.slope_ci,
        r2: fit.r2,
        y_grid: ys,
        t_window: [cfg.t_lo, cfg.t_hi],
        times,
        norms,
        modes,
    })
}

/// Exponential rate `λ̂` of `E(t) ≤ E(0) e^{-λ̂ t}`: the smallest `-ln(E(t)/E(0))/t`.
pub fn exponential_rate(traj: &ModeTrajectory) -> f64 {
    let e0 = traj.functional[0];
    traj.times
        .iter()
        .zip(&traj.functional)
        .skip(1)
        .map(|(t, e)| -(e / e0).ln() / t)
        .fold(f64::INFINITY, f64::min)
}
