//! Instant energy, high-order energy and dissipation functionals with the
//! time weights `ψ_k`, plus the smoothing and energy-inequality monitors.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VplError};
use crate::grid::{Branch, PhaseGrid, VelocityWeight};
use crate::macroscopic::MacroContext;
use crate::mode::C64;
use crate::norms::{diff_v, sigma_norm_sq_with, sigma_weights, z1};
use crate::spectral::{FieldState, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiMode {
    One,
    Tn,
}

impl std::str::FromStr for PsiMode {
    type Err = VplError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Self::One),
            "tn" => Ok(Self::Tn),
            other => Err(VplError::Config(format!("unknown psi mode '{other}' (one | tn)"))),
        }
    }
}

/// `ψ = 1` or `ψ = t^N` with `N = N(α)` for `|α| > 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiWeight {
    pub mode: PsiMode,
    /// `N` for `|α| ≤ 3`.
    pub n_low: f64,
}

impl PsiWeight {
    pub fn one() -> Self {
        Self { mode: PsiMode::One, n_low: 20.0 }
    }

    pub fn tn() -> Self {
        Self { mode: PsiMode::Tn, n_low: 20.0 }
    }

    /// Largest `δ₁ ∈ (0, 1/2]` with
    /// `-2((|β|-3)/(|α|-3)(2|α|/δ₁ + 1) - 1) ≤ -|β|`; the constraint only
    /// binds for `|α|, |β| > 3`.
    pub fn delta1(a: usize, b: usize) -> f64 {
        if a <= 3 || b <= 3 {
            return 0.5;
        }
        let r = (b as f64 - 3.0) / (a as f64 - 3.0);
        // r (2a/δ + 1) ≥ b/2 + 1
        let need = (0.5 * b as f64 + 1.0) / r - 1.0;
        if need <= 0.0 {
            0.5
        } else {
            (2.0 * a as f64 / need).min(0.5)
        }
    }

    /// `N(α)` from `-(2N(|α|-3) - 1)/2 = -|α|/δ₁`, or `n_low` for `|α| ≤ 3`.
    pub fn n_of(&self, a: usize, b: usize) -> f64 {
        if a <= 3 {
            return self.n_low;
        }
        let d1 = Self::delta1(a, b);
        (2.0 * a as f64 / d1 + 1.0) / (2.0 * (a as f64 - 3.0))
    }

    /// `ψ_k(t)` with the exponent of the summand `(|α|, |β|)`.
    pub fn psi_k(&self, k: i64, t: f64, a: usize, b: usize) -> f64 {
        if k <= 0 || self.mode == PsiMode::One {
            return 1.0;
        }
        let n = self.n_of(a, b);
        t.powf(n * k as f64)
    }
}

/// One summand of the functionals.
#[derive(Debug, Clone, Serialize)]
pub struct Summand {
    /// `E`, `Pf`, `perp` (energy) or `dE`, `dPf`, `dperp` (dissipation).
    pub kind: &'static str,
    pub alpha: [u8; 3],
    pub beta: [u8; 3],
    pub value: f64,
}

impl Summand {
    pub fn name(&self) -> String {
        let a = format!("{}{}{}", self.alpha[0], self.alpha[1], self.alpha[2]);
        let b = format!("{}{}{}", self.beta[0], self.beta[1], self.beta[2]);
        match self.kind {
            "E" | "Pf" | "dE" | "dPf" => format!("{}[a{a}]", self.kind),
            _ => format!("{}[a{a}b{b}]", self.kind),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    pub k: usize,
    pub l: f64,
    pub psi: PsiMode,
    pub summands: Vec<Summand>,
    pub energy: f64,
    pub energy_h: f64,
    pub dissipation: f64,
    /// `‖∂_tφ‖_{L∞}` with `∂_tφ = Δ^{-1}∇·G`.
    pub dphi_dt_inf: f64,
    pub z1: f64,
}

/// Multi-indices of total order `≤ k` supported on the first `dim` axes.
pub fn multi_indices(dim: usize, k: usize) -> Vec<[u8; 3]> {
    let mut out = Vec::new();
    for a in 0..=k {
        for b in 0..=k - a {
            for c in 0..=k - a - b {
                let m = [a as u8, b as u8, c as u8];
                if (dim..3).all(|ax| m[ax] == 0) {
                    out.push(m);
                }
            }
        }
    }
    out.sort_by_key(|m| (m[0] + m[1] + m[2], std::cmp::Reverse(*m)));
    out
}

fn order(m: &[u8; 3]) -> usize {
    (m[0] + m[1] + m[2]) as usize
}

/// Everything the functionals need on one phase grid.
pub struct EnergyContext<'a> {
    pub phase: &'a PhaseGrid,
    pub spec: &'a Spectral,
    pub ctx: &'a MacroContext,
    pub gamma: f64,
}

impl<'a> EnergyContext<'a> {
    fn nv(&self) -> usize {
        self.phase.v.len()
    }

    /// Central-difference stencils need `2K + 1` points per velocity axis and
    /// the spectral derivatives at least `K + 1` resolved modes.
    pub fn check_resolution(&self, k: usize) -> Result<()> {
        if self.phase.v.n < 2 * k + 1 {
            return Err(VplError::Config(format!("K = {k} too large for nv = {} (derivatives would be stencil noise)", self.phase.v.n)));
        }
        if self.phase.x.n < k + 1 {
            return Err(VplError::Config(format!("K = {k} too large for nx = {}", self.phase.x.n)));
        }
        Ok(())
    }

    /// `∂^α_x` of a phase field, spectrally.
    pub fn dx(&self, f: &[f64], alpha: [u8; 3]) -> Vec<f64> {
        if order(&alpha) == 0 {
            return f.to_vec();
        }
        let m = 2 * self.nv();
        let nx = self.spec.len();
        let mult: Vec<C64> = self
            .spec
            .k
            .iter()
            .map(|k| (0..3).fold(C64::new(1.0, 0.0), |acc, a| acc * C64::new(0.0, k[a]).powi(alpha[a] as i32)))
            .collect();
        let mut out = vec![0.0; f.len()];
        let mut col = vec![C64::new(0.0, 0.0); nx];
        for j in 0..m {
            for (ix, c) in col.iter_mut().enumerate() {
                *c = C64::new(f[ix * m + j], 0.0);
            }
            self.spec.forward_complex(&mut col);
            for (c, (w, &u)) in col.iter_mut().zip(mult.iter().zip(&self.spec.unresolved)) {
                *c = if u { C64::new(0.0, 0.0) } else { *c * w };
            }
            self.spec.inverse_complex(&mut col);
            for (ix, c) in col.iter().enumerate() {
                out[ix * m + j] = c.re;
            }
        }
        out
    }

    fn dx_scalar(&self, g: &[f64], alpha: [u8; 3]) -> Vec<f64> {
        let mut z = self.spec.forward(g);
        for (c, (k, &u)) in z.iter_mut().zip(self.spec.k.iter().zip(&self.spec.unresolved)) {
            let w = (0..3).fold(C64::new(1.0, 0.0), |acc, a| acc * C64::new(0.0, k[a]).powi(alpha[a] as i32));
            *c = if u { C64::new(0.0, 0.0) } else { *c * w };
        }
        self.spec.inverse(z)
    }

    /// `∂_v` along `axis` of every velocity block.
    fn dv(&self, f: &[f64], axis: usize) -> Vec<f64> {
        f.chunks(self.nv()).flat_map(|c| diff_v(&self.phase.v, c, axis)).collect()
    }

    fn l2sq(&self, f: &[f64]) -> f64 {
        f.iter().map(|a| a * a).sum::<f64>() * self.phase.v.weight() * self.phase.x.cell_volume()
    }

    fn weighted_l2sq(&self, f: &[f64], w2: &[f64]) -> f64 {
        let n = self.nv();
        f.chunks(n).map(|c| c.iter().zip(w2).map(|(a, w)| w * a * a).sum::<f64>()).sum::<f64>()
            * self.phase.v.weight()
            * self.phase.x.cell_volume()
    }

    /// `‖∂_tφ‖_{L∞}` from `∂_tφ = Δ^{-1}∇·G`.
    pub fn dphi_dt(&self, f: &[f64]) -> f64 {
        let st = self.ctx.macro_state(f);
        let div = self.spec.divergence(&st.g);
        let mut z = self.spec.forward(&div);
        for (c, k) in z.iter_mut().zip(&self.spec.k) {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            *c = if k2 > 0.0 { -*c / k2 } else { C64::new(0.0, 0.0) };
        }
        self.spec.inverse(z).iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// All summands of the three functionals at one state.
    pub fn report(&self, t: f64, f: &[f64], field: &FieldState, k: usize, l: f64, psi: &PsiWeight) -> Result<EnergyReport> {
        self.check_resolution(k)?;
        let w = VelocityWeight::new(self.gamma)?;
        let (pf, perp) = self.ctx.split(f);
        let alphas = multi_indices(self.phase.x.dim, k);
        let betas = multi_indices(3, k);
        let mut summands = Vec::new();
        let psi_of = |kk: i64, a: usize, b: usize| psi.psi_k(kk, t, a, b);
        let zero = [0u8; 3];
        for alpha in &alphas {
            let a = order(alpha);
            let p2 = psi_of(a as i64 - 3, a, 0).powi(2);
            let e2: f64 =
                field.e.iter().take(self.phase.x.dim).map(|c| self.spec.l2(&self.dx_scalar(c, *alpha)).powi(2)).sum();
            summands.push(Summand { kind: "E", alpha: *alpha, beta: zero, value: p2 * e2 });
            if a < k {
                summands.push(Summand { kind: "dE", alpha: *alpha, beta: zero, value: p2 * e2 });
            }
            let pa = self.l2sq(&self.dx(&pf, *alpha)) * p2;
            summands.push(Summand { kind: "Pf", alpha: *alpha, beta: zero, value: pa });
            if a >= 1 {
                summands.push(Summand { kind: "dPf", alpha: *alpha, beta: zero, value: pa });
            }
        }
        for alpha in &alphas {
            let a = order(alpha);
            let base = self.dx(&perp, *alpha);
            // ∂_β built up along the ordered list, each from a parent one order lower.
            let mut cache: Vec<([u8; 3], Vec<f64>)> = vec![(zero, base)];
            for beta in betas.iter().filter(|b| order(b) + a <= k) {
                let b = order(beta);
                let field_b = if b == 0 {
                    cache[0].1.clone()
                } else {
                    let ax = (0..3).find(|&ax| beta[ax] > 0).expect("nonzero beta");
                    let mut parent = *beta;
                    parent[ax] -= 1;
                    let src = &cache.iter().find(|(m, _)| *m == parent).expect("parent derivative").1;
                    let d = self.dv(src, ax);
                    cache.push((*beta, d.clone()));
                    d
                };
                let p2 = psi_of((a + b) as i64 - 3, a, b).powi(2);
                let lw = l - (a + b) as f64;
                let w2 = w.tabulate(&self.phase.v, 2.0 * lw);
                let en = p2 * self.weighted_l2sq(&field_b, &w2);
                summands.push(Summand { kind: "perp", alpha: *alpha, beta: *beta, value: en });
                let sw = sigma_weights(&self.phase.v, lw, self.gamma)?;
                let ds: f64 = field_b.chunks(self.nv()).map(|c| sigma_norm_sq_with(&self.phase.v, c, &sw)).sum::<f64>()
                    * self.phase.x.cell_volume();
                summands.push(Summand { kind: "dperp", alpha: *alpha, beta: *beta, value: p2 * ds });
            }
        }
        let sum = |pred: &dyn Fn(&Summand) -> bool| summands.iter().filter(|s| pred(s)).map(|s| s.value).sum::<f64>();
        let energy = sum(&|s| matches!(s.kind, "E" | "Pf" | "perp"));
        let energy_h = sum(&|s| matches!(s.kind, "E" | "perp") || (s.kind == "Pf" && order(&s.alpha) >= 1));
        let dissipation = sum(&|s| matches!(s.kind, "dE" | "dPf" | "dperp"));
        Ok(EnergyReport {
            t,
            k,
            l,
            psi: psi.mode,
            summands,
            energy,
            energy_h,
            dissipation,
            dphi_dt_inf: self.dphi_dt(f),
            z1: z1(self.phase, f),
        })
    }
}

/// `X(t)` from a history of `(t, E_{K,l₀}, E^h_{K,l₀}, E_{K,l₀+l₁})`; the
/// last entry is only used for soft potentials.
pub fn x_functional(history: &[(f64, f64, f64, f64)], branch: Branch, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(history.len());
    let (mut s1, mut s2, mut s3) = (0.0f64, 0.0f64, 0.0f64);
    for &(t, e, eh, e_extra) in history {
        match branch {
            Branch::Hard => {
                s1 = s1.max((1.0 + t).powf(1.5) * e);
                s2 = s2.max((1.0 + t).powf(2.5) * eh);
                out.push(s1 + s2);
            }
            Branch::Soft => {
                s1 = s1.max(e_extra);
                s2 = s2.max((1.0 + t).powf(1.5) * e);
                s3 = s3.max((1.0 + t).powf(1.5 + p) * eh);
                out.push(s1 + s2 + s3);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub lambda: f64,
    pub samples: usize,
    /// Smallest `C` making every sample hold.
    pub c_required: f64,
    /// 99th percentile of the per-sample `C`.
    pub c_meas: f64,
    /// Fraction of samples with `LHS ≤ RHS` at `(λ, C_meas)`.
    pub fraction_holding: f64,
    /// Largest `λ` for which every sample holds with `C = C_meas`.
    pub lambda_max: f64,
}

/// `LHS_k = (E_{k+1} - E_{k-1})/(2Δt) + λ D_k` against `RHS_k = C ‖∂_tφ‖_∞ E_k`
/// on uniformly spaced reports.
pub fn energy_inequality_monitor(reports: &[EnergyReport], lambda: f64) -> Result<InequalityReport> {
    if reports.len() < 3 {
        return Err(VplError::Insufficient(format!("energy inequality needs 3 reports, got {}", reports.len())));
    }
    let dt = reports[1].t - reports[0].t;
    if !(dt > 0.0) || reports.windows(2).any(|p| ((p[1].t - p[0].t) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(VplError::Config("energy inequality needs uniformly spaced reports".into()));
    }
    let mut cs = Vec::new();
    let mut rows = Vec::new();
    for k in 1..reports.len() - 1 {
        let de = (reports[k + 1].energy - reports[k - 1].energy) / (2.0 * dt);
        let lhs = de + lambda * reports[k].dissipation;
        let scale = reports[k].dphi_dt_inf * reports[k].energy;
        let c = if lhs <= 0.0 {
            0.0
        } else if scale > 0.0 {
            lhs / scale
        } else {
            f64::INFINITY
        };
        cs.push(c);
        rows.push((de, reports[k].dissipation, scale));
    }
    let mut sorted = cs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let c_required = *sorted.last().expect("samples");
    let idx = ((0.99 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    let c_meas = sorted[idx];
    let holding = cs.iter().filter(|&&c| c <= c_meas).count();
    let lambda_max = rows
        .iter()
        .filter(|(_, d, _)| *d > 0.0)
        .map(|(de, d, scale)| (c_meas * scale - de) / d)
        .fold(f64::INFINITY, f64::min);
    Ok(InequalityReport {
        lambda,
        samples: cs.len(),
        c_required,
        c_meas,
        fraction_holding: holding as f64 / cs.len() as f64,
        lambda_max,
    })
}

/// Time series of the smoothing diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingReport {
    pub times: Vec<f64>,
    /// `E_{K,l}(t)` with `ψ = t^N`.
    pub energy: Vec<f64>,
    pub e3_initial: f64,
    /// `sup_t E_{K,l}(t) / E_{3,l}(0)`.
    pub constant: f64,
    /// The `ψ`-weighted summands with `|α|+|β| > 3` at `t = 0`.
    pub higher_at_zero: f64,
    /// `‖w^{l-|α|-|β|} ∂^α_β f(τ)‖` at the final time, by summand name.
    pub plain_norms: Vec<(String, f64)>,
    /// `‖⟨v⟩^C f‖_{L²_{v,x}}` along the run (soft potentials).
    pub moment_norms: Vec<f64>,
}

/// Smoothing diagnostic over stored states `(t, f, field)`.
pub fn smoothing_diagnostic(
    ectx: &EnergyContext,
    states: &[(f64, &[f64], &FieldState)],
    k: usize,
    l: f64,
    moment_c: f64,
) -> Result<SmoothingReport> {
    let first = states.first().ok_or_else(|| VplError::Insufficient("smoothing needs at least one state".into()))?;
    let tn = PsiWeight::tn();
    let e3 = ectx.report(first.0, first.1, first.2, 3, l, &PsiWeight::one())?;
    let mut times = Vec::new();
    let mut energy = Vec::new();
    let mut moment_norms = Vec::new();
    let mut higher_at_zero = 0.0;
    let soft = VelocityWeight::new(ectx.gamma)?.branch == Branch::Soft;
    let jv = ectx.phase.v.tabulate(|v| crate::grid::japanese(v).powf(2.0 * moment_c));
    for (i, (t, f, field)) in states.iter().enumerate() {
        let r = ectx.report(*t, f, field, k, l, &tn)?;
        if i == 0 {
            higher_at_zero = r
                .summands
                .iter()
                .filter(|s| matches!(s.kind, "E" | "Pf" | "perp") && order(&s.alpha) + order(&s.beta) > 3)
                .map(|s| s.value)
                .sum();
        }
        if !r.energy.is_finite() || r.energy > 1e6 {
            return Err(VplError::Numerical(format!("smoothing run blew up at t = {t} (E = {:e})", r.energy)));
        }
        times.push(*t);
        energy.push(r.energy);
        if soft {
            moment_norms.push(ectx.weighted_l2sq(f, &jv).sqrt());
        }
    }
    let (tl, fl, fieldl) = states.last().expect("nonempty");
    let plain = ectx.report(*tl, fl, fieldl, k, l, &PsiWeight::one())?;
    let plain_norms = plain.summands.iter().filter(|s| s.kind == "perp").map(|s| (s.name(), s.value.sqrt())).collect();
    let constant = energy.iter().skip(1).fold(0.0f64, |m, e| m.max(*e)) / e3.energy;
    Ok(SmoothingReport { times, energy, e3_initial: e3.energy, constant, higher_at_zero, plain_norms, moment_norms })
}
