//! Time integration of the two-species perturbation system on the torus.
//!
//! Each step solves the linear part per spatial Fourier mode with the sector
//! factorisation of [`crate::mode`] and treats the nonlinear terms explicitly:
//!
//! ```text
//! Y       = (I - Δt/2 A)^{-1} (u_n + Δt/2 X(u_n))
//! u_{n+1} = 2Y - u_n - Δt X(u_n) + Δt X(Y)
//! ```
//!
//! where `A` is the implicit part of the scheme and `X` everything else. With
//! `X = 0` this is exactly the propagator used by [`crate::decay::evolve_mode`].

use ndarray::Array2;
use ndarray_linalg::EigVals;
use serde::{Deserialize, Serialize};

use crate::collision::{flux_divergence_add, CollisionAssembly};
use crate::error::{Result, VplError};
use crate::grid::PhaseGrid;
use crate::macroscopic::{MacroContext, Sources};
use crate::mode::{matvec, ModeFactory, ModeOperator, Scheme, C64};
use crate::spectral::{solve_poisson, FieldState, Spectral};

/// Which nonlinear terms enter the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub dt: f64,
    pub scheme: Scheme,
    /// `Γ±(f, f)`.
    pub gamma_terms: bool,
    /// `∓ μ^{-1/2} ∇_v·(E √μ f±)`.
    pub field_nonlinear: bool,
    /// Bound on `Δt ‖E‖_∞ / h_v` for the explicit field transport.
    pub cfl_max: f64,
    /// Bytes allowed for the per-mode stage matrices.
    pub memory_budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            scheme: Scheme::ImplicitMidpoint,
            gamma_terms: true,
            field_nonlinear: true,
            cfl_max: 0.5,
            memory_budget: 1 << 30,
        }
    }
}

impl SolverOptions {
    pub fn linear(dt: f64, scheme: Scheme) -> Self {
        Self { dt, scheme, gamma_terms: false, field_nonlinear: false, ..Self::default() }
    }
}

/// `f±` on the phase grid with the field it generates.
#[derive(Debug, Clone)]
pub struct TwoSpeciesField {
    pub t: f64,
    /// Indexed `(ix·2 + species)·n_v + iv`.
    pub f: Vec<f64>,
    pub field: FieldState,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    pub t: f64,
    /// `∫ a± dx`.
    pub mass: [f64; 2],
    /// Relative change of `∫ a± dx` over the step.
    pub mass_drift: [f64; 2],
    /// `‖∇·E - (a₊ - a₋)‖ / ‖a₊ - a₋‖`.
    pub gauss_residual: f64,
    /// `min (μ + √μ f±)`, monitored only.
    pub min_density: f64,
    pub cfl: f64,
}

struct ModeStage {
    op: ModeOperator,
    inv: Vec<Array2<C64>>,
    /// Explicit linear part for `cn-imex`.
    explicit: Option<Vec<Array2<C64>>>,
}

pub struct Solver<'a> {
    pub phase: PhaseGrid,
    pub asm: &'a CollisionAssembly,
    pub spec: Spectral,
    pub ctx: MacroContext,
    pub opts: SolverOptions,
    stages: Vec<Option<ModeStage>>,
}

impl<'a> Solver<'a> {
    pub fn new(phase: &PhaseGrid, asm: &'a CollisionAssembly, opts: SolverOptions) -> Result<Self> {
        if phase.v.n != asm.grid.n || phase.v.vmax != asm.grid.vmax {
            return Err(VplError::Config("collision assembly and phase grid use different velocity grids".into()));
        }
        if !(opts.dt > 0.0) {
            return Err(VplError::Config(format!("dt = {} must be positive", opts.dt)));
        }
        let spec = Spectral::new(&phase.x);
        let factory = ModeFactory::new(asm);
        let mut bytes = 0usize;
        for (k, &unres) in spec.k.iter().zip(&spec.unresolved) {
            if !unres {
                let sectors = factory.sectors(crate::mode::mask_for(*k));
                bytes += sectors.iter().map(|s| s.sector.len().pow(2) * 16).sum::<usize>();
            }
        }
        if opts.scheme == Scheme::CnImex {
            bytes *= 2;
        }
        if bytes > opts.memory_budget {
            return Err(VplError::Config(format!(
                "per-mode stage matrices need {} MiB, budget {} MiB; reduce nv or nx",
                bytes >> 20,
                opts.memory_budget >> 20
            )));
        }
        let mut stages = Vec::with_capacity(spec.len());
        for (k, &unres) in spec.k.iter().zip(&spec.unresolved) {
            if unres {
                stages.push(None);
                continue;
            }
            let op = factory.operator(*k);
            let mut inv = Vec::with_capacity(op.sectors.len());
            let mut explicit = Vec::new();
            for idx in 0..op.sectors.len() {
                inv.push(op.stage_inverse(idx, opts.dt, opts.scheme)?);
                if opts.scheme == Scheme::CnImex {
                    check_stable(&op, idx, opts.dt)?;
                    explicit.push(op.transport_matrix(idx));
                }
            }
            let explicit = (opts.scheme == Scheme::CnImex).then_some(explicit);
            stages.push(Some(ModeStage { op, inv, explicit }));
        }
        Ok(Self { phase: phase.clone(), asm, spec, ctx: MacroContext::new(&phase.v), opts, stages })
    }

    fn nv(&self) -> usize {
        self.phase.v.len()
    }

    /// Band-limit `f0` and attach its field.
    pub fn init(&self, f0: &[f64]) -> Result<TwoSpeciesField> {
        if f0.len() != 2 * self.phase.len() {
            return Err(VplError::Config(format!("initial field has {} values, expected {}", f0.len(), 2 * self.phase.len())));
        }
        let f = self.from_modes(self.to_modes(f0));
        let field = self.field_of(&f);
        Ok(TwoSpeciesField { t: 0.0, f, field })
    }

    pub fn charge(&self, f: &[f64]) -> Vec<f64> {
        let sm = &self.ctx.weights.sqrt_mu;
        let n = self.nv();
        f.chunks(2 * n).map(|c| self.phase.v.dot(sm, &c[..n]) - self.phase.v.dot(sm, &c[n..])).collect()
    }

    pub fn field_of(&self, f: &[f64]) -> FieldState {
        solve_poisson(&self.spec, &self.charge(f))
    }

    /// Spatial Fourier coefficients, one two-species velocity vector per mode.
    pub fn to_modes(&self, f: &[f64]) -> Vec<Vec<C64>> {
        let m = 2 * self.nv();
        let nx = self.spec.len();
        let mut modes = vec![vec![C64::new(0.0, 0.0); m]; nx];
        let mut col = vec![C64::new(0.0, 0.0); nx];
        for j in 0..m {
            for (ix, c) in col.iter_mut().enumerate() {
                *c = C64::new(f[ix * m + j], 0.0);
            }
            self.spec.forward_complex(&mut col);
            for (k, c) in col.iter().enumerate() {
                modes[k][j] = if self.spec.unresolved[k] { C64::new(0.0, 0.0) } else { *c };
            }
        }
        modes
    }

    pub fn from_modes(&self, modes: Vec<Vec<C64>>) -> Vec<f64> {
        let m = 2 * self.nv();
        let nx = self.spec.len();
        let mut f = vec![0.0; nx * m];
        let mut col = vec![C64::new(0.0, 0.0); nx];
        for j in 0..m {
            for (k, c) in col.iter_mut().enumerate() {
                *c = modes[k][j];
            }
            self.spec.inverse_complex(&mut col);
            for (ix, c) in col.iter().enumerate() {
                f[ix * m + j] = c.re;
            }
        }
        f
    }

    /// The explicit nonlinear terms at `f`, with the field they were built from.
    pub fn nonlinear(&self, f: &[f64], field: &FieldState) -> Vec<f64> {
        let n = self.nv();
        let grid = &self.phase.v;
        let sm = &self.ctx.weights.sqrt_mu;
        let mut out = vec![0.0; f.len()];
        if !self.opts.gamma_terms && !self.opts.field_nonlinear {
            return out;
        }
        for (ix, (chunk, dst)) in f.chunks(2 * n).zip(out.chunks_mut(2 * n)).enumerate() {
            if self.opts.field_nonlinear {
                for s in 0..2 {
                    let sign = if s == 0 { 1.0 } else { -1.0 };
                    let fs = &chunk[s * n..(s + 1) * n];
                    let mut div = vec![0.0; n];
                    for a in 0..self.phase.x.dim {
                        let e = field.e[a][ix];
                        if e != 0.0 {
                            let flux: Vec<f64> = fs.iter().zip(sm).map(|(g, m)| e * m * g).collect();
                            flux_divergence_add(grid, &flux, a, &mut div);
                        }
                    }
                    for ((d, dv), m) in dst[s * n..(s + 1) * n].iter_mut().zip(&div).zip(sm) {
                        *d -= sign * dv / m;
                    }
                }
            }
            if self.opts.gamma_terms {
                for (d, g) in dst.iter_mut().zip(self.asm.apply_gamma(chunk, chunk)) {
                    *d += g;
                }
            }
        }
        out
    }

    fn check_cfl(&self, field: &FieldState) -> Result<f64> {
        let emax = field.e.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, a| m.max(a.abs()));
        let cfl = self.opts.dt * emax / self.phase.v.h;
        if self.opts.field_nonlinear && cfl > self.opts.cfl_max {
            return Err(VplError::Numerical(format!("CFL violation: dt·|E|/h = {cfl:.3} > {}", self.opts.cfl_max)));
        }
        Ok(cfl)
    }

    /// `(I - Δt/2 A)^{-1} r` and the explicit linear part, mode by mode.
    fn stage_solve(&self, rhs: &[Vec<C64>]) -> Vec<Vec<C64>> {
        rhs.iter()
            .zip(&self.stages)
            .map(|(r, st)| match st {
                None => vec![C64::new(0.0, 0.0); r.len()],
                Some(st) => {
                    let x = st.op.to_sectors(r);
                    let y: Vec<Vec<C64>> = x.iter().zip(&st.inv).map(|(xi, m)| matvec(m, xi)).collect();
                    st.op.from_sectors(&y)
                }
            })
            .collect()
    }

    fn explicit_linear(&self, u: &[Vec<C64>]) -> Option<Vec<Vec<C64>>> {
        self.opts.scheme.eq(&Scheme::CnImex).then(|| {
            u.iter()
                .zip(&self.stages)
                .map(|(r, st)| match st {
                    None => vec![C64::new(0.0, 0.0); r.len()],
                    Some(st) => {
                        let x = st.op.to_sectors(r);
                        let t = st.explicit.as_ref().expect("cn-imex stage");
                        let y: Vec<Vec<C64>> = x.iter().zip(t).map(|(xi, m)| matvec(m, xi)).collect();
                        st.op.from_sectors(&y)
                    }
                })
                .collect()
        })
    }

    /// One step of the scheme.
    pub fn step(&self, state: &TwoSpeciesField) -> Result<(TwoSpeciesField, StepDiagnostics)> {
        let dt = self.opts.dt;
        let cfl = self.check_cfl(&state.field)?;
        let u = self.to_modes(&state.f);
        let mut x_n = self.to_modes(&self.nonlinear(&state.f, &state.field));
        if let Some(t) = self.explicit_linear(&u) {
            add(&mut x_n, &t, 1.0);
        }
        let mut rhs = u.clone();
        add(&mut rhs, &x_n, 0.5 * dt);
        let y = self.stage_solve(&rhs);
        let y_real = self.from_modes(y.clone());
        let y_field = self.field_of(&y_real);
        self.check_cfl(&y_field)?;
        let mut x_y = self.to_modes(&self.nonlinear(&y_real, &y_field));
        if let Some(t) = self.explicit_linear(&y) {
            add(&mut x_y, &t, 1.0);
        }
        let mut next = y;
        for m in next.iter_mut() {
            for z in m.iter_mut() {
                *z *= 2.0;
            }
        }
        add(&mut next, &u, -1.0);
        add(&mut next, &x_n, -dt);
        add(&mut next, &x_y, dt);
        let f = self.from_modes(next);
        if f.iter().any(|a| !a.is_finite()) {
            return Err(VplError::Numerical(format!("non-finite state at t = {}", state.t + dt)));
        }
        let field = self.field_of(&f);
        let out = TwoSpeciesField { t: state.t + dt, f, field };
        let before = self.mass(&state.f);
        let diag = self.diagnostics(&out, Some(before), cfl);
        Ok((out, diag))
    }

    /// `∫ a± dx`.
    pub fn mass(&self, f: &[f64]) -> [f64; 2] {
        let st = self.ctx.macro_state(f);
        let dx = self.phase.x.cell_volume();
        [st.a_plus.iter().sum::<f64>() * dx, st.a_minus.iter().sum::<f64>() * dx]
    }

    pub fn diagnostics(&self, state: &TwoSpeciesField, before: Option<[f64; 2]>, cfl: f64) -> StepDiagnostics {
        let mass = self.mass(&state.f);
        // Relative to the total perturbation mass scale, which may vanish.
        let scale = self.spec.l2(&self.charge(&state.f)).max(mass[0].abs()).max(mass[1].abs()).max(1e-300);
        let mass_drift = match before {
            Some(b) => [(mass[0] - b[0]).abs() / scale, (mass[1] - b[1]).abs() / scale],
            None => [0.0; 2],
        };
        let rho = self.charge(&state.f);
        let div = self.spec.divergence(&state.field.e);
        let err = self.spec.l2(&div.iter().zip(&rho).map(|(a, b)| a - b).collect::<Vec<_>>());
        let nrm = self.spec.l2(&rho);
        let gauss_residual = if nrm > 0.0 { err / nrm } else { err };
        let mu = &self.ctx.maxwellian;
        let n = self.nv();
        let min_density = state
            .f
            .chunks(n)
            .flat_map(|c| c.iter().zip(&mu.mu).zip(&mu.sqrt_mu).map(|((g, m), s)| m + s * g))
            .fold(f64::INFINITY, f64::min);
        StepDiagnostics { t: state.t, mass, mass_drift, gauss_residual, min_density, cfl }
    }

    /// `L f` and the nonlinear forcing at `f` as the scheme applies them,
    /// that is with unresolved modes removed.
    pub fn sources(&self, f: &[f64]) -> Sources {
        let n = self.nv();
        let lf = f.chunks(2 * n).flat_map(|c| self.asm.apply_l(c)).collect();
        let g = self.from_modes(self.to_modes(&self.nonlinear(f, &self.field_of(f))));
        Sources { lf, g }
    }

    /// Run `steps` steps, keeping every `snapshot_every`-th state.
    pub fn run(&self, init: TwoSpeciesField, steps: usize, snapshot_every: usize) -> Result<Trajectory> {
        let every = snapshot_every.max(1);
        let mut traj = Trajectory { snapshots: vec![init.clone()], diagnostics: vec![self.diagnostics(&init, None, 0.0)] };
        let mut state = init;
        for k in 1..=steps {
            let (next, diag) = self.step(&state)?;
            traj.diagnostics.push(diag);
            if k % every == 0 {
                traj.snapshots.push(next.clone());
            }
            state = next;
        }
        Ok(traj)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<TwoSpeciesField>,
    /// One entry per step, plus the initial state.
    pub diagnostics: Vec<StepDiagnostics>,
}

fn add(acc: &mut [Vec<C64>], x: &[Vec<C64>], c: f64) {
    for (a, b) in acc.iter_mut().zip(x) {
        for (p, q) in a.iter_mut().zip(b) {
            *p += q * c;
        }
    }
}

/// Spectral radius of the linear `cn-imex` step on one sector must not exceed one.
pub fn check_stable(op: &ModeOperator, idx: usize, dt: f64) -> Result<()> {
    let p = op.propagator(idx, dt, Scheme::CnImex)?;
    let rho = p.eigvals()?.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if rho > 1.0 + 1e-10 {
        return Err(VplError::Numerical(format!(
            "cn-imex step dt = {dt} unstable at |y| = {:.4} (spectral radius {rho:.6})",
            op.y_norm2().sqrt()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridConfig, VelocityGrid};

    fn setup(gamma: f64) -> (PhaseGrid, CollisionAssembly) {
        let cfg = GridConfig { nv: 8, vmax: 5.0, nx: 8, lx: std::f64::consts::PI, dim_x: 1 };
        let phase = PhaseGrid::new(&cfg).unwrap();
        let asm = CollisionAssembly::new(&VelocityGrid::new(8, 5.0).unwrap(), gamma).unwrap();
        (phase, asm)
    }

    #[test]
    fn zero_stays_zero() {
        let (phase, asm) = setup(0.0);
        let s = Solver::new(&phase, &asm, SolverOptions { dt: 0.05, ..Default::default() }).unwrap();
        let init = s.init(&vec![0.0; 2 * phase.len()]).unwrap();
        let traj = s.run(init, 3, 1).unwrap();
        assert!(traj.snapshots.iter().all(|st| st.f.iter().all(|&a| a == 0.0)));
    }

    #[test]
    fn mode_round_trip() {
        let (phase, asm) = setup(0.0);
        let s = Solver::new(&phase, &asm, SolverOptions::linear(0.05, Scheme::ImplicitMidpoint)).unwrap();
        let n = s.nv();
        let f: Vec<f64> = (0..2 * phase.len()).map(|i| ((i * 37 % 101) as f64 / 101.0 - 0.5) * 1e-2).collect();
        let bl = s.init(&f).unwrap().f;
        let back = s.from_modes(s.to_modes(&bl));
        assert!(bl.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(bl.len(), 2 * n * 8);
    }
}
