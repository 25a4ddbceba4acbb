//! One pipeline per subcommand. Each returns its pending outputs, the failed
//! checks and a one-line summary; nothing touches the output directory here.

use std::path::Path;

use serde_json::json;
use sha2::{Digest, Sha256};

use vpl_core::coercivity::{coercivity_inequality, coercivity_probe};
use vpl_core::collision::{CollisionAssembly, NullBasis};
use vpl_core::decay::{whole_space_decay, DecayConfig};
use vpl_core::energy::{energy_inequality_monitor, smoothing_diagnostic, EnergyContext, PsiMode, PsiWeight};
use vpl_core::initial::{self, InitialKind};
use vpl_core::kernel::{assemble_sigma_fft, KernelTable, Lattice, SigmaTable};
use vpl_core::macroscopic::{moment_residuals, Snapshot};
use vpl_core::mode::{ModeFactory, Scheme};
use vpl_core::solver::{Solver, SolverOptions, Trajectory};
use vpl_core::spectral::FieldState;
use vpl_core::weyl::{make_symbol, weyl_suite, y_vector, SymbolGrid, SymbolKind, SymbolParams, WeylSuiteConfig};
use vpl_core::{PhaseGrid, VelocityGrid, VplError};

use crate::config::{Result, RunConfig, Subcommand};
use crate::output::{decode_snapshot, summary_line, CsvCell, Outputs};

pub struct Outcome {
    pub outputs: Outputs,
    pub failures: Vec<String>,
    pub summary: String,
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.subcommand {
        Subcommand::CollisionCheck => collision_check(cfg),
        Subcommand::Decay => decay(cfg),
        Subcommand::Simulate => simulate(cfg),
        Subcommand::MomentsCheck => moments_check(cfg),
        Subcommand::EnergyReport => energy_report(cfg),
        Subcommand::SymbolsCheck => symbols_check(cfg),
    }
}

const CACHE_MAGIC: &[u8; 8] = b"VPLSIGMA";

fn cache_key(grid: &VelocityGrid, gamma: f64) -> (String, serde_json::Value) {
    let eps = KernelTable::new(gamma, grid.h).eps_reg;
    let header = json!({
        "gamma_bits": gamma.to_bits(),
        "nv": grid.n,
        "vmax_bits": grid.vmax.to_bits(),
        "eps_reg_bits": eps.to_bits(),
        "gamma": gamma,
        "vmax": grid.vmax,
        "eps_reg": eps,
    });
    let digest = hex::encode(Sha256::digest(header.to_string().as_bytes()));
    (format!("sigma-{}.bin", &digest[..16]), header)
}

fn load_sigma(path: &Path, header: &serde_json::Value, gamma: f64, sizes: [usize; 2]) -> Option<(SigmaTable, SigmaTable)> {
    let bytes = std::fs::read(path).ok()?;
    if bytes.len() < 12 || &bytes[..8] != CACHE_MAGIC {
        return None;
    }
    let hl = u32::from_le_bytes(bytes[8..12].try_into().ok()?) as usize;
    let stored: serde_json::Value = serde_json::from_slice(bytes.get(12..12 + hl)?).ok()?;
    if &stored != header {
        return None;
    }
    let data: Vec<f64> = bytes[12 + hl..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if data.len() != 6 * (sizes[0] + sizes[1]) {
        return None;
    }
    let (a, b) = data.split_at(6 * sizes[0]);
    Some((SigmaTable::from_flat(gamma, a).ok()?, SigmaTable::from_flat(gamma, b).ok()?))
}

fn store_sigma(path: &Path, header: &serde_json::Value, tables: &(SigmaTable, SigmaTable)) -> std::io::Result<()> {
    let h = header.to_string().into_bytes();
    let mut out = Vec::new();
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&(h.len() as u32).to_le_bytes());
    out.extend_from_slice(&h);
    for x in tables.0.to_flat().iter().chain(tables.1.to_flat().iter()) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, out)?;
    std::fs::rename(tmp, path)
}

/// Collision assembly, with the `σ` tables read from or written to the cache.
pub fn assembly(grid: &VelocityGrid, gamma: f64, cache_dir: Option<&Path>) -> Result<CollisionAssembly> {
    let Some(dir) = cache_dir else {
        return CollisionAssembly::new(grid, gamma);
    };
    let (name, header) = cache_key(grid, gamma);
    let path = dir.join(name);
    let centres = Lattice::cell_centres(grid);
    let corners = Lattice::corners(grid);
    if let Some(t) = load_sigma(&path, &header, gamma, [centres.len(), corners.len()]) {
        return CollisionAssembly::with_sigma(grid, gamma, Some(t));
    }
    let kernel = KernelTable::new(gamma, grid.h);
    let tables = (assemble_sigma_fft(&kernel, &centres), assemble_sigma_fft(&kernel, &corners));
    // A cache that cannot be written only costs time.
    if let Err(e) = store_sigma(&path, &header, &tables) {
        eprintln!("warning: sigma cache {} not written: {e}", path.display());
    }
    CollisionAssembly::with_sigma(grid, gamma, Some(tables))
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn collision_check(cfg: &RunConfig) -> Result<Outcome> {
    let gamma = cfg.f64("gamma");
    let (nv, vmax) = (cfg.usize("grid.nv"), cfg.f64("grid.vmax"));
    let threshold = cfg.f64("null_threshold");
    let cache = cfg.cache_dir.as_deref();
    let null_residuals = |n: usize| -> Result<Vec<f64>> {
        let grid = VelocityGrid::new(n, vmax)?;
        let asm = assembly(&grid, gamma, cache)?;
        let basis = NullBasis::new(&grid, &asm.maxwellian);
        Ok(basis.analytic.iter().map(|xi| l2(&asm.apply_l(xi)) / l2(xi)).collect())
    };
    let grid = VelocityGrid::new(nv, vmax)?;
    let asm = assembly(&grid, gamma, cache)?;
    let coarse = null_residuals(nv)?;
    let refine_nv = cfg.usize("refine_nv");
    let fine = if refine_nv > 0 { Some(null_residuals(refine_nv)?) } else { None };
    let probe = coercivity_probe(&asm)?;
    let ineq = coercivity_inequality(&asm, probe.lambda_h, cfg.usize("samples"), cfg.seed(), cfg.f64("tolerance"))?;

    let mut failures = Vec::new();
    for (i, r) in coarse.iter().enumerate() {
        if !(*r <= threshold) {
            failures.push(format!("null vector {i}: residual {r:.3e} > {threshold:e}"));
        }
    }
    if let Some(fine) = &fine {
        for (i, (c, f)) in coarse.iter().zip(fine).enumerate() {
            if !null_refines(*c, *f) {
                failures.push(format!("null vector {i}: residual {c:.3e} -> {f:.3e} does not decrease"));
            }
        }
    }
    if !(probe.lambda_h > 0.0) {
        failures.push(format!("lambda_h = {} not positive", probe.lambda_h));
    }
    if !ineq.holds {
        failures.push(format!("coercivity inequality margin {:.3e} below -{:e}", ineq.min_margin, ineq.tolerance));
    }
    let summary = summary_line(&[
        ("lambda_h", format!("{:.6}", probe.lambda_h)),
        ("max_null_residual", format!("{:.3e}", coarse.iter().cloned().fold(0.0, f64::max))),
        ("min_margin", format!("{:.3e}", ineq.min_margin)),
    ]);
    let report = json!({
        "gamma": gamma,
        "nv": nv,
        "vmax": vmax,
        "null_residuals": coarse,
        "refine_nv": refine_nv,
        "null_residuals_refined": fine,
        "coercivity": probe,
        "inequality": ineq,
    });
    let mut outputs = Outputs::new(cfg);
    outputs.json("collision.json", &report, &failures)?;
    Ok(Outcome { outputs, failures, summary })
}

/// Residuals at roundoff on both grids count as refined: there is nothing
/// left to decrease.
pub const NULL_ROUNDOFF_FLOOR: f64 = 1e-11;

pub fn null_refines(coarse: f64, fine: f64) -> bool {
    fine < coarse || (coarse <= NULL_ROUNDOFF_FLOOR && fine <= NULL_ROUNDOFF_FLOOR)
}

fn scheme(cfg: &RunConfig) -> Scheme {
    cfg.str("scheme").parse().expect("validated")
}

fn decay(cfg: &RunConfig) -> Result<Outcome> {
    let gamma = cfg.f64("gamma");
    let grid = VelocityGrid::new(cfg.usize("grid.nv"), cfg.f64("grid.vmax"))?;
    let asm = assembly(&grid, gamma, cfg.cache_dir.as_deref())?;
    let fac = ModeFactory::new(&asm);
    let w = cfg.f64s("t_window");
    let dc = DecayConfig {
        m: cfg.usize("m") as u32,
        l: cfg.f64("l"),
        l_star: cfg.f64("l_star"),
        y_min: cfg.f64("y_min"),
        y_max: cfg.f64("y_max"),
        ny: cfg.usize("ny"),
        t_lo: w[0],
        t_hi: w[1],
        amplitude: cfg.f64("amplitude"),
        dt_base: cfg.f64("dt"),
        scheme: scheme(cfg),
        samples_per_decade: cfg.usize("samples_per_decade"),
        monitor: cfg.bool("monitor"),
    };
    let r = whole_space_decay(&fac, &dc)?;
    let mut failures = Vec::new();
    if let Err(e) = r.check_algebraic() {
        failures.push(e.to_string());
    }
    if dc.monitor {
        for m in &r.modes {
            if m.y <= 1.0 && m.violations > 0 {
                failures.push(format!("functional grew {} times at |y| = {:.4}", m.violations, m.y));
            }
            if let Err(e) = m.check_monotone() {
                failures.push(e.to_string());
            }
        }
    }
    let summary = summary_line(&[("slope", format!("{:.4}", r.slope)), ("r2", format!("{:.5}", r.r2))]);
    let report = json!({
        "gamma": r.gamma,
        "m": r.m,
        "l": r.l,
        "l_star": r.l_star,
        "slope": r.slope,
        "slope_ci": r.slope_ci,
        "r2": r.r2,
        "y_grid": r.y_grid,
        "t_window": r.t_window,
        "times": r.times,
        "norms": r.norms,
        "violations": r.modes.iter().map(|m| m.violations).collect::<Vec<_>>(),
        "worst_violation_ratio": r.modes.iter().map(|m| m.worst_violation_ratio).collect::<Vec<_>>(),
    });
    let mut outputs = Outputs::new(cfg);
    outputs.json("decay.json", &report, &failures)?;
    let rows = r.modes.iter().flat_map(|m| {
        (0..m.times.len()).map(move |k| {
            vec![CsvCell::F(m.times[k]), CsvCell::F(m.y), CsvCell::F(m.functional[k]), CsvCell::F(m.dissipation[k])]
        })
    });
    outputs.csv("modes.csv", &["t", "y", "functional", "sigma_dissipation"], rows);
    Ok(Outcome { outputs, failures, summary })
}

/// Initial data of a nonlinear run on `phase`.
pub fn initial_field(cfg: &RunConfig, phase: &PhaseGrid) -> Result<Vec<f64>> {
    let amp = cfg.f64("amplitude");
    let passes = cfg.usize("noise_passes");
    let kind: InitialKind = cfg.str("initial_data").parse()?;
    let mut f = match kind {
        InitialKind::Macroscopic => initial::macroscopic(phase, amp),
        InitialKind::Noise => initial::noise(phase, amp, cfg.seed(), passes),
        InitialKind::File => {
            let path = cfg.str("initial_file");
            let bytes = std::fs::read(path).map_err(|e| VplError::Config(format!("key 'initial_file': cannot read {path}: {e}")))?;
            let (h, f) = decode_snapshot(&bytes)?;
            let want = [phase.x.len(), 2, phase.v.len()];
            if h.shape != want {
                return Err(VplError::Config(format!("key 'initial_file': shape {:?} does not match the grid {want:?}", h.shape)));
            }
            f
        }
    };
    let noise = cfg.f64("noise_amplitude");
    if kind != InitialKind::Noise && noise > 0.0 {
        for (a, b) in f.iter_mut().zip(initial::noise(phase, noise, cfg.seed(), passes)) {
            *a += b;
        }
    }
    Ok(f)
}

fn solver_options(cfg: &RunConfig, dt: f64) -> SolverOptions {
    SolverOptions {
        dt,
        scheme: scheme(cfg),
        gamma_terms: !cfg.bool("disable_gamma"),
        field_nonlinear: !cfg.bool("disable_field_nonlinear"),
        ..SolverOptions::default()
    }
}

fn steps(cfg: &RunConfig, dt: f64) -> usize {
    (cfg.f64("t_end") / dt).round() as usize
}

/// Conservation and Gauss-law thresholds of every nonlinear run.
pub const MASS_DRIFT_MAX: f64 = 1e-10;
pub const GAUSS_MAX: f64 = 1e-12;

pub fn trajectory_failures(tr: &Trajectory) -> Vec<String> {
    let mut out = Vec::new();
    let drift = tr.diagnostics.iter().map(|d| d.mass_drift[0].max(d.mass_drift[1])).fold(0.0, f64::max);
    let gauss = tr.diagnostics.iter().map(|d| d.gauss_residual).fold(0.0, f64::max);
    if !(drift <= MASS_DRIFT_MAX) {
        out.push(format!("per-step mass drift {drift:.3e} > {MASS_DRIFT_MAX:e}"));
    }
    if !(gauss <= GAUSS_MAX) {
        out.push(format!("Gauss residual {gauss:.3e} > {GAUSS_MAX:e}"));
    }
    out
}

fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let phase = PhaseGrid::new(&cfg.grid())?;
    let asm = assembly(&phase.v, cfg.f64("gamma"), cfg.cache_dir.as_deref())?;
    let dt = cfg.f64("dt");
    let solver = Solver::new(&phase, &asm, solver_options(cfg, dt))?;
    let f0 = initial_field(cfg, &phase)?;
    let every = cfg.usize("snapshot_every");
    let tr = solver.run(solver.init(&f0)?, steps(cfg, dt), every)?;
    let failures = trajectory_failures(&tr);
    let drift = tr.diagnostics.iter().map(|d| d.mass_drift[0].max(d.mass_drift[1])).fold(0.0, f64::max);
    let gauss = tr.diagnostics.iter().map(|d| d.gauss_residual).fold(0.0, f64::max);
    let min_density = tr.diagnostics.iter().map(|d| d.min_density).fold(f64::INFINITY, f64::min);
    let last = tr.diagnostics.last().expect("initial diagnostics");
    let summary = summary_line(&[("max_mass_drift", format!("{drift:.3e}")), ("max_gauss_residual", format!("{gauss:.3e}"))]);
    let shape = [phase.x.len(), 2, phase.v.len()];
    let snapshots: Vec<String> = (0..tr.snapshots.len()).map(|i| format!("snapshots/snap_{i:05}.vpls")).collect();
    let report = json!({
        "steps": tr.diagnostics.len() - 1,
        "max_mass_drift": drift,
        "max_gauss_residual": gauss,
        "min_density": min_density,
        "final_mass": last.mass,
        "snapshot_times": tr.snapshots.iter().map(|s| s.t).collect::<Vec<_>>(),
        "snapshots": snapshots,
        "snapshot_shape": shape,
    });
    let mut outputs = Outputs::new(cfg);
    outputs.json("simulate.json", &report, &failures)?;
    let rows = tr.diagnostics.iter().map(|d| {
        vec![
            CsvCell::F(d.t),
            CsvCell::F(d.mass[0]),
            CsvCell::F(d.mass[1]),
            CsvCell::F(d.mass_drift[0]),
            CsvCell::F(d.mass_drift[1]),
            CsvCell::F(d.gauss_residual),
            CsvCell::F(d.min_density),
            CsvCell::F(d.cfl),
        ]
    });
    outputs.csv(
        "diagnostics.csv",
        &["t", "mass_plus", "mass_minus", "drift_plus", "drift_minus", "gauss_residual", "min_density", "cfl"],
        rows,
    );
    for (s, name) in tr.snapshots.iter().zip(&snapshots) {
        outputs.snapshot(name, s.t, shape, &s.f);
    }
    Ok(Outcome { outputs, failures, summary })
}

/// Worst `L²_x` residual per moment line over `t ≥ t_min`, for one step size.
pub fn residuals_after(solver: &Solver, tr: &Trajectory, t_min: f64) -> Result<std::collections::BTreeMap<String, f64>> {
    let snaps: Vec<Snapshot> = tr.snapshots.iter().map(|s| Snapshot { t: s.t, f: s.f.clone() }).collect();
    let rep = moment_residuals(&solver.ctx, &solver.spec, &snaps, &|f| solver.sources(f))?;
    let mut worst = std::collections::BTreeMap::new();
    for r in rep.records.iter().filter(|r| r.t >= t_min - 1e-9) {
        let e = worst.entry(r.equation_id.clone()).or_insert(0.0f64);
        *e = e.max(r.l2_residual);
    }
    Ok(worst)
}

fn moments_check(cfg: &RunConfig) -> Result<Outcome> {
    let phase = PhaseGrid::new(&cfg.grid())?;
    let asm = assembly(&phase.v, cfg.f64("gamma"), cfg.cache_dir.as_deref())?;
    let f0 = initial_field(cfg, &phase)?;
    let t_min = cfg.f64("t_min");
    let order_min = cfg.f64("order_min");
    let mut dts = Vec::new();
    let mut levels = Vec::new();
    let mut failures = Vec::new();
    for r in 0..cfg.usize("refinements") {
        let dt = cfg.f64("dt") / f64::from(1u32 << r);
        let solver = Solver::new(&phase, &asm, solver_options(cfg, dt))?;
        let tr = solver.run(solver.init(&f0)?, steps(cfg, dt), 1)?;
        failures.extend(trajectory_failures(&tr).into_iter().map(|m| format!("dt {dt:e}: {m}")));
        levels.push(residuals_after(&solver, &tr, t_min)?);
        dts.push(dt);
    }
    let mut orders = serde_json::Map::new();
    let mut worst_order = f64::INFINITY;
    for line in levels[0].keys() {
        let os: Vec<f64> = levels.windows(2).map(|p| (p[0][line] / p[1][line]).log2()).collect();
        for o in &os {
            worst_order = worst_order.min(*o);
            if !(*o >= order_min) {
                failures.push(format!("line {line}: observed order {o:.3} < {order_min}"));
            }
        }
        orders.insert(line.clone(), json!(os));
    }
    let summary = summary_line(&[("min_order", format!("{worst_order:.3}"))]);
    let report = json!({ "dt": dts, "t_min": t_min, "worst_l2": levels, "orders": orders, "min_order": worst_order });
    let mut outputs = Outputs::new(cfg);
    outputs.json("moments.json", &report, &failures)?;
    let rows = dts.iter().zip(&levels).flat_map(|(dt, lv)| lv.iter().map(move |(k, v)| vec![CsvCell::F(*dt), CsvCell::S(k.clone()), CsvCell::F(*v)]));
    outputs.csv("residuals.csv", &["dt", "line", "worst_l2"], rows);
    Ok(Outcome { outputs, failures, summary })
}

/// Share of snapshots at which the energy inequality must hold.
pub const INEQUALITY_FRACTION: f64 = 0.99;

fn energy_report(cfg: &RunConfig) -> Result<Outcome> {
    let gamma = cfg.f64("gamma");
    let phase = PhaseGrid::new(&cfg.grid())?;
    let asm = assembly(&phase.v, gamma, cfg.cache_dir.as_deref())?;
    let dt = cfg.f64("dt");
    let solver = Solver::new(&phase, &asm, solver_options(cfg, dt))?;
    let ectx = EnergyContext { phase: &phase, spec: &solver.spec, ctx: &solver.ctx, gamma };
    let k = cfg.usize("K");
    ectx.check_resolution(k)?;
    let f0 = initial_field(cfg, &phase)?;
    let tr = solver.run(solver.init(&f0)?, steps(cfg, dt), cfg.usize("snapshot_every"))?;
    let l = cfg.f64("l");
    let mode: PsiMode = cfg.str("psi_mode").parse()?;
    let psi = if mode == PsiMode::Tn { PsiWeight::tn() } else { PsiWeight::one() };
    let reports = tr.snapshots.iter().map(|s| ectx.report(s.t, &s.f, &s.field, k, l, &psi)).collect::<Result<Vec<_>>>()?;
    let lambda_h = coercivity_probe(&asm)?.lambda_h;
    let ineq = energy_inequality_monitor(&reports, 0.5 * lambda_h)?;
    let mut failures = trajectory_failures(&tr);
    let mut smoothing = None;
    if mode == PsiMode::Tn {
        let states: Vec<(f64, &[f64], &FieldState)> = tr.snapshots.iter().map(|s| (s.t, s.f.as_slice(), &s.field)).collect();
        let sm = smoothing_diagnostic(&ectx, &states, k, l, cfg.f64("moment_c"))?;
        if sm.higher_at_zero != 0.0 {
            failures.push(format!("psi-weighted higher summands at t = 0 are {:e}, not 0", sm.higher_at_zero));
        }
        if !sm.constant.is_finite() {
            failures.push("smoothing constant not finite".into());
        }
        smoothing = Some(sm);
    } else if !(ineq.fraction_holding >= INEQUALITY_FRACTION) {
        failures.push(format!("energy inequality holds at {:.4} of snapshots < {INEQUALITY_FRACTION}", ineq.fraction_holding));
    }
    let mut pairs = vec![("lambda_h", format!("{lambda_h:.6}")), ("c_meas", format!("{:.6e}", ineq.c_meas))];
    if let Some(sm) = &smoothing {
        pairs.push(("smoothing_constant", format!("{:.6}", sm.constant)));
    }
    let summary = summary_line(&pairs);
    let report = json!({
        "lambda_h": lambda_h,
        "inequality": ineq,
        "smoothing": smoothing,
        "final": reports.last(),
    });
    let mut outputs = Outputs::new(cfg);
    outputs.json("energy.json", &report, &failures)?;
    let names: Vec<String> = reports[0].summands.iter().map(|s| s.name()).collect();
    let mut header: Vec<&str> = vec!["t"];
    header.extend(names.iter().map(String::as_str));
    header.extend(["energy", "energy_h", "dissipation", "dphi_dt_inf", "z1"]);
    let rows = reports.iter().map(|r| {
        let mut row = vec![CsvCell::F(r.t)];
        row.extend(r.summands.iter().map(|s| CsvCell::F(s.value)));
        row.extend([r.energy, r.energy_h, r.dissipation, r.dphi_dt_inf, r.z1].map(CsvCell::F));
        row
    });
    outputs.csv("energy.csv", &header, rows);
    Ok(Outcome { outputs, failures, summary })
}

fn symbols_check(cfg: &RunConfig) -> Result<Outcome> {
    let eta = cfg.usizes("symbols.bracket_eta");
    let sc = WeylSuiteConfig {
        gamma: cfg.f64("gamma"),
        k0: cfg.f64("k0"),
        delta1: cfg.f64("delta1"),
        dim: cfg.usize("symbols.dim"),
        vmax: cfg.f64("symbols.vmax"),
        refinements: cfg.usizes("symbols.refinements"),
        bracket_eta: [eta[0], eta[1]],
        bracket_nv: cfg.usize("symbols.bracket_nv"),
        seed: cfg.seed(),
        samples: cfg.usize("symbols.samples"),
    };
    let r = weyl_suite(&sc)?;
    let failures = r.failures();
    let summary = summary_line(&[
        ("bracket_order", format!("{:.3}", r.bracket_order)),
        ("r1_constant", format!("{:.4}", r.r1_constant)),
        ("r2_constant", format!("{:.4}", r.r2_constant)),
        ("theta_sup_ratio", format!("{:.4}", r.theta_sup_ratio)),
    ]);
    let mut outputs = Outputs::new(cfg);
    outputs.json("symbols.json", &r, &failures)?;
    let n = *sc.refinements.last().expect("validated");
    let grid = SymbolGrid::dft(sc.dim, n, sc.vmax)?;
    let p = SymbolParams::new(sc.gamma, sc.k0, sc.delta1)?;
    let y = y_vector(sc.dim, cfg.f64("dump_y"));
    let theta = make_symbol(SymbolKind::Theta, &grid, p, Some(&y))?;
    let mut bytes = format!("# config_sha256={}\n", outputs.hash()).into_bytes();
    theta.write_csv(&mut bytes).map_err(|e| VplError::Numerical(format!("symbol dump: {e}")))?;
    outputs.raw("theta.csv", bytes);
    Ok(Outcome { outputs, failures, summary })
}
