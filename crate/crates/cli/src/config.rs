//! Run files, flag overrides and per-subcommand schemas.
//!
//! A run file is TOML (or JSON when the name ends in `.json`). The schema of a
//! subcommand is its table of defaults: a key that is absent from the defaults
//! is rejected, and a present key must have the type of its default. Flags are
//! applied last.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use vpl_core::{GridConfig, VplError};

pub type Result<T> = std::result::Result<T, VplError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Simulate,
    Decay,
    CollisionCheck,
    MomentsCheck,
    SymbolsCheck,
    EnergyReport,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Decay => "decay",
            Self::CollisionCheck => "collision-check",
            Self::MomentsCheck => "moments-check",
            Self::SymbolsCheck => "symbols-check",
            Self::EnergyReport => "energy-report",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::value_variants().iter().copied().find(|c| c.name() == s)
    }
}

/// Flag values; `None` leaves the run file or default in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    pub nv: Option<u64>,
    pub nx: Option<u64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub psi: Option<String>,
    pub m: Option<u64>,
    pub k: Option<u64>,
    pub l: Option<f64>,
    pub disable_gamma: bool,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

/// A validated configuration.
///
/// `values` holds every schema key with its resolved value. The output
/// location and cache directory are kept apart: they do not change results,
/// so they are neither hashed nor embedded.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub values: Map<String, Value>,
    pub out: PathBuf,
    pub cache_dir: Option<PathBuf>,
}

fn obj(pairs: &[(&str, Value)]) -> Value {
    Value::Object(pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect())
}

fn grid_defaults(nv: u64, vmax: f64, nx: u64) -> Value {
    obj(&[
        ("nv", nv.into()),
        ("vmax", vmax.into()),
        ("nx", nx.into()),
        ("lx", std::f64::consts::PI.into()),
        ("dim_x", 1u64.into()),
    ])
}

fn run_defaults(m: &mut Map<String, Value>, dt: f64, t_end: f64) {
    for (k, v) in [
        ("dt", dt.into()),
        ("t_end", t_end.into()),
        ("scheme", "implicit-midpoint".into()),
        ("disable_gamma", false.into()),
        ("disable_field_nonlinear", false.into()),
        ("initial_data", "macroscopic".into()),
        ("amplitude", 1e-2.into()),
        ("noise_amplitude", 0.0.into()),
        ("noise_passes", 1u64.into()),
        ("initial_file", Value::Null),
    ] {
        m.insert(k.into(), v);
    }
}

/// Defaults of a subcommand, which double as its schema.
pub fn defaults(sub: Subcommand) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("seed".into(), 0u64.into());
    m.insert("gamma".into(), 0.0.into());
    match sub {
        Subcommand::CollisionCheck => {
            m.insert("grid".into(), obj(&[("nv", 16u64.into()), ("vmax", 6.0.into())]));
            m.insert("refine_nv".into(), 24u64.into());
            m.insert("samples".into(), 100u64.into());
            m.insert("tolerance".into(), 1e-8.into());
            m.insert("null_threshold".into(), 5e-3.into());
        }
        Subcommand::Decay => {
            m.insert("grid".into(), obj(&[("nv", 8u64.into()), ("vmax", 5.0.into())]));
            m.insert("m".into(), 0u64.into());
            m.insert("l".into(), 0.0.into());
            m.insert("l_star".into(), 0.0.into());
            m.insert("scheme".into(), "implicit-midpoint".into());
            m.insert("dt".into(), 0.05.into());
            m.insert("y_min".into(), 0.005.into());
            m.insert("y_max".into(), 8.0.into());
            m.insert("ny".into(), 48u64.into());
            m.insert("t_window".into(), Value::Array(vec![10.0.into(), 100.0.into()]));
            m.insert("amplitude".into(), 1e-2.into());
            m.insert("samples_per_decade".into(), 30u64.into());
            m.insert("monitor".into(), false.into());
        }
        Subcommand::Simulate => {
            m.insert("grid".into(), grid_defaults(8, 5.0, 8));
            run_defaults(&mut m, 0.02, 1.0);
            m.insert("snapshot_every".into(), 10u64.into());
        }
        Subcommand::MomentsCheck => {
            m.insert("grid".into(), grid_defaults(12, 6.0, 8));
            run_defaults(&mut m, 0.04, 0.4);
            m.insert("amplitude".into(), 0.05.into());
            m.insert("refinements".into(), 3u64.into());
            m.insert("t_min".into(), 0.2.into());
            m.insert("order_min".into(), 1.8.into());
        }
        Subcommand::EnergyReport => {
            m.insert("grid".into(), grid_defaults(8, 5.0, 8));
            run_defaults(&mut m, 0.02, 4.0);
            m.insert("noise_amplitude".into(), 1e-3.into());
            m.insert("snapshot_every".into(), 1u64.into());
            m.insert("K".into(), 3u64.into());
            m.insert("l".into(), 3.0.into());
            m.insert("psi_mode".into(), "one".into());
            m.insert("moment_c".into(), 1.0.into());
        }
        Subcommand::SymbolsCheck => {
            m.insert("gamma".into(), (-2.5).into());
            m.insert("k0".into(), 1.0.into());
            m.insert("delta1".into(), 0.5.into());
            m.insert("dump_y".into(), 1.0.into());
            m.insert(
                "symbols".into(),
                obj(&[
                    ("dim", 1u64.into()),
                    ("vmax", 6.0.into()),
                    ("refinements", Value::Array(vec![32u64.into(), 48u64.into(), 64u64.into()])),
                    ("bracket_eta", Value::Array(vec![401u64.into(), 801u64.into()])),
                    ("bracket_nv", 61u64.into()),
                    ("samples", 50u64.into()),
                ]),
            );
        }
    }
    m
}

fn cfg_err(msg: impl Into<String>) -> VplError {
    VplError::Config(msg.into())
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_u64() => "integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "table",
    }
}

/// Whether `new` may replace `default`; `null` defaults take strings.
fn compatible(default: &Value, new: &Value) -> bool {
    match (default, new) {
        (Value::Null, Value::String(_) | Value::Null) => true,
        (Value::Bool(_), Value::Bool(_)) | (Value::String(_), Value::String(_)) => true,
        (Value::Number(d), Value::Number(n)) => !d.is_u64() || n.is_u64(),
        (Value::Array(d), Value::Array(n)) => match d.first() {
            Some(first) => n.iter().all(|x| compatible(first, x)),
            None => true,
        },
        _ => false,
    }
}

/// Merge `src` into `dst`, rejecting keys and types the schema does not know.
fn merge(dst: &mut Map<String, Value>, src: &Map<String, Value>, prefix: &str, sub: Subcommand) -> Result<()> {
    for (k, v) in src {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let Some(slot) = dst.get_mut(k) else {
            return Err(cfg_err(format!("unknown key '{path}' for subcommand {}", sub.name())));
        };
        match (slot, v) {
            (Value::Object(d), Value::Object(s)) => merge(d, s, &path, sub)?,
            (slot, v) if compatible(slot, v) => {
                // Integers written into float slots stay floats.
                *slot = match (&*slot, v) {
                    (Value::Number(d), Value::Number(n)) if !d.is_u64() => n.as_f64().map(Value::from).unwrap_or(Value::Null),
                    (Value::Array(d), Value::Array(n)) if d.first().is_some_and(|x| x.is_f64()) => {
                        Value::Array(n.iter().map(|x| x.as_f64().map(Value::from).unwrap_or(Value::Null)).collect())
                    }
                    _ => v.clone(),
                };
            }
            (slot, v) => {
                return Err(cfg_err(format!("key '{path}' expects {}, got {}", type_name(slot), type_name(v))));
            }
        }
    }
    Ok(())
}

/// Parse a run file into a JSON object.
pub fn read_run_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read run file {}: {e}", path.display())))?;
    let value: Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| cfg_err(format!("malformed JSON run file {}: {e}", path.display())))?
    } else {
        let t: toml::Table = toml::from_str(&text).map_err(|e| cfg_err(format!("malformed TOML run file {}: {e}", path.display())))?;
        serde_json::to_value(t).map_err(|e| cfg_err(format!("run file {}: {e}", path.display())))?
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(cfg_err(format!("run file {} must hold a table", path.display()))),
    }
}

impl RunConfig {
    /// Defaults, then the run file, then flags; then range checks.
    pub fn resolve(sub: Subcommand, file: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut values = defaults(sub);
        let mut out = PathBuf::from("out");
        let mut cache_dir = None;
        if let Some(path) = file {
            let mut m = read_run_file(path)?;
            if let Some(s) = m.remove("subcommand") {
                if s.as_str().and_then(Subcommand::from_name) != Some(sub) {
                    return Err(cfg_err(format!("key 'subcommand' is {s} but the command line asks for {}", sub.name())));
                }
            }
            if let Some(o) = m.remove("out") {
                out = PathBuf::from(o.as_str().ok_or_else(|| cfg_err("key 'out' expects string"))?);
            }
            if let Some(c) = m.remove("cache_dir") {
                cache_dir = Some(PathBuf::from(c.as_str().ok_or_else(|| cfg_err("key 'cache_dir' expects string"))?));
            }
            merge(&mut values, &m, "", sub)?;
        }
        let mut fl = Map::new();
        let mut grid = Map::new();
        let put = |key: &str, flag: &str, v: Value, target: &mut Map<String, Value>| -> Result<()> {
            let known = if key.starts_with("grid.") {
                values.get("grid").and_then(|g| g.get(&key[5..])).is_some()
            } else {
                values.contains_key(key)
            };
            if !known {
                return Err(cfg_err(format!("flag --{flag} (key '{key}') does not apply to subcommand {}", sub.name())));
            }
            target.insert(key.trim_start_matches("grid.").to_string(), v);
            Ok(())
        };
        if let Some(v) = flags.seed {
            put("seed", "seed", v.into(), &mut fl)?;
        }
        if let Some(v) = flags.gamma {
            put("gamma", "gamma", v.into(), &mut fl)?;
        }
        if let Some(v) = flags.nv {
            put("grid.nv", "nv", v.into(), &mut grid)?;
        }
        if let Some(v) = flags.nx {
            put("grid.nx", "nx", v.into(), &mut grid)?;
        }
        if let Some(v) = flags.dt {
            put("dt", "dt", v.into(), &mut fl)?;
        }
        if let Some(v) = flags.t_end {
            put("t_end", "t-end", v.into(), &mut fl)?;
        }
        if let Some(v) = &flags.psi {
            put("psi_mode", "psi", v.clone().into(), &mut fl)?;
        }
        if let Some(v) = flags.m {
            put("m", "m", v.into(), &mut fl)?;
        }
        if let Some(v) = flags.k {
            put("K", "K", v.into(), &mut fl)?;
        }
        if let Some(v) = flags.l {
            put("l", "l", v.into(), &mut fl)?;
        }
        if flags.disable_gamma {
            put("disable_gamma", "disable-gamma", true.into(), &mut fl)?;
        }
        if !grid.is_empty() {
            fl.insert("grid".into(), Value::Object(grid));
        }
        merge(&mut values, &fl, "", sub)?;
        if let Some(o) = &flags.out {
            out = o.clone();
        }
        if let Some(c) = &flags.cache_dir {
            cache_dir = Some(c.clone());
        }
        let cfg = Self { subcommand: sub, values, out, cache_dir };
        cfg.validate()?;
        Ok(cfg)
    }

    fn get(&self, key: &str) -> &Value {
        let mut parts = key.split('.');
        let first = parts.next().expect("key");
        let mut v = self.values.get(first).unwrap_or(&Value::Null);
        for p in parts {
            v = v.get(p).unwrap_or(&Value::Null);
        }
        v
    }

    pub fn has(&self, key: &str) -> bool {
        !self.get(key).is_null()
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.get(key).as_f64().unwrap_or_else(|| panic!("schema key '{key}' is not a number"))
    }

    pub fn usize(&self, key: &str) -> usize {
        self.get(key).as_u64().unwrap_or_else(|| panic!("schema key '{key}' is not an integer")) as usize
    }

    pub fn bool(&self, key: &str) -> bool {
        self.get(key).as_bool().unwrap_or_else(|| panic!("schema key '{key}' is not a boolean"))
    }

    pub fn str(&self, key: &str) -> &str {
        self.get(key).as_str().unwrap_or_else(|| panic!("schema key '{key}' is not a string"))
    }

    pub fn f64s(&self, key: &str) -> Vec<f64> {
        self.get(key).as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default()
    }

    pub fn usizes(&self, key: &str) -> Vec<usize> {
        self.get(key).as_array().map(|a| a.iter().filter_map(|x| x.as_u64().map(|u| u as usize)).collect()).unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.get("seed").as_u64().unwrap_or(0)
    }

    /// Phase grid block; collision and decay runs carry only `nv` and `vmax`.
    pub fn grid(&self) -> GridConfig {
        let d = GridConfig::default();
        GridConfig {
            nv: self.usize("grid.nv"),
            vmax: self.f64("grid.vmax"),
            nx: if self.has("grid.nx") { self.usize("grid.nx") } else { d.nx },
            lx: if self.has("grid.lx") { self.f64("grid.lx") } else { d.lx },
            dim_x: if self.has("grid.dim_x") { self.usize("grid.dim_x") } else { d.dim_x },
        }
    }

    /// The resolved configuration as embedded in every output.
    pub fn embedded(&self) -> Value {
        let mut m = self.values.clone();
        m.insert("subcommand".into(), self.subcommand.name().into());
        Value::Object(m)
    }

    /// SHA-256 of the compact, key-sorted JSON of [`Self::embedded`].
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.embedded()).expect("serializable");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn validate(&self) -> Result<()> {
        let positive = |key: &str| -> Result<()> {
            let v = self.f64(key);
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(cfg_err(format!("key '{key}' must be positive, got {v}")))
            }
        };
        let non_negative = |key: &str| -> Result<()> {
            let v = self.f64(key);
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(cfg_err(format!("key '{key}' must be non-negative, got {v}")))
            }
        };
        let gamma = self.f64("gamma");
        if !(-3.0..=1.0).contains(&gamma) {
            return Err(cfg_err(format!("key 'gamma' must lie in [-3, 1], got {gamma}")));
        }
        if self.has("grid") {
            let nv = self.usize("grid.nv");
            if nv < 8 || nv % 2 == 1 {
                return Err(cfg_err(format!("key 'grid.nv' must be even and at least 8, got {nv}")));
            }
            positive("grid.vmax")?;
            if self.has("grid.nx") {
                let nx = self.usize("grid.nx");
                if nx < 2 || !nx.is_power_of_two() {
                    return Err(cfg_err(format!("key 'grid.nx' must be a power of two, got {nx}")));
                }
                positive("grid.lx")?;
                let d = self.usize("grid.dim_x");
                if !(1..=3).contains(&d) {
                    return Err(cfg_err(format!("key 'grid.dim_x' must be 1, 2 or 3, got {d}")));
                }
            }
        }
        if self.has("scheme") {
            self.str("scheme").parse::<vpl_core::mode::Scheme>().map_err(|e| cfg_err(format!("key 'scheme': {e}")))?;
        }
        match self.subcommand {
            Subcommand::CollisionCheck => {
                let (nv, r) = (self.usize("grid.nv"), self.usize("refine_nv"));
                if r != 0 && (r <= nv || r % 2 == 1) {
                    return Err(cfg_err(format!("key 'refine_nv' must be 0 or an even value above grid.nv, got {r}")));
                }
                if nv > vpl_core::collision::DENSE_MAX_NV {
                    return Err(cfg_err(format!(
                        "key 'grid.nv' = {nv} exceeds {} needed by the dense coercivity probe",
                        vpl_core::collision::DENSE_MAX_NV
                    )));
                }
                if self.usize("samples") == 0 {
                    return Err(cfg_err("key 'samples' must be positive"));
                }
                non_negative("tolerance")?;
                positive("null_threshold")?;
            }
            Subcommand::Decay => {
                positive("dt")?;
                positive("y_min")?;
                positive("amplitude")?;
                non_negative("l")?;
                non_negative("l_star")?;
                if self.f64("y_max") <= self.f64("y_min") {
                    return Err(cfg_err("key 'y_max' must exceed y_min"));
                }
                if self.usize("ny") < 2 {
                    return Err(cfg_err("key 'ny' must be at least 2"));
                }
                let w = self.f64s("t_window");
                if w.len() != 2 || !(w[0] > 0.0 && w[1] > w[0]) {
                    return Err(cfg_err("key 't_window' must be [t_lo, t_hi] with 0 < t_lo < t_hi"));
                }
                if self.usize("samples_per_decade") < 2 {
                    return Err(cfg_err("key 'samples_per_decade' must be at least 2"));
                }
            }
            Subcommand::Simulate | Subcommand::MomentsCheck | Subcommand::EnergyReport => {
                positive("dt")?;
                positive("t_end")?;
                non_negative("amplitude")?;
                non_negative("noise_amplitude")?;
                let steps = self.f64("t_end") / self.f64("dt");
                if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                    return Err(cfg_err("key 't_end' must be a whole number of steps dt"));
                }
                let kind: vpl_core::initial::InitialKind =
                    self.str("initial_data").parse().map_err(|e| cfg_err(format!("key 'initial_data': {e}")))?;
                if kind == vpl_core::initial::InitialKind::File && !self.has("initial_file") {
                    return Err(cfg_err("key 'initial_file' is required when initial_data = \"file\""));
                }
                if self.has("snapshot_every") && self.usize("snapshot_every") == 0 {
                    return Err(cfg_err("key 'snapshot_every' must be positive"));
                }
                if self.subcommand == Subcommand::MomentsCheck {
                    if self.usize("refinements") < 3 {
                        return Err(cfg_err("key 'refinements' must be at least 3 (two orders)"));
                    }
                    if steps.round() < 3.0 {
                        return Err(cfg_err("key 't_end' must span at least 3 steps"));
                    }
                    non_negative("t_min")?;
                    if self.f64("t_min") >= self.f64("t_end") {
                        return Err(cfg_err("key 't_min' must be below t_end"));
                    }
                }
                if self.subcommand == Subcommand::EnergyReport {
                    let k = self.usize("K");
                    let nv = self.usize("grid.nv");
                    if nv < 2 * k + 1 {
                        return Err(cfg_err(format!("key 'K' = {k} needs grid.nv >= {}", 2 * k + 1)));
                    }
                    if self.usize("grid.nx") < k + 1 {
                        return Err(cfg_err(format!("key 'K' = {k} needs grid.nx >= {}", k + 1)));
                    }
                    if nv > vpl_core::collision::DENSE_MAX_NV {
                        return Err(cfg_err(format!("key 'grid.nv' = {nv} too large for the coercivity probe behind λ")));
                    }
                    non_negative("l")?;
                    self.str("psi_mode")
                        .parse::<vpl_core::energy::PsiMode>()
                        .map_err(|e| cfg_err(format!("key 'psi_mode': {e}")))?;
                }
            }
            Subcommand::SymbolsCheck => {
                let d1 = self.f64("delta1");
                if !(d1 > 0.0 && d1 <= 0.5) {
                    return Err(cfg_err(format!("key 'delta1' must lie in (0, 1/2], got {d1}")));
                }
                non_negative("k0")?;
                positive("dump_y")?;
                let dim = self.usize("symbols.dim");
                if !(1..=2).contains(&dim) {
                    return Err(cfg_err(format!("key 'symbols.dim' must be 1 or 2, got {dim}")));
                }
                positive("symbols.vmax")?;
                let refs = self.usizes("symbols.refinements");
                if refs.len() < 2 || refs.iter().any(|&n| n < 4 || n % 2 == 1) {
                    return Err(cfg_err("key 'symbols.refinements' needs at least two even sizes >= 4"));
                }
                let eta = self.usizes("symbols.bracket_eta");
                if eta.len() != 2 || eta[0] < 5 || eta[1] <= eta[0] {
                    return Err(cfg_err("key 'symbols.bracket_eta' must be [coarse, fine] with fine > coarse >= 5"));
                }
                if self.usize("symbols.bracket_nv") < 3 {
                    return Err(cfg_err("key 'symbols.bracket_nv' must be at least 3"));
                }
            }
        }
        Ok(())
    }
}
