//! `vpl`: run files in, deterministic JSON, CSV and snapshot files out.
//!
//! Exit codes: 0 when every check passed, 1 when a check failed or the
//! computation broke down, 2 for configuration errors (nothing is written).

pub mod config;
pub mod output;
pub mod pipelines;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use config::{Overrides, RunConfig, Subcommand};
use vpl_core::VplError;

#[derive(Debug, Parser)]
#[command(name = "vpl", version, about = "Vlasov-Poisson-Landau numerical laboratory")]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Run file, TOML or JSON (by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long)]
    nv: Option<u64>,
    #[arg(long)]
    nx: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long, value_parser = ["one", "tn"])]
    psi: Option<String>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long = "K")]
    k: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    l: Option<f64>,
    /// Drop the nonlinear collision terms.
    #[arg(long)]
    disable_gamma: bool,
    /// Directory for cached collision tables.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

fn code_of(e: &VplError) -> i32 {
    match e {
        VplError::Config(_) => EXIT_CONFIG,
        _ => EXIT_CHECK,
    }
}

/// Parse `argv` (program name first), run, write outputs, return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let flags = Overrides {
        seed: cli.seed,
        gamma: cli.gamma,
        nv: cli.nv,
        nx: cli.nx,
        dt: cli.dt,
        t_end: cli.t_end,
        psi: cli.psi,
        m: cli.m,
        k: cli.k,
        l: cli.l,
        disable_gamma: cli.disable_gamma,
        out: cli.out,
        cache_dir: cli.cache_dir,
    };
    let cfg = match RunConfig::resolve(cli.subcommand, cli.config.as_deref(), &flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = match pipelines::execute(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return code_of(&e);
        }
    };
    if let Err(e) = outcome.outputs.write(&cfg.out) {
        eprintln!("error: {e}");
        return EXIT_CHECK;
    }
    println!("{} {}", cfg.subcommand.name(), outcome.summary);
    for f in &outcome.failures {
        eprintln!("check failed: {f}");
    }
    if outcome.failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_CHECK
    }
}
