//! Command-line front end for `chemotax-core`: configuration files, batch
//! experiments and CSV/JSON output.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{ExperimentConfig, RawConfig};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "chemotax", version, about = "Bifurcation experiments for 1-D Keller-Segel steady states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Linear stability table per wavenumber.
    Analyze(Flags),
    /// Pitchfork coefficient K3, region chart and (D1, D2) sign chart.
    Pitchfork(Flags),
    /// Follow the k-th bifurcating branch in χ.
    Continue(Flags),
    /// Time integration from a perturbed equilibrium, or a stability probe.
    Simulate(Flags),
    /// Large-χ sweep of the k = 1 branch with spike metrics.
    Sweep(Flags),
    /// Built-in invariant checks.
    Selftest(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "D1", allow_hyphen_values = true)]
    d1: Option<String>,
    #[arg(long = "D2", allow_hyphen_values = true)]
    d2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    chi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    ubar: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long = "L", allow_hyphen_values = true)]
    length: Option<String>,
    #[arg(long = "N", allow_hyphen_values = true)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    kmax: Option<String>,
    #[arg(long = "chi-max", allow_hyphen_values = true)]
    chi_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<String>,
    #[arg(long = "t-final", allow_hyphen_values = true)]
    t_final: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// Output directory (falls back to $CHEMOTAX_OUT).
    #[arg(long, allow_hyphen_values = true)]
    out: Option<String>,
    /// `linear` or `custom`.
    #[arg(long, allow_hyphen_values = true)]
    kinetics: Option<String>,
    /// `semi-implicit` or `implicit`.
    #[arg(long, allow_hyphen_values = true)]
    scheme: Option<String>,
    /// Sweep schedule length.
    #[arg(long, allow_hyphen_values = true)]
    points: Option<String>,
    /// Comma-separated χ values for state snapshots.
    #[arg(long, allow_hyphen_values = true)]
    snapshots: Option<String>,
    /// Probe a branch point at χ instead of the constant state.
    #[arg(long)]
    probe: bool,
}

impl Flags {
    fn raw(&self) -> Result<RawConfig> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::read(path)?,
            None => RawConfig::default(),
        };
        let pairs = [
            ("D1", &self.d1),
            ("D2", &self.d2),
            ("chi", &self.chi),
            ("ubar", &self.ubar),
            ("beta", &self.beta),
            ("L", &self.length),
            ("N", &self.n),
            ("k", &self.k),
            ("kmax", &self.kmax),
            ("chi_max", &self.chi_max),
            ("dt", &self.dt),
            ("t_final", &self.t_final),
            ("eps", &self.eps),
            ("seed", &self.seed),
            ("out", &self.out),
            ("kinetics", &self.kinetics),
            ("scheme", &self.scheme),
            ("points", &self.points),
            ("snapshots", &self.snapshots),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                raw.set(key, v.as_str())?;
            }
        }
        if self.probe {
            raw.set("probe", "true")?;
        }
        Ok(raw)
    }
}

fn dispatch(command: Command, env_out: Option<&str>) -> Result<()> {
    let resolve = |flags: &Flags| ExperimentConfig::resolve(&flags.raw()?, env_out);
    match command {
        Command::Analyze(f) => commands::analyze(&resolve(&f)?),
        Command::Pitchfork(f) => commands::pitchfork(&resolve(&f)?),
        Command::Continue(f) => commands::continue_(&resolve(&f)?),
        Command::Simulate(f) => commands::simulate(&resolve(&f)?),
        Command::Sweep(f) => commands::sweep(&resolve(&f)?),
        Command::Selftest(f) => {
            let mut raw = f.raw()?;
            for (key, value) in commands::SELFTEST_DEFAULTS {
                raw.set_default(key, value);
            }
            commands::selftest(&ExperimentConfig::resolve(&raw, env_out)?)
        }
    }
}

/// Runs one subcommand and returns the process exit code: 0 on success, 1
/// on numerical failure, 2 on usage or configuration errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    let env_out = std::env::var("CHEMOTAX_OUT").ok();
    match dispatch(cli.command, env_out.as_deref()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
