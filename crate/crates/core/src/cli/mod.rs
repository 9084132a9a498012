//! Command-line runner: `spectrum`, `forward`, `instability` and `verify`.
//!
//! Every artifact is stamped with the hash of the effective configuration
//! (after command-line overrides) and the build version.

mod commands;
mod config;
mod output;
mod verify;

#[cfg(test)]
mod tests;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_forward, cmd_instability, cmd_spectrum, forward_report, realization_gap, ForwardReport};
pub use config::{ForwardSettings, Inject, QbarPreset, RunConfig, Seeds, SpectrumSettings, SweepGrid, Tolerances, VerifySettings};
pub use output::{artifact_hash, csv_header, scan_hashes, VERSION};
pub use verify::{
    caccioppoli_constants, cmd_verify, entropy_consistency, heat_roundtrip_error, reduction_mismatches, run_checks,
    CheckResult,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "calderon-lab", version = VERSION, about = "Fractional Calderon problem experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; defaults to the reference setup.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `out_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for both the sweep and the random data.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Multiplies every check tolerance.
    #[arg(long = "tol-scale", global = true, value_name = "X")]
    pub tol_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Cylinder eigensystem with Weyl and embedding fits.
    Spectrum,
    /// DtN map at the background with the domination report.
    Forward,
    /// Epsilon sweep of near-invisible potential pairs.
    Instability,
    /// Invariant battery with a pass/fail matrix.
    Verify,
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
}

impl Outcome {
    pub fn pass(summary: String) -> Self {
        Self { passed: true, summary }
    }

    pub fn fail(summary: String) -> Self {
        Self { passed: false, summary }
    }
}

#[derive(Debug)]
pub enum CommandError {
    Usage(String),
    Internal(crate::Error),
}

impl From<crate::Error> for CommandError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Config(m) => CommandError::Usage(m),
            other => CommandError::Internal(other),
        }
    }
}

impl std::fmt::Display for CommandError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandError::Usage(m) => write!(f, "usage error: {m}"),
            CommandError::Internal(e) => write!(f, "internal error: {e}"),
        }
    }
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) => EXIT_USAGE,
            CommandError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl Cli {
    /// The configuration file with the command-line overrides applied.
    pub fn effective_config(&self) -> Result<RunConfig, CommandError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seeds = Seeds { sweep: seed, data: seed };
        }
        if let Some(x) = self.tol_scale {
            cfg.tolerances.scale = x;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<Outcome, CommandError> {
    match command {
        Command::Spectrum => cmd_spectrum(cfg),
        Command::Forward => cmd_forward(cfg),
        Command::Instability => cmd_instability(cfg),
        Command::Verify => cmd_verify(cfg),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let cfg = match cli.effective_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let threads = cli.threads.unwrap_or(0);
    if cli.threads == Some(0) {
        eprintln!("usage error: --threads must be positive");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("internal error: {e}");
            return EXIT_INTERNAL;
        }
    };
    let name = format!("{:?}", cli.command).to_lowercase();
    match pool.install(|| dispatch(cli.command, &cfg)) {
        Ok(o) if o.passed => {
            println!("{name}: pass ({})", o.summary);
            EXIT_PASS
        }
        Ok(o) => {
            println!("{name}: FAIL ({})", o.summary);
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            }
        }
    }
}
