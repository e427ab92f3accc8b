//! Command-line front end: `solve`, `refine` and `compare`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! failure.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::error::SolverError;
use crate::scheme::SchemeMode;
use crate::solution::Engine;
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Solver(#[from] SolverError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "asianfb",
    version,
    about = "Free boundary solver for American floating-strike Asian calls"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// March one grid and write boundary, surface and summary files.
    Solve(CommonArgs),
    /// Mesh refinement study with convergence ratios.
    Refine {
        #[command(flatten)]
        common: CommonArgs,
        /// Coarsest number of space intervals.
        #[arg(long = "base-n")]
        base_n: Option<usize>,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Run both engines on the same grid and compare the boundary paths.
    Compare(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long = "T")]
    pub maturity: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long = "L")]
    pub l: Option<f64>,
    #[arg(long = "eps-final")]
    pub eps_final: Option<f64>,
    #[arg(long)]
    pub engine: Option<Engine>,
    #[arg(long = "scheme-mode")]
    pub scheme_mode: Option<SchemeMode>,
    /// Newton tolerance on the update norm.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Comma separated probe times, e.g. `10,20,40`.
    #[arg(long = "tau-probes")]
    pub tau_probes: Option<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// Flat `key = value` file applied before environment and flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Record wall time in the summary JSON (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
}

impl CommonArgs {
    /// Defaults, then the config file, then `ASIANFB_OUT`, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        c.apply_env();
        if let Some(v) = self.r {
            c.market.rate = v;
        }
        if let Some(v) = self.q {
            c.market.dividend = v;
        }
        if let Some(v) = self.sigma {
            c.market.sigma = v;
        }
        if let Some(v) = self.maturity {
            c.market.maturity = v;
        }
        if let Some(v) = self.n {
            c.n = v;
        }
        if self.m.is_some() {
            c.m = self.m;
        }
        if self.l.is_some() {
            c.l = self.l;
        }
        if let Some(v) = self.eps_final {
            c.eps_final = v;
        }
        if let Some(v) = self.engine {
            c.engine = v;
        }
        if let Some(v) = self.scheme_mode {
            c.scheme_mode = v;
        }
        if let Some(v) = self.tol {
            c.newton.tol = v;
        }
        if let Some(v) = self.max_iter {
            c.newton.max_iter = v;
        }
        if let Some(v) = &self.tau_probes {
            c.tau_probes = config::parse_probes(v)?;
        }
        if self.jobs.is_some() {
            c.jobs = self.jobs;
        }
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        c.timing |= self.timing;
        Ok(c)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => {
            let c = args.resolve()?;
            c.validate()?;
            commands::cmd_solve(&c)
        }
        Command::Refine { common, base_n, levels } => {
            let mut c = common.resolve()?;
            if let Some(b) = base_n {
                c.base_n = b;
            }
            if let Some(l) = levels {
                c.levels = l;
            }
            c.validate()?;
            commands::cmd_refine(&c)
        }
        Command::Compare(args) => {
            let c = args.resolve()?;
            c.validate()?;
            commands::cmd_compare(&c)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
