//! `geo`: generalized means, pullback geodesics, Hessian factorizations,
//! Bregman comparison and Legendre duality from the command line.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 domain or precondition
//! failure, 64 input parse failure.

mod commands;
mod config;
mod error;
mod report;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "geo", version, about = "Quasi-arithmetic means and pullback geometry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Report path; overrides `output_path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// First point, comma separated.
    #[arg(long, value_parser = parse_coords, allow_hyphen_values = true)]
    x: Option<Coords>,
    /// Second point, comma separated.
    #[arg(long, value_parser = parse_coords, allow_hyphen_values = true)]
    y: Option<Coords>,
}

#[derive(Debug, Clone)]
pub struct Coords(pub Vec<f64>);

fn parse_coords(s: &str) -> Result<Coords, String> {
    s.split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|_| format!("`{f}` is not a number")))
        .collect::<Result<Vec<_>, _>>()
        .map(Coords)
}

#[derive(Subcommand)]
enum Command {
    /// Generalized mean of the input points, with a minimality check.
    Mean(Common),
    /// Geodesic distance between --x and --y.
    Distance(Common),
    /// Sampled closed-form geodesic from --x to --y.
    Geodesic {
        #[command(flatten)]
        common: Common,
        /// Number of samples on [0, 1].
        #[arg(long, default_value_t = 11)]
        points: usize,
        /// Also write the samples as CSV rows `t, x1..xn`.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Bregman divergence against half the squared distance.
    Compare(Common),
    /// Square-root factorization of a potential, or integrability of a map.
    Factorize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = RootKind::Symmetric)]
        kind: RootKind,
    },
    /// Legendre conjugate at --x.
    Conjugate {
        #[command(flatten)]
        common: Common,
        /// Invert the gradient by Newton even when a closed form exists.
        #[arg(long)]
        newton: bool,
    },
    /// Run an invariant battery.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        suite: Suite,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum RootKind {
    Symmetric,
    Cholesky,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Dynamics,
    Bridge,
    Bregman,
    Legendre,
    All,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Mean(c) | Command::Distance(c) | Command::Compare(c) => c,
        Command::Geodesic { common, .. }
        | Command::Factorize { common, .. }
        | Command::Conjugate { common, .. }
        | Command::Verify { common, .. } => common,
    };
    let cfg = RunConfig::load(&common.config)?;
    let out = common.out.clone().or_else(|| cfg.output_path.clone());
    let (x, y) = (common.x.as_ref(), common.y.as_ref());
    let report = match &cli.command {
        Command::Mean(_) => commands::mean(&cfg)?,
        Command::Distance(_) => commands::distance(&cfg, x, y)?,
        Command::Geodesic { points, csv, .. } => commands::geodesic(&cfg, x, y, *points, csv.as_deref())?,
        Command::Compare(_) => commands::compare(&cfg, x, y)?,
        Command::Factorize { kind, .. } => commands::factorize(&cfg, x, y, *kind)?,
        Command::Conjugate { newton, .. } => commands::conjugate(&cfg, x, *newton)?,
        Command::Verify { suite, .. } => suites::verify(&cfg, *suite)?,
    };
    report.finish(out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
