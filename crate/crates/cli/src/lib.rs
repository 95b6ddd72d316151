//! Command dispatch for the `consensus-lab` binary.
//!
//! Exit codes: 0 success, 1 a verification ran and one of its checks failed,
//! 2 the scenario does not parse or validate, 3 a precondition of the
//! requested computation fails, 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use consensus_lab::Error;

mod commands;
mod table;

pub use commands::Output;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Caps the size of the worker pool used by parallel computations.
pub const THREADS_ENV: &str = "CONSENSUS_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "consensus-lab", version, about = "Consensus expectations in networks with incomplete information")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Txt,
    Csv,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Flags {
    /// Coordination weight (game) or continuation probability (market), in [0, 1).
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Comma-separated per-agent coordination weights for the heterogeneous game.
    #[arg(long, global = true, value_delimiter = ',')]
    pub beta_per_agent: Option<Vec<f64>>,
    /// Optimism threshold f̄.
    #[arg(long, global = true)]
    pub fbar: Option<f64>,
    /// Number of market runs.
    #[arg(long, global = true, default_value_t = 1000)]
    pub runs: u64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for CSV tables and the text report.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Txt)]
    pub format: Format,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check a scenario against every model invariant.
    Validate { scenario: PathBuf },
    /// Emit the interaction structure B and first-order map F.
    Build { scenario: PathBuf },
    /// Consensus expectation, type weights p, centralities e and pseudopriors λ.
    Consensus { scenario: PathBuf },
    /// Equilibrium of the β-coordination game (or per-agent β).
    GameSolve { scenario: PathBuf },
    /// Monte Carlo over-the-counter market.
    SimulateMarket { scenario: PathBuf },
    /// Second-order optimism hypotheses and the contagion bound at --fbar.
    VerifyOptimism { scenario: PathBuf },
    /// Tyranny-of-the-least-informed bound for a common-interpretation scenario.
    VerifyTyranny { scenario: PathBuf },
    /// Search for a separable trade with strict expected gains.
    NoTrade { scenario: PathBuf },
    /// Everything that applies to the scenario.
    Report { scenario: PathBuf },
}

impl Command {
    pub fn scenario(&self) -> &Path {
        match self {
            Command::Validate { scenario }
            | Command::Build { scenario }
            | Command::Consensus { scenario }
            | Command::GameSolve { scenario }
            | Command::SimulateMarket { scenario }
            | Command::VerifyOptimism { scenario }
            | Command::VerifyTyranny { scenario }
            | Command::NoTrade { scenario }
            | Command::Report { scenario } => scenario,
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. }
        | Error::Invalid(_)
        | Error::Dimension { .. }
        | Error::MissingStateMarginal { .. }
        | Error::MissingSignalMarginal { .. } => EXIT_INVALID,
        _ => EXIT_PRECONDITION,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    // a second call in the same process (tests) keeps the existing pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args`, runs the command and writes to the given streams; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let sink: &mut dyn Write = if code == EXIT_OK { stdout } else { stderr };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    if let Err(msg) = configure_threads() {
        let _ = writeln!(stderr, "error: {msg}");
        return EXIT_USAGE;
    }
    let output = match commands::execute(&cli.command, &cli.flags) {
        Ok(o) => o,
        Err(commands::Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
        Err(commands::Failure::Lib(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            if let Error::Invalid(violations) = &e {
                for v in violations {
                    let _ = writeln!(stderr, "  {v}");
                }
            }
            return exit_code(&e);
        }
    };
    if let Some(dir) = &cli.flags.out {
        if let Err(e) = output.write_to(dir) {
            let _ = writeln!(stderr, "error: writing to {}: {e}", dir.display());
            return EXIT_PRECONDITION;
        }
    }
    let body = match cli.flags.format {
        Format::Txt => output.text.clone(),
        Format::Csv => output.tables.first().map(|(_, t)| t.clone()).unwrap_or_default(),
    };
    let _ = stdout.write_all(body.as_bytes());
    output.status
}
