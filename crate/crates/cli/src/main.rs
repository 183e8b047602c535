use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pulsehead::{ConfigError, PrcError, SimError, ValidationReport, Variant};
use serde_json::json;

mod curves;
mod format;
mod run;
mod sweep;

#[derive(Parser)]
#[command(
    name = "pulsehead",
    version,
    about = "Rate-limited pulse-coupled heading simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write trace, event and metric CSVs.
    Run(RunArgs),
    /// Sample a response curve to CSV.
    Curves(curves::CurveArgs),
    /// Run a scenario once per value of one parameter.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Normal,
    Instantaneous,
    Oracle,
}

impl VariantArg {
    pub fn variant(self) -> Variant {
        match self {
            VariantArg::Normal => Variant::Normal,
            VariantArg::Instantaneous => Variant::InstantaneousAssumption,
            VariantArg::Oracle => Variant::Oracle,
        }
    }
}

#[derive(Args)]
pub struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "normal")]
    pub variant: VariantArg,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Oracle integration step in seconds.
    #[arg(long, default_value_t = pulsehead::oracle::DEFAULT_STEP)]
    pub step: f64,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// KEY=V1,V2,...
    #[arg(long)]
    pub sweep: String,
    /// Λ or P level used for cycles-to-threshold.
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
    pub violations: Option<ValidationReport>,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "config",
            message: message.into(),
            violations: None,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            kind: "io",
            message: message.into(),
            violations: None,
        }
    }

    /// Exit 2 for range errors, 3 for broken convergence hypotheses.
    pub fn from_report(report: ValidationReport) -> Self {
        let (code, kind) = if report.invalid().next().is_some() {
            (2, "config")
        } else {
            (3, "precondition")
        };
        let message = report
            .invalid()
            .chain(report.hard())
            .map(|v| v.message.clone())
            .collect::<Vec<_>>()
            .join("; ");
        Failure {
            code,
            kind,
            message,
            violations: Some(report),
        }
    }

    fn report(&self) {
        let body = json!({
            "error": self.kind,
            "message": self.message,
            "violations": self.violations.as_ref().map(|r| &r.violations),
        });
        eprintln!("{body}");
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<PrcError> for Failure {
    fn from(e: PrcError) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let (code, kind) = match e {
            SimError::Config(_) => (2, "config"),
            SimError::Precondition(_) => (3, "precondition"),
            SimError::Internal(_) => (4, "internal"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
            violations: None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run::cmd_run(&args.common),
        Command::Curves(args) => curves::cmd_curves(&args),
        Command::Sweep(args) => sweep::cmd_sweep(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code)
        }
    }
}
