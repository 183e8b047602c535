use std::f64::consts::TAU;
use std::fmt::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use pulsehead::prc::sample_curve;
use pulsehead::{DesyncPrf, EffectivePrf, PrcSpec, SyncPrc};

use crate::format::num;
use crate::run::load;
use crate::Failure;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Sync,
    Desync,
}

#[derive(Args)]
pub struct CurveArgs {
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
    /// Take the rule, N and ω_max from a scenario file.
    #[arg(long, conflicts_with = "kind")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "config")]
    pub kind: Option<Kind>,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Refractory length D in radians.
    #[arg(long, default_value_t = 0.0)]
    pub refractory: f64,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 0.8)]
    pub l1: f64,
    #[arg(long, default_value_t = 0.6)]
    pub l2: f64,
    /// Heading rate limit in rad/s; defaults to 0.5·2π or the scenario value.
    #[arg(long)]
    pub omega_max: Option<f64>,
    /// Time to the next pulse in seconds; enables the rate-limited curve.
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub points: usize,
}

fn rule(args: &CurveArgs) -> Result<(PrcSpec, f64), Failure> {
    if let Some(path) = &args.config {
        let cfg = load(path, None)?.file.to_sim_config()?;
        return Ok((cfg.prc, args.omega_max.unwrap_or(cfg.omega_max)));
    }
    let prc = match args.kind.expect("clap requires kind") {
        Kind::Sync => PrcSpec::Sync(SyncPrc::new(args.alpha, args.refractory)?),
        Kind::Desync => PrcSpec::Desync(DesyncPrf::new(args.l1, args.l2, args.n)?),
    };
    Ok((prc, args.omega_max.unwrap_or(0.5 * TAU)))
}

pub fn cmd_curves(args: &CurveArgs) -> Result<(), Failure> {
    let (mut prc, omega_max) = rule(args)?;
    if let Some(t0) = args.t0 {
        let PrcSpec::Desync(base) = prc else {
            return Err(Failure::config("--t0 applies to desync rules only"));
        };
        prc = PrcSpec::General(EffectivePrf::new(base, omega_max, t0)?.to_general());
    }
    let mut s = String::from("phi,response,updated\n");
    for p in sample_curve(&prc, args.points) {
        let _ = writeln!(s, "{},{},{}", num(p.phi), num(p.response), num(p.updated));
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(&args.out, s).map_err(|e| Failure::io(format!("{}: {e}", args.out.display())))
}
