use std::fmt::Write;
use std::fs;
use std::path::Path;
use std::time::Instant;

use pulsehead::metrics::{lambda_series, p_series};
use pulsehead::scenario::validate;
use pulsehead::{
    oracle_run, run_variant, EventKind, OracleConfig, ScenarioFile, SimConfig, Trace, Variant,
};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::format::{num, opt, write_all};
use crate::{Common, Failure};

pub struct Loaded {
    pub file: ScenarioFile,
    pub sha256: String,
}

pub fn load(path: &Path, seed: Option<u64>) -> Result<Loaded, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let mut file = ScenarioFile::parse(&text)?;
    if let Some(s) = seed {
        file.seed = s;
    }
    Ok(Loaded {
        file,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Validates, prints warnings, then runs the requested variant.
pub fn simulate(cfg: &SimConfig, variant: Variant, step: f64) -> Result<Trace, Failure> {
    let report = validate(cfg);
    if !report.runnable() {
        return Err(Failure::from_report(report));
    }
    for w in report.warnings() {
        eprintln!("warning: {}", w.message);
    }
    let trace = match variant {
        Variant::Oracle => oracle_run(&OracleConfig {
            base: cfg.clone(),
            step,
        })?,
        v => run_variant(cfg, v)?,
    };
    Ok(trace)
}

fn trace_csv(trace: &Trace) -> String {
    let mut s = String::from("t,robot_id,phase,heading,omega,adjust_remaining\n");
    for row in &trace.samples {
        for o in &row.states {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                num(row.t),
                o.id + 1,
                num(o.phase),
                num(o.heading),
                num(o.freq),
                num(o.adjust_remaining)
            );
        }
    }
    s
}

fn events_csv(trace: &Trace) -> String {
    let mut s = String::from("t,kind,from_id,to_id,psi,tau,pulse_class\n");
    for e in &trace.events {
        let (from, to) = match e.kind {
            EventKind::Fire { id } => (Some(id), None),
            EventKind::PulseArrival { from, to } => (Some(from), Some(to)),
            EventKind::AdjustComplete { id } => (None, Some(id)),
            EventKind::Sample => continue,
        };
        let id = |x: Option<usize>| x.map(|i| (i + 1).to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(e.time),
            e.kind.name(),
            id(from),
            id(to),
            opt(e.psi),
            opt(e.tau),
            e.pulse_class.map(|c| c.name()).unwrap_or_default()
        );
    }
    s
}

fn series_csv(column: &str, series: &[(f64, f64)]) -> String {
    let mut s = format!("t,{column}\n");
    for (t, v) in series {
        let _ = writeln!(s, "{},{}", num(*t), num(*v));
    }
    s
}

pub fn cmd_run(args: &Common) -> Result<(), Failure> {
    let clock = Instant::now();
    let loaded = load(&args.config, args.seed)?;
    let cfg = loaded.file.to_sim_config()?;
    let variant = args.variant.variant();
    let trace = simulate(&cfg, variant, args.step)?;

    let mut files = vec![
        ("trace.csv", trace_csv(&trace)),
        ("events.csv", events_csv(&trace)),
        ("lambda.csv", series_csv("lambda", &lambda_series(&trace))),
    ];
    if cfg.prc.is_desync() {
        files.push(("p.csv", series_csv("p", &p_series(&trace))));
    }
    let outputs: Vec<&str> = files.iter().map(|f| f.0).collect();
    let manifest = json!({
        "config_path": args.config.display().to_string(),
        "config_sha256": loaded.sha256,
        "seed": loaded.file.seed,
        "variant": variant.name(),
        "oracle_step": (variant == Variant::Oracle).then_some(args.step),
        "outputs": outputs,
        "wall_seconds": clock.elapsed().as_secs_f64(),
    });
    files.push((
        "manifest.json",
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    ));
    write_all(&args.out, &files)
}
