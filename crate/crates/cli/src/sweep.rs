use std::cmp::Ordering;
use std::fmt::Write;
use std::time::Instant;

use pulsehead::metrics::{cycles_to_threshold, heading_drift_rate, lambda_series, p_series};
use pulsehead::scenario::SWEEP_AXES;
use pulsehead::ConfigError;
use rayon::prelude::*;
use serde_json::json;

use crate::format::{num, opt, write_all};
use crate::run::{load, simulate};
use crate::{Failure, SweepArgs};

struct Row {
    value: String,
    metric: &'static str,
    last: f64,
    cycles: Option<f64>,
    drift: Option<f64>,
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<String>), Failure> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Failure::config(format!("--sweep expects KEY=V1,V2,..., got `{spec}`")))?;
    let key = key.trim().to_string();
    if !SWEEP_AXES.contains(&key.as_str()) {
        return Err(ConfigError::UnknownAxis(key).into());
    }
    let values = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    Ok((key, values))
}

/// Numeric order when every value is a number, text order otherwise.
fn order(rows: &mut [Row]) {
    let numeric = rows.iter().all(|r| r.value.parse::<f64>().is_ok());
    rows.sort_by(|a, b| {
        if numeric {
            let (x, y): (f64, f64) = (a.value.parse().unwrap(), b.value.parse().unwrap());
            x.total_cmp(&y)
        } else {
            Ordering::Equal
        }
        .then_with(|| a.value.cmp(&b.value))
    });
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let clock = Instant::now();
    let common = &args.common;
    let (key, values) = parse_sweep(&args.sweep)?;
    let loaded = load(&common.config, common.seed)?;
    let variant = common.variant.variant();

    let configs = values
        .iter()
        .map(|v| {
            let mut file = loaded.file.clone();
            file.set(&key, v)?;
            Ok((v.clone(), file.to_sim_config()?))
        })
        .collect::<Result<Vec<_>, Failure>>()?;

    let mut rows = configs
        .into_par_iter()
        .map(|(value, cfg)| {
            let trace = simulate(&cfg, variant, common.step)?;
            let (metric, series) = if cfg.prc.is_desync() {
                ("p", p_series(&trace))
            } else {
                ("lambda", lambda_series(&trace))
            };
            Ok(Row {
                value,
                metric,
                last: series.last().map_or(f64::NAN, |p| p.1),
                cycles: cycles_to_threshold(&series, args.threshold, cfg.period()),
                drift: heading_drift_rate(&trace),
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    order(&mut rows);

    let mut summary = String::from("value,metric,final,cycles_to_threshold,drift_rate\n");
    for r in &rows {
        let _ = writeln!(
            summary,
            "{},{},{},{},{}",
            r.value,
            r.metric,
            num(r.last),
            opt(r.cycles),
            opt(r.drift)
        );
    }
    let manifest = json!({
        "config_path": common.config.display().to_string(),
        "config_sha256": loaded.sha256,
        "seed": loaded.file.seed,
        "variant": variant.name(),
        "axis": key,
        "values": values,
        "threshold": args.threshold,
        "outputs": ["summary.csv"],
        "wall_seconds": clock.elapsed().as_secs_f64(),
    });
    write_all(
        &common.out,
        &[
            ("summary.csv", summary),
            (
                "manifest.json",
                serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
            ),
        ],
    )
}
