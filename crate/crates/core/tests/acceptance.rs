//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use pulsehead::metrics::{
    apply_general_update, check_rate_constraint, cycles_to_threshold, descending_order,
    desync_measure, direct_measure_change, firing_order_history, heading_drift_rate,
    lambda_at_fires, lambda_series, p_at_fires, p_series, predicted_measure_change, PulseKind,
};
use pulsehead::prc::{
    check_update_map_monotone, effective_coupling_backward, effective_coupling_forward,
    DEFAULT_MONOTONE_SAMPLES,
};
use pulsehead::{
    oracle_run, run, run_instantaneous_assumption, Angle, DelayModel, DesyncPrf, EffectivePrf,
    EventKind, GeneralPrf, OracleConfig, PrcSpec, SimConfig, SyncPrc, Topology, Trace,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W0: f64 = PI / 5.0;
const PERIOD: f64 = TAU / W0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn angles(xs: &[f64]) -> Vec<Angle> {
    xs.iter().map(|&x| Angle::wrap(x).unwrap()).collect()
}

fn arc_headings() -> Vec<f64> {
    [0.0, 0.2, 0.35, 0.6, 0.75, 0.9]
        .iter()
        .map(|f| f * PI)
        .collect()
}

fn sync_config(refractory: f64, cycles: f64) -> SimConfig {
    SimConfig {
        n: 6,
        omega0: W0,
        omega_max: 0.3 * W0,
        prc: PrcSpec::Sync(SyncPrc::new(0.5, refractory).unwrap()),
        topology: Topology::all_to_all(6),
        initial_headings: angles(&arc_headings()),
        delay: DelayModel::Zero,
        drop_prob: 0.0,
        t_end: cycles * PERIOD,
        seed: 0,
        sample_interval: 0.1,
        cancel_on_fire: true,
    }
}

fn desync_headings() -> Vec<f64> {
    (0..6).map(|i| 0.2 + 0.15 * i as f64).collect()
}

fn desync_config(l2: f64, cycles: f64) -> SimConfig {
    SimConfig {
        prc: PrcSpec::Desync(DesyncPrf::new(0.8, l2, 6).unwrap()),
        initial_headings: angles(&desync_headings()),
        ..sync_config(0.0, cycles)
    }
}

/// Λ at firings from the end of the first cycle on never grows.
fn lambda_monotone_after_first_cycle(trace: &Trace) -> f64 {
    let series: Vec<(f64, f64)> = lambda_at_fires(trace)
        .into_iter()
        .filter(|&(t, _)| t >= trace.period())
        .collect();
    pulsehead::metrics::max_increase(&series)
}

fn criterion_1(traces: &mut Vec<Trace>) -> Outcome {
    let clock = Instant::now();
    let trace = run(&sync_config(0.0, 100.0)).unwrap();
    let elapsed = clock.elapsed().as_secs_f64();
    let rise = lambda_monotone_after_first_cycle(&trace);
    let cycles = cycles_to_threshold(&lambda_series(&trace), 1e-6, PERIOD);
    traces.push(trace);
    let pass = rise <= 1e-9 && cycles.is_some_and(|c| c <= 100.0) && elapsed < 1.0;
    outcome(
        pass,
        format!("max Λ rise {rise:.3e}, Λ<1e-6 after {cycles:?} cycles, {elapsed:.3} s"),
    )
}

fn ring_config(seed: u64, ring: bool) -> SimConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: f64 = rng.gen_range(0.0..TAU);
    let headings: Vec<f64> = (0..6)
        .map(|_| base + rng.gen_range(0.0..=0.9 * PI))
        .collect();
    SimConfig {
        topology: if ring {
            Topology::bidirectional_ring(6).unwrap()
        } else {
            Topology::all_to_all(6)
        },
        initial_headings: angles(&headings),
        seed,
        ..sync_config(0.0, 300.0)
    }
}

fn criterion_2(traces: &mut Vec<Trace>) -> Outcome {
    let mut wins = 0;
    let mut worst = String::new();
    for seed in 0..20 {
        let a = run(&ring_config(seed, false)).unwrap();
        let r = run(&ring_config(seed, true)).unwrap();
        let ca = cycles_to_threshold(&lambda_series(&a), 1e-3, PERIOD);
        let cr = cycles_to_threshold(&lambda_series(&r), 1e-3, PERIOD);
        match (ca, cr) {
            (Some(x), Some(y)) if y > x => wins += 1,
            (Some(_), None) => wins += 1,
            other => worst = format!("seed {seed}: {other:?}"),
        }
        if seed < 2 {
            traces.push(a);
            traces.push(r);
        }
    }
    outcome(
        wins == 20,
        format!("ring slower in {wins}/20 seeds {worst}"),
    )
}

fn criterion_3(traces: &mut Vec<Trace>) -> Outcome {
    let trace = run(&sync_config(PI, 150.0)).unwrap();
    let cycles = cycles_to_threshold(&lambda_series(&trace), 1e-6, PERIOD);
    traces.push(trace);
    outcome(
        cycles.is_some_and(|c| c <= 150.0),
        format!("Λ<1e-6 after {cycles:?} cycles"),
    )
}

fn criterion_4(traces: &mut Vec<Trace>) -> Outcome {
    let mut cfg = sync_config(0.0, 300.0);
    cfg.omega_max = 0.05 * W0;
    let trace = run_instantaneous_assumption(&cfg).unwrap();
    let lam = lambda_series(&trace);
    let cycles = cycles_to_threshold(&lam, 1e-3, PERIOD);
    let interrupted = trace.interrupted_count();
    let last = lam.last().map_or(f64::NAN, |p| p.1);
    traces.push(trace);
    outcome(
        cycles.is_none() && interrupted > 0,
        format!(
            "final Λ {last:.4}, reached 1e-3: {cycles:?}, {interrupted} interrupted adjustments"
        ),
    )
}

fn criterion_5(traces: &mut Vec<Trace>) -> Outcome {
    let clock = Instant::now();
    let trace = run(&desync_config(0.6, 200.0)).unwrap();
    let elapsed = clock.elapsed().as_secs_f64();
    let rise = pulsehead::metrics::max_increase(&p_at_fires(&trace));
    let cycles = cycles_to_threshold(&p_series(&trace), 1e-6, PERIOD);
    traces.push(trace);
    outcome(
        rise <= 1e-9 && cycles.is_some_and(|c| c <= 200.0) && elapsed < 1.0,
        format!("max P rise {rise:.3e}, P<1e-6 after {cycles:?} cycles, {elapsed:.3} s"),
    )
}

struct SuiteStats {
    runs: usize,
    pulses: usize,
    worst_rise: f64,
    silent: usize,
    silent_changed: usize,
    cycles_checked: usize,
    cycles_without_active: usize,
    predictions: usize,
    worst_prediction: f64,
    order_violations: usize,
}

fn random_desync_config(rng: &mut ChaCha8Rng, seed: u64) -> SimConfig {
    let n = rng.gen_range(3..=10);
    let l1 = rng.gen_range(0.05..0.95);
    let l2 = rng.gen_range(0.05..0.95);
    let sep = TAU / (100.0 * n as f64);
    let mut hs: Vec<Angle> = Vec::new();
    while hs.len() < n {
        let c = Angle::wrap(rng.gen_range(0.0..TAU)).unwrap();
        if hs.iter().all(|h| h.distance(c) >= sep) {
            hs.push(c);
        }
    }
    SimConfig {
        n,
        omega0: W0,
        omega_max: rng.gen_range(0.1..1.0) * W0,
        prc: PrcSpec::Desync(DesyncPrf::new(l1, l2, n).unwrap()),
        topology: Topology::all_to_all(n),
        initial_headings: hs,
        delay: DelayModel::Zero,
        drop_prob: 0.0,
        t_end: 60.0 * PERIOD,
        seed,
        sample_interval: 0.5,
        cancel_on_fire: true,
    }
}

fn random_desync_suite(traces: &mut Vec<Trace>) -> SuiteStats {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut st = SuiteStats {
        runs: 0,
        pulses: 0,
        worst_rise: f64::NEG_INFINITY,
        silent: 0,
        silent_changed: 0,
        cycles_checked: 0,
        cycles_without_active: 0,
        predictions: 0,
        worst_prediction: 0.0,
        order_violations: 0,
    };
    for seed in 0..500u64 {
        let cfg = random_desync_config(&mut rng, seed);
        let PrcSpec::Desync(prf) = cfg.prc.clone() else {
            unreachable!()
        };
        let n = cfg.n;
        let trace = run(&cfg).unwrap();
        st.runs += 1;
        if !firing_order_history(&trace).invariant {
            st.order_violations += 1;
        }
        let fires: Vec<_> = trace.fires().collect();
        let constant = GeneralPrf::from_desync(&prf);
        let mut p_prev: Option<f64> = None;
        for (j, e) in fires.iter().enumerate() {
            let EventKind::Fire { id } = e.kind else {
                unreachable!()
            };
            let snap = e.snapshot.as_ref().unwrap();
            let phases: Vec<f64> = snap.iter().map(|s| s.phase).collect();
            let hs = angles(&phases);
            let order = descending_order(&hs);
            let p = desync_measure(&hs, &order).unwrap().p;
            st.pulses += 1;
            if let Some(prev) = p_prev {
                st.worst_rise = st.worst_rise.max(p - prev);
            }
            p_prev = Some(p);

            if e.pulse_class == Some(PulseKind::Silent) {
                st.silent += 1;
                let after = apply_general_update(&phases, id, &constant);
                let p_after = desync_measure(&angles(&after), &order).unwrap().p;
                if p_after != p {
                    st.silent_changed += 1;
                }
            }

            let bands = prf.bands();
            let fwd = phases
                .iter()
                .enumerate()
                .any(|(i, &x)| i != id && bands.in_forward(x));
            let back = phases
                .iter()
                .enumerate()
                .any(|(i, &x)| i != id && bands.in_backward(x));
            if fwd && back {
                let direct = direct_measure_change(&phases, id, &constant).unwrap();
                let pred =
                    predicted_measure_change(&phases, |_| prf.l1(), |_| prf.l2(), id).unwrap();
                st.predictions += 1;
                st.worst_prediction = st.worst_prediction.max((pred - direct).abs());

                if let Some(next) = fires.get(j + 1) {
                    let t0 = next.time - e.time;
                    if t0 > 0.0 {
                        let (p1, p2) = (prf, prf);
                        let wm = cfg.omega_max;
                        let f = move |x: f64| {
                            effective_coupling_forward(&p1, Angle::wrap(x).unwrap(), wm, t0)
                                .unwrap_or(0.0)
                        };
                        let b = move |x: f64| {
                            effective_coupling_backward(&p2, Angle::wrap(x).unwrap(), wm, t0)
                                .unwrap_or(0.0)
                        };
                        let eff = GeneralPrf::new(n, f, b);
                        let direct = direct_measure_change(&phases, id, &eff).unwrap();
                        let pred = predicted_measure_change(&phases, f, b, id).unwrap();
                        st.predictions += 1;
                        st.worst_prediction = st.worst_prediction.max((pred - direct).abs());
                    }
                }
            }
        }
        // Cycles that start above tolerance must contain an active pulse.
        for chunk in fires.chunks(n) {
            if chunk.len() < n {
                break;
            }
            let first = chunk[0].snapshot.as_ref().unwrap();
            let p0 = desync_measure(
                &angles(&first.iter().map(|s| s.phase).collect::<Vec<_>>()),
                &descending_order(&angles(&first.iter().map(|s| s.phase).collect::<Vec<_>>())),
            )
            .unwrap()
            .p;
            if p0 <= 1e-9 {
                break;
            }
            st.cycles_checked += 1;
            if chunk
                .iter()
                .all(|e| e.pulse_class != Some(PulseKind::Active))
            {
                st.cycles_without_active += 1;
            }
        }
        if seed < 10 {
            traces.push(trace);
        }
    }
    st
}

fn criterion_6(st: &SuiteStats, elapsed: f64) -> Outcome {
    let pass = st.worst_rise <= 1e-9
        && st.silent_changed == 0
        && st.cycles_without_active == 0
        && st.worst_prediction < 1e-9
        && elapsed < 30.0;
    outcome(
        pass,
        format!(
            "{} runs, {} pulses, worst P rise {:.3e}, {} silent ({} changed P), \
             {}/{} pre-convergence cycles lack an active pulse, \
             {} predictions worst error {:.3e}, {elapsed:.2} s",
            st.runs,
            st.pulses,
            st.worst_rise,
            st.silent,
            st.silent_changed,
            st.cycles_without_active,
            st.cycles_checked,
            st.predictions,
            st.worst_prediction
        ),
    )
}

fn criterion_7(desync: &Trace, st: &SuiteStats) -> Outcome {
    let main = firing_order_history(desync).invariant;
    outcome(
        main && st.order_violations == 0,
        format!(
            "desync run invariant: {main}; random runs with order changes: {}",
            st.order_violations
        ),
    )
}

fn criterion_8(traces: &[Trace]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut bad = 0;
    for t in traces {
        let r = check_rate_constraint(t);
        worst = worst.max(r.max_excess);
        bad += r.bad_freq;
    }
    outcome(
        worst <= 1e-9 && bad == 0,
        format!(
            "{} traces, worst |Δθ| - ω_max·Δt = {worst:.3e}, {bad} off-level frequencies",
            traces.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = Vec::new();
    for _ in 0..100 {
        let n = rng.gen_range(2..=12);
        let l1 = rng.gen_range(0.0..0.999);
        let l2 = rng.gen_range(0.0..0.999);
        let Ok(prf) = DesyncPrf::new(l1, l2, n) else {
            continue;
        };
        let r = check_update_map_monotone(&GeneralPrf::from_desync(&prf), DEFAULT_MONOTONE_SAMPLES)
            .unwrap();
        if !r.monotone {
            failures.push(format!("desync n={n} l1={l1} l2={l2}"));
        }
    }
    let base = DesyncPrf::new(0.8, 0.6, 5).unwrap();
    let w0 = TAU;
    let mut effective = 0;
    while effective < 100 {
        let wm = rng.gen_range(0.05..1.0) * w0;
        let t0 = rng.gen_range(0.001..1.0);
        let Ok(eff) = EffectivePrf::new(base, wm, t0) else {
            continue;
        };
        effective += 1;
        let r = check_update_map_monotone(&eff.to_general(), DEFAULT_MONOTONE_SAMPLES).unwrap();
        if !r.monotone {
            failures.push(format!("effective wm={wm} t0={t0}"));
        }
    }
    let n = 5;
    let jump = GeneralPrf::new(
        n,
        move |x| if x < PI / n as f64 { 0.99 } else { 0.0 },
        |_| 0.5,
    )
    .with_breakpoints(vec![PI / n as f64]);
    let adversarial = check_update_map_monotone(&jump, DEFAULT_MONOTONE_SAMPLES).unwrap();
    outcome(
        failures.is_empty() && !adversarial.monotone,
        format!(
            "200 rules checked, {} non-monotone; adversarial rule flagged at {:?}",
            failures.len(),
            adversarial.violation
        ),
    )
}

fn max_phase_gap(a: &Trace, b: &Trace) -> f64 {
    assert_eq!(a.samples.len(), b.samples.len(), "sample grids differ");
    let mut worst: f64 = 0.0;
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert!((x.t - y.t).abs() < 1e-6);
        for (p, q) in x.states.iter().zip(&y.states) {
            let d = Angle::wrap(p.phase)
                .unwrap()
                .distance(Angle::wrap(q.phase).unwrap());
            worst = worst.max(d);
        }
    }
    worst
}

fn max_series_gap(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.1 - y.1).abs())
        .fold(0.0, f64::max)
}

/// Floating-point noise floor of the phase gap after ~10⁷ oracle steps.
const ROUNDING: f64 = 1e-12;

fn criterion_10() -> Outcome {
    let clock = Instant::now();
    let h = 1e-4;
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, cfg) in [
        ("sync", sync_config(0.0, 100.0)),
        ("desync", desync_config(0.6, 200.0)),
    ] {
        let engine = run(&cfg).unwrap();
        let coarse = oracle_run(&OracleConfig {
            base: cfg.clone(),
            step: h,
        })
        .unwrap();
        let fine = oracle_run(&OracleConfig {
            base: cfg.clone(),
            step: h / 2.0,
        })
        .unwrap();
        let d1 = max_phase_gap(&engine, &coarse);
        let d2 = max_phase_gap(&engine, &fine);
        let bound = 10.0 * cfg.omega0 * h;
        let mut ok = d1 < bound && d2 <= d1 / 2.0 + ROUNDING;
        notes.push(format!(
            "{name}: max gap {d1:.3e} at h, {d2:.3e} at h/2 (ratio {:.9}, bound {bound:.3e})",
            d1 / d2
        ));
        if name == "desync" {
            let dp = max_series_gap(&p_series(&engine), &p_series(&coarse));
            ok &= dp < bound;
            notes.push(format!("P gap {dp:.3e}"));
        }
        pass &= ok;
    }
    let elapsed = clock.elapsed().as_secs_f64();
    pass &= elapsed < 60.0;
    notes.push(format!("{elapsed:.2} s"));
    outcome(pass, notes.join("; "))
}

fn drift(cfg: SimConfig) -> f64 {
    heading_drift_rate(&run(&cfg).unwrap()).unwrap()
}

fn criterion_11() -> Outcome {
    let delayed = |mut c: SimConfig| {
        c.delay = DelayModel::Fixed(0.05);
        c.t_end = 300.0 * PERIOD;
        c
    };
    let sync0 = drift(delayed(sync_config(0.0, 1.0)));
    let sync_d = drift(delayed(sync_config(PI, 1.0)));
    let spread = |l2: f64| {
        let mut c = desync_config(l2, 1.0);
        c.initial_headings = [0.0, 0.9, 2.0, 3.1, 4.0, 5.2]
            .iter()
            .map(|&x| Angle::wrap(x).unwrap())
            .collect();
        delayed(c)
    };
    let des6 = drift(spread(0.6));
    let des0 = drift(spread(0.0));
    outcome(
        sync0 < 0.0 && sync_d.abs() < sync0.abs() && des0.abs() < des6.abs(),
        format!(
            "sync D=0 {sync0:.4e} rad/s, D=π {sync_d:.4e}; desync l2=0.6 {des6:.4e}, l2=0 {des0:.4e}"
        ),
    )
}

fn main() -> ExitCode {
    let mut traces = Vec::new();
    let mut results: Vec<(usize, Outcome)> = vec![
        (1, criterion_1(&mut traces)),
        (2, criterion_2(&mut traces)),
        (3, criterion_3(&mut traces)),
        (4, criterion_4(&mut traces)),
        (5, criterion_5(&mut traces)),
    ];
    let desync_trace = traces.last().unwrap().clone();
    let clock = Instant::now();
    let stats = random_desync_suite(&mut traces);
    results.push((6, criterion_6(&stats, clock.elapsed().as_secs_f64())));
    results.push((7, criterion_7(&desync_trace, &stats)));
    results.push((8, criterion_8(&traces)));
    results.push((9, criterion_9()));
    results.push((10, criterion_10()));
    results.push((11, criterion_11()));

    let mut failed = 0;
    for (k, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {k:>2}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", results.len());
        ExitCode::FAILURE
    }
}
