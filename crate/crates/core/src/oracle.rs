//! Fixed-step reference integrator for cross-checking the event engine.
//!
//! Time advances in steps of `h`. Within a step each robot follows a
//! piecewise-linear phase path whose knots are recorded, so threshold
//! crossings and the phases seen by listeners are read off that path.
//! Pulse handling happens at the end of each step, so every frequency change
//! an event causes (a response starting, or a firing cancelling one) takes
//! effect exactly one step after that event. This uniform latency is the
//! integrator's only systematic error, so the gap to the exact engine shrinks
//! linearly with `h`.

use std::f64::consts::TAU;

use crate::engine::{
    EventKind, EventRecord, OscillatorState, SampleRow, SimConfig, Trace, Variant,
};
use crate::error::SimError;
use crate::metrics::classify_pulse;
use crate::prc::PrcSpec;
use crate::scenario::validate;
use crate::torus::{wrap_radians, Angle};

pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub base: SimConfig,
    /// Integration step `h` in seconds.
    pub step: f64,
}

/// A frequency change scheduled for the next step.
#[derive(Debug, Clone, Copy)]
enum Action {
    Start { sign: i8, duration: f64 },
    Cancel,
}

struct Robot {
    state: OscillatorState,
    /// Absolute times, sorted; cancels sort before starts at equal times.
    actions: Vec<(f64, Action)>,
    /// `(t, phase)` knots of the current step.
    path: Vec<(f64, f64)>,
    fired_at: Option<f64>,
    /// Phase and heading are evaluated from the last frequency change to
    /// avoid accumulating rounding over millions of steps.
    anchor: (f64, f64, f64),
    adjust_until: f64,
}

impl Robot {
    fn reanchor(&mut self, t: f64) {
        self.anchor = (t, self.state.phase, self.state.heading);
    }

    fn move_to(&mut self, t: f64, wm: f64) {
        let (ta, pa, ha) = self.anchor;
        let s = &mut self.state;
        s.phase = pa + s.freq * (t - ta);
        s.heading = wrap_radians(ha + f64::from(s.adjust_sign) * wm * (t - ta));
        s.adjust_remaining = if s.adjust_sign != 0 {
            (self.adjust_until - t).max(0.0)
        } else {
            0.0
        };
        self.path.push((t, s.phase));
    }

    /// Phase at `t` read off this step's path (pre-reset values).
    fn phase_at(&self, t: f64) -> f64 {
        let p = &self.path;
        for w in p.windows(2) {
            let ((t0, y0), (t1, y1)) = (w[0], w[1]);
            if t <= t1 {
                if t1 <= t0 {
                    return y1;
                }
                return y0 + (y1 - y0) * (t - t0) / (t1 - t0);
            }
        }
        p.last().map_or(self.state.phase, |k| k.1)
    }

    /// First time the path reaches `level`.
    fn crossing(&self, level: f64) -> Option<f64> {
        for w in self.path.windows(2) {
            let ((t0, y0), (t1, y1)) = (w[0], w[1]);
            if y1 >= level {
                if y1 <= y0 {
                    return Some(t0);
                }
                return Some(t0 + (t1 - t0) * ((level - y0) / (y1 - y0)).clamp(0.0, 1.0));
            }
        }
        None
    }
}

fn completion_record(time: f64, before: OscillatorState, after: OscillatorState) -> EventRecord {
    EventRecord {
        time,
        kind: EventKind::AdjustComplete { id: before.id },
        psi: None,
        tau: None,
        interrupted: false,
        cancelled: false,
        pulse_class: None,
        before: Some(before),
        after: Some(after),
        snapshot: None,
    }
}

/// Runs one robot from `t` to `t_end`, appending knots.
fn evolve(r: &mut Robot, t: f64, t_end: f64, w0: f64, wm: f64, log: &mut Vec<EventRecord>) {
    if t_end <= t {
        return;
    }
    if r.state.adjust_sign != 0 && r.adjust_until <= t_end {
        let done = r.adjust_until.max(t);
        r.move_to(done, wm);
        let before = r.state;
        let s = &mut r.state;
        s.adjust_remaining = 0.0;
        s.adjust_sign = 0;
        s.freq = w0;
        log.push(completion_record(done, before, r.state));
        r.reanchor(done);
    }
    r.move_to(t_end, wm);
}

pub fn oracle_run(config: &OracleConfig) -> Result<Trace, SimError> {
    let cfg = &config.base;
    let h = config.step;
    let report = validate(cfg);
    if let Some(v) = report.invalid().next() {
        return Err(SimError::Config(v.message.clone()));
    }
    if let Some(v) = report.hard().next() {
        return Err(SimError::Precondition(v.message.clone()));
    }
    if !cfg.delay.is_zero() || cfg.drop_prob > 0.0 {
        return Err(SimError::Config(
            "the fixed-step integrator supports only instant, lossless pulses".into(),
        ));
    }
    if !(h.is_finite() && h > 0.0 && h <= cfg.period()) {
        return Err(SimError::Config(format!("step {h} outside (0, 2π/ω₀]")));
    }
    let ratio = cfg.sample_interval / h;
    let steps_per_sample = ratio.round();
    if steps_per_sample < 1.0 || (ratio - steps_per_sample).abs() > 1e-6 * ratio {
        return Err(SimError::Config(format!(
            "sample interval {} is not a multiple of the step {h}",
            cfg.sample_interval
        )));
    }
    let steps_per_sample = steps_per_sample as u64;
    let total_steps = (cfg.t_end / h - 1e-9).ceil().max(0.0) as u64;

    let (w0, wm) = (cfg.omega0, cfg.omega_max);
    let mut robots: Vec<Robot> = cfg
        .initial_headings
        .iter()
        .enumerate()
        .map(|(id, a)| Robot {
            state: OscillatorState {
                id,
                phase: a.radians(),
                heading: a.radians(),
                freq: w0,
                adjust_remaining: 0.0,
                adjust_sign: 0,
            },
            actions: Vec::new(),
            path: Vec::with_capacity(6),
            fired_at: None,
            anchor: (0.0, a.radians(), a.radians()),
            adjust_until: 0.0,
        })
        .collect();
    let snapshot = |robots: &[Robot]| robots.iter().map(|r| r.state).collect::<Vec<_>>();
    let mut trace = Trace {
        n: cfg.n,
        omega0: w0,
        omega_max: wm,
        variant: Variant::Oracle,
        events: Vec::new(),
        samples: vec![SampleRow {
            t: 0.0,
            states: snapshot(&robots),
        }],
    };

    let mut fired: Vec<(f64, usize)> = Vec::new();
    for k in 0..total_steps {
        let t = k as f64 * h;
        let t1 = (k + 1) as f64 * h;

        for r in robots.iter_mut() {
            r.path.clear();
            r.path.push((t, r.state.phase));
            r.fired_at = None;
            let mut at = t;
            let actions = std::mem::take(&mut r.actions);
            for (when, action) in actions {
                let when = when.clamp(at, t1);
                evolve(r, at, when, w0, wm, &mut trace.events);
                at = when;
                r.reanchor(when);
                let s = &mut r.state;
                match action {
                    Action::Start { sign, duration } => {
                        s.adjust_sign = sign;
                        s.adjust_remaining = duration;
                        s.freq = w0 + f64::from(sign) * wm;
                        r.adjust_until = when + duration;
                    }
                    Action::Cancel => {
                        s.adjust_sign = 0;
                        s.adjust_remaining = 0.0;
                        s.freq = w0;
                    }
                }
            }
            evolve(r, at, t1, w0, wm, &mut trace.events);
        }

        fired.clear();
        for (i, r) in robots.iter_mut().enumerate() {
            if r.state.phase < TAU {
                continue;
            }
            let tf = r.crossing(TAU).unwrap_or(t1);
            r.fired_at = Some(tf);
            r.state.phase -= TAU;
            r.anchor.1 -= TAU;
            if cfg.cancel_on_fire {
                r.actions.push((tf + h, Action::Cancel));
            }
            fired.push((tf, i));
        }
        fired.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        for &(tf, id) in &fired {
            let snap = snapshot(&robots);
            let pulse_class = match cfg.prc {
                PrcSpec::Sync(_) => None,
                _ => {
                    let listeners: Vec<Angle> = snap
                        .iter()
                        .filter(|s| s.id != id)
                        .map(|s| Angle::wrap(s.phase).expect("finite phase"))
                        .collect();
                    Some(classify_pulse(&listeners, cfg.n).kind)
                }
            };
            trace.events.push(EventRecord {
                time: tf,
                kind: EventKind::Fire { id },
                psi: None,
                tau: None,
                interrupted: false,
                cancelled: false,
                pulse_class,
                before: None,
                after: Some(robots[id].state),
                snapshot: Some(snap),
            });
            for &to in cfg.topology.out_neighbors(id) {
                let rx = &robots[to];
                let phase_then = match rx.fired_at {
                    Some(tr) if tr <= tf => rx.phase_at(tf) - TAU,
                    _ => rx.phase_at(tf),
                };
                let before = rx.state;
                let psi = cfg
                    .prc
                    .response(Angle::wrap(phase_then).expect("finite phase"));
                let mut tau = None;
                let mut interrupted = false;
                if psi != 0.0 {
                    let d = psi.abs() / wm;
                    interrupted = before.adjust_sign != 0 && before.adjust_remaining > 0.0;
                    let sign = if psi > 0.0 { 1 } else { -1 };
                    robots[to]
                        .actions
                        .push((tf + h, Action::Start { sign, duration: d }));
                    tau = Some(d);
                }
                trace.events.push(EventRecord {
                    time: tf,
                    kind: EventKind::PulseArrival { from: id, to },
                    psi: Some(psi),
                    tau,
                    interrupted,
                    cancelled: false,
                    pulse_class: None,
                    before: Some(before),
                    after: Some(robots[to].state),
                    snapshot: None,
                });
            }
        }

        for r in robots.iter_mut() {
            r.actions.sort_by(|a, b| {
                let rank = |x: &Action| matches!(x, Action::Start { .. }) as u8;
                a.0.total_cmp(&b.0).then(rank(&a.1).cmp(&rank(&b.1)))
            });
        }

        if (k + 1) % steps_per_sample == 0 {
            trace.samples.push(SampleRow {
                t: t1,
                states: snapshot(&robots),
            });
        }
    }
    trace.events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run;
    use crate::prc::SyncPrc;
    use crate::scenario::{DelayModel, Topology};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn config(headings: &[f64], t_end: f64) -> SimConfig {
        let n = headings.len();
        SimConfig {
            n,
            omega0: PI / 5.0,
            omega_max: 0.3 * PI / 5.0,
            prc: PrcSpec::Sync(SyncPrc::new(0.5, 0.0).unwrap()),
            topology: Topology::all_to_all(n),
            initial_headings: headings.iter().map(|&h| Angle::wrap(h).unwrap()).collect(),
            delay: DelayModel::Zero,
            drop_prob: 0.0,
            t_end,
            seed: 0,
            sample_interval: 0.1,
            cancel_on_fire: true,
        }
    }

    #[test]
    fn free_oscillator_period() {
        let c = OracleConfig {
            base: config(&[0.0], 45.0),
            step: 1e-4,
        };
        let t = oracle_run(&c).unwrap();
        let fires: Vec<f64> = t.fires().map(|e| e.time).collect();
        assert_eq!(fires.len(), 4);
        for (k, f) in fires.iter().enumerate() {
            assert_abs_diff_eq!(*f, 10.0 * (k + 1) as f64, epsilon = 1e-4);
        }
    }

    #[test]
    fn rejects_delays_and_drops() {
        let mut base = config(&[0.0, 1.0], 10.0);
        base.delay = DelayModel::Fixed(0.01);
        assert!(oracle_run(&OracleConfig { base, step: 1e-3 }).is_err());
        let mut base = config(&[0.0, 1.0], 10.0);
        base.drop_prob = 0.2;
        assert!(oracle_run(&OracleConfig { base, step: 1e-3 }).is_err());
        let base = config(&[0.0, 1.0], 10.0);
        assert!(oracle_run(&OracleConfig { base, step: 0.03 }).is_err());
    }

    #[test]
    fn respects_rate_limit_each_step() {
        let base = config(&[0.0, 0.9, 2.1], 40.0);
        let t = oracle_run(&OracleConfig { base, step: 1e-3 }).unwrap();
        let r = crate::metrics::check_rate_constraint(&t);
        assert!(r.holds(1e-9), "{r:?}");
    }

    #[test]
    fn tracks_engine_on_small_network() {
        let base = config(&[0.0, 0.9, 2.1], 60.0);
        let engine = run(&base).unwrap();
        let oracle = oracle_run(&OracleConfig {
            base: base.clone(),
            step: 1e-4,
        })
        .unwrap();
        assert_eq!(engine.samples.len(), oracle.samples.len());
        let mut worst: f64 = 0.0;
        for (a, b) in engine.samples.iter().zip(&oracle.samples) {
            assert_abs_diff_eq!(a.t, b.t, epsilon = 1e-9);
            for (x, y) in a.states.iter().zip(&b.states) {
                let d = Angle::wrap(x.phase)
                    .unwrap()
                    .distance(Angle::wrap(y.phase).unwrap());
                worst = worst.max(d);
            }
        }
        assert!(worst < 10.0 * base.omega0 * 1e-4, "worst {worst}");
    }
}
