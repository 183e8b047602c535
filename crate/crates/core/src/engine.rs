//! Event-driven simulation of rate-limited pulse-coupled heading control.
//!
//! Between events every oscillator's phase grows linearly at its current
//! frequency, so the next threshold crossing and the end of any running
//! adjustment are known in closed form.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::SimError;
use crate::metrics::{classify_pulse, PulseKind};
use crate::prc::PrcSpec;
use crate::scenario::{sample_delay, validate, DelayModel, Topology};
use crate::torus::{wrap_radians, Angle, EPS_ANGLE};

/// Everything needed to reproduce a run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    /// Fundamental phase rate ω₀ (rad/s).
    pub omega0: f64,
    /// Maximum rotation rate ω_max (rad/s).
    pub omega_max: f64,
    pub prc: PrcSpec,
    pub topology: Topology,
    pub initial_headings: Vec<Angle>,
    pub delay: DelayModel,
    pub drop_prob: f64,
    pub t_end: f64,
    pub seed: u64,
    pub sample_interval: f64,
    /// Abort an unfinished adjustment when the robot fires.
    pub cancel_on_fire: bool,
}

impl SimConfig {
    /// Free-running period `2π/ω₀`.
    pub fn period(&self) -> f64 {
        TAU / self.omega0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Phase bookkeeping follows the rate-limited rotation.
    Normal,
    /// Phase jumps by ψ at once while the heading still rotates at ω_max.
    InstantaneousAssumption,
    /// Fixed-step reference integration.
    Oracle,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Normal => "normal",
            Variant::InstantaneousAssumption => "instantaneous-assumption",
            Variant::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorState {
    pub id: usize,
    /// Phase since the last firing, in `[0, 2π]`.
    pub phase: f64,
    pub heading: f64,
    pub freq: f64,
    pub adjust_remaining: f64,
    pub adjust_sign: i8,
}

impl OscillatorState {
    pub fn is_adjusting(&self) -> bool {
        self.adjust_sign != 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Fire { id: usize },
    PulseArrival { from: usize, to: usize },
    AdjustComplete { id: usize },
    Sample,
}

impl EventKind {
    fn priority(&self) -> u8 {
        match self {
            EventKind::Fire { .. } => 0,
            EventKind::PulseArrival { .. } => 1,
            EventKind::AdjustComplete { .. } => 2,
            EventKind::Sample => 3,
        }
    }

    fn robot_key(&self) -> (usize, usize) {
        match *self {
            EventKind::Fire { id } | EventKind::AdjustComplete { id } => (id, 0),
            EventKind::PulseArrival { from, to } => (to, from),
            EventKind::Sample => (0, 0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Fire { .. } => "fire",
            EventKind::PulseArrival { .. } => "pulse",
            EventKind::AdjustComplete { .. } => "adjust-complete",
            EventKind::Sample => "sample",
        }
    }
}

/// A scheduled event. Fire and AdjustComplete carry the robot's schedule
/// epoch at creation and are discarded if it has since moved on.
#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub seq: u64,
    epoch: u64,
}

impl Event {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.priority().cmp(&other.kind.priority()))
            .then(self.kind.robot_key().cmp(&other.kind.robot_key()))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    /// Response evaluated on pulse arrival.
    pub psi: Option<f64>,
    /// Adjustment duration started by the pulse.
    pub tau: Option<f64>,
    /// The pulse replaced an adjustment that had not finished.
    pub interrupted: bool,
    /// The firing cut an adjustment short.
    pub cancelled: bool,
    /// Desync pulse classification at emission.
    pub pulse_class: Option<PulseKind>,
    pub before: Option<OscillatorState>,
    pub after: Option<OscillatorState>,
    /// Every robot's state right after a firing reset.
    pub snapshot: Option<Vec<OscillatorState>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub t: f64,
    pub states: Vec<OscillatorState>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub n: usize,
    pub omega0: f64,
    pub omega_max: f64,
    pub variant: Variant,
    pub events: Vec<EventRecord>,
    pub samples: Vec<SampleRow>,
}

impl Trace {
    pub fn period(&self) -> f64 {
        TAU / self.omega0
    }

    pub fn fires(&self) -> impl Iterator<Item = &EventRecord> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Fire { .. }))
    }

    pub fn pulses(&self) -> impl Iterator<Item = &EventRecord> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::PulseArrival { .. }))
    }

    pub fn interrupted_count(&self) -> usize {
        self.events.iter().filter(|e| e.interrupted).count()
    }
}

/// Per-(pulse, edge) random stream, independent of processing order.
pub(crate) fn edge_rng(seed: u64, pulse_seq: u64, edge: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pulse_seq);
    rng.set_word_pos(edge as u128 * 16);
    rng
}

/// Time until the phase reaches 2π given the current rate schedule.
fn time_to_fire(s: &OscillatorState, omega0: f64, phase_rate_during_adjust: f64) -> f64 {
    let left = (TAU - s.phase).max(0.0);
    if left == 0.0 {
        return 0.0;
    }
    if s.is_adjusting() && phase_rate_during_adjust > 0.0 {
        let during = phase_rate_during_adjust * s.adjust_remaining;
        if during >= left {
            return left / phase_rate_during_adjust;
        }
        return s.adjust_remaining + (left - during) / omega0;
    }
    if s.is_adjusting() {
        // Phase stalls or regresses until the adjustment ends.
        let after = left - phase_rate_during_adjust * s.adjust_remaining;
        return s.adjust_remaining + after / omega0;
    }
    left / omega0
}

/// A running simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    variant: Variant,
    now: f64,
    states: Vec<OscillatorState>,
    epochs: Vec<u64>,
    queue: BinaryHeap<Event>,
    seq: u64,
    fire_count: u64,
    sample_index: u64,
    trace: Trace,
}

impl Simulation {
    /// Validates the configuration and schedules the first firings.
    pub fn new(cfg: SimConfig, variant: Variant) -> Result<Self, SimError> {
        if variant == Variant::Oracle {
            return Err(SimError::Config(
                "the fixed-step variant runs through the oracle".into(),
            ));
        }
        let report = validate(&cfg);
        if let Some(v) = report.invalid().next() {
            return Err(SimError::Config(v.message.clone()));
        }
        if let Some(v) = report.hard().next() {
            return Err(SimError::Precondition(v.message.clone()));
        }
        let states: Vec<OscillatorState> = cfg
            .initial_headings
            .iter()
            .enumerate()
            .map(|(id, h)| OscillatorState {
                id,
                phase: h.radians(),
                heading: h.radians(),
                freq: cfg.omega0,
                adjust_remaining: 0.0,
                adjust_sign: 0,
            })
            .collect();
        let trace = Trace {
            n: cfg.n,
            omega0: cfg.omega0,
            omega_max: cfg.omega_max,
            variant,
            events: Vec::new(),
            samples: Vec::new(),
        };
        let mut sim = Simulation {
            epochs: vec![0; cfg.n],
            cfg,
            variant,
            now: 0.0,
            states,
            queue: BinaryHeap::new(),
            seq: 0,
            fire_count: 0,
            sample_index: 0,
            trace,
        };
        for id in 0..sim.cfg.n {
            sim.schedule_robot(id);
        }
        sim.push(0.0, EventKind::Sample, 0);
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn states(&self) -> &[OscillatorState] {
        &self.states
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    fn push(&mut self, time: f64, kind: EventKind, epoch: u64) {
        self.seq += 1;
        self.queue.push(Event {
            time,
            kind,
            seq: self.seq,
            epoch,
        });
    }

    fn phase_rate_during_adjust(&self, s: &OscillatorState) -> f64 {
        match self.variant {
            Variant::Normal | Variant::Oracle => s.freq,
            Variant::InstantaneousAssumption => self.cfg.omega0,
        }
    }

    /// Replaces the pending Fire and AdjustComplete events of a robot.
    fn schedule_robot(&mut self, id: usize) {
        self.epochs[id] += 1;
        let epoch = self.epochs[id];
        let s = self.states[id];
        let rate = self.phase_rate_during_adjust(&s);
        let fire_in = time_to_fire(&s, self.cfg.omega0, rate);
        self.push(self.now + fire_in, EventKind::Fire { id }, epoch);
        if s.is_adjusting() {
            self.push(
                self.now + s.adjust_remaining,
                EventKind::AdjustComplete { id },
                epoch,
            );
        }
    }

    /// Moves continuous state forward. `dt` must not cross any event.
    pub fn advance(&mut self, dt: f64) -> Result<(), SimError> {
        if dt < 0.0 {
            return Err(SimError::Internal(format!("negative advance {dt}")));
        }
        if dt == 0.0 {
            return Ok(());
        }
        let omega0 = self.cfg.omega0;
        let omega_max = self.cfg.omega_max;
        for i in 0..self.states.len() {
            let rate = self.phase_rate_during_adjust(&self.states[i]);
            let s = &mut self.states[i];
            if s.is_adjusting() {
                let slack = 1e-9 * s.adjust_remaining.max(1.0);
                if dt > s.adjust_remaining + slack {
                    return Err(SimError::Internal(format!(
                        "advance of {dt} s overruns the adjustment of robot {}",
                        s.id + 1
                    )));
                }
                s.phase += rate * dt;
                s.heading = wrap_radians(s.heading + f64::from(s.adjust_sign) * omega_max * dt);
                s.adjust_remaining = (s.adjust_remaining - dt).max(0.0);
            } else {
                s.phase += omega0 * dt;
            }
            if s.phase > TAU + 1e-7 {
                return Err(SimError::Internal(format!(
                    "robot {} passed the threshold without firing (phase {})",
                    s.id + 1,
                    s.phase
                )));
            }
        }
        self.now += dt;
        Ok(())
    }

    fn advance_to(&mut self, t: f64) -> Result<(), SimError> {
        if t < self.now {
            return Err(SimError::Internal(format!(
                "event at {t} precedes current time {}",
                self.now
            )));
        }
        let dt = t - self.now;
        self.advance(dt)?;
        self.now = t;
        Ok(())
    }

    fn stop_adjusting(s: &mut OscillatorState, omega0: f64) {
        s.adjust_remaining = 0.0;
        s.adjust_sign = 0;
        s.freq = omega0;
    }

    /// Resets the firing robot and emits its pulses.
    pub fn on_fire(&mut self, id: usize) -> EventRecord {
        let before = self.states[id];
        let omega0 = self.cfg.omega0;
        let mut cancelled = false;
        {
            let s = &mut self.states[id];
            s.phase = 0.0;
            if self.variant == Variant::Normal && self.cfg.cancel_on_fire && s.is_adjusting() {
                cancelled = s.adjust_remaining > 0.0;
                Self::stop_adjusting(s, omega0);
            }
        }
        self.schedule_robot(id);

        let snapshot = self.states.clone();
        let pulse_class = match self.cfg.prc {
            PrcSpec::Desync(_) | PrcSpec::General(_) => {
                let angles: Vec<Angle> = snapshot
                    .iter()
                    .filter(|s| s.id != id)
                    .map(|s| Angle::wrap(s.phase).expect("finite phase"))
                    .collect();
                Some(classify_pulse(&angles, self.cfg.n).kind)
            }
            PrcSpec::Sync(_) => None,
        };

        let pulse_seq = self.fire_count;
        self.fire_count += 1;
        let neighbors = self.cfg.topology.out_neighbors(id).to_vec();
        for (edge, to) in neighbors.into_iter().enumerate() {
            let mut rng = edge_rng(self.cfg.seed, pulse_seq, edge);
            let dropped = self.cfg.drop_prob > 0.0 && rng.gen_bool(self.cfg.drop_prob);
            if dropped {
                continue;
            }
            let delay = sample_delay(&self.cfg.delay, &mut rng);
            self.push(
                self.now + delay,
                EventKind::PulseArrival { from: id, to },
                0,
            );
        }

        EventRecord {
            time: self.now,
            kind: EventKind::Fire { id },
            psi: None,
            tau: None,
            interrupted: false,
            cancelled,
            pulse_class,
            before: Some(before),
            after: Some(self.states[id]),
            snapshot: Some(snapshot),
        }
    }

    /// Applies the response rule to a received pulse.
    pub fn on_pulse(&mut self, from: usize, to: usize) -> EventRecord {
        let before = self.states[to];
        let omega0 = self.cfg.omega0;
        let omega_max = self.cfg.omega_max;
        let phase = Angle::wrap(before.phase).expect("finite phase");
        let psi = self.cfg.prc.response(phase);
        let mut tau = None;
        let mut interrupted = false;
        if psi != 0.0 {
            let s = &mut self.states[to];
            interrupted = s.is_adjusting() && s.adjust_remaining > 0.0;
            let t = psi.abs() / omega_max;
            s.adjust_sign = if psi > 0.0 { 1 } else { -1 };
            s.adjust_remaining = t;
            s.freq = omega0 + f64::from(s.adjust_sign) * omega_max;
            if self.variant == Variant::InstantaneousAssumption {
                s.phase += psi;
            }
            tau = Some(t);
            self.schedule_robot(to);
        }
        EventRecord {
            time: self.now,
            kind: EventKind::PulseArrival { from, to },
            psi: Some(psi),
            tau,
            interrupted,
            cancelled: false,
            pulse_class: None,
            before: Some(before),
            after: Some(self.states[to]),
            snapshot: None,
        }
    }

    fn on_adjust_complete(&mut self, id: usize) -> EventRecord {
        let before = self.states[id];
        Self::stop_adjusting(&mut self.states[id], self.cfg.omega0);
        EventRecord {
            time: self.now,
            kind: EventKind::AdjustComplete { id },
            psi: None,
            tau: None,
            interrupted: false,
            cancelled: false,
            pulse_class: None,
            before: Some(before),
            after: Some(self.states[id]),
            snapshot: None,
        }
    }

    fn is_stale(&self, ev: &Event) -> bool {
        match ev.kind {
            EventKind::Fire { id } | EventKind::AdjustComplete { id } => {
                ev.epoch != self.epochs[id]
            }
            _ => false,
        }
    }

    /// Processes the next live event at or before `t_end`.
    /// Returns `false` once the run is complete.
    pub fn step(&mut self) -> Result<bool, SimError> {
        loop {
            let Some(ev) = self.queue.pop() else {
                return Err(SimError::Internal("event queue ran dry".into()));
            };
            if self.is_stale(&ev) {
                continue;
            }
            if ev.time > self.cfg.t_end {
                self.queue.push(ev);
                return Ok(false);
            }
            self.advance_to(ev.time)?;
            match ev.kind {
                EventKind::Fire { id } => {
                    let rec = self.on_fire(id);
                    self.trace.events.push(rec);
                }
                EventKind::PulseArrival { from, to } => {
                    let rec = self.on_pulse(from, to);
                    self.trace.events.push(rec);
                }
                EventKind::AdjustComplete { id } => {
                    let rec = self.on_adjust_complete(id);
                    self.trace.events.push(rec);
                }
                EventKind::Sample => {
                    self.trace.samples.push(SampleRow {
                        t: self.now,
                        states: self.states.clone(),
                    });
                    self.sample_index += 1;
                    let next = self.sample_index as f64 * self.cfg.sample_interval;
                    if next <= self.cfg.t_end + EPS_ANGLE {
                        self.push(next.min(self.cfg.t_end), EventKind::Sample, 0);
                    }
                }
            }
            return Ok(true);
        }
    }

    pub fn run_to_end(mut self) -> Result<Trace, SimError> {
        while self.step()? {}
        Ok(self.trace)
    }
}

/// Builds the initial simulation state.
pub fn init(config: SimConfig) -> Result<Simulation, SimError> {
    Simulation::new(config, Variant::Normal)
}

/// Runs the rate-limited model until `t_end`.
pub fn run(config: &SimConfig) -> Result<Trace, SimError> {
    Simulation::new(config.clone(), Variant::Normal)?.run_to_end()
}

/// Runs the variant whose phase bookkeeping assumes every adjustment
/// completes instantly.
pub fn run_instantaneous_assumption(config: &SimConfig) -> Result<Trace, SimError> {
    Simulation::new(config.clone(), Variant::InstantaneousAssumption)?.run_to_end()
}

/// Runs any variant; the fixed-step one uses the default step.
pub fn run_variant(config: &SimConfig, variant: Variant) -> Result<Trace, SimError> {
    match variant {
        Variant::Oracle => crate::oracle::oracle_run(&crate::oracle::OracleConfig {
            base: config.clone(),
            step: crate::oracle::DEFAULT_STEP,
        }),
        v => Simulation::new(config.clone(), v)?.run_to_end(),
    }
}
