//! Convergence measures over phase or heading snapshots and traces.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::engine::{EventKind, OscillatorState, Trace};
use crate::error::MetricsError;
use crate::prc::{Bands, GeneralPrf};
use crate::torus::{cw_gap, wrap_radians, Angle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArcReport {
    /// Length of the smallest arc holding every angle.
    pub lambda: f64,
    /// Input indices bounding the widest empty gap (clockwise from first).
    pub widest_gap_pair: (usize, usize),
}

/// `Λ = 2π - (largest cyclic gap)`.
pub fn containing_arc(angles: &[Angle]) -> Result<ArcReport, MetricsError> {
    if angles.is_empty() {
        return Err(MetricsError::TooFewPhases { need: 1, got: 0 });
    }
    let mut idx: Vec<usize> = (0..angles.len()).collect();
    idx.sort_by(|&a, &b| {
        angles[a]
            .radians()
            .total_cmp(&angles[b].radians())
            .then(a.cmp(&b))
    });
    if idx.len() == 1 {
        return Ok(ArcReport {
            lambda: 0.0,
            widest_gap_pair: (idx[0], idx[0]),
        });
    }
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for w in 0..idx.len() {
        let (a, b) = (idx[w], idx[(w + 1) % idx.len()]);
        let g = if w + 1 == idx.len() {
            TAU - (angles[a].radians() - angles[b].radians())
        } else {
            angles[b].radians() - angles[a].radians()
        };
        if g > best.0 {
            best = (g, (a, b));
        }
    }
    Ok(ArcReport {
        lambda: (TAU - best.0).max(0.0),
        widest_gap_pair: best.1,
    })
}

/// Indices sorted by descending phase (ties by ascending index).
pub fn descending_order(phases: &[Angle]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..phases.len()).collect();
    idx.sort_by(|&a, &b| {
        phases[b]
            .radians()
            .total_cmp(&phases[a].radians())
            .then(a.cmp(&b))
    });
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesyncReport {
    pub p: f64,
    /// `Δ_i = (φ_{o_i} - φ_{o_{i+1}}) mod 2π` along the given order.
    pub deltas: Vec<f64>,
}

/// `P = Σ |Δ_i - 2π/N|` along a cyclic order of robots.
pub fn desync_measure(phases: &[Angle], order: &[usize]) -> Result<DesyncReport, MetricsError> {
    let n = phases.len();
    if n < 2 {
        return Err(MetricsError::TooFewPhases { need: 2, got: n });
    }
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(MetricsError::NotAPermutation(n));
    }
    for &o in order {
        if o >= n || seen[o] {
            return Err(MetricsError::NotAPermutation(n));
        }
        seen[o] = true;
    }
    let c = TAU / n as f64;
    let deltas: Vec<f64> = (0..n)
        .map(|i| cw_gap(phases[order[(i + 1) % n]], phases[order[i]]))
        .collect();
    let p = deltas.iter().map(|d| (d - c).abs()).sum();
    Ok(DesyncReport { p, deltas })
}

/// `P` using the current descending phase order.
pub fn desync_measure_sorted(phases: &[Angle]) -> Result<DesyncReport, MetricsError> {
    desync_measure(phases, &descending_order(phases))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PulseKind {
    Active,
    Silent,
}

impl PulseKind {
    pub fn name(self) -> &'static str {
        match self {
            PulseKind::Active => "Active",
            PulseKind::Silent => "Silent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseClass {
    pub kind: PulseKind,
    /// Indices of the listeners sitting in a responsive band.
    pub contributors: Vec<usize>,
}

/// Classifies a pulse from the listeners' phases at emission.
pub fn classify_pulse(listeners: &[Angle], n: usize) -> PulseClass {
    let bands = Bands::new(n);
    let contributors: Vec<usize> = listeners
        .iter()
        .enumerate()
        .filter(|(_, a)| bands.responsive(a.radians()))
        .map(|(i, _)| i)
        .collect();
    PulseClass {
        kind: if contributors.is_empty() {
            PulseKind::Silent
        } else {
            PulseKind::Active
        },
        contributors,
    }
}

/// Instantaneous all-to-all update: every listener jumps by its response,
/// the firing robot stays at 0.
pub fn apply_general_update(phases: &[f64], firing: usize, prf: &GeneralPrf) -> Vec<f64> {
    phases
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if i == firing {
                p
            } else {
                prf.update(Angle::wrap(p).expect("finite phase"))
            }
        })
        .collect()
}

fn to_angles(phases: &[f64]) -> Vec<Angle> {
    phases
        .iter()
        .map(|&p| Angle::wrap(p).expect("finite phase"))
        .collect()
}

/// `P⁺ - P` by recomputation, holding the pre-update cyclic order.
pub fn direct_measure_change(
    phases: &[f64],
    firing: usize,
    prf: &GeneralPrf,
) -> Result<f64, MetricsError> {
    if firing >= phases.len() {
        return Err(MetricsError::BadFiringId(firing));
    }
    let before = to_angles(phases);
    let order = descending_order(&before);
    let after = to_angles(&apply_general_update(phases, firing, prf));
    Ok(desync_measure(&after, &order)?.p - desync_measure(&before, &order)?.p)
}

/// Closed-form `P⁺ - P` for one pulse from robot `firing` (whose phase must
/// be 0) heard by everyone else.
///
/// Interior phase differences inside each responsive band telescope, so only
/// the extreme robot of each band and the difference just outside it matter.
/// An empty band contributes nothing.
pub fn predicted_measure_change(
    phases: &[f64],
    l1: impl Fn(f64) -> f64,
    l2: impl Fn(f64) -> f64,
    firing: usize,
) -> Result<f64, MetricsError> {
    let n = phases.len();
    if n < 2 {
        return Err(MetricsError::TooFewPhases { need: 2, got: n });
    }
    if firing >= n || phases[firing] != 0.0 {
        return Err(MetricsError::BadFiringId(firing));
    }
    let bands = Bands::new(n);
    let c = bands.lower;
    let angles = to_angles(phases);
    let mut order = descending_order(&angles);
    // Put the firing robot last, in case another robot also sits at 0.
    let pos = order
        .iter()
        .position(|&o| o == firing)
        .expect("permutation");
    order.remove(pos);
    order.push(firing);

    let m = order
        .iter()
        .rev()
        .skip(1)
        .take_while(|&&i| bands.in_forward(phases[i]))
        .count();
    let s = order
        .iter()
        .take_while(|&&i| bands.in_backward(phases[i]))
        .count()
        .min(n - 1 - m);

    let updated = |i: usize| -> f64 {
        let p = phases[i];
        if bands.in_forward(p) {
            p + l1(p) * (c - p)
        } else if bands.in_backward(p) {
            p + l2(p) * (bands.upper - p)
        } else {
            p
        }
    };
    let delta = |pos: usize, f: &dyn Fn(usize) -> f64| -> f64 {
        let hi = order[pos];
        let lo = order[(pos + 1) % n];
        wrap_radians(f(hi) - f(lo))
    };
    let orig = |i: usize| phases[i];

    let mut boundary = Vec::with_capacity(2);
    let mut total = 0.0;
    if m > 0 {
        let top = order[n - 1 - m];
        total += l1(phases[top]) * (phases[top] - c);
        boundary.push((n as isize - 2 - m as isize).rem_euclid(n as isize) as usize);
    }
    if s > 0 {
        let bottom = order[s - 1];
        total += l2(phases[bottom]) * (bands.upper - phases[bottom]);
        boundary.push(s - 1);
    }
    boundary.dedup();
    for pos in boundary {
        total += (delta(pos, &updated) - c).abs() - (delta(pos, &orig) - c).abs();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiringOrderReport {
    /// Firing sequence split into consecutive windows of N firings.
    pub cycles: Vec<Vec<usize>>,
    /// Every robot fires once per window, always in the same order.
    pub invariant: bool,
}

/// Splits the firing log into cycles and checks that the order repeats.
pub fn firing_order_history(trace: &Trace) -> FiringOrderReport {
    let seq: Vec<usize> = trace
        .fires()
        .filter_map(|e| match e.kind {
            EventKind::Fire { id } => Some(id),
            _ => None,
        })
        .collect();
    let n = trace.n.max(1);
    let cycles: Vec<Vec<usize>> = seq.chunks(n).map(<[usize]>::to_vec).collect();
    let head = &seq[..seq.len().min(n)];
    let mut distinct = head.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let invariant = distinct.len() == head.len() && (n..seq.len()).all(|j| seq[j] == seq[j - n]);
    FiringOrderReport { cycles, invariant }
}

fn heading_angles(states: &[OscillatorState]) -> Vec<Angle> {
    states
        .iter()
        .map(|s| Angle::wrap(s.heading).expect("finite heading"))
        .collect()
}

fn phase_angles(states: &[OscillatorState]) -> Vec<Angle> {
    states
        .iter()
        .map(|s| Angle::wrap(s.phase).expect("finite phase"))
        .collect()
}

/// `(t, Λ)` over headings at every sample.
pub fn lambda_series(trace: &Trace) -> Vec<(f64, f64)> {
    trace
        .samples
        .iter()
        .map(|r| {
            (
                r.t,
                containing_arc(&heading_angles(&r.states)).map_or(0.0, |a| a.lambda),
            )
        })
        .collect()
}

/// `(t, Λ)` over headings right after each firing reset.
pub fn lambda_at_fires(trace: &Trace) -> Vec<(f64, f64)> {
    trace
        .fires()
        .filter_map(|e| {
            let snap = e.snapshot.as_ref()?;
            Some((e.time, containing_arc(&heading_angles(snap)).ok()?.lambda))
        })
        .collect()
}

/// `(t, P)` at every sample, ordering robots by their current phases.
pub fn p_series(trace: &Trace) -> Vec<(f64, f64)> {
    trace
        .samples
        .iter()
        .filter_map(|r| Some((r.t, desync_measure_sorted(&phase_angles(&r.states)).ok()?.p)))
        .collect()
}

/// `(t, P)` right after each firing reset, i.e. at every pulse emission.
pub fn p_at_fires(trace: &Trace) -> Vec<(f64, f64)> {
    trace
        .fires()
        .filter_map(|e| {
            let snap = e.snapshot.as_ref()?;
            Some((e.time, desync_measure_sorted(&phase_angles(snap)).ok()?.p))
        })
        .collect()
}

/// Cycles elapsed until the series first drops below `threshold`.
pub fn cycles_to_threshold(series: &[(f64, f64)], threshold: f64, period: f64) -> Option<f64> {
    series
        .iter()
        .find(|&&(_, v)| v < threshold)
        .map(|&(t, _)| t / period)
}

/// Largest rise between consecutive points of a series.
pub fn max_increase(series: &[(f64, f64)]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn signed_step(from: f64, to: f64) -> f64 {
    let d = wrap_radians(to - from);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Per-sample mean heading, each robot unwrapped along the samples.
pub fn mean_unwrapped_heading(trace: &Trace) -> Vec<(f64, f64)> {
    let Some(first) = trace.samples.first() else {
        return Vec::new();
    };
    let mut acc: Vec<f64> = first.states.iter().map(|s| s.heading).collect();
    let mut prev = acc.clone();
    let mut out = Vec::with_capacity(trace.samples.len());
    for row in &trace.samples {
        for (k, s) in row.states.iter().enumerate() {
            acc[k] += signed_step(prev[k], s.heading);
            prev[k] = s.heading;
        }
        out.push((row.t, acc.iter().sum::<f64>() / acc.len() as f64));
    }
    out
}

/// Least-squares slope of `y` against `t`.
pub fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Heading drift rate (rad/s): least-squares slope of the mean unwrapped
/// heading over the second half of the run.
pub fn heading_drift_rate(trace: &Trace) -> Option<f64> {
    let series = mean_unwrapped_heading(trace);
    let half = series.len() / 2;
    ls_slope(&series[half..])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    /// Worst `|Δθ| - ω_max Δt` over consecutive samples.
    pub max_excess: f64,
    /// Samples whose frequency is not one of the three allowed levels.
    pub bad_freq: usize,
}

impl RateReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_excess <= tol && self.bad_freq == 0
    }
}

/// Checks the rotation-rate bound and the three-level frequency rule.
pub fn check_rate_constraint(trace: &Trace) -> RateReport {
    let (w0, wm) = (trace.omega0, trace.omega_max);
    let levels = [w0 - wm, w0, w0 + wm];
    let mut max_excess = f64::NEG_INFINITY;
    let mut bad_freq = 0;
    for row in &trace.samples {
        bad_freq += row
            .states
            .iter()
            .filter(|s| !levels.contains(&s.freq))
            .count();
    }
    for w in trace.samples.windows(2) {
        let dt = w[1].t - w[0].t;
        for (a, b) in w[0].states.iter().zip(&w[1].states) {
            let d = signed_step(a.heading, b.heading).abs();
            max_excess = max_excess.max(d - wm * dt);
        }
    }
    RateReport {
        max_excess,
        bad_freq,
    }
}
