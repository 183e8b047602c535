//! Phase response rules.
//!
//! * [`SyncPrc`]: delay-advance curve with coupling `α` and refractory band `[0, D)`.
//! * [`DesyncPrf`]: piecewise-linear desynchronization rule with forward coupling
//!   `l₁` on `(0, 2π/N)`, a dead band on `[2π/N, 2π(N-1)/N]`, and backward coupling
//!   `l₂` on `(2π(N-1)/N, 2π)`.
//! * [`GeneralPrf`]: the same band layout with phase-dependent couplings `L₁(φ)`, `L₂(φ)`.
//! * [`EffectivePrf`]: the couplings that a rate-limited robot actually realizes when
//!   consecutive pulses are `t₀` apart and each adjustment runs at `ω_max`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use crate::error::PrcError;
use crate::torus::{Angle, EPS_ANGLE};

/// Delay-advance synchronization curve `F(φ) = α·Q(φ)` with a refractory band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncPrc {
    alpha: f64,
    refractory: f64,
}

impl SyncPrc {
    pub fn new(alpha: f64, refractory: f64) -> Result<Self, PrcError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(PrcError::Alpha(alpha));
        }
        if !(0.0..TAU).contains(&refractory) {
            return Err(PrcError::Refractory(refractory));
        }
        Ok(SyncPrc { alpha, refractory })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn refractory(&self) -> f64 {
        self.refractory
    }

    /// `true` when a pulse received at `phase` is ignored.
    pub fn is_refractory(&self, phase: Angle) -> bool {
        phase.radians() < self.refractory
    }

    /// Signed adjustment `ψ` for a pulse received at `phase`.
    ///
    /// `Q(φ) = -φ` on `[0, π]` and `2π - φ` on `(π, 2π)`; zero inside `[0, D)`.
    pub fn response(&self, phase: Angle) -> f64 {
        let phi = phase.radians();
        if phi < self.refractory {
            0.0
        } else if phi <= PI {
            -self.alpha * phi
        } else {
            self.alpha * (TAU - phi)
        }
    }
}

/// Piecewise-linear desynchronization rule with constant couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesyncPrf {
    l1: f64,
    l2: f64,
    n: usize,
}

impl DesyncPrf {
    pub fn new(l1: f64, l2: f64, n: usize) -> Result<Self, PrcError> {
        check_coupling("l1", l1)?;
        check_coupling("l2", l2)?;
        if l1 == 0.0 && l2 == 0.0 {
            return Err(PrcError::BothCouplingsZero);
        }
        if n < 2 {
            return Err(PrcError::NetworkSize(n));
        }
        Ok(DesyncPrf { l1, l2, n })
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bands(&self) -> Bands {
        Bands::new(self.n)
    }

    pub fn response(&self, phase: Angle) -> f64 {
        let bands = self.bands();
        let phi = phase.radians();
        if bands.in_forward(phi) {
            self.l1 * (bands.lower - phi)
        } else if bands.in_backward(phi) {
            self.l2 * (bands.upper - phi)
        } else {
            0.0
        }
    }

    /// Phase after an instantaneous update, `φ + F(φ)`.
    pub fn update(&self, phase: Angle) -> f64 {
        phase.radians() + self.response(phase)
    }

    /// Longest adjustment time any pulse can demand, `max{l₁, l₂}·2π/(ω_max N)`.
    pub fn max_adjust_time(&self, omega_max: f64) -> f64 {
        self.l1.max(self.l2) * self.bands().lower / omega_max
    }
}

fn check_coupling(name: &'static str, value: f64) -> Result<(), PrcError> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(PrcError::Coupling { name, value })
    }
}

/// Band edges of the desynchronization rules for a network of `n` robots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bands {
    /// `2π/N`: end of the forward band.
    pub lower: f64,
    /// `2π(N-1)/N`: start of the backward band.
    pub upper: f64,
}

impl Bands {
    pub fn new(n: usize) -> Self {
        let n = n as f64;
        Bands {
            lower: TAU / n,
            upper: TAU * (n - 1.0) / n,
        }
    }

    #[inline]
    pub fn in_forward(&self, phi: f64) -> bool {
        phi > 0.0 && phi < self.lower
    }

    #[inline]
    pub fn in_backward(&self, phi: f64) -> bool {
        phi > self.upper && phi < TAU
    }

    #[inline]
    pub fn responsive(&self, phi: f64) -> bool {
        self.in_forward(phi) || self.in_backward(phi)
    }
}

/// Forward coupling realized under the rate limit (piecewise in `φ`).
///
/// Below the breakpoint `2π/N - ω_max t₀ / l₁` the robot only manages `ω_max t₀`
/// of its adjustment before the next pulse, so the apparent coupling is
/// `ω_max t₀ / (2π/N - φ)`. At or above it the full `l₁` is realized. When the
/// breakpoint falls at or below zero every adjustment completes and `l₁` is
/// returned on the whole band.
pub fn effective_coupling_forward(
    prf: &DesyncPrf,
    phase: Angle,
    omega_max: f64,
    t0: f64,
) -> Result<f64, PrcError> {
    check_rate(omega_max, t0)?;
    let bands = prf.bands();
    let phi = phase.radians();
    if !bands.in_forward(phi) {
        return Err(PrcError::Domain {
            phase: phi,
            lo: 0.0,
            hi: bands.lower,
        });
    }
    Ok(forward_coupling(prf.l1, bands, omega_max * t0, phi))
}

/// Backward counterpart of [`effective_coupling_forward`] on `(2π(N-1)/N, 2π)`.
pub fn effective_coupling_backward(
    prf: &DesyncPrf,
    phase: Angle,
    omega_max: f64,
    t0: f64,
) -> Result<f64, PrcError> {
    check_rate(omega_max, t0)?;
    let bands = prf.bands();
    let phi = phase.radians();
    if !bands.in_backward(phi) {
        return Err(PrcError::Domain {
            phase: phi,
            lo: bands.upper,
            hi: TAU,
        });
    }
    Ok(backward_coupling(prf.l2, bands, omega_max * t0, phi))
}

fn check_rate(omega_max: f64, t0: f64) -> Result<(), PrcError> {
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return Err(PrcError::Rate(format!("omega_max={omega_max}")));
    }
    if !(t0.is_finite() && t0 >= 0.0) {
        return Err(PrcError::Rate(format!("t0={t0}")));
    }
    Ok(())
}

fn forward_coupling(l1: f64, bands: Bands, shift: f64, phi: f64) -> f64 {
    if l1 == 0.0 {
        return 0.0;
    }
    let breakpoint = bands.lower - shift / l1;
    if phi < breakpoint {
        shift / (bands.lower - phi)
    } else {
        l1
    }
}

fn backward_coupling(l2: f64, bands: Bands, shift: f64, phi: f64) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    let breakpoint = bands.upper + shift / l2;
    if phi <= breakpoint {
        l2
    } else {
        shift / (phi - bands.upper)
    }
}

/// Rate-limited view of a [`DesyncPrf`] for a fixed inter-pulse interval `t₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectivePrf {
    base: DesyncPrf,
    omega_max: f64,
    t0: f64,
}

impl EffectivePrf {
    /// Requires `ω_max t₀ / l < 2π/N` for each non-zero coupling so that both
    /// breakpoints lie strictly inside their bands.
    pub fn new(base: DesyncPrf, omega_max: f64, t0: f64) -> Result<Self, PrcError> {
        check_rate(omega_max, t0)?;
        let limit = base.bands().lower;
        for l in [base.l1, base.l2] {
            if l > 0.0 {
                let bound = omega_max * t0 / l;
                if bound >= limit {
                    return Err(PrcError::BreakpointBound { bound, limit });
                }
            }
        }
        Ok(EffectivePrf {
            base,
            omega_max,
            t0,
        })
    }

    pub fn base(&self) -> &DesyncPrf {
        &self.base
    }

    pub fn shift(&self) -> f64 {
        self.omega_max * self.t0
    }

    /// Analytic breakpoints of the two coupling functions.
    pub fn breakpoints(&self) -> Vec<f64> {
        let bands = self.base.bands();
        let mut out = Vec::new();
        if self.base.l1 > 0.0 {
            out.push(bands.lower - self.shift() / self.base.l1);
        }
        if self.base.l2 > 0.0 {
            out.push(bands.upper + self.shift() / self.base.l2);
        }
        out
    }

    pub fn forward(&self, phi: f64) -> f64 {
        forward_coupling(self.base.l1, self.base.bands(), self.shift(), phi)
    }

    pub fn backward(&self, phi: f64) -> f64 {
        backward_coupling(self.base.l2, self.base.bands(), self.shift(), phi)
    }

    pub fn response(&self, phase: Angle) -> f64 {
        self.to_general().response(phase)
    }

    pub fn to_general(&self) -> GeneralPrf {
        let (l1, l2, bands, shift) = (self.base.l1, self.base.l2, self.base.bands(), self.shift());
        GeneralPrf::new(
            self.base.n,
            move |phi| forward_coupling(l1, bands, shift, phi),
            move |phi| backward_coupling(l2, bands, shift, phi),
        )
        .with_breakpoints(self.breakpoints())
    }
}

pub type CouplingFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Band-structured rule with phase-dependent couplings.
#[derive(Clone)]
pub struct GeneralPrf {
    forward: CouplingFn,
    backward: CouplingFn,
    n: usize,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for GeneralPrf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralPrf")
            .field("n", &self.n)
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

impl GeneralPrf {
    pub fn new<F, B>(n: usize, forward: F, backward: B) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        B: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        GeneralPrf {
            forward: Arc::new(forward),
            backward: Arc::new(backward),
            n,
            breakpoints: Vec::new(),
        }
    }

    /// Extra phases where the coupling functions are known to jump; the
    /// monotonicity check probes both sides of each.
    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    pub fn from_desync(prf: &DesyncPrf) -> Self {
        let (l1, l2) = (prf.l1, prf.l2);
        GeneralPrf::new(prf.n, move |_| l1, move |_| l2)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bands(&self) -> Bands {
        Bands::new(self.n)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn forward_coupling(&self, phi: f64) -> f64 {
        (self.forward)(phi)
    }

    pub fn backward_coupling(&self, phi: f64) -> f64 {
        (self.backward)(phi)
    }

    pub fn response(&self, phase: Angle) -> f64 {
        let bands = self.bands();
        let phi = phase.radians();
        if bands.in_forward(phi) {
            (self.forward)(phi) * (bands.lower - phi)
        } else if bands.in_backward(phi) {
            (self.backward)(phi) * (bands.upper - phi)
        } else {
            0.0
        }
    }

    pub fn update(&self, phase: Angle) -> f64 {
        phase.radians() + self.response(phase)
    }
}

/// Evaluates `ψ` for a [`SyncPrc`].
pub fn sync_response(prc: &SyncPrc, phase: Angle) -> f64 {
    prc.response(phase)
}

/// Evaluates `ψ` for a [`DesyncPrf`].
pub fn desync_response(prf: &DesyncPrf, phase: Angle) -> f64 {
    prf.response(phase)
}

/// Evaluates `ψ` for a [`GeneralPrf`].
pub fn general_response(prf: &GeneralPrf, phase: Angle) -> f64 {
    prf.response(phase)
}

/// Outcome of [`check_update_map_monotone`].
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    pub monotone: bool,
    /// First consecutive pair `(φ_a, φ_b)` with `φ_a < φ_b` but `φ_a⁺ >= φ_b⁺`.
    pub violation: Option<(f64, f64)>,
    pub points_checked: usize,
}

/// Default grid density for the monotonicity check.
pub const DEFAULT_MONOTONE_SAMPLES: usize = 100_000;

/// Checks that `φ ↦ φ + F(φ)` is strictly increasing on `[0, 2π)`.
///
/// Evaluates a uniform grid of `samples` points plus `±EPS_ANGLE` probes
/// around the band edges and every declared breakpoint.
pub fn check_update_map_monotone(
    prf: &GeneralPrf,
    samples: usize,
) -> Result<MonotoneReport, PrcError> {
    if samples < 2 {
        return Err(PrcError::Samples(samples));
    }
    let grid = probe_grid(samples, &boundary_set(prf.bands(), prf.breakpoints()));
    let mut prev: Option<(f64, f64)> = None;
    for &phi in &grid {
        let next = prf.update(Angle::wrap(phi).expect("grid is finite"));
        if let Some((p_phi, p_next)) = prev {
            if next <= p_next {
                return Ok(MonotoneReport {
                    monotone: false,
                    violation: Some((p_phi, phi)),
                    points_checked: grid.len(),
                });
            }
        }
        prev = Some((phi, next));
    }
    Ok(MonotoneReport {
        monotone: true,
        violation: None,
        points_checked: grid.len(),
    })
}

fn boundary_set(bands: Bands, extra: &[f64]) -> Vec<f64> {
    let mut b = vec![bands.lower, bands.upper];
    b.extend_from_slice(extra);
    b
}

/// Sorted, de-duplicated sample phases in `[0, 2π)`: a uniform grid plus
/// `x - ε`, `x`, `x + ε` for each boundary `x`, and `2π - ε`.
fn probe_grid(samples: usize, boundaries: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..samples)
        .map(|i| TAU * i as f64 / samples as f64)
        .collect();
    for &x in boundaries {
        for p in [x - EPS_ANGLE, x, x + EPS_ANGLE] {
            if (0.0..TAU).contains(&p) {
                pts.push(p);
            }
        }
    }
    pts.push(TAU - EPS_ANGLE);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Which response rule an oscillator applies to received pulses.
#[derive(Debug, Clone)]
pub enum PrcSpec {
    Sync(SyncPrc),
    Desync(DesyncPrf),
    General(GeneralPrf),
}

impl PrcSpec {
    pub fn response(&self, phase: Angle) -> f64 {
        match self {
            PrcSpec::Sync(p) => p.response(phase),
            PrcSpec::Desync(p) => p.response(phase),
            PrcSpec::General(p) => p.response(phase),
        }
    }

    /// Network size the rule's bands are tuned for, if it has bands.
    pub fn band_size(&self) -> Option<usize> {
        match self {
            PrcSpec::Sync(_) => None,
            PrcSpec::Desync(p) => Some(p.n),
            PrcSpec::General(p) => Some(p.n),
        }
    }

    pub fn is_desync(&self) -> bool {
        self.band_size().is_some()
    }

    fn boundaries(&self) -> Vec<f64> {
        match self {
            PrcSpec::Sync(p) => {
                let mut b = vec![PI];
                if p.refractory > 0.0 {
                    b.push(p.refractory);
                }
                b
            }
            PrcSpec::Desync(p) => boundary_set(p.bands(), &[]),
            PrcSpec::General(p) => boundary_set(p.bands(), p.breakpoints()),
        }
    }
}

/// One row of a sampled response curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub phi: f64,
    pub response: f64,
    pub updated: f64,
}

/// Samples `(φ, F(φ), φ + F(φ))` on a uniform grid of `points` values plus
/// straddles of every branch boundary.
pub fn sample_curve(prc: &PrcSpec, points: usize) -> Vec<CurvePoint> {
    probe_grid(points.max(2), &prc.boundaries())
        .into_iter()
        .map(|phi| {
            let a = Angle::wrap(phi).expect("grid is finite");
            let response = prc.response(a);
            CurvePoint {
                phi,
                response,
                updated: phi + response,
            }
        })
        .collect()
}
