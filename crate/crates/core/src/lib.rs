//! Simulation of pulse-coupled heading control for robot teams whose rotation
//! rate is bounded.
//!
//! Each robot carries a phase oscillator that fires when it crosses 2π and
//! nudges its neighbours' phases through a response rule. Under a maximum
//! rotation rate the nudge becomes a timed frequency switch, and the heading
//! follows the phase. The crate provides the response rules, an exact
//! event-driven engine, a fixed-step reference integrator, scenario
//! ingestion and the convergence metrics used to judge runs.

pub mod engine;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod prc;
pub mod scenario;
pub mod torus;

pub use engine::{
    init, run, run_instantaneous_assumption, run_variant, EventKind, EventRecord, OscillatorState,
    SampleRow, SimConfig, Simulation, Trace, Variant,
};
pub use error::{ConfigError, MetricsError, PrcError, SimError, TorusError};
pub use metrics::{ArcReport, DesyncReport, PulseClass, PulseKind};
pub use oracle::{oracle_run, OracleConfig};
pub use prc::{DesyncPrf, EffectivePrf, GeneralPrf, PrcSpec, SyncPrc};
pub use scenario::{DelayModel, InitSpec, ScenarioFile, Topology, ValidationReport, Violation};
pub use torus::{Angle, AngularRate, Duration, EPS_ANGLE};
