use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TorusError {
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("negative duration {0}")]
    NegativeDuration(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrcError {
    #[error("coupling strength alpha={0} outside (0, 1]")]
    Alpha(f64),
    #[error("refractory period {0} outside [0, 2π)")]
    Refractory(f64),
    #[error("coupling {name}={value} outside [0, 1)")]
    Coupling { name: &'static str, value: f64 },
    #[error("forward and backward couplings are both zero")]
    BothCouplingsZero,
    #[error("network size {0} must be at least 2")]
    NetworkSize(usize),
    #[error("rate-limited adjustment per pulse {bound} must stay below 2π/N={limit}")]
    BreakpointBound { bound: f64, limit: f64 },
    #[error("phase {phase} outside the domain ({lo}, {hi})")]
    Domain { phase: f64, lo: f64, hi: f64 },
    #[error("invalid rate or interval: {0}")]
    Rate(String),
    #[error("at least two samples are required, got {0}")]
    Samples(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("at least {need} phases are required, got {got}")]
    TooFewPhases { need: usize, got: usize },
    #[error("order is not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("firing robot {0} out of range")]
    BadFiringId(usize),
}

/// Reasons a configuration is rejected before simulation starts.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Prc(#[from] PrcError),
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("configuration invalid: {0}")]
    Config(String),
    #[error("convergence precondition violated: {0}")]
    Precondition(String),
    #[error("internal invariant breached: {0}")]
    Internal(String),
}
