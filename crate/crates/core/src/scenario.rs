//! Network topologies, initial conditions, pulse fault models, scenario files
//! and pre-run validation of convergence hypotheses.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::SimConfig;
use crate::error::ConfigError;
use crate::metrics::containing_arc;
use crate::prc::{DesyncPrf, PrcSpec, SyncPrc};
use crate::torus::{Angle, EPS_ANGLE};

/// Directed "who hears whom" graph over robots `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    out: Vec<Vec<usize>>,
}

impl Topology {
    /// Complete digraph without self-loops.
    pub fn all_to_all(n: usize) -> Self {
        let out = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect();
        Topology { n, out }
    }

    /// Each robot talks to its two cyclic neighbours.
    pub fn bidirectional_ring(n: usize) -> Result<Self, ConfigError> {
        if n < 2 {
            return Err(ConfigError::Invalid(format!(
                "a ring needs at least 2 robots, got {n}"
            )));
        }
        let edges = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + n - 1) % n)]);
        Topology::from_edges(n, edges)
    }

    /// Builds a topology from 0-based `(from, to)` pairs. Duplicates collapse.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ConfigError> {
        let mut sets = vec![BTreeSet::new(); n];
        for (from, to) in edges {
            if from >= n || to >= n {
                return Err(ConfigError::Invalid(format!(
                    "edge ({from}, {to}) references a robot outside 0..{n}"
                )));
            }
            if from == to {
                return Err(ConfigError::Invalid(format!("self-loop on robot {from}")));
            }
            sets[from].insert(to);
        }
        Ok(Topology {
            n,
            out: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn out_neighbors(&self, id: usize) -> &[usize] {
        &self.out[id]
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn is_all_to_all(&self) -> bool {
        self.edge_count() == self.n * self.n.saturating_sub(1)
    }

    /// Forward and reverse reachability from robot 0.
    pub fn is_strongly_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut reverse = vec![Vec::new(); self.n];
        for (from, tos) in self.out.iter().enumerate() {
            for &to in tos {
                reverse[to].push(from);
            }
        }
        reaches_all(&self.out) && reaches_all(&reverse)
    }
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Propagation delay applied independently to every (pulse, edge) pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DelayModel {
    #[default]
    Zero,
    Fixed(f64),
    UniformRandom {
        lo: f64,
        hi: f64,
    },
}

impl DelayModel {
    pub fn check(&self) -> Result<(), ConfigError> {
        match *self {
            DelayModel::Zero => Ok(()),
            DelayModel::Fixed(d) if d.is_finite() && d >= 0.0 => Ok(()),
            DelayModel::UniformRandom { lo, hi }
                if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi =>
            {
                Ok(())
            }
            other => Err(ConfigError::Invalid(format!("bad delay model {other:?}"))),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            DelayModel::Zero => true,
            DelayModel::Fixed(d) => d == 0.0,
            DelayModel::UniformRandom { hi, .. } => hi == 0.0,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, DelayModel::UniformRandom { lo, hi } if hi > lo)
    }
}

/// Draws one delay in seconds.
pub fn sample_delay<R: Rng + ?Sized>(model: &DelayModel, rng: &mut R) -> f64 {
    match *model {
        DelayModel::Zero => 0.0,
        DelayModel::Fixed(d) => d,
        DelayModel::UniformRandom { lo, hi } => {
            if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        }
    }
}

/// How the initial headings are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Explicit(Vec<f64>),
    /// Uniform offsets from a random base inside an arc of the given width.
    RandomInArc {
        arc_width: f64,
    },
    /// Uniform on the circle with pairwise separation at least
    /// `min_separation` (default `2π/(100·N)`).
    RandomDistinct {
        min_separation: Option<f64>,
    },
}

impl InitSpec {
    pub fn generate(&self, n: usize, seed: u64) -> Result<Vec<Angle>, ConfigError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            InitSpec::Explicit(hs) => hs
                .iter()
                .map(|&h| {
                    Angle::wrap(h).map_err(|e| ConfigError::Invalid(format!("heading {h}: {e}")))
                })
                .collect(),
            InitSpec::RandomInArc { arc_width } => {
                let w = *arc_width;
                if !(w.is_finite() && (0.0..TAU).contains(&w)) {
                    return Err(ConfigError::Invalid(format!(
                        "arc_width {w} outside [0, 2π)"
                    )));
                }
                let base: f64 = rng.gen_range(0.0..TAU);
                (0..n)
                    .map(|_| {
                        let off: f64 = if w > 0.0 { rng.gen_range(0.0..=w) } else { 0.0 };
                        Angle::wrap(base + off).map_err(|e| ConfigError::Invalid(e.to_string()))
                    })
                    .collect()
            }
            InitSpec::RandomDistinct { min_separation } => {
                let sep = min_separation.unwrap_or(TAU / (100.0 * n.max(1) as f64));
                if !(sep.is_finite() && sep >= 0.0) || sep * n as f64 >= TAU {
                    return Err(ConfigError::Invalid(format!(
                        "min_separation {sep} cannot fit {n} robots"
                    )));
                }
                let mut out: Vec<Angle> = Vec::with_capacity(n);
                let mut attempts = 0usize;
                while out.len() < n {
                    attempts += 1;
                    if attempts > 1_000_000 {
                        return Err(ConfigError::Invalid(format!(
                            "could not place {n} headings {sep} apart"
                        )));
                    }
                    let cand = Angle::wrap(rng.gen_range(0.0..TAU)).expect("finite");
                    if out.iter().all(|h| h.distance(cand) >= sep) {
                        out.push(cand);
                    }
                }
                Ok(out)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PrcFile {
    Sync {
        alpha: f64,
        #[serde(default)]
        refractory: f64,
    },
    Desync {
        l1: f64,
        l2: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologyFile {
    AllToAll,
    Ring,
    /// 1-based `[from, to]` pairs.
    Edges {
        edges: Vec<[usize; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitFile {
    Explicit {
        headings: Vec<f64>,
    },
    RandomInArc {
        arc_width: f64,
    },
    RandomDistinct {
        #[serde(default)]
        min_separation: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DelayFile {
    #[default]
    Zero,
    Fixed {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

fn default_sample_interval() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

/// On-disk scenario description (TOML). Angles in radians, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n: usize,
    pub omega0: f64,
    pub omega_max: f64,
    pub prc: PrcFile,
    pub topology: TopologyFile,
    pub init: InitFile,
    #[serde(default)]
    pub delay: DelayFile,
    #[serde(default)]
    pub drop_prob: f64,
    pub t_end: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default)]
    pub seed: u64,
    /// Cancel an unfinished adjustment when the robot itself fires.
    #[serde(default = "default_true")]
    pub cancel_on_fire: bool,
}

/// Keys accepted by [`ScenarioFile::set`].
pub const SWEEP_AXES: &[&str] = &[
    "n",
    "omega0",
    "omega_max",
    "prc.alpha",
    "prc.refractory",
    "prc.l1",
    "prc.l2",
    "topology",
    "delay.value",
    "drop_prob",
    "t_end",
    "seed",
];

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Overrides one key with a textual value (used by sweeps).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let num = || {
            value
                .trim()
                .parse::<f64>()
                .map_err(|e| ConfigError::Invalid(format!("{key}={value}: {e}")))
        };
        let int = || {
            value
                .trim()
                .parse::<u64>()
                .map_err(|e| ConfigError::Invalid(format!("{key}={value}: {e}")))
        };
        match key {
            "n" => self.n = int()? as usize,
            "omega0" => self.omega0 = num()?,
            "omega_max" => self.omega_max = num()?,
            "prc.alpha" => match &mut self.prc {
                PrcFile::Sync { alpha, .. } => *alpha = num()?,
                PrcFile::Desync { .. } => return Err(wrong_prc(key)),
            },
            "prc.refractory" => match &mut self.prc {
                PrcFile::Sync { refractory, .. } => *refractory = num()?,
                PrcFile::Desync { .. } => return Err(wrong_prc(key)),
            },
            "prc.l1" => match &mut self.prc {
                PrcFile::Desync { l1, .. } => *l1 = num()?,
                PrcFile::Sync { .. } => return Err(wrong_prc(key)),
            },
            "prc.l2" => match &mut self.prc {
                PrcFile::Desync { l2, .. } => *l2 = num()?,
                PrcFile::Sync { .. } => return Err(wrong_prc(key)),
            },
            "topology" => {
                self.topology = match value.trim() {
                    "all-to-all" => TopologyFile::AllToAll,
                    "ring" => TopologyFile::Ring,
                    other => {
                        return Err(ConfigError::Invalid(format!("unknown topology `{other}`")))
                    }
                }
            }
            "delay.value" => {
                let d = num()?;
                self.delay = if d == 0.0 {
                    DelayFile::Zero
                } else {
                    DelayFile::Fixed { value: d }
                };
            }
            "drop_prob" => self.drop_prob = num()?,
            "t_end" => self.t_end = num()?,
            "seed" => self.seed = int()?,
            other => return Err(ConfigError::UnknownAxis(other.to_string())),
        }
        Ok(())
    }

    /// Builds a simulation configuration, checking every parameter range.
    pub fn to_sim_config(&self) -> Result<SimConfig, ConfigError> {
        let n = self.n;
        if n == 0 {
            return Err(ConfigError::Invalid("n must be at least 1".into()));
        }
        let prc = match self.prc {
            PrcFile::Sync { alpha, refractory } => PrcSpec::Sync(SyncPrc::new(alpha, refractory)?),
            PrcFile::Desync { l1, l2 } => PrcSpec::Desync(DesyncPrf::new(l1, l2, n)?),
        };
        let topology = match &self.topology {
            TopologyFile::AllToAll => Topology::all_to_all(n),
            TopologyFile::Ring => Topology::bidirectional_ring(n)?,
            TopologyFile::Edges { edges } => {
                let mut zero_based = Vec::with_capacity(edges.len());
                for &[from, to] in edges {
                    if from == 0 || to == 0 {
                        return Err(ConfigError::Invalid(format!(
                            "edge [{from}, {to}]: robot ids start at 1"
                        )));
                    }
                    zero_based.push((from - 1, to - 1));
                }
                Topology::from_edges(n, zero_based)?
            }
        };
        let init = match &self.init {
            InitFile::Explicit { headings } => InitSpec::Explicit(headings.clone()),
            InitFile::RandomInArc { arc_width } => InitSpec::RandomInArc {
                arc_width: *arc_width,
            },
            InitFile::RandomDistinct { min_separation } => InitSpec::RandomDistinct {
                min_separation: *min_separation,
            },
        };
        let headings = init.generate(n, self.seed)?;
        if headings.len() != n {
            return Err(ConfigError::Invalid(format!(
                "{} initial headings for n={n}",
                headings.len()
            )));
        }
        let delay = match self.delay {
            DelayFile::Zero => DelayModel::Zero,
            DelayFile::Fixed { value } => DelayModel::Fixed(value),
            DelayFile::Uniform { lo, hi } => DelayModel::UniformRandom { lo, hi },
        };
        let config = SimConfig {
            n,
            omega0: self.omega0,
            omega_max: self.omega_max,
            prc,
            topology,
            initial_headings: headings,
            delay,
            drop_prob: self.drop_prob,
            t_end: self.t_end,
            seed: self.seed,
            sample_interval: self.sample_interval,
            cancel_on_fire: self.cancel_on_fire,
        };
        let report = validate(&config);
        if let Some(v) = report.invalid().next() {
            return Err(ConfigError::Invalid(v.message.clone()));
        }
        Ok(config)
    }
}

fn wrong_prc(key: &str) -> ConfigError {
    ConfigError::Invalid(format!("`{key}` does not apply to this response rule"))
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    /// The configuration cannot be simulated at all.
    Invalid,
    /// A hypothesis the convergence guarantee depends on is broken and the
    /// engine refuses to run.
    Hard,
    /// A hypothesis is broken; simulation is still allowed.
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    ParameterRange,
    /// Desynchronization is only guaranteed on an all-to-all graph.
    AllToAllTopology,
    /// Desynchronization needs pairwise-distinct initial headings.
    DistinctHeadings,
    /// Synchronization needs the initial headings inside an arc shorter than π.
    ArcBelowHalfTurn,
    /// Synchronization needs `D ≤ 2π - Λ̄`.
    RefractoryBound,
    /// Synchronization needs a strongly connected graph.
    StrongConnectivity,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::ParameterRange => "parameter-range",
            Hypothesis::AllToAllTopology => "all-to-all-topology",
            Hypothesis::DistinctHeadings => "distinct-headings",
            Hypothesis::ArcBelowHalfTurn => "arc-below-half-turn",
            Hypothesis::RefractoryBound => "refractory-bound",
            Hypothesis::StrongConnectivity => "strong-connectivity",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub severity: Severity,
    pub hypothesis: Hypothesis,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn invalid(&self) -> impl Iterator<Item = &Violation> {
        self.by_severity(Severity::Invalid)
    }

    pub fn hard(&self) -> impl Iterator<Item = &Violation> {
        self.by_severity(Severity::Hard)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.by_severity(Severity::Warning)
    }

    /// No invalid parameter and no hard hypothesis violation.
    pub fn runnable(&self) -> bool {
        self.invalid().next().is_none() && self.hard().next().is_none()
    }

    fn by_severity(&self, s: Severity) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.severity == s)
    }

    fn push(&mut self, severity: Severity, hypothesis: Hypothesis, message: impl Into<String>) {
        self.violations.push(Violation {
            severity,
            hypothesis,
            message: message.into(),
        });
    }
}

/// Reports every violated precondition; never fails.
pub fn validate(config: &SimConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let range = |r: &mut ValidationReport, msg: String| {
        r.push(Severity::Invalid, Hypothesis::ParameterRange, msg)
    };
    let n = config.n;
    if n == 0 {
        range(&mut r, "n must be at least 1".into());
    }
    if config.initial_headings.len() != n {
        range(
            &mut r,
            format!(
                "{} initial headings for n={n}",
                config.initial_headings.len()
            ),
        );
    }
    if config.topology.n() != n {
        range(
            &mut r,
            format!("topology has {} robots, n={n}", config.topology.n()),
        );
    }
    if !(config.omega0.is_finite() && config.omega0 > 0.0) {
        range(&mut r, format!("omega0={} must be positive", config.omega0));
    }
    if !(config.omega_max.is_finite() && config.omega_max > 0.0) {
        range(
            &mut r,
            format!("omega_max={} must be positive", config.omega_max),
        );
    }
    if !(config.t_end.is_finite() && config.t_end > 0.0) {
        range(&mut r, format!("t_end={} must be positive", config.t_end));
    }
    if !(config.sample_interval.is_finite() && config.sample_interval > 0.0) {
        range(
            &mut r,
            format!(
                "sample_interval={} must be positive",
                config.sample_interval
            ),
        );
    }
    if !(0.0..=1.0).contains(&config.drop_prob) {
        range(
            &mut r,
            format!("drop_prob={} outside [0, 1]", config.drop_prob),
        );
    }
    if let Err(e) = config.delay.check() {
        range(&mut r, e.to_string());
    }
    if let Some(bn) = config.prc.band_size() {
        if bn != n {
            range(
                &mut r,
                format!("response rule tuned for {bn} robots, n={n}"),
            );
        }
    }
    if !r.is_ok() {
        return r;
    }

    match &config.prc {
        PrcSpec::Desync(_) | PrcSpec::General(_) => {
            if !config.topology.is_all_to_all() {
                r.push(
                    Severity::Hard,
                    Hypothesis::AllToAllTopology,
                    "desynchronization requires an all-to-all topology",
                );
            }
            let hs = &config.initial_headings;
            'outer: for i in 0..hs.len() {
                for j in i + 1..hs.len() {
                    if hs[i].distance(hs[j]) < EPS_ANGLE {
                        r.push(
                            Severity::Hard,
                            Hypothesis::DistinctHeadings,
                            format!(
                                "robots {} and {} start with the same heading; \
                                 desynchronization requires distinct initial headings",
                                i + 1,
                                j + 1
                            ),
                        );
                        break 'outer;
                    }
                }
            }
        }
        PrcSpec::Sync(prc) => {
            if !config.topology.is_strongly_connected() {
                r.push(
                    Severity::Warning,
                    Hypothesis::StrongConnectivity,
                    "topology is not strongly connected",
                );
            }
            if let Ok(arc) = containing_arc(&config.initial_headings) {
                if arc.lambda >= PI {
                    r.push(
                        Severity::Warning,
                        Hypothesis::ArcBelowHalfTurn,
                        format!(
                            "initial containing arc {:.6} rad is not below π",
                            arc.lambda
                        ),
                    );
                }
                if prc.refractory() > TAU - arc.lambda {
                    r.push(
                        Severity::Warning,
                        Hypothesis::RefractoryBound,
                        format!(
                            "refractory period {:.6} exceeds 2π - Λ(0) = {:.6}",
                            prc.refractory(),
                            TAU - arc.lambda
                        ),
                    );
                }
            }
        }
    }
    r
}
