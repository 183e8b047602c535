//! Workload builders shared by the benchmarks.

use std::f64::consts::PI;

use pulsehead::{Angle, DelayModel, DesyncPrf, PrcSpec, SimConfig, SyncPrc, Topology};

pub const W0: f64 = PI / 5.0;

/// `n` robots spread over 0.9π with the sync rule, all-to-all.
pub fn sync(n: usize, cycles: f64) -> SimConfig {
    let headings = (0..n)
        .map(|i| Angle::wrap(0.9 * PI * i as f64 / (n - 1).max(1) as f64).unwrap())
        .collect();
    SimConfig {
        n,
        omega0: W0,
        omega_max: 0.3 * W0,
        prc: PrcSpec::Sync(SyncPrc::new(0.5, 0.0).unwrap()),
        topology: Topology::all_to_all(n),
        initial_headings: headings,
        delay: DelayModel::Zero,
        drop_prob: 0.0,
        t_end: cycles * 2.0 * PI / W0,
        seed: 0,
        sample_interval: 0.1,
        cancel_on_fire: true,
    }
}

/// `n` robots clustered near 0.2 rad with the desync rule.
pub fn desync(n: usize, cycles: f64) -> SimConfig {
    SimConfig {
        prc: PrcSpec::Desync(DesyncPrf::new(0.8, 0.6, n).unwrap()),
        initial_headings: (0..n)
            .map(|i| Angle::wrap(0.2 + 0.15 * i as f64).unwrap())
            .collect(),
        ..sync(n, cycles)
    }
}
