//! Randomized scenario suites shared by the integration tests.
#![allow(dead_code)]

use fedge::scenario::{ChannelModel, DeviceProfile, Link, SystemConfig, TrainingPlan};
use fedge::solver_tdma::t_min_tdma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// One random scenario with `k` devices whose deadline exceeds the TDMA
/// minimum delay, so both protocols are feasible.
pub fn random_scenario(rng: &mut impl Rng, k: usize) -> SystemConfig {
    let devices = (0..k)
        .map(|_| DeviceProfile {
            flops_per_update: log_uniform(rng, 1e7, 1e10),
            flops_per_cycle: 1.0,
            capacitance_coeff: log_uniform(rng, 1e-29, 1e-27),
            max_cpu_freq: log_uniform(rng, 5e8, 3e9),
            link: Link::Gain(log_uniform(rng, 1e-11, 1e-8)),
        })
        .collect();
    let channel = ChannelModel {
        ref_gain: 1e-3,
        ref_distance: 1.0,
        pathloss_exponent: 3.0,
        noise_power: 1e-13,
        bandwidth: 2e6,
    };
    let plan = TrainingPlan {
        global_iters: rng.gen_range(1..=50),
        local_iters: rng.gen_range(1..=25),
        upload_bits: log_uniform(rng, 1e5, 1e8),
        max_delay: 1.0,
    };
    let base = SystemConfig::new(devices, channel, plan, log_uniform(rng, 0.01, 1.0)).unwrap();
    let t = t_min_tdma(&base) * (1.0 + log_uniform(rng, 1e-2, 10.0));
    base.with_max_delay(t).unwrap()
}

/// `count` scenarios cycling through K = 1..=max_k, from a fixed seed.
pub fn random_suite(seed: u64, count: usize, max_k: usize) -> Vec<SystemConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| random_scenario(&mut rng, 1 + i % max_k))
        .collect()
}
