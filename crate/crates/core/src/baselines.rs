//! Reference schemes that fix part of the decision variables.
//!
//! Each scheme is the joint problem with some variables pinned, so its
//! energy can never beat the joint optimum on the same scenario.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::noma_region::max_common_rate;
use crate::scenario::SystemConfig;
use crate::solution::{frequencies_for_local_time, Protocol, Solution, Status};
use crate::solver_noma::{self, NomaSolution};
use crate::solver_tdma::{self, full_power_upload_time, TdmaSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    /// Frequencies, powers and timing optimized together.
    Joint,
    /// Full CPU speed; only the upload is optimized.
    CommOnly,
    /// Full transmit power; only the frequencies are optimized.
    CompOnly,
    /// Full CPU speed and full power: the fastest operating point.
    DelayMin,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [
        SchemeId::Joint,
        SchemeId::CommOnly,
        SchemeId::CompOnly,
        SchemeId::DelayMin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Joint => "joint",
            SchemeId::CommOnly => "comm_only",
            SchemeId::CompOnly => "comp_only",
            SchemeId::DelayMin => "delay_min",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        SchemeId::ALL
            .into_iter()
            .find(|id| id.as_str() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme `{s}`")))
    }
}

/// Solves `scheme` under `protocol`. Non-joint schemes carry no dual
/// certificate, so their dual value and gap are NaN.
pub fn solve_baseline(config: &SystemConfig, protocol: Protocol, scheme: SchemeId) -> Solution {
    match (protocol, scheme) {
        (Protocol::Noma, SchemeId::Joint) => Solution::Noma(solver_noma::solve_p1(config)),
        (Protocol::Tdma, SchemeId::Joint) => Solution::Tdma(solver_tdma::solve_p2(config)),
        (Protocol::Noma, _) => Solution::Noma(noma_baseline(config, scheme)),
        (Protocol::Tdma, _) => Solution::Tdma(tdma_baseline(config, scheme)),
    }
}

fn full_speed(config: &SystemConfig) -> Vec<f64> {
    config.devices.iter().map(|d| d.max_cpu_freq).collect()
}

/// Per-update deadline left once the upload has taken its share of the
/// round, or `None` when even full-speed computing misses it.
fn local_time_after_upload(config: &SystemConfig, upload: f64) -> Option<f64> {
    let plan = &config.plan;
    let t_loc = (plan.round_budget() - upload) / plan.n();
    let floor = config.min_local_time();
    // Rounding at the exact boundary must not flip feasibility.
    (t_loc >= floor * (1.0 - 1e-12)).then(|| t_loc.max(floor))
}

fn noma_baseline(config: &SystemConfig, scheme: SchemeId) -> NomaSolution {
    let k = config.k();
    let plan = &config.plan;
    let t_up_min = plan.upload_bits / max_common_rate(config);
    let full_power = vec![config.max_power; k];
    let built = match scheme {
        SchemeId::CommOnly => {
            let t_loc = config.min_local_time();
            let t_up = plan.round_budget() - plan.n() * t_loc;
            if t_up < t_up_min * (1.0 - 1e-12) {
                return NomaSolution::infeasible(k);
            }
            solver_noma::primal_at(config, full_speed(config), t_loc, t_up.max(t_up_min))
        }
        SchemeId::CompOnly => match local_time_after_upload(config, t_up_min) {
            Some(t_loc) => {
                let freqs = frequencies_for_local_time(config, t_loc);
                solver_noma::assemble(config, freqs, t_loc, t_up_min, full_power)
            }
            None => return NomaSolution::infeasible(k),
        },
        SchemeId::DelayMin => {
            if local_time_after_upload(config, t_up_min).is_none() {
                return NomaSolution::infeasible(k);
            }
            let t_loc = config.min_local_time();
            solver_noma::assemble(config, full_speed(config), t_loc, t_up_min, full_power)
        }
        SchemeId::Joint => return solver_noma::solve_p1(config),
    };
    built.unwrap_or_else(|_| NomaSolution {
        status: Status::ToleranceNotMet,
        ..NomaSolution::infeasible(k)
    })
}

fn tdma_baseline(config: &SystemConfig, scheme: SchemeId) -> TdmaSolution {
    let k = config.k();
    let plan = &config.plan;
    let full_power_times: Vec<f64> = (0..k).map(|i| full_power_upload_time(config, i)).collect();
    let full_power_total: f64 = full_power_times.iter().sum();
    match scheme {
        SchemeId::CommOnly => {
            let t_loc = config.min_local_time();
            let budget = plan.round_budget() - plan.n() * t_loc;
            match solver_tdma::min_comm_round(config, budget) {
                Some((times, _, _)) => {
                    solver_tdma::primal_at(config, full_speed(config), t_loc, times)
                }
                None => TdmaSolution::infeasible(k),
            }
        }
        SchemeId::CompOnly => match local_time_after_upload(config, full_power_total) {
            Some(t_loc) => {
                let freqs = frequencies_for_local_time(config, t_loc);
                solver_tdma::primal_at(config, freqs, t_loc, full_power_times)
            }
            None => TdmaSolution::infeasible(k),
        },
        SchemeId::DelayMin => match local_time_after_upload(config, full_power_total) {
            Some(_) => {
                let t_loc = config.min_local_time();
                solver_tdma::primal_at(config, full_speed(config), t_loc, full_power_times)
            }
            None => TdmaSolution::infeasible(k),
        },
        SchemeId::Joint => solver_tdma::solve_p2(config),
    }
}
