//! Types shared by both protocol solvers.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scenario::SystemConfig;
use crate::solver_noma::NomaSolution;
use crate::solver_tdma::TdmaSolution;

/// Relative duality gap below which a solve is reported optimal.
pub const GAP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Noma,
    Tdma,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::Noma, Protocol::Tdma];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Noma => "noma",
            Protocol::Tdma => "tdma",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "noma" => Ok(Protocol::Noma),
            "tdma" => Ok(Protocol::Tdma),
            other => Err(Error::InvalidInput(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    ToleranceNotMet,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::ToleranceNotMet => "tolerance-not-met",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tuning knobs of the dual solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Ellipsoid stopping tolerance on the normalized dual objective.
    pub dual_tol: f64,
    /// Ellipsoid radius in normalized dual units.
    pub radius: f64,
    /// Cap on ellipsoid cuts is `iter_per_dim2 * n^2` for dual dimension `n`.
    pub iter_per_dim2: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dual_tol: 1e-5,
            radius: 1e4,
            iter_per_dim2: 200,
        }
    }
}

impl SolverOptions {
    pub fn max_iter(&self, n: usize) -> usize {
        self.iter_per_dim2 * n * n
    }
}

/// Either protocol's solution.
#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Noma(NomaSolution),
    Tdma(TdmaSolution),
}

/// Accessors common to both solution kinds.
macro_rules! forward {
    ($($name:ident: $ty:ty),* $(,)?) => {
        $(pub fn $name(&self) -> $ty {
            match self {
                Solution::Noma(s) => s.$name.clone(),
                Solution::Tdma(s) => s.$name.clone(),
            }
        })*
    };
}

impl Solution {
    forward!(
        status: Status,
        energy_total: f64,
        energy_comm: f64,
        energy_comp: f64,
        t_loc: f64,
        cpu_freqs: Vec<f64>,
        powers: Vec<f64>,
        dual_value: f64,
        duality_gap_rel: f64,
    );

    pub fn protocol(&self) -> Protocol {
        match self {
            Solution::Noma(_) => Protocol::Noma,
            Solution::Tdma(_) => Protocol::Tdma,
        }
    }

    /// Upload time per round: the shared slot (NOMA) or the sum of slots (TDMA).
    pub fn upload_time(&self) -> f64 {
        match self {
            Solution::Noma(s) => s.t_up,
            Solution::Tdma(s) => s.upload_times.iter().sum(),
        }
    }

    /// Per-device transmission rates in bits/s.
    pub fn rates(&self) -> Vec<f64> {
        match self {
            Solution::Noma(s) => s.rates.clone(),
            Solution::Tdma(s) => s.rates.clone(),
        }
    }

    /// Total training delay `M (N t_loc + upload)`.
    pub fn delay(&self, config: &SystemConfig) -> f64 {
        config.plan.m() * (config.plan.n() * self.t_loc() + self.upload_time())
    }
}

pub(crate) fn gap_rel(primal: f64, dual: f64) -> f64 {
    (primal - dual) / primal.max(1.0)
}

/// Computation energy `M N sum_k c_k cap_k f_k^2` of a frequency vector.
pub(crate) fn computation_energy(config: &SystemConfig, freqs: &[f64]) -> f64 {
    config
        .devices
        .iter()
        .zip(freqs)
        .map(|(d, f)| d.cycles() * d.capacitance_coeff * f * f)
        .sum::<f64>()
        * config.plan.mn()
}

/// Slowest frequencies meeting a per-update deadline `t_loc`.
pub(crate) fn frequencies_for_local_time(config: &SystemConfig, t_loc: f64) -> Vec<f64> {
    config
        .devices
        .iter()
        .map(|d| (d.cycles() / t_loc).clamp(d.min_cpu_freq(), d.max_cpu_freq))
        .collect()
}

/// Local-time and deadline prices satisfying the stationarity conditions
/// at a primal point, given the deadline price implied by the upload side.
///
/// A device whose update finishes exactly at `t_loc` carries the price that
/// makes its frequency stationary, `2 M N cap f^3`; faster devices carry
/// none. When `t_loc` sits at its lower bound the upload price decides the
/// deadline price and the excess goes to the devices already at full speed.
pub(crate) fn stationary_time_prices(
    config: &SystemConfig,
    freqs: &[f64],
    t_loc: f64,
    upload_price: f64,
) -> (Vec<f64>, f64) {
    let mn = config.plan.mn();
    let binding: Vec<bool> = config
        .devices
        .iter()
        .zip(freqs)
        .map(|(d, f)| d.cycles() / f >= t_loc * (1.0 - 1e-9))
        .collect();
    let mut prices: Vec<f64> = config
        .devices
        .iter()
        .zip(freqs)
        .zip(&binding)
        .map(|((d, f), b)| {
            if *b {
                2.0 * mn * d.capacitance_coeff * f.powi(3)
            } else {
                0.0
            }
        })
        .collect();
    let stationary_sum: f64 = prices.iter().sum();
    if t_loc > config.min_local_time() * (1.0 + 1e-9) {
        return (prices, stationary_sum / mn);
    }
    let deadline = upload_price.max(stationary_sum / mn);
    let at_top: Vec<usize> = (0..config.k())
        .filter(|&i| binding[i] && freqs[i] >= config.devices[i].max_cpu_freq * (1.0 - 1e-12))
        .collect();
    let excess = deadline * mn - stationary_sum;
    if excess > 0.0 && !at_top.is_empty() {
        let share = excess / at_top.len() as f64;
        at_top.iter().for_each(|&i| prices[i] += share);
    }
    (prices, deadline)
}
