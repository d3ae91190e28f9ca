//! Brute-force cross-checks: a grid-search solver for small `K` and an
//! audit of constraints, complementary slackness and stationarity.
//!
//! Nothing here calls the dual machinery of the solvers, except to
//! re-evaluate the dual function at a reported dual point.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::noma_region::{
    bit_region_violation, min_power_for_common_rate, time_shared_rates, BitAllocation, MacChannel,
};
use crate::scenario::SystemConfig;
use crate::solution::{Protocol, Solution, Status};
use crate::solver_noma::{self, dual_value_noma, NomaSolution};
use crate::solver_tdma::{self, dual_value_tdma, upload_energy_given_time, TdmaSolution};

/// Largest device count the grid search accepts.
pub const GRID_MAX_K: usize = 3;
/// Largest per-device grid resolution.
pub const GRID_MAX_RESOLUTION: usize = 400;

/// Lowest grid power as a fraction of the cap.
const POWER_FLOOR: f64 = 1e-6;
/// Zoom passes around the best coarse point, and points per side in each.
const ZOOM_ROUNDS: usize = 8;
const ZOOM_HALF_WIDTH: usize = 10;

/// Best point found over log-spaced power grids.
///
/// For fixed powers the remaining variables follow by monotonicity: the
/// upload takes the shortest slot the powers allow (energy grows with the
/// slot), and every CPU runs at the slowest speed that meets the leftover
/// per-update deadline. The search is therefore over powers only, with a
/// zoom refinement around the best coarse point.
pub fn grid_solve(
    config: &SystemConfig,
    protocol: Protocol,
    resolution: usize,
) -> Result<Solution> {
    let k = config.k();
    if k > GRID_MAX_K {
        return Err(Error::SizeLimit {
            k,
            limit: GRID_MAX_K,
        });
    }
    if !(2..=GRID_MAX_RESOLUTION).contains(&resolution) {
        return invalid(format!(
            "grid resolution must be in 2..={GRID_MAX_RESOLUTION}"
        ));
    }
    let evaluator = PointEvaluator::new(config, protocol);
    let lo = POWER_FLOOR * config.max_power;
    let coarse = log_grid(lo, config.max_power, resolution);
    let grids = vec![coarse; k];
    let Some(mut best) = search(&grids, &evaluator) else {
        return Ok(infeasible(protocol, k));
    };

    let mut span = (config.max_power / lo).powf(1.0 / (resolution - 1) as f64);
    for _ in 0..ZOOM_ROUNDS {
        let grids: Vec<Vec<f64>> = best
            .powers
            .iter()
            .map(|&p| {
                let a = (p / span).max(lo);
                let b = (p * span).min(config.max_power);
                log_grid(a, b, 2 * ZOOM_HALF_WIDTH + 1)
            })
            .collect();
        if let Some(better) = search(&grids, &evaluator) {
            if better.energy < best.energy {
                best = better;
            }
        }
        span = span.powf(0.2);
    }
    evaluator.solution(best)
}

fn infeasible(protocol: Protocol, k: usize) -> Solution {
    match protocol {
        Protocol::Noma => Solution::Noma(NomaSolution::infeasible(k)),
        Protocol::Tdma => Solution::Tdma(TdmaSolution::infeasible(k)),
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 || hi <= lo {
        return vec![hi];
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|i| lo * (step * i as f64).exp()).collect();
    g[n - 1] = hi;
    g
}

#[derive(Debug, Clone)]
struct GridPoint {
    powers: Vec<f64>,
    energy: f64,
    index: usize,
}

/// Exhaustive minimum over the product grid; ties go to the smallest
/// lexicographic index so the answer does not depend on scheduling.
fn search(grids: &[Vec<f64>], evaluator: &PointEvaluator) -> Option<GridPoint> {
    let sizes: Vec<usize> = grids.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().product();
    (0..total)
        .into_par_iter()
        .filter_map(|index| {
            let mut rest = index;
            let mut powers = vec![0.0; grids.len()];
            for d in (0..grids.len()).rev() {
                powers[d] = grids[d][rest % sizes[d]];
                rest /= sizes[d];
            }
            let energy = evaluator.energy(&powers)?;
            Some(GridPoint {
                powers,
                energy,
                index,
            })
        })
        .min_by(|a, b| a.energy.total_cmp(&b.energy).then(a.index.cmp(&b.index)))
}

struct PointEvaluator<'a> {
    config: &'a SystemConfig,
    protocol: Protocol,
    channel: MacChannel,
}

struct Timing {
    t_loc: f64,
    freqs: Vec<f64>,
}

impl<'a> PointEvaluator<'a> {
    fn new(config: &'a SystemConfig, protocol: Protocol) -> Self {
        Self {
            config,
            protocol,
            channel: MacChannel::from_config(config),
        }
    }

    /// Equal rate every device gets at `powers`: the minimum over all
    /// subsets of capacity per member.
    fn common_rate(&self, powers: &[f64]) -> f64 {
        let k = powers.len();
        (1..1usize << k)
            .map(|mask| {
                let q: f64 = (0..k)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| powers[i] * self.channel.gains[i])
                    .sum();
                self.channel.capacity(q) / mask.count_ones() as f64
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn slots(&self, powers: &[f64]) -> Vec<f64> {
        let s = self.config.plan.upload_bits;
        match self.protocol {
            Protocol::Noma => vec![s / self.common_rate(powers)],
            Protocol::Tdma => powers
                .iter()
                .zip(self.config.gains())
                .map(|(p, h)| {
                    s / self
                        .config
                        .channel
                        .capacity(p * h / self.config.channel.noise_power)
                })
                .collect(),
        }
    }

    fn timing(&self, upload: f64) -> Option<Timing> {
        let plan = &self.config.plan;
        let t_loc = (plan.round_budget() - upload) / plan.n();
        if !(t_loc >= self.config.min_local_time() * (1.0 - 1e-12)) {
            return None;
        }
        let t_loc = t_loc.max(self.config.min_local_time());
        let freqs = self
            .config
            .devices
            .iter()
            .map(|d| (d.cycles() / t_loc).clamp(d.min_cpu_freq(), d.max_cpu_freq))
            .collect();
        Some(Timing { t_loc, freqs })
    }

    fn energy(&self, powers: &[f64]) -> Option<f64> {
        let slots = self.slots(powers);
        let timing = self.timing(slots.iter().sum())?;
        let plan = &self.config.plan;
        let comp: f64 = self
            .config
            .devices
            .iter()
            .zip(&timing.freqs)
            .map(|(d, f)| d.cycles() * d.capacitance_coeff * f * f)
            .sum();
        let comm: f64 = match self.protocol {
            Protocol::Noma => slots[0] * powers.iter().sum::<f64>(),
            Protocol::Tdma => slots.iter().zip(powers).map(|(t, p)| t * p).sum(),
        };
        Some(plan.mn() * comp + plan.m() * comm)
    }

    fn solution(&self, best: GridPoint) -> Result<Solution> {
        let slots = self.slots(&best.powers);
        let timing = self
            .timing(slots.iter().sum())
            .ok_or_else(|| Error::NumericalDomain("grid optimum lost feasibility".into()))?;
        Ok(match self.protocol {
            Protocol::Noma => Solution::Noma(solver_noma::assemble(
                self.config,
                timing.freqs,
                timing.t_loc,
                slots[0],
                best.powers,
            )?),
            Protocol::Tdma => Solution::Tdma(solver_tdma::primal_at(
                self.config,
                timing.freqs,
                timing.t_loc,
                slots,
            )),
        })
    }
}

/// A named audit residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: String,
    pub value: f64,
}

impl Residual {
    fn new(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
        }
    }
}

/// Acceptance thresholds of an audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditThresholds {
    /// Largest relative constraint violation.
    pub constraint: f64,
    /// Largest slackness or stationarity residual.
    pub residual: f64,
}

impl Default for AuditThresholds {
    fn default() -> Self {
        Self {
            constraint: 1e-6,
            residual: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// Largest relative violation over every constraint, including all
    /// subset inequalities of the rate region.
    pub max_constraint_violation: f64,
    /// Products of prices and slacks relative to the objective, and
    /// tightness of the constraints whose implicit prices are positive.
    /// Empty when no dual certificate is attached.
    pub complementary_slackness_residuals: Vec<Residual>,
    /// First-order change of the Lagrangian under relative perturbations
    /// of each primal variable, in units of the objective.
    pub stationarity_residuals: Vec<Residual>,
    /// False for solutions without a dual certificate (the baselines).
    pub slackness_applicable: bool,
    /// Energy recomputed from the primal variables (J).
    pub objective: f64,
    pub pass: bool,
}

impl AuditReport {
    pub fn max_slackness_residual(&self) -> f64 {
        self.complementary_slackness_residuals
            .iter()
            .map(|r| r.value)
            .fold(0.0, f64::max)
    }

    pub fn max_stationarity_residual(&self) -> f64 {
        self.stationarity_residuals
            .iter()
            .map(|r| r.value)
            .fold(0.0, f64::max)
    }
}

pub fn audit_solution(solution: &Solution, config: &SystemConfig) -> AuditReport {
    audit_solution_with(solution, config, &AuditThresholds::default())
}

pub fn audit_solution_with(
    solution: &Solution,
    config: &SystemConfig,
    thresholds: &AuditThresholds,
) -> AuditReport {
    if solution.status() != Status::Optimal {
        return AuditReport {
            max_constraint_violation: f64::NAN,
            complementary_slackness_residuals: Vec::new(),
            stationarity_residuals: Vec::new(),
            slackness_applicable: false,
            objective: f64::NAN,
            pass: false,
        };
    }
    let mut report = match solution {
        Solution::Noma(s) => audit_noma(s, config),
        Solution::Tdma(s) => audit_tdma(s, config),
    };
    let residuals_ok = !report.slackness_applicable
        || report
            .complementary_slackness_residuals
            .iter()
            .chain(&report.stationarity_residuals)
            .all(|r| r.value <= thresholds.residual);
    report.pass = report.max_constraint_violation <= thresholds.constraint && residuals_ok;
    report
}

/// Relative step of the finite differences.
const FD_STEP: f64 = 1e-6;

/// Violations shared by both protocols: frequency box, per-device local
/// time, power box, deadline and consistency of the reported energy.
fn common_violations(
    config: &SystemConfig,
    freqs: &[f64],
    powers: &[f64],
    t_loc: f64,
    delay: f64,
    reported: f64,
    objective: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (d, f) in config.devices.iter().zip(freqs) {
        worst = worst.max((d.min_cpu_freq() - f) / d.max_cpu_freq);
        worst = worst.max((f - d.max_cpu_freq) / d.max_cpu_freq);
        worst = worst.max((d.cycles() / f - t_loc) / t_loc);
    }
    for p in powers {
        worst = worst
            .max((p - config.max_power) / config.max_power)
            .max(-p / config.max_power);
    }
    worst = worst.max((delay - config.plan.max_delay) / config.plan.max_delay);
    worst = worst.max((reported - objective).abs() / objective);
    if freqs.iter().chain(powers).any(|v| !v.is_finite()) || !(t_loc > 0.0) {
        worst = f64::INFINITY;
    }
    worst
}

fn computation_energy(config: &SystemConfig, freqs: &[f64]) -> f64 {
    config
        .devices
        .iter()
        .zip(freqs)
        .map(|(d, f)| d.cycles() * d.capacitance_coeff * f * f)
        .sum::<f64>()
        * config.plan.mn()
}

/// One-sided differences of `g` at `x`, scaled by `x`. The left one is
/// `None` when the left point would leave the domain.
fn scaled_slopes(g: impl Fn(f64) -> f64, x: f64, lower: f64) -> (Option<f64>, f64) {
    let h = FD_STEP * x;
    let gx = g(x);
    let right = (g(x + h) - gx) / FD_STEP;
    let left = (x - h >= lower).then(|| (gx - g(x - h)) / FD_STEP);
    (left, right)
}

/// How far zero is from the one-sided slope interval: a minimum (possibly
/// at a kink) needs a non-positive left slope and a non-negative right one.
fn kink_violation(left: Option<f64>, right: f64) -> f64 {
    left.map_or(0.0, |l| l.max(0.0)).max(-right).max(0.0)
}

/// Stationarity of each device's frequency: `M N cap c f^2 + price c / f`
/// must be flat, unless the frequency sits at a bound and the slope pushes
/// against it.
fn frequency_residuals(
    config: &SystemConfig,
    freqs: &[f64],
    prices: &[f64],
    objective: f64,
) -> Vec<Residual> {
    let mn = config.plan.mn();
    config
        .devices
        .iter()
        .zip(freqs)
        .zip(prices)
        .enumerate()
        .map(|(k, ((d, &f), &price))| {
            let lagrangian =
                |x: f64| mn * d.cycles() * d.capacitance_coeff * x * x + price * d.cycles() / x;
            let (left, right) = scaled_slopes(lagrangian, f, 0.0);
            // Bounds only block the direction that would leave the box.
            let left = left.filter(|_| f > d.min_cpu_freq() * (1.0 + 1e-12));
            let right = if f >= d.max_cpu_freq * (1.0 - 1e-12) {
                right.max(0.0)
            } else {
                right
            };
            Residual::new(
                format!("frequency[{k}]"),
                kink_violation(left, right) / objective,
            )
        })
        .collect()
}

fn audit_noma(sol: &NomaSolution, config: &SystemConfig) -> AuditReport {
    let plan = &config.plan;
    let k = config.k();
    let s = plan.upload_bits;
    let channel = MacChannel::from_config(config);
    let delay = plan.m() * (plan.n() * sol.t_loc + sol.t_up);
    let comm = plan.m() * sol.t_up * sol.powers.iter().sum::<f64>();
    let objective = computation_energy(config, &sol.cpu_freqs) + comm;

    let mut worst = common_violations(
        config,
        &sol.cpu_freqs,
        &sol.powers,
        sol.t_loc,
        delay,
        sol.energy_total,
        objective,
    );
    for b in &sol.bits {
        worst = worst.max((s - b) / s);
    }
    let alloc = BitAllocation {
        bits: sol.bits.clone(),
        energies: sol.powers.iter().map(|p| p * sol.t_up).collect(),
        t_up: sol.t_up,
    };
    worst = worst.max(bit_region_violation(&alloc, &channel).map_or(f64::INFINITY, |v| v / s));
    match time_shared_rates(&sol.decoding, &sol.powers, &channel) {
        Ok(rates) if !sol.decoding.is_empty() => {
            for (r, b) in rates.iter().zip(&sol.bits) {
                worst = worst.max((b - r * sol.t_up) / s);
            }
        }
        _ => worst = f64::INFINITY,
    }

    let Some(dual) = &sol.dual else {
        return AuditReport {
            max_constraint_violation: worst,
            complementary_slackness_residuals: Vec::new(),
            stationarity_residuals: Vec::new(),
            slackness_applicable: false,
            objective,
            pass: false,
        };
    };

    let mut slack = Vec::new();
    for (i, (l, b)) in dual.lambda.iter().zip(&sol.bits).enumerate() {
        slack.push(Residual::new(
            format!("bits[{i}]"),
            l * (b - s).abs() / objective,
        ));
    }
    for (i, ((d, f), mu)) in config
        .devices
        .iter()
        .zip(&sol.cpu_freqs)
        .zip(&dual.mu)
        .enumerate()
    {
        slack.push(Residual::new(
            format!("local_time[{i}]"),
            mu * (sol.t_loc - d.cycles() / f).abs() / objective,
        ));
    }
    slack.push(Residual::new(
        "deadline",
        dual.nu * (plan.max_delay - delay).abs() / objective,
    ));
    // Every transmitting device must sit in a tight subset of the region;
    // otherwise its power could drop at no cost.
    let received: Vec<f64> = sol
        .powers
        .iter()
        .zip(&channel.gains)
        .map(|(p, h)| p * h)
        .collect();
    for i in 0..k {
        if sol.powers[i] <= 0.0 {
            continue;
        }
        let tightness = (1..1usize << k)
            .filter(|m| m >> i & 1 == 1)
            .map(|m| {
                let q: f64 = (0..k)
                    .filter(|j| m >> j & 1 == 1)
                    .map(|j| received[j])
                    .sum();
                let used: f64 = (0..k)
                    .filter(|j| m >> j & 1 == 1)
                    .map(|j| sol.bits[j])
                    .sum();
                (sol.t_up * channel.capacity(q) - used) / (s * m.count_ones() as f64)
            })
            .fold(f64::INFINITY, f64::min);
        slack.push(Residual::new(
            format!("region_tightness[{i}]"),
            tightness.abs(),
        ));
    }
    let dual_value = dual_value_noma(dual, config).map_or(f64::NEG_INFINITY, |ev| ev.value);
    slack.push(Residual::new(
        "duality_gap",
        (objective - dual_value).abs() / objective,
    ));

    let mut stationarity = frequency_residuals(config, &sol.cpu_freqs, &dual.mu, objective);
    let mu_sum: f64 = dual.mu.iter().sum();
    stationarity.push(Residual::new(
        "local_time_split",
        (dual.nu * plan.mn() - mu_sum).abs() * sol.t_loc / objective,
    ));
    let t_up_min = s / crate::noma_region::max_common_rate(config);
    let slot_lagrangian = |t: f64| {
        let comm = min_power_for_common_rate(&channel, config.max_power, s / t)
            .map_or(f64::INFINITY, |p| t * p.iter().sum::<f64>());
        plan.m() * (comm + dual.nu * t)
    };
    let (left, right) = scaled_slopes(slot_lagrangian, sol.t_up, t_up_min);
    stationarity.push(Residual::new(
        "upload_slot",
        kink_violation(left, right) / objective,
    ));

    AuditReport {
        max_constraint_violation: worst,
        complementary_slackness_residuals: slack,
        stationarity_residuals: stationarity,
        slackness_applicable: true,
        objective,
        pass: false,
    }
}

fn audit_tdma(sol: &TdmaSolution, config: &SystemConfig) -> AuditReport {
    let plan = &config.plan;
    let s = plan.upload_bits;
    let ch = &config.channel;
    let upload: f64 = sol.upload_times.iter().sum();
    let delay = plan.m() * (plan.n() * sol.t_loc + upload);
    let comm: f64 = plan.m()
        * sol
            .powers
            .iter()
            .zip(&sol.upload_times)
            .map(|(p, t)| p * t)
            .sum::<f64>();
    let objective = computation_energy(config, &sol.cpu_freqs) + comm;

    let mut worst = common_violations(
        config,
        &sol.cpu_freqs,
        &sol.powers,
        sol.t_loc,
        delay,
        sol.energy_total,
        objective,
    );
    let delivered: Vec<f64> = sol
        .powers
        .iter()
        .zip(&sol.upload_times)
        .zip(config.gains())
        .map(|((p, t), h)| t * ch.capacity(p * h / ch.noise_power))
        .collect();
    for (d, t) in delivered.iter().zip(&sol.upload_times) {
        worst = worst.max((s - d) / s);
        if !(*t > 0.0) {
            worst = f64::INFINITY;
        }
    }

    let Some(dual) = &sol.dual else {
        return AuditReport {
            max_constraint_violation: worst,
            complementary_slackness_residuals: Vec::new(),
            stationarity_residuals: Vec::new(),
            slackness_applicable: false,
            objective,
            pass: false,
        };
    };

    let mut slack = Vec::new();
    for (i, ((d, f), w)) in config
        .devices
        .iter()
        .zip(&sol.cpu_freqs)
        .zip(&dual.omega)
        .enumerate()
    {
        slack.push(Residual::new(
            format!("local_time[{i}]"),
            w * (sol.t_loc - d.cycles() / f).abs() / objective,
        ));
    }
    slack.push(Residual::new(
        "deadline",
        dual.zeta * (plan.max_delay - delay).abs() / objective,
    ));
    // Sending more than the payload always costs energy.
    for (i, d) in delivered.iter().enumerate() {
        slack.push(Residual::new(
            format!("rate_tightness[{i}]"),
            (d - s).abs() / s,
        ));
    }
    let dual_value = dual_value_tdma(dual, config).map_or(f64::NEG_INFINITY, |ev| ev.value);
    slack.push(Residual::new(
        "duality_gap",
        (objective - dual_value).abs() / objective,
    ));

    let mut stationarity = frequency_residuals(config, &sol.cpu_freqs, &dual.omega, objective);
    let omega_sum: f64 = dual.omega.iter().sum();
    stationarity.push(Residual::new(
        "local_time_split",
        (dual.zeta * plan.mn() - omega_sum).abs() * sol.t_loc / objective,
    ));
    for (i, (t, h)) in sol.upload_times.iter().zip(config.gains()).enumerate() {
        let fastest = solver_tdma::full_power_upload_time(config, i);
        let lagrangian =
            |x: f64| plan.m() * (upload_energy_given_time(x, s, *h, ch) + dual.zeta * x);
        let (left, right) = scaled_slopes(lagrangian, *t, fastest);
        stationarity.push(Residual::new(
            format!("slot[{i}]"),
            kink_violation(left, right) / objective,
        ));
    }

    AuditReport {
        max_constraint_violation: worst,
        complementary_slackness_residuals: slack,
        stationarity_residuals: stationarity,
        slackness_applicable: true,
        objective,
        pass: false,
    }
}
