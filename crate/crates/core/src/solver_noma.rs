//! Energy minimization over a NOMA uplink.
//!
//! The problem is convex after writing transmit energy `e = p t_up` and
//! uploaded bits `s = r t_up` (the rate region becomes a perspective). The
//! solver maximizes the partial Lagrangian dual with the ellipsoid method,
//! then recovers the primal along the one remaining degree of freedom: the
//! split of the round budget `T / M` between `N` local updates and the
//! upload. For a fixed split the minimum upload energy is exact (see
//! [`min_power_for_common_rate`]) and the required rates are realized by
//! time-sharing SIC decoding orders.

use std::cell::RefCell;

use crate::error::{invalid, Error, Result};
use crate::noma_region::{
    dominant_extension, max_common_rate, min_power_for_common_rate, time_shared_rates,
    time_sharing, weight_order, DecodingOrder, MacChannel,
};
use crate::numerics::{
    ellipsoid_max, golden_section_min, minimize_convex_box_from, CutOracleResult,
};
use crate::scenario::{DeviceProfile, SystemConfig};
use crate::solution::{
    computation_energy, frequencies_for_local_time, gap_rel, stationary_time_prices, SolverOptions,
    Status, GAP_TOL,
};

/// Shortest upload slot considered by the inner problem (seconds).
pub const T_UP_FLOOR: f64 = 1e-12;

/// Dual variables of the NOMA problem.
#[derive(Debug, Clone, PartialEq)]
pub struct NomaDualPoint {
    /// Prices on the per-device bit requirements.
    pub lambda: Vec<f64>,
    /// Prices on the per-device local-time constraints.
    pub mu: Vec<f64>,
    /// Price on the training deadline.
    pub nu: f64,
}

impl NomaDualPoint {
    /// Whether the point lies where the dual function is finite
    /// (`nu M N >= sum mu`, all entries non-negative).
    pub fn is_feasible(&self, config: &SystemConfig) -> bool {
        let nonneg = self
            .lambda
            .iter()
            .chain(&self.mu)
            .chain([&self.nu])
            .all(|v| *v >= 0.0);
        let mu_sum: f64 = self.mu.iter().sum();
        nonneg && self.nu * config.plan.mn() >= mu_sum * (1.0 - 1e-12)
    }
}

/// Optimal upload energies and slot for fixed prices.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub energies: Vec<f64>,
    pub t_up: f64,
    pub powers: Vec<f64>,
    /// SIC order sorting the bit prices in decreasing order.
    pub order: DecodingOrder,
    /// Per-second value `max_p sum_k (price-weighted rate) - M sum p`.
    pub rate_value: f64,
}

/// Primal minimizers found while evaluating the dual function.
#[derive(Debug, Clone, PartialEq)]
pub struct NomaMinimizers {
    pub cpu_freqs: Vec<f64>,
    pub t_loc: f64,
    pub inner: InnerSolution,
    pub bits: Vec<f64>,
}

/// Dual value, a supergradient, and the minimizers behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct NomaDualEvaluation {
    pub value: f64,
    /// Ordered as `[lambda_1..K, mu_1..K, nu]`.
    pub subgradient: Vec<f64>,
    pub minimizers: NomaMinimizers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NomaSolution {
    pub cpu_freqs: Vec<f64>,
    pub powers: Vec<f64>,
    pub rates: Vec<f64>,
    pub bits: Vec<f64>,
    pub energies: Vec<f64>,
    pub t_loc: f64,
    pub t_up: f64,
    /// Time-sharing schedule: decoding orders and their time fractions.
    pub decoding: Vec<(DecodingOrder, f64)>,
    pub energy_total: f64,
    pub energy_comm: f64,
    pub energy_comp: f64,
    /// Lower bound on the optimal energy; NaN when no certificate exists.
    pub dual_value: f64,
    pub duality_gap_rel: f64,
    pub dual: Option<NomaDualPoint>,
    pub status: Status,
    pub iterations: usize,
}

impl NomaSolution {
    pub(crate) fn infeasible(k: usize) -> Self {
        Self {
            cpu_freqs: vec![f64::NAN; k],
            powers: vec![f64::NAN; k],
            rates: vec![f64::NAN; k],
            bits: vec![f64::NAN; k],
            energies: vec![f64::NAN; k],
            t_loc: f64::NAN,
            t_up: f64::NAN,
            decoding: Vec::new(),
            energy_total: f64::NAN,
            energy_comm: f64::NAN,
            energy_comp: f64::NAN,
            dual_value: f64::NAN,
            duality_gap_rel: f64::NAN,
            dual: None,
            status: Status::Infeasible,
            iterations: 0,
        }
    }
}

/// Minimum training delay: full CPU speed and the max-min common rate.
pub fn t_min_noma(config: &SystemConfig) -> f64 {
    let plan = &config.plan;
    plan.m() * (plan.n() * config.min_local_time() + plan.upload_bits / max_common_rate(config))
}

/// Frequency minimizing `M N c cap f^2 + weight c / f` over `[f_floor, f_max]`.
pub fn optimal_cpu_frequency(dual_weight: f64, device: &DeviceProfile, m: u32, n: u32) -> f64 {
    let mn = f64::from(m) * f64::from(n);
    (dual_weight.max(0.0) / (2.0 * mn * device.capacitance_coeff))
        .cbrt()
        .clamp(device.min_cpu_freq(), device.max_cpu_freq)
}

/// Maximizes `sum_k w_k B log2(1 + Q_k / noise) - M sum p` over the power box,
/// where `Q_k` are prefix sums of received power along `order` and
/// `w_k = lambda_(k) - lambda_(k+1)` are the price drops along it.
fn rate_value_max(
    channel: &MacChannel,
    max_power: f64,
    m: f64,
    lambda: &[f64],
    warm: Option<&[f64]>,
) -> Result<(Vec<f64>, f64, DecodingOrder)> {
    let k = channel.k();
    let order = weight_order(lambda);
    let ord = order.as_slice();
    let drop: Vec<f64> = (0..k)
        .map(|j| lambda[ord[j]] - if j + 1 < k { lambda[ord[j + 1]] } else { 0.0 })
        .collect();
    let h: Vec<f64> = ord.iter().map(|&i| channel.gains[i]).collect();
    let ln2 = std::f64::consts::LN_2;
    let bw = channel.bandwidth;
    let noise = channel.noise_power;

    // Marginal value of power at zero; if never above the price M, p = 0.
    let mut tail = 0.0;
    let mut any_positive = false;
    for j in (0..k).rev() {
        tail += drop[j] * bw / (ln2 * noise);
        if h[j] * tail > m {
            any_positive = true;
        }
    }
    if !any_positive {
        return Ok((vec![0.0; k], 0.0, order));
    }

    let scale = m * max_power;
    let value = |u: &[f64]| -> f64 {
        let mut q = 0.0;
        let mut util = 0.0;
        for j in 0..k {
            q += u[j] * max_power * h[j];
            util += drop[j] * channel.capacity(q);
        }
        util - m * max_power * u.iter().sum::<f64>()
    };
    let f = |u: &[f64]| -value(u) / scale;
    let grad = |u: &[f64], g: &mut [f64]| {
        let mut q = 0.0;
        let mut inv = vec![0.0; k];
        for j in 0..k {
            q += u[j] * max_power * h[j];
            inv[j] = drop[j] * bw / (ln2 * (noise + q));
        }
        let mut tail = 0.0;
        for j in (0..k).rev() {
            tail += inv[j];
            g[j] = 1.0 - h[j] * tail / m;
        }
    };
    let x0: Vec<f64> = match warm {
        Some(w) => ord.iter().map(|&i| w[i].clamp(0.0, 1.0)).collect(),
        None => vec![0.5; k],
    };
    let res = minimize_convex_box_from(f, grad, &vec![0.0; k], &vec![1.0; k], &x0, 1e-11)?;
    let mut powers = vec![0.0; k];
    for (j, &i) in ord.iter().enumerate() {
        powers[i] = res.x[j] * max_power;
    }
    let phi = value(&res.x).max(0.0);
    Ok((powers, phi, order))
}

fn check_prices(lambda: &[f64], nu: f64, k: usize) -> Result<()> {
    if lambda.len() != k {
        return invalid(format!("expected {k} bit prices, got {}", lambda.len()));
    }
    if lambda.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::DualInfeasible);
    }
    Ok(())
}

/// Minimizes `M sum e - sum lambda s + nu M t_up` over energies, bits in
/// the region and `t_up in [T_UP_FLOOR, T / M]`.
///
/// Writing `e = p t_up` the objective is `t_up (nu M - rate_value)`, linear
/// in `t_up`, so the slot sits at an end of its range.
pub fn inner_energy_time(lambda: &[f64], nu: f64, config: &SystemConfig) -> Result<InnerSolution> {
    inner_energy_time_warm(lambda, nu, config, None)
}

fn inner_energy_time_warm(
    lambda: &[f64],
    nu: f64,
    config: &SystemConfig,
    warm: Option<&[f64]>,
) -> Result<InnerSolution> {
    check_prices(lambda, nu, config.k())?;
    let channel = MacChannel::from_config(config);
    let m = config.plan.m();
    let (powers, rate_value, order) = rate_value_max(&channel, config.max_power, m, lambda, warm)?;
    let t_up = if rate_value > nu * m {
        config.plan.round_budget()
    } else {
        T_UP_FLOOR
    };
    Ok(InnerSolution {
        energies: powers.iter().map(|p| p * t_up).collect(),
        t_up,
        powers,
        order,
        rate_value,
    })
}

/// Evaluates the dual function at a point of its domain.
pub fn dual_value_noma(point: &NomaDualPoint, config: &SystemConfig) -> Result<NomaDualEvaluation> {
    dual_value_noma_warm(point, config, None)
}

fn dual_value_noma_warm(
    point: &NomaDualPoint,
    config: &SystemConfig,
    warm: Option<&[f64]>,
) -> Result<NomaDualEvaluation> {
    let k = config.k();
    if point.mu.len() != k {
        return invalid(format!(
            "expected {k} local-time prices, got {}",
            point.mu.len()
        ));
    }
    if !point.is_feasible(config) {
        return Err(Error::DualInfeasible);
    }
    let plan = &config.plan;
    let (m, n) = (plan.global_iters, plan.local_iters);
    let mn = plan.mn();

    let freqs: Vec<f64> = config
        .devices
        .iter()
        .zip(&point.mu)
        .map(|(d, mu)| optimal_cpu_frequency(*mu, d, m, n))
        .collect();
    let mut value = 0.0;
    for ((d, f), mu) in config.devices.iter().zip(&freqs).zip(&point.mu) {
        value += mn * d.cycles() * d.capacitance_coeff * f * f + d.cycles() * mu / f;
    }
    let mu_sum: f64 = point.mu.iter().sum();
    let local_times: Vec<f64> = config
        .devices
        .iter()
        .zip(&freqs)
        .map(|(d, f)| d.cycles() / f)
        .collect();
    let t_loc = if point.nu * mn - mu_sum > 1e-12 * (point.nu * mn) {
        0.0
    } else {
        local_times.iter().copied().fold(0.0, f64::max)
    };

    let inner = inner_energy_time_warm(&point.lambda, point.nu, config, warm)?;
    let channel = MacChannel::from_config(config);
    let bits: Vec<f64> =
        crate::noma_region::sic_corner_rates(&inner.powers, &channel, &inner.order)?
            .into_iter()
            .map(|r| r * inner.t_up)
            .collect();
    let s = plan.upload_bits;
    value += point.lambda.iter().sum::<f64>() * s;
    value += inner.t_up * (point.nu * plan.m() - inner.rate_value);
    value -= point.nu * plan.max_delay;

    let mut subgradient = Vec::with_capacity(2 * k + 1);
    subgradient.extend(bits.iter().map(|b| s - b));
    subgradient.extend(local_times.iter().map(|lt| lt - t_loc));
    subgradient.push(plan.m() * (plan.n() * t_loc + inner.t_up) - plan.max_delay);

    Ok(NomaDualEvaluation {
        value,
        subgradient,
        minimizers: NomaMinimizers {
            cpu_freqs: freqs,
            t_loc,
            inner,
            bits,
        },
    })
}

/// Minimum upload energy per round for a slot of `t_up` seconds, with the
/// powers achieving it. `None` if the slot is too short even at full power.
pub(crate) fn min_comm_round(config: &SystemConfig, t_up: f64) -> Option<(Vec<f64>, f64)> {
    let channel = MacChannel::from_config(config);
    let rate = (config.plan.upload_bits / t_up).min(max_common_rate(config));
    let powers = min_power_for_common_rate(&channel, config.max_power, rate)?;
    let energy = t_up * powers.iter().sum::<f64>();
    Some((powers, energy))
}

/// Assembles a primal solution from a local-time split.
pub(crate) fn primal_at(
    config: &SystemConfig,
    freqs: Vec<f64>,
    t_loc: f64,
    t_up: f64,
) -> Result<NomaSolution> {
    let (powers, _) = min_comm_round(config, t_up).ok_or_else(|| {
        Error::NumericalDomain("upload slot shorter than the full-power minimum".into())
    })?;
    assemble(config, freqs, t_loc, t_up, powers)
}

/// Builds a solution from fixed frequencies, slot and powers, delivering
/// the common rate `S / t_up` (or more) to every device by time-sharing.
pub(crate) fn assemble(
    config: &SystemConfig,
    freqs: Vec<f64>,
    t_loc: f64,
    t_up: f64,
    powers: Vec<f64>,
) -> Result<NomaSolution> {
    let channel = MacChannel::from_config(config);
    let rate = (config.plan.upload_bits / t_up).min(max_common_rate(config));
    let target = dominant_extension(&vec![rate; config.k()], &powers, &channel)?;
    let decoding = time_sharing(&target, &powers, &channel)?;
    let rates = time_shared_rates(&decoding, &powers, &channel)?;
    let m = config.plan.m();
    let energy_comp = computation_energy(config, &freqs);
    let energy_comm = m * t_up * powers.iter().sum::<f64>();
    Ok(NomaSolution {
        bits: rates.iter().map(|r| r * t_up).collect(),
        energies: powers.iter().map(|p| p * t_up).collect(),
        cpu_freqs: freqs,
        powers,
        rates,
        t_loc,
        t_up,
        decoding,
        energy_total: energy_comp + energy_comm,
        energy_comm,
        energy_comp,
        dual_value: f64::NAN,
        duality_gap_rel: f64::NAN,
        dual: None,
        status: Status::Optimal,
        iterations: 0,
    })
}

/// Energy-optimal split of the round budget between computing and uploading.
fn best_split(config: &SystemConfig) -> (f64, f64) {
    let plan = &config.plan;
    let budget = plan.round_budget();
    let t_up_min = plan.upload_bits / max_common_rate(config);
    let lo = config.min_local_time();
    let hi = ((budget - t_up_min) / plan.n()).max(lo);
    let energy = |t_loc: f64| {
        let freqs = frequencies_for_local_time(config, t_loc);
        let t_up = (budget - plan.n() * t_loc).max(t_up_min);
        let comm = min_comm_round(config, t_up).map_or(f64::INFINITY, |(_, e)| e);
        computation_energy(config, &freqs) + plan.m() * comm
    };
    let (t_loc, _) = golden_section_min(energy, lo, hi, 1e-11);
    let t_up = (budget - plan.n() * t_loc).max(t_up_min);
    (t_loc, t_up)
}

/// Solves the NOMA problem with default options.
pub fn solve_p1(config: &SystemConfig) -> NomaSolution {
    solve_p1_with(config, &SolverOptions::default())
}

pub fn solve_p1_with(config: &SystemConfig, options: &SolverOptions) -> NomaSolution {
    let k = config.k();
    let t_min = t_min_noma(config);
    let plan = &config.plan;
    if plan.max_delay < t_min {
        return NomaSolution::infeasible(k);
    }

    // Primal: one-dimensional convex search over the local-time split.
    let (t_loc, t_up) = best_split(config);
    let freqs = frequencies_for_local_time(config, t_loc);
    let mut sol = match primal_at(config, freqs, t_loc, t_up) {
        Ok(s) => s,
        Err(_) => {
            return NomaSolution {
                status: Status::ToleranceNotMet,
                ..NomaSolution::infeasible(k)
            }
        }
    };

    // Dual: ellipsoid ascent in normalized coordinates, then a polish that
    // pins the time prices to their stationary values.
    let mut certificate = dual_certificate(config, options);
    if let Some(polished) = polish_certificate(config, &sol, &certificate, options) {
        if !(polished.value <= certificate.value) {
            certificate = DualCertificate {
                iterations: certificate.iterations + polished.iterations,
                ..polished
            };
        }
    }
    sol.iterations = certificate.iterations;
    sol.dual_value = certificate.value;
    sol.dual = Some(certificate.point);
    sol.duality_gap_rel = gap_rel(sol.energy_total, sol.dual_value);
    // At the delay boundary the feasible set is a single split, so the
    // primal is optimal even though the dual optimum is not attained.
    let at_boundary = plan.max_delay - t_min <= 1e-9 * plan.max_delay;
    sol.status = if sol.duality_gap_rel <= GAP_TOL || at_boundary {
        Status::Optimal
    } else {
        Status::ToleranceNotMet
    };
    sol
}

pub(crate) struct DualCertificate<P> {
    pub point: P,
    pub value: f64,
    pub iterations: usize,
}

/// Deadline price implied by the upload side: minus the slope of the
/// minimum per-round upload energy in the slot length.
fn upload_price(config: &SystemConfig, t_up: f64) -> f64 {
    let energy = |t: f64| min_comm_round(config, t).map_or(f64::INFINITY, |c| c.1);
    let t_up_min = config.plan.upload_bits / max_common_rate(config);
    let h = 1e-6 * t_up;
    let slope = if t_up - h >= t_up_min {
        (energy(t_up + h) - energy(t_up - h)) / (2.0 * h)
    } else {
        (energy(t_up + h) - energy(t_up)) / h
    };
    (-slope).max(0.0)
}

/// Fixes the time prices from the primal point and maximizes the dual over
/// the bit prices alone, starting from the ellipsoid's bit prices.
fn polish_certificate(
    config: &SystemConfig,
    primal: &NomaSolution,
    base: &DualCertificate<NomaDualPoint>,
    options: &SolverOptions,
) -> Option<DualCertificate<NomaDualPoint>> {
    let k = config.k();
    let (mu, nu) = stationary_time_prices(
        config,
        &primal.cpu_freqs,
        primal.t_loc,
        upload_price(config, primal.t_up),
    );
    let unit = NomaScales::new(config).lambda;
    let energy = primal.energy_total;
    if !(energy > 0.0 && nu.is_finite()) {
        return None;
    }
    let center: Vec<f64> = base.point.lambda.iter().map(|l| l / unit).collect();
    let radius = 10.0 * center.iter().map(|c| c * c).sum::<f64>().sqrt().max(1.0);
    let warm: RefCell<Option<Vec<f64>>> = RefCell::new(None);
    let point_at = |x: &[f64]| NomaDualPoint {
        lambda: x.iter().map(|v| v * unit).collect(),
        mu: mu.clone(),
        nu,
    };
    let oracle = |x: &[f64]| -> CutOracleResult {
        if let Some((i, v)) = x.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
            if *v < 0.0 {
                let mut a = vec![0.0; k];
                a[i] = -1.0;
                return CutOracleResult::Feasibility {
                    violation: -v,
                    subgradient: a,
                };
            }
        }
        let eval = {
            let w = warm.borrow();
            dual_value_noma_warm(&point_at(x), config, w.as_deref())
        };
        match eval {
            Ok(ev) => {
                *warm.borrow_mut() = Some(
                    ev.minimizers
                        .inner
                        .powers
                        .iter()
                        .map(|p| p / config.max_power)
                        .collect(),
                );
                let g = ev.subgradient[..k]
                    .iter()
                    .map(|g| g * unit / energy)
                    .collect();
                CutOracleResult::Objective {
                    value: ev.value / energy,
                    subgradient: g,
                }
            }
            Err(_) => CutOracleResult::Objective {
                value: f64::NEG_INFINITY,
                subgradient: vec![0.0; k],
            },
        }
    };
    let out = ellipsoid_max(oracle, &center, radius, 1e-9, options.max_iter(k).max(400));
    out.value.is_finite().then(|| DualCertificate {
        point: point_at(&out.point),
        value: out.value * energy,
        iterations: out.iterations,
    })
}

/// Natural units of the dual variables and of the objective.
struct NomaScales {
    lambda: f64,
    mu: f64,
    nu: f64,
    energy: f64,
}

impl NomaScales {
    fn new(config: &SystemConfig) -> Self {
        let plan = &config.plan;
        let k = config.k() as f64;
        let t_up0 = plan.upload_bits / max_common_rate(config);
        let freqs: Vec<f64> = config.devices.iter().map(|d| d.max_cpu_freq).collect();
        let energy = computation_energy(config, &freqs) + plan.m() * k * config.max_power * t_up0;
        let nu = energy / plan.max_delay;
        Self {
            lambda: plan.m() * config.max_power * t_up0 / plan.upload_bits,
            mu: nu * plan.mn() / k,
            nu,
            energy,
        }
    }

    fn point(&self, x: &[f64], k: usize) -> NomaDualPoint {
        NomaDualPoint {
            lambda: x[..k].iter().map(|v| v * self.lambda).collect(),
            mu: x[k..2 * k].iter().map(|v| v * self.mu).collect(),
            nu: x[2 * k] * self.nu,
        }
    }
}

fn dual_certificate(
    config: &SystemConfig,
    options: &SolverOptions,
) -> DualCertificate<NomaDualPoint> {
    let k = config.k();
    let dim = 2 * k + 1;
    let scales = NomaScales::new(config);
    let mn = config.plan.mn();
    let warm: RefCell<Option<Vec<f64>>> = RefCell::new(None);

    let oracle = |x: &[f64]| -> CutOracleResult {
        if let Some((i, v)) = x.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
            if *v < 0.0 {
                let mut a = vec![0.0; dim];
                a[i] = -1.0;
                return CutOracleResult::Feasibility {
                    violation: -v,
                    subgradient: a,
                };
            }
        }
        // sum mu <= nu M N, in normalized units.
        let ratio = scales.mu / (scales.nu * mn);
        let excess = x[k..2 * k].iter().sum::<f64>() * ratio - x[2 * k];
        if excess > 0.0 {
            let mut a = vec![0.0; dim];
            a[k..2 * k].iter_mut().for_each(|v| *v = ratio);
            a[2 * k] = -1.0;
            return CutOracleResult::Feasibility {
                violation: excess,
                subgradient: a,
            };
        }
        let point = scales.point(x, k);
        let eval = {
            let w = warm.borrow();
            dual_value_noma_warm(&point, config, w.as_deref())
        };
        match eval {
            Ok(ev) => {
                let u: Vec<f64> = ev
                    .minimizers
                    .inner
                    .powers
                    .iter()
                    .map(|p| p / config.max_power)
                    .collect();
                *warm.borrow_mut() = Some(u);
                let mut g = ev.subgradient;
                for (i, gi) in g.iter_mut().enumerate() {
                    let s = if i < k {
                        scales.lambda
                    } else if i < 2 * k {
                        scales.mu
                    } else {
                        scales.nu
                    };
                    *gi *= s / scales.energy;
                }
                CutOracleResult::Objective {
                    value: ev.value / scales.energy,
                    subgradient: g,
                }
            }
            // Only reachable through rounding at the domain boundary.
            Err(_) => {
                let mut a = vec![0.0; dim];
                a[k..2 * k].iter_mut().for_each(|v| *v = ratio);
                a[2 * k] = -1.0;
                CutOracleResult::Feasibility {
                    violation: excess.abs().max(1e-15),
                    subgradient: a,
                }
            }
        }
    };
    let mut center = vec![1.0; dim];
    center[k..2 * k].iter_mut().for_each(|v| *v = 0.5);
    let out = ellipsoid_max(
        oracle,
        &center,
        options.radius,
        options.dual_tol,
        options.max_iter(dim),
    );
    DualCertificate {
        point: scales.point(&out.point, k),
        value: if out.value.is_finite() {
            out.value * scales.energy
        } else {
            f64::NAN
        },
        iterations: out.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::presets;
    use approx::assert_relative_eq;

    #[test]
    fn desk_a_min_delay() {
        assert_relative_eq!(t_min_noma(&presets::desk_a()), 4.36474, max_relative = 1e-5);
    }

    #[test]
    fn zero_payload_limit() {
        let cfg = presets::desk_a();
        let mut plan = cfg.plan;
        plan.upload_bits = 1e-9;
        let tiny =
            SystemConfig::new(cfg.devices.clone(), cfg.channel, plan, cfg.max_power).unwrap();
        assert_relative_eq!(t_min_noma(&tiny), 4.0, max_relative = 1e-9);
    }

    #[test]
    fn single_device_upload_term() {
        let cfg = presets::desk_a();
        let one = SystemConfig::new(
            vec![cfg.devices[0].clone()],
            cfg.channel,
            cfg.plan,
            cfg.max_power,
        )
        .unwrap();
        let upload = 2e6 / (2e6 * (1.0f64 + 1000.0).log2());
        assert_relative_eq!(t_min_noma(&one), 2.0 * (2.0 + upload), max_relative = 1e-12);
    }

    #[test]
    fn frequency_closed_form_examples() {
        let d = presets::desk_a().devices[0].clone();
        assert_relative_eq!(
            optimal_cpu_frequency(0.8, &d, 2, 2),
            1e9,
            max_relative = 1e-12
        );
        assert_eq!(optimal_cpu_frequency(8000.0, &d, 2, 2), 1e9);
        assert_eq!(optimal_cpu_frequency(0.0, &d, 2, 2), d.min_cpu_freq());
        assert_relative_eq!(
            optimal_cpu_frequency(0.1, &d, 2, 2),
            5e8,
            max_relative = 1e-12
        );
    }

    #[test]
    fn inner_zero_prices() {
        let cfg = presets::desk_a();
        let inner = inner_energy_time(&[0.0, 0.0], 1e-3, &cfg).unwrap();
        assert_eq!(inner.energies, vec![0.0, 0.0]);
        assert_eq!(inner.t_up, T_UP_FLOOR);
    }

    #[test]
    fn inner_single_device_power_cap() {
        let cfg = presets::desk_a();
        let one = SystemConfig::new(
            vec![cfg.devices[0].clone()],
            cfg.channel,
            cfg.plan,
            cfg.max_power,
        )
        .unwrap();
        let inner = inner_energy_time(&[1.0], 1e-9, &one).unwrap();
        assert_eq!(inner.t_up, one.plan.round_budget());
        assert_relative_eq!(
            inner.energies[0],
            one.max_power * inner.t_up,
            max_relative = 1e-12
        );
    }

    #[test]
    fn dual_at_origin_is_zero() {
        let cfg = presets::desk_a();
        let ev = dual_value_noma(
            &NomaDualPoint {
                lambda: vec![0.0; 2],
                mu: vec![0.0; 2],
                nu: 0.0,
            },
            &cfg,
        )
        .unwrap();
        assert!(ev.value.abs() < 1e-9, "{}", ev.value);
    }

    #[test]
    fn dual_domain_enforced() {
        let cfg = presets::desk_a();
        let bad = NomaDualPoint {
            lambda: vec![0.0; 2],
            mu: vec![1.0, 1.0],
            nu: 0.1,
        };
        assert!(matches!(
            dual_value_noma(&bad, &cfg),
            Err(Error::DualInfeasible)
        ));
    }

    #[test]
    fn desk_a_solves() {
        let cfg = presets::desk_a();
        let sol = solve_p1(&cfg);
        assert_eq!(sol.status, Status::Optimal, "{sol:?}");
        assert!(sol.duality_gap_rel <= GAP_TOL);
        assert!(sol.energy_total <= 0.872949);
    }

    #[test]
    fn infeasible_below_min_delay() {
        let cfg = presets::desk_a();
        let t = t_min_noma(&cfg);
        assert_eq!(
            solve_p1(&cfg.with_max_delay(t * 0.999).unwrap()).status,
            Status::Infeasible
        );
        let edge = solve_p1(&cfg.with_max_delay(t).unwrap());
        assert_eq!(edge.status, Status::Optimal);
        for (f, p) in edge.cpu_freqs.iter().zip(&edge.powers) {
            assert_relative_eq!(*f, 1e9, max_relative = 1e-6);
            assert_relative_eq!(*p, 0.1, max_relative = 1e-6);
        }
    }
}
