//! Energy minimization over a TDMA uplink.
//!
//! Each device owns its slot, so for a given slot length the minimum
//! upload energy is the inverted Shannon formula. The dual over the
//! local-time prices and the deadline price separates per device; the
//! upload slot for a deadline price solves a scalar monotone equation.

use crate::error::{invalid, Error, Result};
use crate::numerics::{bisect_root, ellipsoid_max, golden_section_min, CutOracleResult};
use crate::scenario::{ChannelModel, SystemConfig};
use crate::solution::{
    computation_energy, frequencies_for_local_time, gap_rel, stationary_time_prices, SolverOptions,
    Status, GAP_TOL,
};
use crate::solver_noma::{optimal_cpu_frequency, DualCertificate};

/// Above this spectral efficiency (bits/s/Hz) the upload energy is treated as infinite.
pub const MAX_SPECTRAL_EFFICIENCY: f64 = 60.0;

/// Dual variables of the TDMA problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TdmaDualPoint {
    /// Prices on the per-device local-time constraints.
    pub omega: Vec<f64>,
    /// Price on the training deadline.
    pub zeta: f64,
}

impl TdmaDualPoint {
    pub fn is_feasible(&self, config: &SystemConfig) -> bool {
        let sum: f64 = self.omega.iter().sum();
        self.omega.iter().all(|w| *w >= 0.0)
            && self.zeta >= 0.0
            && self.zeta * config.plan.mn() >= sum * (1.0 - 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdmaMinimizers {
    pub cpu_freqs: Vec<f64>,
    pub t_loc: f64,
    pub upload_times: Vec<f64>,
    pub upload_energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdmaDualEvaluation {
    pub value: f64,
    /// Ordered as `[omega_1..K, zeta]`.
    pub subgradient: Vec<f64>,
    pub minimizers: TdmaMinimizers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdmaSolution {
    pub cpu_freqs: Vec<f64>,
    pub powers: Vec<f64>,
    pub rates: Vec<f64>,
    /// Upload energy per device per round.
    pub energies: Vec<f64>,
    pub upload_times: Vec<f64>,
    pub t_loc: f64,
    pub energy_total: f64,
    pub energy_comm: f64,
    pub energy_comp: f64,
    pub dual_value: f64,
    pub duality_gap_rel: f64,
    pub dual: Option<TdmaDualPoint>,
    pub status: Status,
    pub iterations: usize,
}

impl TdmaSolution {
    pub(crate) fn infeasible(k: usize) -> Self {
        Self {
            cpu_freqs: vec![f64::NAN; k],
            powers: vec![f64::NAN; k],
            rates: vec![f64::NAN; k],
            energies: vec![f64::NAN; k],
            upload_times: vec![f64::NAN; k],
            t_loc: f64::NAN,
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

/// Slot length needed by device `k` at full power.
pub fn full_power_upload_time(config: &SystemConfig, k: usize) -> f64 {
    config.plan.upload_bits / config.full_power_rate(k)
}

/// Minimum training delay: full CPU speed, every device at full power in turn.
pub fn t_min_tdma(config: &SystemConfig) -> f64 {
    let plan = &config.plan;
    let upload: f64 = (0..config.k())
        .map(|k| full_power_upload_time(config, k))
        .sum();
    plan.m() * (plan.n() * config.min_local_time() + upload)
}

/// Minimum energy to send `bits` in `t` seconds over a gain-`gain` link:
/// `(2^(bits / (B t)) - 1) t noise / gain`.
pub fn upload_energy_given_time(t: f64, bits: f64, gain: f64, channel: &ChannelModel) -> f64 {
    if !(t > 0.0) {
        return f64::INFINITY;
    }
    let x = bits / (channel.bandwidth * t);
    if x > MAX_SPECTRAL_EFFICIENCY {
        return f64::INFINITY;
    }
    (x * std::f64::consts::LN_2).exp_m1() * t * channel.noise_power / gain
}

/// `e^y (1 - y) - 1`, accurate for small `y`.
fn exp_one_minus(y: f64) -> f64 {
    if y.abs() < 0.1 {
        // sum_{n>=2} -(n-1) y^n / n!
        let mut term = y; // y^n / n! at n = 1
        let mut sum = 0.0;
        for n in 2..20 {
            term *= y / n as f64;
            sum -= (n - 1) as f64 * term;
        }
        sum
    } else {
        y.exp_m1() - y * y.exp()
    }
}

/// Derivative in `t` of the upload energy plus the deadline price:
/// `(noise / gain) (2^x (1 - x ln 2) - 1) + zeta` with `x = bits / (B t)`.
pub fn upload_time_residual(
    t: f64,
    zeta: f64,
    bits: f64,
    gain: f64,
    channel: &ChannelModel,
) -> f64 {
    let y = bits / (channel.bandwidth * t) * std::f64::consts::LN_2;
    channel.noise_power / gain * exp_one_minus(y) + zeta
}

/// Slot length minimizing `upload energy + zeta * t` over
/// `[full-power time, ceiling]`; the full-power time wins if it exceeds the ceiling.
pub fn optimal_upload_time(
    zeta: f64,
    gain: f64,
    channel: &ChannelModel,
    bits: f64,
    max_power: f64,
    ceiling: f64,
) -> f64 {
    let t_cap = bits / channel.capacity(max_power * gain / channel.noise_power);
    if t_cap >= ceiling {
        return t_cap;
    }
    if zeta <= 0.0 {
        return ceiling;
    }
    let g = |t: f64| upload_time_residual(t, zeta, bits, gain, channel);
    if g(t_cap) >= 0.0 {
        return t_cap;
    }
    let mut hi = 2.0 * t_cap;
    while g(hi) < 0.0 {
        if hi >= ceiling {
            return ceiling;
        }
        hi *= 2.0;
    }
    let root = bisect_root(g, t_cap, hi, 1e-15).unwrap_or(hi);
    root.clamp(t_cap, ceiling)
}

/// Evaluates the dual function at a point of its domain.
pub fn dual_value_tdma(point: &TdmaDualPoint, config: &SystemConfig) -> Result<TdmaDualEvaluation> {
    let k = config.k();
    if point.omega.len() != k {
        return invalid(format!(
            "expected {k} local-time prices, got {}",
            point.omega.len()
        ));
    }
    if !point.is_feasible(config) || !point.zeta.is_finite() {
        return Err(Error::DualInfeasible);
    }
    let plan = &config.plan;
    let mn = plan.mn();
    let m = plan.m();
    let ceiling = plan.round_budget();
    let bits = plan.upload_bits;

    let freqs: Vec<f64> = config
        .devices
        .iter()
        .zip(&point.omega)
        .map(|(d, w)| optimal_cpu_frequency(*w, d, plan.global_iters, plan.local_iters))
        .collect();
    let local_times: Vec<f64> = config
        .devices
        .iter()
        .zip(&freqs)
        .map(|(d, f)| d.cycles() / f)
        .collect();
    let omega_sum: f64 = point.omega.iter().sum();
    let t_loc = if point.zeta * mn - omega_sum > 1e-12 * point.zeta * mn {
        0.0
    } else {
        local_times.iter().copied().fold(0.0, f64::max)
    };
    let mut value = 0.0;
    for ((d, f), w) in config.devices.iter().zip(&freqs).zip(&point.omega) {
        value += mn * d.cycles() * d.capacitance_coeff * f * f + d.cycles() * w / f;
    }
    let mut times = Vec::with_capacity(k);
    let mut energies = Vec::with_capacity(k);
    for &h in config.gains() {
        let t = optimal_upload_time(
            point.zeta,
            h,
            &config.channel,
            bits,
            config.max_power,
            ceiling,
        );
        let e = upload_energy_given_time(t, bits, h, &config.channel);
        value += m * (e + point.zeta * t);
        times.push(t);
        energies.push(e);
    }
    value -= point.zeta * plan.max_delay;

    let mut subgradient: Vec<f64> = local_times.iter().map(|lt| lt - t_loc).collect();
    subgradient.push(m * (plan.n() * t_loc + times.iter().sum::<f64>()) - plan.max_delay);
    Ok(TdmaDualEvaluation {
        value,
        subgradient,
        minimizers: TdmaMinimizers {
            cpu_freqs: freqs,
            t_loc,
            upload_times: times,
            upload_energies: energies,
        },
    })
}

/// Minimum upload energy per round when the slots may total `budget`
/// seconds, with the slots and the deadline price that produces them.
pub(crate) fn min_comm_round(config: &SystemConfig, budget: f64) -> Option<(Vec<f64>, f64, f64)> {
    let k = config.k();
    let ceiling = config.plan.round_budget();
    let bits = config.plan.upload_bits;
    let caps: Vec<f64> = (0..k).map(|i| full_power_upload_time(config, i)).collect();
    let cap_sum: f64 = caps.iter().sum();
    if cap_sum > budget * (1.0 + 1e-12) {
        return None;
    }
    let times_at = |zeta: f64| -> Vec<f64> {
        config
            .gains()
            .iter()
            .map(|&h| {
                optimal_upload_time(zeta, h, &config.channel, bits, config.max_power, ceiling)
            })
            .collect()
    };
    let energy_of = |times: &[f64]| -> f64 {
        times
            .iter()
            .zip(config.gains())
            .map(|(t, h)| upload_energy_given_time(*t, bits, *h, &config.channel))
            .sum()
    };
    if cap_sum >= budget {
        return Some((caps.clone(), energy_of(&caps), f64::INFINITY));
    }
    let relaxed = times_at(0.0);
    if relaxed.iter().sum::<f64>() <= budget {
        return Some((relaxed.clone(), energy_of(&relaxed), 0.0));
    }
    // Price at which every slot shrinks to its full-power length.
    let zeta_hi = caps
        .iter()
        .zip(config.gains())
        .map(|(t, h)| -upload_time_residual(*t, 0.0, bits, *h, &config.channel))
        .fold(0.0, f64::max)
        * 2.0;
    // Total slot time is non-increasing in the price; bisect on log price.
    let excess = |s: f64| times_at(s.exp()).iter().sum::<f64>() - budget;
    let (mut lo, mut hi) = (zeta_hi.ln() - 200.0, zeta_hi.ln());
    if excess(lo) <= 0.0 {
        hi = lo;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi.abs().max(1.0) {
                break;
            }
        }
    }
    // The upper end keeps the total within budget.
    let zeta = hi.exp();
    let times = times_at(zeta);
    Some((times.clone(), energy_of(&times), zeta))
}

pub(crate) fn primal_at(
    config: &SystemConfig,
    freqs: Vec<f64>,
    t_loc: f64,
    upload_times: Vec<f64>,
) -> TdmaSolution {
    let bits = config.plan.upload_bits;
    let energies: Vec<f64> = upload_times
        .iter()
        .zip(config.gains())
        .map(|(t, h)| upload_energy_given_time(*t, bits, *h, &config.channel))
        .collect();
    let powers: Vec<f64> = energies
        .iter()
        .zip(&upload_times)
        .map(|(e, t)| (e / t).min(config.max_power))
        .collect();
    let rates: Vec<f64> = powers
        .iter()
        .zip(config.gains())
        .map(|(p, h)| config.channel.capacity(p * h / config.channel.noise_power))
        .collect();
    let energy_comp = computation_energy(config, &freqs);
    let energy_comm = config.plan.m() * energies.iter().sum::<f64>();
    TdmaSolution {
        cpu_freqs: freqs,
        powers,
        rates,
        energies,
        upload_times,
        t_loc,
        energy_total: energy_comp + energy_comm,
        energy_comm,
        energy_comp,
        dual_value: f64::NAN,
        duality_gap_rel: f64::NAN,
        dual: None,
        status: Status::Optimal,
        iterations: 0,
    }
}

fn best_split(config: &SystemConfig) -> (f64, Vec<f64>) {
    let plan = &config.plan;
    let budget = plan.round_budget();
    let cap_sum: f64 = (0..config.k())
        .map(|k| full_power_upload_time(config, k))
        .sum();
    let lo = config.min_local_time();
    let hi = ((budget - cap_sum) / plan.n()).max(lo);
    let energy = |t_loc: f64| {
        let freqs = frequencies_for_local_time(config, t_loc);
        let comm = min_comm_round(config, (budget - plan.n() * t_loc).max(cap_sum))
            .map_or(f64::INFINITY, |c| c.1);
        computation_energy(config, &freqs) + plan.m() * comm
    };
    let (t_loc, _) = golden_section_min(energy, lo, hi, 1e-11);
    let times = min_comm_round(config, (budget - plan.n() * t_loc).max(cap_sum))
        .map(|c| c.0)
        .unwrap_or_else(|| {
            (0..config.k())
                .map(|k| full_power_upload_time(config, k))
                .collect()
        });
    (t_loc, times)
}

pub fn solve_p2(config: &SystemConfig) -> TdmaSolution {
    solve_p2_with(config, &SolverOptions::default())
}

pub fn solve_p2_with(config: &SystemConfig, options: &SolverOptions) -> TdmaSolution {
    let k = config.k();
    let t_min = t_min_tdma(config);
    let plan = &config.plan;
    if plan.max_delay < t_min {
        return TdmaSolution::infeasible(k);
    }
    let (t_loc, times) = best_split(config);
    let freqs = frequencies_for_local_time(config, t_loc);
    let mut sol = primal_at(config, freqs, t_loc, times);

    let mut certificate = dual_certificate(config, options);
    let zeta = min_comm_round(config, sol.upload_times.iter().sum()).map_or(0.0, |c| c.2);
    let (omega, zeta) = stationary_time_prices(
        config,
        &sol.cpu_freqs,
        t_loc,
        if zeta.is_finite() { zeta } else { 0.0 },
    );
    let polished = TdmaDualPoint { omega, zeta };
    if let Ok(ev) = dual_value_tdma(&polished, config) {
        if ev.value.is_finite() && !(ev.value <= certificate.value) {
            certificate = DualCertificate {
                point: polished,
                value: ev.value,
                iterations: certificate.iterations,
            };
        }
    }
    sol.iterations = certificate.iterations;
    sol.dual_value = certificate.value;
    sol.dual = Some(certificate.point);
    sol.duality_gap_rel = gap_rel(sol.energy_total, sol.dual_value);
    let at_boundary = plan.max_delay - t_min <= 1e-9 * plan.max_delay;
    sol.status = if sol.duality_gap_rel <= GAP_TOL || at_boundary {
        Status::Optimal
    } else {
        Status::ToleranceNotMet
    };
    sol
}

fn dual_certificate(
    config: &SystemConfig,
    options: &SolverOptions,
) -> DualCertificate<TdmaDualPoint> {
    let k = config.k();
    let dim = k + 1;
    let plan = &config.plan;
    let mn = plan.mn();
    let freqs: Vec<f64> = config.devices.iter().map(|d| d.max_cpu_freq).collect();
    let caps: f64 = (0..k)
        .map(|i| config.max_power * full_power_upload_time(config, i))
        .sum();
    let energy = computation_energy(config, &freqs) + plan.m() * caps;
    let zeta_scale = energy / plan.max_delay;
    let omega_scale = zeta_scale * mn / k as f64;
    let to_point = |x: &[f64]| TdmaDualPoint {
        omega: x[..k].iter().map(|v| v * omega_scale).collect(),
        zeta: x[k] * zeta_scale,
    };
    let ratio = omega_scale / (zeta_scale * mn);

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
        let excess = x[..k].iter().sum::<f64>() * ratio - x[k];
        let domain_cut = |violation: f64| {
            let mut a = vec![ratio; dim];
            a[k] = -1.0;
            CutOracleResult::Feasibility {
                violation,
                subgradient: a,
            }
        };
        if excess > 0.0 {
            return domain_cut(excess);
        }
        match dual_value_tdma(&to_point(x), config) {
            Ok(ev) => {
                let mut g = ev.subgradient;
                for (i, gi) in g.iter_mut().enumerate() {
                    *gi *= if i < k { omega_scale } else { zeta_scale } / energy;
                }
                CutOracleResult::Objective {
                    value: ev.value / energy,
                    subgradient: g,
                }
            }
            Err(_) => domain_cut(excess.abs().max(1e-15)),
        }
    };
    let mut center = vec![0.5; dim];
    center[k] = 1.0;
    let out = ellipsoid_max(
        oracle,
        &center,
        options.radius,
        options.dual_tol,
        options.max_iter(dim),
    );
    DualCertificate {
        point: to_point(&out.point),
        value: if out.value.is_finite() {
            out.value * energy
        } else {
            f64::NAN
        },
        iterations: out.iterations,
    }
}
