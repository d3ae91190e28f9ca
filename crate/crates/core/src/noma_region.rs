//! The Gaussian multiple-access capacity region.
//!
//! For fixed transmit powers the achievable rates form a polymatroid whose
//! rank function is `A -> B log2(1 + sum_{k in A} p_k h_k / noise)`. Its
//! vertices are the successive-interference-cancellation corners, one per
//! decoding order. Everything here is exact up to floating point; the
//! exhaustive subset checks are capped at [`MAX_EXHAUSTIVE_K`] devices.

use std::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::scenario::SystemConfig;

/// Largest device count for which all `2^K - 1` subsets are enumerated.
pub const MAX_EXHAUSTIVE_K: usize = 20;

/// Membership slack as a fraction of the bandwidth (bits/s per Hz).
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Receiver-side view of the uplink: gains, noise and bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct MacChannel {
    pub gains: Vec<f64>,
    pub noise_power: f64,
    pub bandwidth: f64,
}

impl MacChannel {
    pub fn new(gains: Vec<f64>, noise_power: f64, bandwidth: f64) -> Result<Self> {
        if gains.is_empty() || gains.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return invalid("channel gains must be finite and positive");
        }
        if !(noise_power > 0.0 && bandwidth > 0.0) {
            return invalid("noise power and bandwidth must be positive");
        }
        Ok(Self {
            gains,
            noise_power,
            bandwidth,
        })
    }

    pub fn from_config(config: &SystemConfig) -> Self {
        Self {
            gains: config.gains().to_vec(),
            noise_power: config.channel.noise_power,
            bandwidth: config.channel.bandwidth,
        }
    }

    pub fn k(&self) -> usize {
        self.gains.len()
    }

    /// `B log2(1 + received / noise)` for a total received power.
    pub fn capacity(&self, received: f64) -> f64 {
        self.bandwidth * (received / self.noise_power).ln_1p() / std::f64::consts::LN_2
    }

    fn check_len<T>(&self, what: &str, v: &[T]) -> Result<()> {
        if v.len() != self.k() {
            return invalid(format!(
                "{what} has length {}, expected {}",
                v.len(),
                self.k()
            ));
        }
        Ok(())
    }

    fn tol(&self) -> f64 {
        MEMBERSHIP_TOL * self.bandwidth
    }
}

/// A successive-decoding order. `order[0]` is decoded last (sees no
/// interference), `order[K-1]` is decoded first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecodingOrder(Vec<usize>);

impl DecodingOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || seen[i] {
                return invalid(format!("{order:?} is not a permutation"));
            }
            seen[i] = true;
        }
        Ok(Self(order))
    }

    pub fn identity(k: usize) -> Self {
        Self((0..k).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_powers(powers: &[f64]) -> Result<()> {
    if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return invalid("powers must be finite and non-negative");
    }
    Ok(())
}

/// Corner rates reached by successive decoding in `order`.
pub fn sic_corner_rates(
    powers: &[f64],
    channel: &MacChannel,
    order: &DecodingOrder,
) -> Result<Vec<f64>> {
    channel.check_len("powers", powers)?;
    channel.check_len("decoding order", order.as_slice())?;
    check_powers(powers)?;
    let mut rates = vec![0.0; channel.k()];
    let mut prefix = 0.0;
    let mut prev_cap = 0.0;
    for &k in order.as_slice() {
        prefix += powers[k] * channel.gains[k];
        let cap = channel.capacity(prefix);
        rates[k] = cap - prev_cap;
        prev_cap = cap;
    }
    Ok(rates)
}

fn subset_sum(values: &[f64], mask: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, v)| v)
        .sum()
}

fn check_exhaustive(k: usize) -> Result<()> {
    if k > MAX_EXHAUSTIVE_K {
        return Err(Error::SizeLimit {
            k,
            limit: MAX_EXHAUSTIVE_K,
        });
    }
    Ok(())
}

/// Largest violation `sum_A r - C(A)` over all nonempty subsets (bits/s).
pub fn region_violation(rates: &[f64], powers: &[f64], channel: &MacChannel) -> Result<f64> {
    channel.check_len("rates", rates)?;
    channel.check_len("powers", powers)?;
    check_exhaustive(channel.k())?;
    let received: Vec<f64> = powers
        .iter()
        .zip(&channel.gains)
        .map(|(p, h)| p * h)
        .collect();
    Ok((1..1usize << channel.k())
        .map(|mask| subset_sum(rates, mask) - channel.capacity(subset_sum(&received, mask)))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Whether `rates` lie in the capacity region for `powers`.
pub fn region_contains(rates: &[f64], powers: &[f64], channel: &MacChannel) -> Result<bool> {
    if rates.iter().chain(powers).any(|v| !v.is_finite()) {
        return invalid("rates and powers must be finite");
    }
    Ok(region_violation(rates, powers, channel)? <= channel.tol())
}

/// Bits, transmit energies and the shared upload duration of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct BitAllocation {
    pub bits: Vec<f64>,
    pub energies: Vec<f64>,
    pub t_up: f64,
}

/// Largest violation of the bit-form region, in bits.
pub fn bit_region_violation(alloc: &BitAllocation, channel: &MacChannel) -> Result<f64> {
    if !(alloc.t_up > 0.0) {
        return invalid("upload duration must be positive");
    }
    let powers: Vec<f64> = alloc.energies.iter().map(|e| e / alloc.t_up).collect();
    let rates: Vec<f64> = alloc.bits.iter().map(|s| s / alloc.t_up).collect();
    Ok(region_violation(&rates, &powers, channel)? * alloc.t_up)
}

/// Whether `s` bits are deliverable in `t_up` seconds with energies `e`.
pub fn bit_region_contains(alloc: &BitAllocation, channel: &MacChannel) -> Result<bool> {
    Ok(bit_region_violation(alloc, channel)? <= channel.tol() * alloc.t_up)
}

/// Descending-weight order with ties broken by ascending index.
pub fn weight_order(weights: &[f64]) -> DecodingOrder {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    DecodingOrder(order)
}

/// Bits maximizing `sum_k w_k s_k` over the bit region, and the decoding
/// order that reaches them.
pub fn weighted_corner_bits(
    weights: &[f64],
    energies: &[f64],
    t_up: f64,
    channel: &MacChannel,
) -> Result<(Vec<f64>, DecodingOrder)> {
    channel.check_len("weights", weights)?;
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return invalid("weights must be finite and non-negative");
    }
    if !(t_up > 0.0) {
        return invalid("upload duration must be positive");
    }
    let order = weight_order(weights);
    let powers: Vec<f64> = energies.iter().map(|e| e / t_up).collect();
    let bits = sic_corner_rates(&powers, channel, &order)?
        .into_iter()
        .map(|r| r * t_up)
        .collect();
    Ok((bits, order))
}

/// Equal per-device rate all devices can sustain simultaneously at `powers`.
pub fn common_rate(powers: &[f64], channel: &MacChannel) -> Result<f64> {
    channel.check_len("powers", powers)?;
    check_powers(powers)?;
    let mut received: Vec<f64> = powers
        .iter()
        .zip(&channel.gains)
        .map(|(p, h)| p * h)
        .collect();
    received.sort_by(f64::total_cmp);
    let mut prefix = 0.0;
    let mut best = f64::INFINITY;
    // For each cardinality the weakest devices give the tightest constraint.
    for (m, q) in received.iter().enumerate() {
        prefix += q;
        best = best.min(channel.capacity(prefix) / (m + 1) as f64);
    }
    Ok(best)
}

/// Largest common rate with every device at full power.
pub fn max_common_rate(config: &SystemConfig) -> f64 {
    let channel = MacChannel::from_config(config);
    common_rate(&vec![config.max_power; config.k()], &channel).expect("validated config")
}

/// Minimum-sum-power allocation in `[0, max_power]^K` that supports the
/// common rate `rate` for every device, or `None` if even full power cannot.
///
/// With `q_k = p_k h_k` the rate constraints read `q(A) >= phi(|A|)` with
/// `phi(m) = noise (2^(m rate / B) - 1)`. The slack `x = u - q` against the
/// full-power levels `u` then lives in a polymatroid whose rank at the set
/// of the `i` weakest devices is the suffix minimum of
/// `U_m - phi(m)`, `U_m` being the sum of the `m` smallest `u`. Weighting
/// slack by `1 / h_k` and running the greedy weakest-first is exact.
pub fn min_power_for_common_rate(
    channel: &MacChannel,
    max_power: f64,
    rate: f64,
) -> Option<Vec<f64>> {
    let k = channel.k();
    if rate <= 0.0 {
        return Some(vec![0.0; k]);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        channel.gains[a]
            .total_cmp(&channel.gains[b])
            .then(a.cmp(&b))
    });
    let u: Vec<f64> = order
        .iter()
        .map(|&i| max_power * channel.gains[i])
        .collect();
    let phi = |m: usize| {
        channel.noise_power
            * ((m as f64) * rate / channel.bandwidth * std::f64::consts::LN_2).exp_m1()
    };

    let mut g = vec![0.0; k + 1];
    let mut prefix = 0.0;
    for m in 1..=k {
        prefix += u[m - 1];
        g[m] = prefix - phi(m);
    }
    let scale = prefix.max(f64::MIN_POSITIVE);
    if g.iter().any(|v| *v < -1e-12 * scale) {
        return None;
    }
    // rank[i] = min_{m >= i} g[m]
    let mut rank = g.clone();
    for i in (0..k).rev() {
        rank[i] = rank[i].min(rank[i + 1]);
    }
    rank[0] = 0.0;
    let mut powers = vec![0.0; k];
    for i in 1..=k {
        let slack = (rank[i] - rank[i - 1]).max(0.0);
        let dev = order[i - 1];
        let q = (u[i - 1] - slack).max(0.0);
        powers[dev] = (q / channel.gains[dev]).min(max_power);
    }
    Some(powers)
}

/// Raises a region point onto the dominant face, one device at a time by
/// the smallest slack among the subsets containing it.
pub fn dominant_extension(rates: &[f64], powers: &[f64], channel: &MacChannel) -> Result<Vec<f64>> {
    let k = channel.k();
    channel.check_len("rates", rates)?;
    channel.check_len("powers", powers)?;
    check_exhaustive(k)?;
    if region_violation(rates, powers, channel)? > channel.tol() {
        return invalid("rates lie outside the capacity region");
    }
    let received: Vec<f64> = powers
        .iter()
        .zip(&channel.gains)
        .map(|(p, h)| p * h)
        .collect();
    let cap: Vec<f64> = (0..1usize << k)
        .map(|m| channel.capacity(subset_sum(&received, m)))
        .collect();
    let mut y = rates.to_vec();
    for i in 0..k {
        let slack = (1..1usize << k)
            .filter(|m| m >> i & 1 == 1)
            .map(|m| cap[m] - subset_sum(&y, m))
            .fold(f64::INFINITY, f64::min);
        y[i] += slack.max(0.0);
    }
    Ok(y)
}

/// Writes a point of the dominant face as a convex combination of SIC corners.
///
/// `rates` must lie in the region at `powers` with the full-set constraint
/// tight (the dominant face). Returns at most `K` `(order, fraction)` pairs
/// whose fractions sum to one.
///
/// Each step takes the greedy corner along a maximal chain of the sets
/// tight at the current point, then walks from that corner through the
/// point until another subset becomes tight. That adds a tight set, so the
/// loop ends within `K` steps.
pub fn time_sharing(
    rates: &[f64],
    powers: &[f64],
    channel: &MacChannel,
) -> Result<Vec<(DecodingOrder, f64)>> {
    let k = channel.k();
    channel.check_len("rates", rates)?;
    check_exhaustive(k)?;
    let received: Vec<f64> = powers
        .iter()
        .zip(&channel.gains)
        .map(|(p, h)| p * h)
        .collect();
    let full = (1usize << k) - 1;
    let cap: Vec<f64> = (0..=full)
        .map(|m| channel.capacity(subset_sum(&received, m)))
        .collect();
    let eps = 1e-9 * cap[full].max(1.0);

    let mut y = rates.to_vec();
    // Project onto the dominant face to absorb rounding in the input.
    let deficit = cap[full] - y.iter().sum::<f64>();
    if deficit.abs() > 1e3 * eps {
        return Err(Error::NumericalDomain(format!(
            "rate vector is {deficit} bits/s away from the dominant face"
        )));
    }
    let total: f64 = y.iter().sum();
    if total > 0.0 {
        y.iter_mut().for_each(|r| *r *= cap[full] / total);
    }

    let mut parts: Vec<(DecodingOrder, f64)> = Vec::new();
    let mut remaining = 1.0;
    // Sets stay tight along the walk, so the flags only ever grow.
    let mut tight = vec![false; full + 1];
    tight[0] = true;
    tight[full] = true;
    let mut done = false;
    for _ in 0..4 * k + 8 {
        for m in 1..full {
            if !tight[m] && cap[m] - subset_sum(&y, m) <= eps {
                tight[m] = true;
            }
        }
        close_under_union_and_intersection(&mut tight);
        // Maximal chain: repeatedly extend by the smallest tight superset.
        let mut chain_order = Vec::with_capacity(k);
        let mut current = 0usize;
        while current != full {
            let next = (1..=full)
                .filter(|&m| tight[m] && m & current == current && m != current)
                .min_by_key(|m| m.count_ones())
                .unwrap_or(full);
            chain_order.extend((0..k).filter(|i| (next & !current) >> i & 1 == 1));
            current = next;
        }
        let order = DecodingOrder(chain_order);
        let vertex = sic_corner_rates(powers, channel, &order)?;
        let dir: Vec<f64> = y.iter().zip(&vertex).map(|(a, b)| a - b).collect();
        if dir.iter().all(|d| d.abs() <= 10.0 * eps) {
            parts.push((order, remaining));
            done = true;
            break;
        }
        let (blocking, theta) = (1..full)
            .filter(|&m| !tight[m])
            .filter_map(|m| {
                let d = subset_sum(&dir, m);
                (d > eps).then(|| (m, (cap[m] - subset_sum(&y, m)).max(0.0) / d))
            })
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if !theta.is_finite() {
            if dir.iter().all(|d| d.abs() <= 1e3 * eps) {
                // Only rounding separates the point from this vertex.
                parts.push((order, remaining));
                done = true;
                break;
            }
            return Err(Error::NumericalDomain(
                "time-sharing walk is unbounded".into(),
            ));
        }
        tight[blocking] = true;
        if theta <= 1e-13 {
            // The blocking set was tight up to rounding; retry with it flagged.
            continue;
        }
        parts.push((order, remaining * theta / (1.0 + theta)));
        remaining /= 1.0 + theta;
        for (yi, di) in y.iter_mut().zip(&dir) {
            *yi += theta * di;
        }
    }
    if !done {
        return Err(Error::NumericalDomain(
            "time-sharing did not terminate".into(),
        ));
    }
    let sum: f64 = parts.iter().map(|p| p.1).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NumericalDomain(
            "time-sharing did not terminate".into(),
        ));
    }
    parts.iter_mut().for_each(|p| p.1 /= sum);
    Ok(parts)
}

fn close_under_union_and_intersection(flags: &mut [bool]) {
    loop {
        let sets: Vec<usize> = (0..flags.len()).filter(|&m| flags[m]).collect();
        let mut changed = false;
        for (i, &a) in sets.iter().enumerate() {
            for &b in &sets[i + 1..] {
                for c in [a | b, a & b] {
                    if !flags[c] {
                        flags[c] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Rates delivered by a time-sharing schedule.
pub fn time_shared_rates(
    parts: &[(DecodingOrder, f64)],
    powers: &[f64],
    channel: &MacChannel,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; channel.k()];
    for (order, frac) in parts {
        for (o, r) in out
            .iter_mut()
            .zip(sic_corner_rates(powers, channel, order)?)
        {
            *o += frac * r;
        }
    }
    Ok(out)
}
