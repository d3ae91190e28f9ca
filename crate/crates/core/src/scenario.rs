//! Scenario data model.
//!
//! Everything is held in SI units (watts, hertz, joules, seconds, bits).
//! Scenario files may carry unit-suffixed strings such as `"2 MHz"`,
//! `"-100 dBm"` or `"4.9 Gbits"`; they are converted once at load time.
//! Channel power gains are derived from distances through the path-loss
//! model unless a device pins its gain directly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Environment variable holding `key=value` overrides of the default constants,
/// separated by commas or semicolons.
pub const DEFAULTS_ENV: &str = "FEDGE_DEFAULTS";

/// How a device's channel gain is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    /// Distance to the edge server in meters; the gain follows the path-loss model.
    Distance(f64),
    /// Linear channel power gain, bypassing the path-loss model.
    Gain(f64),
}

/// Per-device computation model.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceProfile {
    /// FLOPs needed for one local update over the whole local dataset.
    pub flops_per_update: f64,
    /// FLOPs executed per CPU cycle.
    pub flops_per_cycle: f64,
    /// Effective switched capacitance: energy per cycle is `capacitance_coeff * f^2`.
    pub capacitance_coeff: f64,
    /// Maximum CPU frequency in cycles per second.
    pub max_cpu_freq: f64,
    pub link: Link,
}

impl DeviceProfile {
    /// CPU cycles per local update.
    pub fn cycles(&self) -> f64 {
        self.flops_per_update / self.flops_per_cycle
    }

    /// Lowest CPU frequency the solvers will assign (a millionth of the cap).
    pub fn min_cpu_freq(&self) -> f64 {
        1e-6 * self.max_cpu_freq
    }

    pub fn distance(&self) -> Option<f64> {
        match self.link {
            Link::Distance(d) => Some(d),
            Link::Gain(_) => None,
        }
    }

    fn validate(&self, idx: usize) -> Result<()> {
        let fields = [
            ("flops_per_update", self.flops_per_update),
            ("flops_per_cycle", self.flops_per_cycle),
            ("capacitance_coeff", self.capacitance_coeff),
            ("max_cpu_freq", self.max_cpu_freq),
            (
                "distance/gain",
                match self.link {
                    Link::Distance(d) | Link::Gain(d) => d,
                },
            ),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!(
                    "device {idx}: {name} must be finite and positive, got {v}"
                ));
            }
        }
        let cycles = self.cycles();
        if !(cycles.is_finite() && cycles > 0.0) {
            return invalid(format!("device {idx}: cycles per update is not finite"));
        }
        Ok(())
    }
}

/// Large-scale channel model shared by all devices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Channel power gain at the reference distance (linear).
    pub ref_gain: f64,
    pub ref_distance: f64,
    pub pathloss_exponent: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    /// Uplink bandwidth in hertz.
    pub bandwidth: f64,
}

impl ChannelModel {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ref_gain", self.ref_gain),
            ("ref_distance", self.ref_distance),
            ("pathloss_exponent", self.pathloss_exponent),
            ("noise_power", self.noise_power),
            ("bandwidth", self.bandwidth),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!(
                    "channel: {name} must be finite and positive, got {v}"
                ));
            }
        }
        if self.pathloss_exponent < 1.0 {
            return invalid("channel: pathloss_exponent must be at least 1");
        }
        Ok(())
    }

    /// Shannon rate `B log2(1 + snr)` in bits per second.
    pub fn capacity(&self, snr: f64) -> f64 {
        self.bandwidth * snr.ln_1p() / std::f64::consts::LN_2
    }
}

/// Iteration counts, payload size and the training deadline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPlan {
    /// Global iterations (aggregation rounds), `M`.
    pub global_iters: u32,
    /// Local iterations per round, `N`.
    pub local_iters: u32,
    /// Bits each device uploads per round.
    pub upload_bits: f64,
    /// Training deadline in seconds.
    pub max_delay: f64,
}

impl TrainingPlan {
    pub fn m(&self) -> f64 {
        f64::from(self.global_iters)
    }

    pub fn n(&self) -> f64 {
        f64::from(self.local_iters)
    }

    /// Local updates per device over the whole training, `M * N`.
    pub fn mn(&self) -> f64 {
        self.m() * self.n()
    }

    /// Time available per round, `T / M`.
    pub fn round_budget(&self) -> f64 {
        self.max_delay / self.m()
    }

    fn validate(&self) -> Result<()> {
        if self.global_iters < 1 || self.local_iters < 1 {
            return invalid("plan: M and N must be at least 1");
        }
        if !(self.upload_bits.is_finite() && self.upload_bits > 0.0) {
            return invalid("plan: upload_bits must be positive");
        }
        if !(self.max_delay.is_finite() && self.max_delay > 0.0) {
            return invalid("plan: max_delay must be positive");
        }
        Ok(())
    }
}

/// A complete, validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub devices: Vec<DeviceProfile>,
    pub channel: ChannelModel,
    pub plan: TrainingPlan,
    /// Transmit power cap shared by all devices, in watts.
    pub max_power: f64,
    gains: Vec<f64>,
}

impl SystemConfig {
    pub fn new(
        devices: Vec<DeviceProfile>,
        channel: ChannelModel,
        plan: TrainingPlan,
        max_power: f64,
    ) -> Result<Self> {
        if devices.is_empty() {
            return invalid("scenario needs at least one device");
        }
        channel.validate()?;
        plan.validate()?;
        if !(max_power.is_finite() && max_power > 0.0) {
            return invalid("max_power must be positive");
        }
        let mut gains = Vec::with_capacity(devices.len());
        for (k, dev) in devices.iter().enumerate() {
            dev.validate(k)?;
            gains.push(match dev.link {
                Link::Distance(d) => path_loss_gain(d, &channel)?,
                Link::Gain(h) => h,
            });
        }
        Ok(Self {
            devices,
            channel,
            plan,
            max_power,
            gains,
        })
    }

    pub fn k(&self) -> usize {
        self.devices.len()
    }

    /// Linear channel power gains, one per device.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Cycles per local update for every device.
    pub fn cycles(&self) -> Vec<f64> {
        self.devices.iter().map(DeviceProfile::cycles).collect()
    }

    /// Per-update local time of the slowest device at full CPU speed.
    pub fn min_local_time(&self) -> f64 {
        self.devices
            .iter()
            .map(|d| d.cycles() / d.max_cpu_freq)
            .fold(0.0, f64::max)
    }

    /// Single-user rate of device `k` at full power.
    pub fn full_power_rate(&self, k: usize) -> f64 {
        self.channel
            .capacity(self.max_power * self.gains[k] / self.channel.noise_power)
    }

    fn rebuild(
        &self,
        f: impl FnOnce(&mut Vec<DeviceProfile>, &mut ChannelModel, &mut TrainingPlan, &mut f64),
    ) -> Result<Self> {
        let mut devices = self.devices.clone();
        let mut channel = self.channel;
        let mut plan = self.plan;
        let mut max_power = self.max_power;
        f(&mut devices, &mut channel, &mut plan, &mut max_power);
        Self::new(devices, channel, plan, max_power)
    }

    pub fn with_max_delay(&self, t: f64) -> Result<Self> {
        self.rebuild(|_, _, plan, _| plan.max_delay = t)
    }

    pub fn with_max_power(&self, p: f64) -> Result<Self> {
        self.rebuild(|_, _, _, pm| *pm = p)
    }

    pub fn with_iterations(&self, m: u32, n: u32) -> Result<Self> {
        self.rebuild(|_, _, plan, _| {
            plan.global_iters = m;
            plan.local_iters = n;
        })
    }

    pub fn with_flops_per_cycle(&self, c: f64) -> Result<Self> {
        self.rebuild(|devs, _, _, _| devs.iter_mut().for_each(|d| d.flops_per_cycle = c))
    }

    pub fn with_max_cpu_freq(&self, f: f64) -> Result<Self> {
        self.rebuild(|devs, _, _, _| devs.iter_mut().for_each(|d| d.max_cpu_freq = f))
    }

    /// Places the devices on an arithmetic progression of distances with the
    /// given mean and common difference (device order preserved).
    pub fn with_mean_distance(&self, mean: f64, spacing: f64) -> Result<Self> {
        let k = self.k() as f64;
        if self.devices.iter().any(|d| d.distance().is_none()) {
            return invalid("distance sweep needs every device placed by distance");
        }
        self.rebuild(|devs, _, _, _| {
            for (i, d) in devs.iter_mut().enumerate() {
                d.link = Link::Distance(mean + (i as f64 - (k - 1.0) / 2.0) * spacing);
            }
        })
    }

    /// Shifts every device distance by the same amount so that their mean
    /// becomes `mean`.
    pub fn with_recentered_distances(&self, mean: f64) -> Result<Self> {
        let distances: Option<Vec<f64>> =
            self.devices.iter().map(DeviceProfile::distance).collect();
        let Some(distances) = distances else {
            return invalid("distance sweep needs every device placed by distance");
        };
        let shift = mean - distances.iter().sum::<f64>() / self.k() as f64;
        self.rebuild(|devs, _, _, _| {
            for (d, old) in devs.iter_mut().zip(&distances) {
                d.link = Link::Distance(old + shift);
            }
        })
    }

    /// Loads a JSON scenario, filling omitted constants from `defaults`.
    pub fn from_json_str(text: &str, defaults: &Defaults) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.into_config(defaults)
    }

    pub fn load(path: impl AsRef<Path>, defaults: &Defaults) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, defaults)
    }

    /// Serializes every field explicitly in SI units.
    pub fn to_json_string(&self) -> String {
        let file = ScenarioFile {
            devices: self
                .devices
                .iter()
                .map(|d| DeviceEntry {
                    flops_per_update: Quantity::Value(d.flops_per_update),
                    flops_per_cycle: Some(Quantity::Value(d.flops_per_cycle)),
                    capacitance_coeff: Some(Quantity::Value(d.capacitance_coeff)),
                    max_cpu_freq: Some(Quantity::Value(d.max_cpu_freq)),
                    distance: d.distance().map(Quantity::Value),
                    gain: match d.link {
                        Link::Gain(h) => Some(Quantity::Value(h)),
                        Link::Distance(_) => None,
                    },
                })
                .collect(),
            channel: ChannelEntry {
                bandwidth: Some(Quantity::Value(self.channel.bandwidth)),
                noise_power: Some(Quantity::Value(self.channel.noise_power)),
                ref_gain: Some(Quantity::Value(self.channel.ref_gain)),
                ref_distance: Some(Quantity::Value(self.channel.ref_distance)),
                pathloss_exponent: Some(Quantity::Value(self.channel.pathloss_exponent)),
            },
            plan: PlanEntry {
                m: self.plan.global_iters,
                n: self.plan.local_iters,
                upload_bits: Quantity::Value(self.plan.upload_bits),
                max_delay: Quantity::Value(self.plan.max_delay),
            },
            max_power: Some(Quantity::Value(self.max_power)),
        };
        serde_json::to_string_pretty(&file).expect("scenario serialization is infallible")
    }
}

/// Channel power gain `ref_gain * (distance / ref_distance)^(-pathloss_exponent)`.
pub fn path_loss_gain(distance: f64, channel: &ChannelModel) -> Result<f64> {
    if !(distance.is_finite() && distance > 0.0) {
        return invalid(format!("distance must be positive, got {distance}"));
    }
    Ok(channel.ref_gain * (distance / channel.ref_distance).powf(-channel.pathloss_exponent))
}

pub fn dbm_to_watts(level: f64) -> f64 {
    10f64.powf(level / 10.0) * 1e-3
}

pub fn db_to_linear(level: f64) -> f64 {
    10f64.powf(level / 10.0)
}

fn check_freq(device: &DeviceProfile, cpu_freq: f64) -> Result<()> {
    if !(cpu_freq > 0.0 && cpu_freq <= device.max_cpu_freq) {
        return invalid(format!(
            "cpu frequency {cpu_freq} outside (0, {}]",
            device.max_cpu_freq
        ));
    }
    Ok(())
}

/// Seconds for one local update at `cpu_freq`.
pub fn local_update_time(device: &DeviceProfile, cpu_freq: f64) -> Result<f64> {
    check_freq(device, cpu_freq)?;
    Ok(device.cycles() / cpu_freq)
}

/// Joules for one local update at `cpu_freq`.
pub fn local_update_energy(device: &DeviceProfile, cpu_freq: f64) -> Result<f64> {
    check_freq(device, cpu_freq)?;
    Ok(device.cycles() * device.capacitance_coeff * cpu_freq * cpu_freq)
}

/// Constants used when a scenario omits them.
#[derive(Debug, Clone, PartialEq)]
pub struct Defaults {
    pub bandwidth: f64,
    pub noise_power: f64,
    pub pathloss_exponent: f64,
    pub ref_gain: f64,
    pub ref_distance: f64,
    pub capacitance_coeff: f64,
    pub flops_per_cycle: f64,
    pub max_cpu_freq: f64,
    pub max_power: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            bandwidth: 2e6,
            noise_power: dbm_to_watts(-100.0),
            pathloss_exponent: 3.0,
            ref_gain: db_to_linear(-30.0),
            ref_distance: 1.0,
            capacitance_coeff: 1e-28,
            flops_per_cycle: 1.0,
            max_cpu_freq: 1e9,
            max_power: 0.1,
        }
    }
}

impl Defaults {
    fn entries(&self) -> [(&'static str, f64, Dim); 9] {
        [
            ("bandwidth", self.bandwidth, Dim::Frequency),
            ("noise_power", self.noise_power, Dim::Power),
            ("pathloss_exponent", self.pathloss_exponent, Dim::Plain),
            ("ref_gain", self.ref_gain, Dim::Gain),
            ("ref_distance", self.ref_distance, Dim::Distance),
            ("capacitance_coeff", self.capacitance_coeff, Dim::Plain),
            ("flops_per_cycle", self.flops_per_cycle, Dim::Plain),
            ("max_cpu_freq", self.max_cpu_freq, Dim::Frequency),
            ("max_power", self.max_power, Dim::Power),
        ]
    }

    /// Applies `key=value` overrides; values may carry unit suffixes.
    pub fn with_overrides(&self, spec: &str) -> Result<Self> {
        let mut out = self.clone();
        for item in spec
            .split([',', ';'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
        {
            let Some((key, value)) = item.split_once('=') else {
                return invalid(format!("default override `{item}` is not key=value"));
            };
            let key = key.trim();
            let dim = self
                .entries()
                .iter()
                .find(|(k, _, _)| *k == key)
                .map(|e| e.2)
                .ok_or_else(|| Error::InvalidInput(format!("unknown default `{key}`")))?;
            let v = Quantity::Text(value.trim().to_string()).to_si(dim, key)?;
            let slot = match key {
                "bandwidth" => &mut out.bandwidth,
                "noise_power" => &mut out.noise_power,
                "pathloss_exponent" => &mut out.pathloss_exponent,
                "ref_gain" => &mut out.ref_gain,
                "ref_distance" => &mut out.ref_distance,
                "capacitance_coeff" => &mut out.capacitance_coeff,
                "flops_per_cycle" => &mut out.flops_per_cycle,
                "max_cpu_freq" => &mut out.max_cpu_freq,
                _ => &mut out.max_power,
            };
            *slot = v;
        }
        Ok(out)
    }

    /// Built-in defaults with the overrides from [`DEFAULTS_ENV`], if set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(DEFAULTS_ENV) {
            Ok(spec) => Self::default().with_overrides(&spec),
            Err(_) => Ok(Self::default()),
        }
    }

    /// Compact `key=value;...` listing echoed into result files.
    pub fn fingerprint(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v, _)| format!("{k}={v:e}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for Defaults {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fingerprint())
    }
}

// ---------------------------------------------------------------------------
// File representation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Plain,
    Power,
    Frequency,
    Bits,
    Time,
    Distance,
    Gain,
    Flops,
}

/// A number in SI units or a string with an explicit unit suffix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Quantity {
    Value(f64),
    Text(String),
}

fn unit_table(dim: Dim) -> &'static [(&'static str, f64)] {
    match dim {
        Dim::Plain => &[],
        Dim::Power => &[("w", 1.0), ("mw", 1e-3), ("uw", 1e-6)],
        Dim::Frequency => &[("hz", 1.0), ("khz", 1e3), ("mhz", 1e6), ("ghz", 1e9)],
        Dim::Bits => &[
            ("bit", 1.0),
            ("bits", 1.0),
            ("kbit", 1e3),
            ("kbits", 1e3),
            ("mbit", 1e6),
            ("mbits", 1e6),
            ("gbit", 1e9),
            ("gbits", 1e9),
        ],
        Dim::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6)],
        Dim::Distance => &[("m", 1.0), ("km", 1e3)],
        Dim::Gain => &[],
        Dim::Flops => &[
            ("flops", 1.0),
            ("mflops", 1e6),
            ("gflops", 1e9),
            ("tflops", 1e12),
        ],
    }
}

impl Quantity {
    fn to_si(&self, dim: Dim, field: &str) -> Result<f64> {
        let text = match self {
            Quantity::Value(v) => return Ok(*v),
            Quantity::Text(t) => t.trim(),
        };
        let split = text
            .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
            .or_else(|| {
                // Bare exponent markers are part of the number; a trailing
                // alphabetic run is the unit.
                text.rfind(|c: char| !c.is_ascii_alphabetic())
                    .map(|i| i + 1)
            })
            .unwrap_or(text.len());
        let (num, unit) = text.split_at(split);
        let value: f64 = num.trim().parse().map_err(|_| {
            Error::InvalidInput(format!("{field}: cannot parse number in `{text}`"))
        })?;
        let unit = unit.trim().to_ascii_lowercase();
        if unit.is_empty() {
            return Ok(value);
        }
        match (dim, unit.as_str()) {
            (Dim::Power, "dbm") => return Ok(dbm_to_watts(value)),
            (Dim::Power, "dbw") => return Ok(db_to_linear(value)),
            (Dim::Gain, "db") => return Ok(db_to_linear(value)),
            _ => {}
        }
        unit_table(dim)
            .iter()
            .find(|(u, _)| *u == unit)
            .map(|(_, scale)| value * scale)
            .ok_or_else(|| Error::InvalidInput(format!("{field}: unit `{unit}` not accepted here")))
    }
}

fn opt_si(q: &Option<Quantity>, dim: Dim, field: &str, default: f64) -> Result<f64> {
    q.as_ref().map_or(Ok(default), |q| q.to_si(dim, field))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    devices: Vec<DeviceEntry>,
    #[serde(default)]
    channel: ChannelEntry,
    plan: PlanEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_power: Option<Quantity>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceEntry {
    flops_per_update: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flops_per_cycle: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacitance_coeff: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_cpu_freq: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distance: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gain: Option<Quantity>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bandwidth: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise_power: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ref_gain: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ref_distance: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pathloss_exponent: Option<Quantity>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanEntry {
    #[serde(rename = "M")]
    m: u32,
    #[serde(rename = "N")]
    n: u32,
    upload_bits: Quantity,
    max_delay: Quantity,
}

impl ScenarioFile {
    fn into_config(self, d: &Defaults) -> Result<SystemConfig> {
        let c = &self.channel;
        let channel = ChannelModel {
            bandwidth: opt_si(&c.bandwidth, Dim::Frequency, "bandwidth", d.bandwidth)?,
            noise_power: opt_si(&c.noise_power, Dim::Power, "noise_power", d.noise_power)?,
            ref_gain: opt_si(&c.ref_gain, Dim::Gain, "ref_gain", d.ref_gain)?,
            ref_distance: opt_si(
                &c.ref_distance,
                Dim::Distance,
                "ref_distance",
                d.ref_distance,
            )?,
            pathloss_exponent: opt_si(
                &c.pathloss_exponent,
                Dim::Plain,
                "pathloss_exponent",
                d.pathloss_exponent,
            )?,
        };
        let mut devices = Vec::with_capacity(self.devices.len());
        for (k, e) in self.devices.iter().enumerate() {
            let link = match (&e.distance, &e.gain) {
                (Some(q), None) => Link::Distance(q.to_si(Dim::Distance, "distance")?),
                (None, Some(q)) => Link::Gain(q.to_si(Dim::Gain, "gain")?),
                _ => return invalid(format!("device {k}: give exactly one of distance or gain")),
            };
            devices.push(DeviceProfile {
                flops_per_update: e.flops_per_update.to_si(Dim::Flops, "flops_per_update")?,
                flops_per_cycle: opt_si(
                    &e.flops_per_cycle,
                    Dim::Plain,
                    "flops_per_cycle",
                    d.flops_per_cycle,
                )?,
                capacitance_coeff: opt_si(
                    &e.capacitance_coeff,
                    Dim::Plain,
                    "capacitance_coeff",
                    d.capacitance_coeff,
                )?,
                max_cpu_freq: opt_si(
                    &e.max_cpu_freq,
                    Dim::Frequency,
                    "max_cpu_freq",
                    d.max_cpu_freq,
                )?,
                link,
            });
        }
        let plan = TrainingPlan {
            global_iters: self.plan.m,
            local_iters: self.plan.n,
            upload_bits: self.plan.upload_bits.to_si(Dim::Bits, "upload_bits")?,
            max_delay: self.plan.max_delay.to_si(Dim::Time, "max_delay")?,
        };
        let max_power = opt_si(&self.max_power, Dim::Power, "max_power", d.max_power)?;
        SystemConfig::new(devices, channel, plan, max_power)
    }
}

/// Named reference scenarios.
pub mod presets {
    use super::*;

    fn device(flops: f64, distance: f64, d: &Defaults) -> DeviceProfile {
        DeviceProfile {
            flops_per_update: flops,
            flops_per_cycle: d.flops_per_cycle,
            capacitance_coeff: d.capacitance_coeff,
            max_cpu_freq: d.max_cpu_freq,
            link: Link::Distance(distance),
        }
    }

    fn channel(d: &Defaults) -> ChannelModel {
        ChannelModel {
            ref_gain: d.ref_gain,
            ref_distance: d.ref_distance,
            pathloss_exponent: d.pathloss_exponent,
            noise_power: d.noise_power,
            bandwidth: d.bandwidth,
        }
    }

    /// Two identical devices at 100 m, `M = N = 2`, 2 Mbit uploads, 30 s deadline.
    pub fn desk_a() -> SystemConfig {
        let d = Defaults::default();
        SystemConfig::new(
            vec![device(1e9, 100.0, &d), device(1e9, 100.0, &d)],
            channel(&d),
            TrainingPlan {
                global_iters: 2,
                local_iters: 2,
                upload_bits: 2e6,
                max_delay: 30.0,
            },
            d.max_power,
        )
        .expect("preset is valid")
    }

    /// Three devices on an arithmetic progression of distances (45 m apart)
    /// around `mean_distance`; 100 MFLOPs per update, 1 Mbit uploads.
    pub fn three_device(
        mean_distance: f64,
        m: u32,
        n: u32,
        max_delay: f64,
    ) -> Result<SystemConfig> {
        let d = Defaults::default();
        SystemConfig::new(
            (0..3)
                .map(|i| device(1e8, mean_distance + 45.0 * (i as f64 - 1.0), &d))
                .collect(),
            channel(&d),
            TrainingPlan {
                global_iters: m,
                local_iters: n,
                upload_bits: 1e6,
                max_delay,
            },
            d.max_power,
        )
    }
}

/// Field-by-field dump used by tests and debugging output.
pub fn describe(config: &SystemConfig) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (k, (d, h)) in config.devices.iter().zip(config.gains()).enumerate() {
        out.insert(format!("device{k}.cycles"), d.cycles());
        out.insert(format!("device{k}.gain"), *h);
    }
    out.insert("max_power".into(), config.max_power);
    out.insert("max_delay".into(), config.plan.max_delay);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn chan() -> ChannelModel {
        ChannelModel {
            ref_gain: 1e-3,
            ref_distance: 1.0,
            pathloss_exponent: 3.0,
            noise_power: 1e-13,
            bandwidth: 2e6,
        }
    }

    fn dev(cycles: f64) -> DeviceProfile {
        DeviceProfile {
            flops_per_update: cycles,
            flops_per_cycle: 1.0,
            capacitance_coeff: 1e-28,
            max_cpu_freq: 1e9,
            link: Link::Distance(100.0),
        }
    }

    #[test]
    fn path_loss_values() {
        assert_relative_eq!(path_loss_gain(1.0, &chan()).unwrap(), 1e-3);
        assert_relative_eq!(
            path_loss_gain(100.0, &chan()).unwrap(),
            1e-9,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            path_loss_gain(200.0, &chan()).unwrap(),
            1.25e-10,
            max_relative = 1e-12
        );
        assert!(path_loss_gain(0.0, &chan()).is_err());
        assert!(path_loss_gain(-3.0, &chan()).is_err());
    }

    #[test]
    fn dbm_values() {
        assert_relative_eq!(dbm_to_watts(0.0), 1e-3);
        assert_relative_eq!(dbm_to_watts(-100.0), 1e-13, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn local_update_formulas() {
        let d = dev(1e9);
        assert_relative_eq!(local_update_time(&d, 1e9).unwrap(), 1.0);
        assert_relative_eq!(
            local_update_energy(&d, 1e9).unwrap(),
            0.1,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            local_update_energy(&d, 0.5e9).unwrap(),
            0.025,
            max_relative = 1e-12
        );
        let mut slow = dev(2e9);
        slow.max_cpu_freq = 1e9;
        assert_relative_eq!(local_update_time(&slow, 0.5e9).unwrap(), 4.0);
        assert!(local_update_time(&d, 1.5e9).is_err());
        assert!(local_update_energy(&d, 0.0).is_err());
        assert!(local_update_energy(&d, 1e-3).unwrap() < 1e-20);
    }

    #[test]
    fn energy_time_identity() {
        let d = dev(3e8);
        for f in [1e6, 2.5e8, 7e8, 1e9] {
            let lhs = local_update_energy(&d, f).unwrap() * local_update_time(&d, f).unwrap();
            let rhs = d.cycles().powi(2) * d.capacitance_coeff * f;
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn gains_decrease_with_distance() {
        let c = chan();
        let mut last = f64::INFINITY;
        for d in [1.0, 10.0, 55.5, 100.0, 300.0, 1e4] {
            let h = path_loss_gain(d, &c).unwrap();
            assert!(h < last);
            last = h;
        }
    }

    #[test]
    fn loads_unit_suffixes_and_defaults() {
        let text = r#"{
            "devices": [
                {"flops_per_update": "1 GFLOPs", "distance": "0.1 km"},
                {"flops_per_update": 2e9, "gain": "-90 dB", "max_cpu_freq": "2 GHz"}
            ],
            "channel": {"bandwidth": "2 MHz", "noise_power": "-100 dBm"},
            "plan": {"M": 2, "N": 3, "upload_bits": "2 Mbits", "max_delay": "30 s"},
            "max_power": "100 mW"
        }"#;
        let cfg = SystemConfig::from_json_str(text, &Defaults::default()).unwrap();
        assert_eq!(cfg.k(), 2);
        assert_relative_eq!(cfg.devices[0].flops_per_update, 1e9);
        assert_relative_eq!(cfg.gains()[0], 1e-9, max_relative = 1e-12);
        assert_relative_eq!(cfg.gains()[1], 1e-9, max_relative = 1e-12);
        assert_relative_eq!(cfg.devices[1].max_cpu_freq, 2e9);
        assert_relative_eq!(cfg.channel.noise_power, 1e-13, max_relative = 1e-12);
        assert_relative_eq!(cfg.max_power, 0.1, max_relative = 1e-12);
        assert_relative_eq!(cfg.plan.upload_bits, 2e6);
        assert_eq!(cfg.devices[0].capacitance_coeff, 1e-28);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_units() {
        let base = |extra: &str| {
            format!(
                r#"{{"devices":[{{"flops_per_update":1e9,"distance":100{extra}}}],
                   "plan":{{"M":1,"N":1,"upload_bits":1e6,"max_delay":10}}}}"#
            )
        };
        assert!(SystemConfig::from_json_str(&base(""), &Defaults::default()).is_ok());
        assert!(
            SystemConfig::from_json_str(&base(r#","colour":"red""#), &Defaults::default()).is_err()
        );
        let bad_unit = r#"{"devices":[{"flops_per_update":1e9,"distance":"3 GHz"}],
                   "plan":{"M":1,"N":1,"upload_bits":1e6,"max_delay":10}}"#;
        assert!(SystemConfig::from_json_str(bad_unit, &Defaults::default()).is_err());
        let both = r#"{"devices":[{"flops_per_update":1e9,"distance":1,"gain":1e-9}],
                   "plan":{"M":1,"N":1,"upload_bits":1e6,"max_delay":10}}"#;
        assert!(SystemConfig::from_json_str(both, &Defaults::default()).is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = presets::desk_a().with_max_power(0.123456789).unwrap();
        let back =
            SystemConfig::from_json_str(&cfg.to_json_string(), &Defaults::default()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn default_overrides() {
        let d = Defaults::default()
            .with_overrides("capacitance_coeff=1e-27; max_power=200 mW,max_cpu_freq=2GHz")
            .unwrap();
        assert_eq!(d.capacitance_coeff, 1e-27);
        assert_relative_eq!(d.max_power, 0.2, max_relative = 1e-12);
        assert_relative_eq!(d.max_cpu_freq, 2e9);
        assert!(d.fingerprint().contains("max_power=2e-1"));
        assert!(Defaults::default().with_overrides("nope=1").is_err());
    }
}
