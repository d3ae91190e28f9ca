//! Result rows and their CSV form.
//!
//! Numbers are written with the shortest representation that parses back
//! to the same `f64`, so identical runs give identical files.

use std::io::Write;
use std::time::Duration;

use crate::baselines::SchemeId;
use crate::error::Result;
use crate::scenario::SystemConfig;
use crate::solution::{Protocol, Solution, Status};

/// One solved (scenario, protocol, scheme) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    pub protocol: Protocol,
    pub scheme: SchemeId,
    pub max_delay: f64,
    pub status: Status,
    pub energy_total: f64,
    pub energy_comm: f64,
    pub energy_comp: f64,
    /// Shared slot (NOMA) or sum of slots (TDMA), per round.
    pub upload_time: f64,
    pub t_loc: f64,
    pub duality_gap_rel: f64,
    pub cpu_freqs: Vec<f64>,
    pub powers: Vec<f64>,
    pub rates: Vec<f64>,
    /// Wall-clock solve time; only recorded on request since it breaks
    /// byte-identical reruns.
    pub solver_runtime: Option<Duration>,
    pub defaults_fingerprint: String,
}

impl ResultRow {
    pub fn new(
        scenario_id: impl Into<String>,
        config: &SystemConfig,
        scheme: SchemeId,
        solution: &Solution,
        defaults_fingerprint: impl Into<String>,
    ) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            protocol: solution.protocol(),
            scheme,
            max_delay: config.plan.max_delay,
            status: solution.status(),
            energy_total: solution.energy_total(),
            energy_comm: solution.energy_comm(),
            energy_comp: solution.energy_comp(),
            upload_time: solution.upload_time(),
            t_loc: solution.t_loc(),
            duality_gap_rel: solution.duality_gap_rel(),
            cpu_freqs: solution.cpu_freqs(),
            powers: solution.powers(),
            rates: solution.rates(),
            solver_runtime: None,
            defaults_fingerprint: defaults_fingerprint.into(),
        }
    }

    pub fn header(k: usize) -> Vec<String> {
        let mut h: Vec<String> = [
            "scenario_id",
            "protocol",
            "scheme",
            "T",
            "status",
            "energy_total",
            "energy_comm",
            "energy_comp",
            "upload_time",
            "t_loc",
            "duality_gap_rel",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for prefix in ["f", "p", "r"] {
            h.extend((0..k).map(|i| format!("{prefix}_{i}")));
        }
        h.push("solver_runtime".into());
        h.push("defaults_fingerprint".into());
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.scenario_id.clone(),
            self.protocol.to_string(),
            self.scheme.to_string(),
            num(self.max_delay),
            self.status.to_string(),
            num(self.energy_total),
            num(self.energy_comm),
            num(self.energy_comp),
            num(self.upload_time),
            num(self.t_loc),
            num(self.duality_gap_rel),
        ];
        for values in [&self.cpu_freqs, &self.powers, &self.rates] {
            r.extend(values.iter().copied().map(num));
        }
        r.push(
            self.solver_runtime
                .map_or(String::new(), |d| num(d.as_secs_f64())),
        );
        r.push(self.defaults_fingerprint.clone());
        r
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Writes rows under one header sized for `k` devices.
pub fn write_rows<W: Write>(out: W, k: usize, rows: &[ResultRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(ResultRow::header(k))?;
    for row in rows {
        wtr.write_record(row.record())?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::solve_baseline;
    use crate::scenario::presets;

    #[test]
    fn header_and_record_align() {
        let cfg = presets::desk_a();
        let sol = solve_baseline(&cfg, Protocol::Noma, SchemeId::DelayMin);
        let row = ResultRow::new("desk_a", &cfg, SchemeId::DelayMin, &sol, "x=1");
        assert_eq!(ResultRow::header(2).len(), row.record().len());
        let rec = row.record();
        assert_eq!(&rec[..5], ["desk_a", "noma", "delay_min", "30", "optimal"]);
        assert_eq!(rec[rec.len() - 2], "");
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::NAN), "NaN");
    }
}
