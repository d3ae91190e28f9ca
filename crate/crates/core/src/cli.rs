//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible scenario,
//! 4 solver tolerance not met or numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::baselines::{solve_baseline, SchemeId};
use crate::error::{Error, Result};
use crate::fedsim::{run_training_with, Aggregation, ModelParams, SyntheticSpec};
use crate::oracle::{audit_solution, grid_solve};
use crate::report::{write_rows, ResultRow};
use crate::scenario::{Defaults, SystemConfig};
use crate::solution::{Protocol, Status};
use crate::solver_noma::t_min_noma;
use crate::solver_tdma::t_min_tdma;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_TOLERANCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "fedge",
    version,
    about = "Energy-optimal federated learning over NOMA and TDMA uplinks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the minimum training delay and whether the deadline is met.
    Feasibility {
        scenario: PathBuf,
        /// Protocol to check; both when omitted.
        #[arg(long, value_parser = parse_protocol)]
        protocol: Option<Protocol>,
    },
    /// Solve one scenario and write a result row.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_parser = parse_protocol, default_value = "noma")]
        protocol: Protocol,
        #[arg(long, value_parser = parse_scheme, default_value = "joint")]
        scheme: SchemeId,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record wall-clock solve time (makes output run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Vary one parameter and write one row per value, protocol and scheme.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values; `MxN` pairs for the iteration sweep.
        #[arg(long)]
        values: String,
        /// Protocol to run; both when omitted.
        #[arg(long, value_parser = parse_protocol)]
        protocol: Option<Protocol>,
        /// Comma-separated schemes; all when omitted.
        #[arg(long)]
        schemes: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Compare the solver with the grid search and audit its solution.
    Oracle {
        scenario: PathBuf,
        #[arg(long, value_parser = parse_protocol)]
        protocol: Option<Protocol>,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run federated gradient descent on synthetic data and write the trajectory.
    Simulate {
        #[arg(long)]
        devices: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        eta: f64,
        #[arg(long = "M")]
        global_iters: u32,
        #[arg(long = "N")]
        local_iters: u32,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Average device parameters by sample count instead of equally.
        #[arg(long)]
        weighted: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    Distance,
    Cycles,
    Fmax,
    Pmax,
    #[value(name = "T")]
    Deadline,
    #[value(name = "MN")]
    Iterations,
}

fn parse_protocol(s: &str) -> std::result::Result<Protocol, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scheme(s: &str) -> std::result::Result<SchemeId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Results go to `out` unless a command writes a file.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let mut text = e.render().to_string();
            if e.use_stderr() && !text.contains("Usage:") {
                text.push_str(&format!("\n{}\n", Cli::command().render_usage()));
            }
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return e.exit_code();
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NumericalDomain(_)
        | Error::Bracket { .. }
        | Error::DualInfeasible
        | Error::Divergence { .. } => EXIT_TOLERANCE,
        _ => EXIT_INVALID,
    }
}

fn status_code(statuses: impl IntoIterator<Item = Status>) -> i32 {
    statuses.into_iter().fold(EXIT_OK, |code, s| {
        code.max(match s {
            Status::Optimal => EXIT_OK,
            Status::Infeasible => EXIT_INFEASIBLE,
            Status::ToleranceNotMet => EXIT_TOLERANCE,
        })
    })
}

fn protocols(choice: Option<Protocol>) -> Vec<Protocol> {
    choice.map_or(Protocol::ALL.to_vec(), |p| vec![p])
}

fn scenario_id(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

fn with_output(
    path: Option<&Path>,
    out: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = io::BufWriter::new(File::create(p)?);
            body(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => body(out),
    }
}

/// Seven significant digits.
fn sig7(v: f64) -> String {
    if !v.is_finite() || v == 0.0 {
        return v.to_string();
    }
    let decimals = (6 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    let defaults = Defaults::from_env()?;
    let fingerprint = defaults.fingerprint();
    match command {
        Command::Feasibility { scenario, protocol } => {
            let config = SystemConfig::load(&scenario, &defaults)?;
            let mut code = EXIT_OK;
            for p in protocols(protocol) {
                let t_min = match p {
                    Protocol::Noma => t_min_noma(&config),
                    Protocol::Tdma => t_min_tdma(&config),
                };
                let feasible = config.plan.max_delay >= t_min;
                if !feasible {
                    code = EXIT_INFEASIBLE;
                }
                writeln!(
                    out,
                    "{p}: t_min = {} s, T = {} s, {}",
                    sig7(t_min),
                    config.plan.max_delay,
                    if feasible { "feasible" } else { "infeasible" }
                )?;
            }
            Ok(code)
        }
        Command::Solve {
            scenario,
            protocol,
            scheme,
            out: path,
            timing,
        } => {
            let config = SystemConfig::load(&scenario, &defaults)?;
            let start = Instant::now();
            let sol = solve_baseline(&config, protocol, scheme);
            let elapsed = start.elapsed();
            let mut row =
                ResultRow::new(scenario_id(&scenario), &config, scheme, &sol, fingerprint);
            row.solver_runtime = timing.then_some(elapsed);
            with_output(path.as_deref(), out, |w| {
                write_rows(w, config.k(), std::slice::from_ref(&row))
            })?;
            Ok(status_code([sol.status()]))
        }
        Command::Sweep {
            scenario,
            param,
            values,
            protocol,
            schemes,
            out: path,
            timing,
        } => {
            let base = SystemConfig::load(&scenario, &defaults)?;
            let schemes: Vec<SchemeId> = match schemes {
                Some(list) => list
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?,
                None => SchemeId::ALL.to_vec(),
            };
            let stem = scenario_id(&scenario);
            let mut jobs = Vec::new();
            for token in values.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let config = apply_param(&base, param, token)?;
                for &p in &protocols(protocol) {
                    for &s in &schemes {
                        jobs.push((
                            format!("{stem}:{}={token}", param_name(param)),
                            config.clone(),
                            p,
                            s,
                        ));
                    }
                }
            }
            if jobs.is_empty() {
                return Err(Error::InvalidInput("no sweep values given".into()));
            }
            // Parallel solves, rows kept in input order.
            let rows: Vec<ResultRow> = jobs
                .par_iter()
                .map(|(id, config, p, s)| {
                    let start = Instant::now();
                    let sol = solve_baseline(config, *p, *s);
                    let elapsed = start.elapsed();
                    let mut row = ResultRow::new(id.clone(), config, *s, &sol, fingerprint.clone());
                    row.solver_runtime = timing.then_some(elapsed);
                    row
                })
                .collect();
            with_output(path.as_deref(), out, |w| write_rows(w, base.k(), &rows))?;
            // Infeasible points are expected along a sweep.
            Ok(
                if rows.iter().any(|r| r.status == Status::ToleranceNotMet) {
                    EXIT_TOLERANCE
                } else {
                    EXIT_OK
                },
            )
        }
        Command::Oracle {
            scenario,
            protocol,
            resolution,
            out: path,
        } => {
            let config = SystemConfig::load(&scenario, &defaults)?;
            let id = scenario_id(&scenario);
            let mut records = Vec::new();
            let mut statuses = Vec::new();
            for p in protocols(protocol) {
                let grid = grid_solve(&config, p, resolution)?;
                let sol = solve_baseline(&config, p, SchemeId::Joint);
                let audit = audit_solution(&sol, &config);
                statuses.push(sol.status());
                let rel = (sol.energy_total() - grid.energy_total()) / grid.energy_total();
                records.push(vec![
                    id.clone(),
                    p.to_string(),
                    resolution.to_string(),
                    sol.status().to_string(),
                    grid.status().to_string(),
                    sol.energy_total().to_string(),
                    grid.energy_total().to_string(),
                    rel.to_string(),
                    audit.pass.to_string(),
                    audit.max_constraint_violation.to_string(),
                    audit.max_slackness_residual().to_string(),
                    audit.max_stationarity_residual().to_string(),
                ]);
            }
            with_output(path.as_deref(), out, |w| {
                let mut wtr = csv::Writer::from_writer(w);
                wtr.write_record([
                    "scenario_id",
                    "protocol",
                    "resolution",
                    "solver_status",
                    "grid_status",
                    "solver_energy",
                    "grid_energy",
                    "rel_diff",
                    "audit_pass",
                    "max_constraint_violation",
                    "max_slackness_residual",
                    "max_stationarity_residual",
                ])?;
                for r in &records {
                    wtr.write_record(r)?;
                }
                wtr.flush()?;
                Ok(())
            })?;
            Ok(status_code(statuses))
        }
        Command::Simulate {
            devices,
            samples,
            eta,
            global_iters,
            local_iters,
            dim,
            noise,
            seed,
            weighted,
            out: path,
        } => {
            let (data, _) =
                SyntheticSpec::uniform(devices, samples, dim, noise, seed).generate()?;
            let aggregation = if weighted {
                Aggregation::BySampleCount
            } else {
                Aggregation::Unweighted
            };
            let traj = run_training_with(
                &data,
                eta,
                global_iters,
                local_iters,
                ModelParams::zeros(dim),
                aggregation,
            )?;
            with_output(path.as_deref(), out, |w| traj.write_csv(w))?;
            Ok(EXIT_OK)
        }
    }
}

fn param_name(param: SweepParam) -> &'static str {
    match param {
        SweepParam::Distance => "distance",
        SweepParam::Cycles => "cycles",
        SweepParam::Fmax => "fmax",
        SweepParam::Pmax => "pmax",
        SweepParam::Deadline => "T",
        SweepParam::Iterations => "MN",
    }
}

fn apply_param(base: &SystemConfig, param: SweepParam, token: &str) -> Result<SystemConfig> {
    let bad = || Error::InvalidInput(format!("cannot parse sweep value `{token}`"));
    if param == SweepParam::Iterations {
        let (m, n) = token.split_once(['x', 'X', ':']).ok_or_else(bad)?;
        let m: u32 = m.trim().parse().map_err(|_| bad())?;
        let n: u32 = n.trim().parse().map_err(|_| bad())?;
        return base.with_iterations(m, n);
    }
    let v: f64 = token.parse().map_err(|_| bad())?;
    match param {
        SweepParam::Distance => base.with_recentered_distances(v),
        SweepParam::Cycles => base.with_flops_per_cycle(v),
        SweepParam::Fmax => base.with_max_cpu_freq(v),
        SweepParam::Pmax => base.with_max_power(v),
        SweepParam::Deadline => base.with_max_delay(v),
        SweepParam::Iterations => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_significant_digits() {
        assert_eq!(sig7(4.364747003), "4.364747");
        assert_eq!(sig7(776.18127), "776.1813");
        assert_eq!(sig7(1234567.8), "1234568");
    }

    #[test]
    fn status_codes() {
        assert_eq!(status_code([Status::Optimal]), EXIT_OK);
        assert_eq!(
            status_code([Status::Optimal, Status::Infeasible]),
            EXIT_INFEASIBLE
        );
        assert_eq!(
            status_code([Status::ToleranceNotMet, Status::Infeasible]),
            EXIT_TOLERANCE
        );
    }

    #[test]
    fn unknown_scheme_is_usage_error() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            ["fedge", "solve", "x.json", "--scheme", "greedy"],
            &mut out,
            &mut err,
        );
        assert_eq!(code, EXIT_INVALID);
        assert!(String::from_utf8(err).unwrap().contains("Usage"));
    }

    #[test]
    fn iteration_pairs_parse() {
        let base = crate::scenario::presets::desk_a();
        let cfg = apply_param(&base, SweepParam::Iterations, "50x8").unwrap();
        assert_eq!((cfg.plan.global_iters, cfg.plan.local_iters), (50, 8));
        assert!(apply_param(&base, SweepParam::Iterations, "50").is_err());
        assert!(apply_param(&base, SweepParam::Deadline, "soon").is_err());
    }
}
