//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

mod common;

use std::time::Instant;

use fedge::baselines::{solve_baseline, SchemeId};
use fedge::cli;
use fedge::fedsim::{self, Aggregation, ModelParams, SyntheticSpec};
use fedge::noma_region::{
    common_rate, region_contains, sic_corner_rates, weight_order, DecodingOrder, MacChannel,
};
use fedge::oracle::grid_solve;
use fedge::scenario::{presets, ChannelModel, DeviceProfile, Link, SystemConfig};
use fedge::solution::{Protocol, Solution, Status};
use fedge::solver_noma::{optimal_cpu_frequency, solve_p1, t_min_noma};
use fedge::solver_tdma::{optimal_upload_time, solve_p2, t_min_tdma, upload_time_residual};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

const SUITE_SEED: u64 = 0x5EED;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn suite() -> Vec<SystemConfig> {
    common::random_suite(SUITE_SEED, 100, 4)
}

fn solve_both(suite: &[SystemConfig]) -> Vec<(Solution, Solution)> {
    use rayon::prelude::*;
    suite
        .par_iter()
        .map(|c| (Solution::Noma(solve_p1(c)), Solution::Tdma(solve_p2(c))))
        .collect()
}

fn duality_gap() -> Outcome {
    let suite = suite();
    let start = Instant::now();
    let solved = solve_both(&suite);
    let elapsed = start.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    for (i, (noma, tdma)) in solved.iter().enumerate() {
        for s in [noma, tdma] {
            ensure(s.status() == Status::Optimal, || {
                format!("scenario {i} {}: status {}", s.protocol(), s.status())
            })?;
            let gap = s.duality_gap_rel();
            ensure(gap <= 1e-3, || {
                format!("scenario {i} {}: gap {gap:e}", s.protocol())
            })?;
            worst = worst.max(gap);
        }
    }
    ensure(elapsed < 60.0, || format!("runtime {elapsed:.1} s"))?;
    Ok(format!("200 solves, worst gap {worst:.2e}, {elapsed:.1} s"))
}

fn oracle_equivalence() -> Outcome {
    let suite = common::random_suite(SUITE_SEED + 1, 20, 2);
    let mut worst: f64 = 0.0;
    for (i, cfg) in suite.iter().enumerate() {
        for protocol in Protocol::ALL {
            let solver = solve_baseline(cfg, protocol, SchemeId::Joint).energy_total();
            let grid = grid_solve(cfg, protocol, 200)
                .map_err(|e| format!("scenario {i} {protocol}: {e}"))?
                .energy_total();
            let rel = (solver - grid).abs() / grid;
            ensure(rel <= 0.02, || {
                format!("scenario {i} {protocol}: {rel:.3e}")
            })?;
            worst = worst.max(rel);
        }
    }
    Ok(format!(
        "40 comparisons, worst relative difference {worst:.2e}"
    ))
}

fn noma_beats_tdma(suite: &[SystemConfig], solved: &[(Solution, Solution)]) -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    for (i, (cfg, (noma, tdma))) in suite.iter().zip(solved).enumerate() {
        let (a, b) = (t_min_noma(cfg), t_min_tdma(cfg));
        ensure(a <= b, || format!("scenario {i}: t_min {a} > {b}"))?;
        let (e_n, e_t) = (noma.energy_total(), tdma.energy_total());
        ensure(e_n <= e_t * (1.0 + 1e-6), || {
            format!("scenario {i}: energy {e_n} > {e_t}")
        })?;
        worst_ratio = worst_ratio.max(e_n / e_t);
    }
    Ok(format!(
        "{} scenarios, largest NOMA/TDMA energy ratio {worst_ratio:.4}",
        suite.len()
    ))
}

fn baseline_dominance(suite: &[SystemConfig], solved: &[(Solution, Solution)]) -> Outcome {
    let mut checked = 0;
    for (i, (cfg, pair)) in suite.iter().zip(solved).enumerate() {
        for joint in [&pair.0, &pair.1] {
            let protocol = joint.protocol();
            for scheme in [SchemeId::CommOnly, SchemeId::CompOnly, SchemeId::DelayMin] {
                let other = solve_baseline(cfg, protocol, scheme);
                if other.status() == Status::Infeasible {
                    continue;
                }
                let (j, o) = (joint.energy_total(), other.energy_total());
                ensure(j <= o * (1.0 + 1e-6), || {
                    format!("scenario {i} {protocol} {scheme}: joint {j} > {o}")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} feasible baseline comparisons"))
}

/// Golden-section search written out here so the check does not share
/// code with the solver.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-14 * b {
            break;
        }
    }
    0.5 * (a + b)
}

fn closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED + 5);
    let log_uniform =
        |rng: &mut ChaCha8Rng, lo: f64, hi: f64| rng.gen_range(lo.ln()..hi.ln()).exp();

    let mut worst_freq: f64 = 0.0;
    for i in 0..1000 {
        let device = DeviceProfile {
            flops_per_update: log_uniform(&mut rng, 1e7, 1e10),
            flops_per_cycle: 1.0,
            capacitance_coeff: log_uniform(&mut rng, 1e-29, 1e-27),
            max_cpu_freq: log_uniform(&mut rng, 5e8, 3e9),
            link: Link::Gain(1e-9),
        };
        let (m, n) = (rng.gen_range(1..=50u32), rng.gen_range(1..=25u32));
        let mn = f64::from(m * n);
        // Prices spanning both clamps and the interior.
        let f_mid = log_uniform(&mut rng, 1e8, 5e9);
        let mu = 2.0 * mn * device.capacitance_coeff * f_mid.powi(3);
        let cycles = device.flops_per_update / device.flops_per_cycle;
        let cost = |f: f64| mn * cycles * device.capacitance_coeff * f * f + mu * cycles / f;
        let closed = optimal_cpu_frequency(mu, &device, m, n);
        let numeric = golden_min(cost, 1e-6 * device.max_cpu_freq, device.max_cpu_freq);
        let rel = (closed - numeric).abs() / numeric;
        ensure(rel <= 1e-6, || {
            format!("pair {i}: closed {closed}, numeric {numeric}")
        })?;
        worst_freq = worst_freq.max(rel);
    }

    let channel = ChannelModel {
        ref_gain: 1e-3,
        ref_distance: 1.0,
        pathloss_exponent: 3.0,
        noise_power: 1e-13,
        bandwidth: 2e6,
    };
    let mut worst_root: f64 = 0.0;
    let mut interior = 0;
    for i in 0..1000 {
        let gain = log_uniform(&mut rng, 1e-11, 1e-8);
        let bits = log_uniform(&mut rng, 1e5, 1e8);
        let p_max = log_uniform(&mut rng, 0.01, 1.0);
        let zeta = log_uniform(&mut rng, 1e-9, 1e2);
        let t = optimal_upload_time(zeta, gain, &channel, bits, p_max, f64::INFINITY);
        let g = upload_time_residual(t, zeta, bits, gain, &channel);
        let t_cap = bits / channel.capacity(p_max * gain / channel.noise_power);
        if t > t_cap * (1.0 + 1e-12) {
            interior += 1;
            // Residual in units of the price it balances.
            let rel = g.abs() / zeta;
            ensure(rel < 1e-9, || {
                format!("pair {i}: residual {rel:e} at t = {t}")
            })?;
            worst_root = worst_root.max(rel);
        } else {
            ensure(g >= -1e-9 * zeta, || {
                format!("pair {i}: full-power time not optimal")
            })?;
        }
    }
    Ok(format!(
        "frequency worst rel {worst_freq:.1e}; upload root worst residual {worst_root:.1e} ({interior} interior roots)"
    ))
}

const PLANS: [(u32, u32); 3] = [(50, 8), (30, 15), (20, 25)];

fn best_plan(distance: f64, t: f64) -> Result<(usize, Vec<f64>), String> {
    let energies: Vec<f64> = PLANS
        .iter()
        .map(|&(m, n)| {
            let cfg = presets::three_device(distance, m, n, t).map_err(|e| e.to_string())?;
            Ok(solve_p1(&cfg).energy_total)
        })
        .collect::<Result<_, String>>()?;
    let best = (0..PLANS.len())
        .min_by(|&a, &b| energies[a].total_cmp(&energies[b]))
        .expect("three plans");
    Ok((best, energies))
}

fn monotonicity() -> Outcome {
    let deadlines = [5.0, 6.0, 8.0, 12.0, 20.0, 30.0, 60.0, 120.0, 300.0];
    let base = presets::desk_a();
    for protocol in Protocol::ALL {
        for scheme in SchemeId::ALL {
            let mut prev = f64::INFINITY;
            for &t in &deadlines {
                let e = solve_baseline(&base.with_max_delay(t).unwrap(), protocol, scheme)
                    .energy_total();
                if e.is_nan() {
                    continue;
                }
                ensure(e <= prev * (1.0 + 1e-6), || {
                    format!("{protocol} {scheme}: rises at T = {t}")
                })?;
                prev = e;
            }
        }
    }

    let distances = [
        50.0, 100.0, 150.0, 200.0, 300.0, 400.0, 500.0, 700.0, 1000.0,
    ];
    let sweep = presets::three_device(100.0, 30, 15, 120.0).unwrap();
    for protocol in Protocol::ALL {
        for scheme in SchemeId::ALL {
            let mut prev: f64 = 0.0;
            for &d in &distances {
                let cfg = sweep.with_recentered_distances(d).unwrap();
                let e = solve_baseline(&cfg, protocol, scheme).energy_total();
                ensure(e.is_finite(), || {
                    format!("{protocol} {scheme}: no solution at {d} m")
                })?;
                ensure(e >= prev * (1.0 - 1e-6), || {
                    format!("{protocol} {scheme}: falls at {d} m")
                })?;
                prev = e;
            }
        }
    }

    // Crossover among the three (M, N) plans under NOMA at T = 120 s.
    let t = 120.0;
    let mut winners = Vec::new();
    for &d in &distances {
        winners.push(best_plan(d, t)?.0);
    }
    ensure(winners[0] == 0, || {
        format!("short range favors {:?}", PLANS[winners[0]])
    })?;
    ensure(*winners.last().unwrap() == 2, || {
        format!("long range favors {:?}", PLANS[*winners.last().unwrap()])
    })?;
    let mut crossings = Vec::new();
    for w in 0..distances.len() - 1 {
        let (a, b) = (winners[w], winners[w + 1]);
        if a == b {
            continue;
        }
        let (mut lo, mut hi) = (distances[w], distances[w + 1]);
        let diff = |d: f64| -> Result<f64, String> {
            let (_, e) = best_plan(d, t)?;
            Ok(e[a] - e[b])
        };
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if diff(mid)? <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        crossings.push(format!(
            "{:?}->{:?} at {:.1} m",
            PLANS[a],
            PLANS[b],
            0.5 * (lo + hi)
        ));
    }
    Ok(format!(
        "monotone in T and distance; crossover {}",
        crossings.join(", ")
    ))
}

/// Allows rounding-level rises once the loss has flattened out.
fn non_increasing(losses: &[f64], label: &str) -> Result<(), String> {
    for (r, pair) in losses.windows(2).enumerate() {
        ensure(pair[1] <= pair[0] * (1.0 + 1e-12), || {
            format!("{label}: loss rises at round {}", r + 1)
        })?;
    }
    Ok(())
}

fn fedsim_checks() -> Outcome {
    let (data, _) = SyntheticSpec::uniform(4, 25, 3, 0.1, 11)
        .generate()
        .map_err(|e| e.to_string())?;
    let pooled = data.pooled();
    let eta = 0.5 * data.stability_threshold();
    let traj = fedsim::run_training(&data, eta, 100, 1, ModelParams::zeros(3))
        .map_err(|e| e.to_string())?;

    let mut w = vec![0.0; 3];
    let mut worst: f64 = 0.0;
    for round in 1..=100 {
        let mut grad = [0.0; 3];
        for s in &pooled {
            let r: f64 = s.y - w.iter().zip(&s.x).map(|(a, b)| a * b).sum::<f64>();
            for (g, x) in grad.iter_mut().zip(&s.x) {
                *g -= r * x / pooled.len() as f64;
            }
        }
        for (wi, g) in w.iter_mut().zip(grad) {
            *wi -= eta * g;
        }
        for (a, b) in traj.params[round].w.iter().zip(&w) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, || {
        format!("federated vs centralized differ by {worst:e}")
    })?;

    // Equal shares: the unweighted mean follows the global loss.
    let (even, _) = SyntheticSpec::uniform(4, 30, 4, 0.3, 3)
        .generate()
        .map_err(|e| e.to_string())?;
    let limit = even.stability_threshold();
    let mut settings = 0;
    for frac in [0.1, 0.5, 0.99] {
        for local in [1, 3, 8] {
            let t = fedsim::run_training(&even, frac * limit, 60, local, ModelParams::zeros(4))
                .map_err(|e| e.to_string())?;
            non_increasing(
                &t.losses,
                &format!("equal data, eta = {frac}/L, N = {local}"),
            )?;
            settings += 1;
        }
    }
    // Uneven shares need sample-weighted averaging to descend the global loss.
    let spec = SyntheticSpec {
        samples_per_device: vec![5, 40, 12, 80],
        dim: 4,
        noise_std: 0.3,
        seed: 3,
    };
    let (uneven, _) = spec.generate().map_err(|e| e.to_string())?;
    let limit = uneven.stability_threshold();
    for frac in [0.1, 0.5, 0.99] {
        let t = fedsim::run_training_with(
            &uneven,
            frac * limit,
            60,
            1,
            ModelParams::zeros(4),
            Aggregation::BySampleCount,
        )
        .map_err(|e| e.to_string())?;
        non_increasing(&t.losses, &format!("uneven data, eta = {frac}/L"))?;
        settings += 1;
    }
    Ok(format!(
        "max per-round deviation {worst:.1e}; loss monotone on {settings} settings"
    ))
}

fn capacity(channel: &MacChannel, received: f64) -> f64 {
    channel.bandwidth * (1.0 + received / channel.noise_power).log2()
}

fn random_channel(rng: &mut ChaCha8Rng, k: usize) -> (MacChannel, Vec<f64>) {
    let gains = (0..k)
        .map(|_| 10f64.powf(rng.gen_range(-11.0..-8.0)))
        .collect();
    let powers = (0..k).map(|_| rng.gen_range(0.001..1.0)).collect();
    (MacChannel::new(gains, 1e-13, 2e6).unwrap(), powers)
}

fn own_region_contains(rates: &[f64], powers: &[f64], channel: &MacChannel) -> bool {
    let k = rates.len();
    (1..1usize << k).all(|mask| {
        let (mut r, mut q) = (0.0, 0.0);
        for i in (0..k).filter(|i| mask >> i & 1 == 1) {
            r += rates[i];
            q += powers[i] * channel.gains[i];
        }
        r <= capacity(channel, q) * (1.0 + 1e-12)
    })
}

fn polymatroid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED + 8);
    for trial in 0..200 {
        let k = 1 + trial % 6;
        let (channel, powers) = random_channel(&mut rng, k);
        let total: f64 = powers.iter().zip(&channel.gains).map(|(p, h)| p * h).sum();
        let sum_cap = capacity(&channel, total);
        let mut order: Vec<usize> = (0..k).collect();
        for _ in 0..4 {
            order.shuffle(&mut rng);
            let dec = DecodingOrder::new(order.clone()).unwrap();
            let rates = sic_corner_rates(&powers, &channel, &dec).unwrap();
            let sum: f64 = rates.iter().sum();
            ensure((sum - sum_cap).abs() <= 1e-12 * sum_cap, || {
                format!("trial {trial}: sum rate {sum} vs {sum_cap}")
            })?;
            ensure(region_contains(&rates, &powers, &channel).unwrap(), || {
                format!("trial {trial}: corner outside region")
            })?;
            ensure(own_region_contains(&rates, &powers, &channel), || {
                format!("trial {trial}: corner outside region (exhaustive)")
            })?;
            let (mut r, mut q) = (0.0, 0.0);
            for &i in &order {
                r += rates[i];
                q += powers[i] * channel.gains[i];
                let cap = capacity(&channel, q);
                ensure((r - cap).abs() <= 1e-9 * cap.max(1.0), || {
                    format!("trial {trial}: prefix not tight")
                })?;
            }
        }
    }

    let mut dominated = 0;
    while dominated < 1000 {
        let k = 2 + dominated % 4;
        let (channel, powers) = random_channel(&mut rng, k);
        let single: Vec<f64> = (0..k)
            .map(|i| capacity(&channel, powers[i] * channel.gains[i]))
            .collect();
        let point: Vec<f64> = single.iter().map(|c| rng.gen_range(0.0..*c)).collect();
        if !own_region_contains(&point, &powers, &channel) {
            continue;
        }
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let corner = sic_corner_rates(&powers, &channel, &weight_order(&weights)).unwrap();
        let dot = |r: &[f64]| r.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
        ensure(dot(&corner) >= dot(&point) * (1.0 - 1e-12), || {
            format!("point {dominated}: interior point beats weighted corner")
        })?;
        dominated += 1;
    }

    for trial in 0..300 {
        let k = 1 + trial % 6;
        let (channel, powers) = random_channel(&mut rng, k);
        let mut exhaustive = f64::INFINITY;
        for mask in 1..1usize << k {
            let members: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            let q: f64 = members.iter().map(|&i| powers[i] * channel.gains[i]).sum();
            exhaustive = exhaustive.min(capacity(&channel, q) / members.len() as f64);
        }
        let fast = common_rate(&powers, &channel).unwrap();
        ensure((fast - exhaustive).abs() <= 1e-12 * exhaustive, || {
            format!("trial {trial}: common rate {fast} vs {exhaustive}")
        })?;
    }
    Ok("order invariance, prefix tightness, 1000 dominance points, common rate K <= 6".into())
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(args.iter().copied(), &mut out, &mut err);
    ensure(code == cli::EXIT_OK, || {
        format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err))
    })?;
    Ok(out)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/desk_a.json");
    let mut files = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("sweep{run}.csv"));
        let p = path.to_str().unwrap();
        run_cli(&[
            "fedge",
            "sweep",
            scenario,
            "--param",
            "T",
            "--values",
            "4,4.38,5,10,30,100",
            "--schemes",
            "joint,comm_only,comp_only,delay_min",
            "--out",
            p,
        ])?;
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(files[0] == files[1], || "sweep CSVs differ".into())?;
    let a = run_cli(&["fedge", "solve", scenario, "--protocol", "tdma"])?;
    let b = run_cli(&["fedge", "solve", scenario, "--protocol", "tdma"])?;
    ensure(a == b, || "solve output differs".into())?;
    Ok(format!(
        "sweep CSV identical across runs ({} bytes)",
        files[0].len()
    ))
}

fn main() {
    let suite = suite();
    let solved = solve_both(&suite);
    let criteria: Vec<(&str, Check)> = vec![
        ("duality gap", Box::new(duality_gap)),
        ("grid oracle equivalence", Box::new(oracle_equivalence)),
        (
            "NOMA never worse than TDMA",
            Box::new(|| noma_beats_tdma(&suite, &solved)),
        ),
        (
            "baseline dominance",
            Box::new(|| baseline_dominance(&suite, &solved)),
        ),
        ("closed-form certification", Box::new(closed_forms)),
        ("monotonicity and plan crossover", Box::new(monotonicity)),
        ("federated simulation", Box::new(fedsim_checks)),
        ("polymatroid suite", Box::new(polymatroid)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS [{secs:.1} s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL [{secs:.1} s] {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
