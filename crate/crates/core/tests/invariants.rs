//! Properties of the joint solvers over randomized scenarios.

mod common;

use fedge::baselines::{solve_baseline, SchemeId};
use fedge::oracle::audit_solution;
use fedge::solution::{Protocol, Status, GAP_TOL};
use fedge::solver_noma::t_min_noma;
use fedge::solver_tdma::t_min_tdma;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario(seed: u64, k: usize) -> fedge::scenario::SystemConfig {
    common::random_scenario(&mut ChaCha8Rng::seed_from_u64(seed), k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_are_certified_and_audited(seed in any::<u64>(), k in 1usize..=4) {
        let cfg = scenario(seed, k);
        for protocol in Protocol::ALL {
            let sol = solve_baseline(&cfg, protocol, SchemeId::Joint);
            prop_assert_eq!(sol.status(), Status::Optimal);
            prop_assert!(sol.duality_gap_rel() <= GAP_TOL);
            prop_assert!(sol.duality_gap_rel() >= -1e-9);
            prop_assert!(sol.delay(&cfg) <= cfg.plan.max_delay * (1.0 + 1e-9));
            let audit = audit_solution(&sol, &cfg);
            prop_assert!(audit.pass, "{:?}", audit);
        }
    }

    #[test]
    fn noma_is_never_worse(seed in any::<u64>(), k in 1usize..=4) {
        let cfg = scenario(seed, k);
        prop_assert!(t_min_noma(&cfg) <= t_min_tdma(&cfg));
        let noma = solve_baseline(&cfg, Protocol::Noma, SchemeId::Joint).energy_total();
        let tdma = solve_baseline(&cfg, Protocol::Tdma, SchemeId::Joint).energy_total();
        prop_assert!(noma <= tdma * (1.0 + 1e-6));
    }

    #[test]
    fn longer_deadlines_never_cost_more(seed in any::<u64>(), k in 1usize..=3, stretch in 1.01f64..10.0) {
        let cfg = scenario(seed, k);
        let longer = cfg.with_max_delay(cfg.plan.max_delay * stretch).unwrap();
        for protocol in Protocol::ALL {
            let a = solve_baseline(&cfg, protocol, SchemeId::Joint).energy_total();
            let b = solve_baseline(&longer, protocol, SchemeId::Joint).energy_total();
            prop_assert!(b <= a * (1.0 + 1e-6));
        }
    }

    #[test]
    fn joint_dominates_every_baseline(seed in any::<u64>(), k in 1usize..=4) {
        let cfg = scenario(seed, k);
        for protocol in Protocol::ALL {
            let joint = solve_baseline(&cfg, protocol, SchemeId::Joint).energy_total();
            for scheme in [SchemeId::CommOnly, SchemeId::CompOnly, SchemeId::DelayMin] {
                let other = solve_baseline(&cfg, protocol, scheme);
                if other.status() == Status::Optimal {
                    prop_assert!(joint <= other.energy_total() * (1.0 + 1e-6));
                }
            }
        }
    }
}
