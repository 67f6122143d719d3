//! Column generation invariants on generated instances.

use choicerm::cdlp::{solve_cdlp, solve_cdlp_with_demand, CdlpOptions, SubproblemSolver};
use choicerm::generate::{random_instance, GeneratorConfig, ModelFamily};
use choicerm::model::Instance;
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = Instance> {
    (any::<u64>(), prop::bool::ANY).prop_map(|(seed, tables)| {
        let cfg = if tables {
            GeneratorConfig::enumerable()
        } else {
            GeneratorConfig::default()
        };
        random_instance(&cfg, seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solution_is_feasible_and_certified(inst in instance()) {
        let sol = solve_cdlp(&inst, &CdlpOptions::default()).unwrap();
        let tol = 1e-7 * (1.0 + sol.objective);
        prop_assert!(sol.certified);
        // Offer probabilities per type form a subdistribution.
        for offers in &sol.offers {
            prop_assert!(offers.values().all(|&x| x > 0.0));
            prop_assert!(offers.values().sum::<f64>() <= 1.0 + 1e-9);
        }
        // Expected consumption fits capacity.
        let demand = sol.static_selection(&inst).expected_demand;
        for (d, r) in demand.iter().zip(&inst.resources) {
            prop_assert!(*d <= r.capacity as f64 + tol);
        }
        // Duals are nonnegative and close the gap.
        prop_assert!(sol.pi.iter().chain(&sol.sigma).all(|&y| y >= -1e-9));
        prop_assert!((sol.dual_bound(&inst) - sol.objective).abs() <= tol);
    }

    #[test]
    fn basic_support_is_small(inst in instance()) {
        let sol = solve_cdlp(&inst, &CdlpOptions::default()).unwrap();
        prop_assert!(sol.support_size() <= inst.num_resources() + inst.num_types());
    }

    #[test]
    fn master_objective_never_decreases(inst in instance()) {
        let sol = solve_cdlp(&inst, &CdlpOptions::default()).unwrap();
        prop_assert_eq!(sol.history.len(), sol.iterations);
        for w in sol.history.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()));
        }
        let last = *sol.history.last().unwrap();
        prop_assert!((last - sol.objective).abs() <= 1e-12 * (1.0 + last.abs()));
    }

    #[test]
    fn objective_scales_linearly(inst in instance(), theta in 2u32..=8) {
        let theta = theta as f64;
        let base = solve_cdlp(&inst, &CdlpOptions::default()).unwrap();
        let scaled = solve_cdlp(&inst.scale(theta).unwrap(), &CdlpOptions::default()).unwrap();
        prop_assert!((scaled.objective - theta * base.objective).abs() <= 1e-7 * (1.0 + scaled.objective));
    }

    #[test]
    fn solvers_agree_on_attraction_instances(seed in any::<u64>()) {
        let cfg = GeneratorConfig {
            families: vec![ModelFamily::Mnl, ModelFamily::Gam],
            ..GeneratorConfig::default()
        };
        let inst = random_instance(&cfg, seed);
        let sort = solve_cdlp(&inst, &CdlpOptions::exact(SubproblemSolver::Sort)).unwrap();
        let brute = solve_cdlp(&inst, &CdlpOptions::exact(SubproblemSolver::brute_force())).unwrap();
        prop_assert!((sort.objective - brute.objective).abs() <= 1e-7 * (1.0 + sort.objective));
    }

    #[test]
    fn more_demand_never_lowers_the_bound(inst in instance(), extra in 1.0f64..3.0) {
        let base = solve_cdlp(&inst, &CdlpOptions::default()).unwrap();
        let demand: Vec<f64> = base.demand.iter().map(|d| d * extra).collect();
        let more = solve_cdlp_with_demand(&inst, &demand, &CdlpOptions::default()).unwrap();
        prop_assert!(more.objective >= base.objective - 1e-9 * (1.0 + base.objective));
    }
}
