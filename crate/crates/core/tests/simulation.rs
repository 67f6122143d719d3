//! Sampling statistics and pathwise invariants of the simulator.

use std::collections::BTreeMap;

use choicerm::cdlp::{solve_cdlp, CdlpOptions};
use choicerm::choice::Assortment;
use choicerm::generate::{random_instance, scaling_base_instance, GeneratorConfig};
use choicerm::model::RateCurve;
use choicerm::par::Execution;
use choicerm::policies::{fcfs_offer, Policy, PolicyKind};
use choicerm::sim::{generate_arrivals, replication_seeds, run_policy, PolicyContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Within `z` standard errors of a binomial or Poisson mean.
fn close(observed: f64, expected: f64, se: f64, z: f64) -> bool {
    (observed - expected).abs() <= z * se
}

#[test]
fn arrival_counts_are_poisson() {
    let inst = scaling_base_instance();
    let paths = 4000;
    let mut sums = vec![0.0; inst.num_types()];
    let mut squares = vec![0.0; inst.num_types()];
    for seed in 0..paths {
        let path = generate_arrivals(&inst, seed);
        assert!(path.events.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(path.events.iter().all(|e| (0.0..1.0).contains(&e.time)));
        for (k, &c) in path.counts.iter().enumerate() {
            sums[k] += c as f64;
            squares[k] += (c as f64).powi(2);
        }
    }
    for k in 0..inst.num_types() {
        let lambda = inst.total_arrivals(k).unwrap();
        let mean = sums[k] / paths as f64;
        let var = squares[k] / paths as f64 - mean * mean;
        assert!(
            close(mean, lambda, (lambda / paths as f64).sqrt(), 4.5),
            "type {k}: mean {mean}"
        );
        assert!((var / lambda - 1.0).abs() < 0.1, "type {k}: variance {var}");
    }
}

#[test]
fn arrivals_respect_rate_segments() {
    let mut inst = scaling_base_instance();
    inst.types[0].rate = RateCurve::window(0.5, 0.75, 8.0);
    inst.types[1].rate = RateCurve::new(vec![0.0, 0.5, 1.0], vec![6.0, 0.0]).unwrap();
    let paths = 3000;
    let mut total = [0.0; 2];
    for seed in 0..paths {
        let path = generate_arrivals(&inst, seed);
        for e in &path.events {
            match e.customer_type {
                0 => assert!((0.5..0.75).contains(&e.time), "{}", e.time),
                _ => assert!(e.time < 0.5, "{}", e.time),
            }
            total[e.customer_type] += 1.0;
        }
    }
    for (k, expected) in [2.0, 3.0].into_iter().enumerate() {
        let mean = total[k] / paths as f64;
        assert!(
            close(mean, expected, (expected / paths as f64).sqrt(), 4.5),
            "type {k}: {mean}"
        );
    }
}

#[test]
fn fcfs_offer_frequencies_match_the_solution() {
    let inst = scaling_base_instance();
    let sol = solve_cdlp(&inst, &CdlpOptions::default()).unwrap();
    let draws = 50_000;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for k in 0..inst.num_types() {
        let mut counts: BTreeMap<Assortment, f64> = BTreeMap::new();
        for _ in 0..draws {
            *counts.entry(fcfs_offer(&sol, k, rng.gen())).or_default() += 1.0;
        }
        let mut expected = sol.offers[k].clone();
        let residual = 1.0 - expected.values().sum::<f64>();
        if residual > 1e-12 {
            *expected.entry(Assortment::empty()).or_default() += residual;
        }
        for (s, p) in &expected {
            let freq = counts.get(s).copied().unwrap_or(0.0) / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt().max(1e-12);
            assert!(
                close(freq, *p, se, 4.5),
                "type {k} offer {s}: {freq} vs {p}"
            );
        }
        assert!(counts.keys().all(|s| expected.contains_key(s)));
    }
}

fn prepared(seed: u64) -> PolicyContext {
    let inst = random_instance(&GeneratorConfig::default(), seed);
    PolicyContext::prepare(inst, &CdlpOptions::default(), 2000, Execution::Sequential).unwrap()
}

fn all_policies() -> Vec<Policy> {
    PolicyKind::ALL
        .into_iter()
        .flat_map(|k| [Policy::new(k), Policy::relaxed(k)])
        .collect()
}

#[test]
fn sales_never_exceed_capacity() {
    for seed in 0..10 {
        let ctx = prepared(seed);
        for m in 0..50 {
            let (path_seed, choice_seed) = replication_seeds(seed, m);
            let path = generate_arrivals(&ctx.instance, path_seed);
            for policy in all_policies() {
                let run = run_policy(&ctx, policy, &path, choice_seed, true).unwrap();
                for (sold, r) in run.sales.iter().zip(&ctx.instance.resources) {
                    assert!(*sold <= r.capacity);
                }
                let trace = run.trace.unwrap();
                let earned: f64 = trace.iter().filter(|t| t.accepted).map(|t| t.reward).sum();
                assert!((earned - run.reward).abs() < 1e-9);
                assert!(run.reward >= 0.0);
            }
        }
    }
}

#[test]
fn policies_share_arrivals_and_choice_draws() {
    let ctx = prepared(3);
    let (path_seed, choice_seed) = replication_seeds(3, 0);
    let path = generate_arrivals(&ctx.instance, path_seed);
    let runs: Vec<_> = all_policies()
        .into_iter()
        .map(|p| run_policy(&ctx, p, &path, choice_seed, true).unwrap())
        .collect();
    for run in &runs {
        let trace = run.trace.as_ref().unwrap();
        assert_eq!(trace.len(), path.events.len());
        for (row, e) in trace.iter().zip(&path.events) {
            assert_eq!((row.time, row.customer_type), (e.time, e.customer_type));
        }
    }
    // Identical inputs reproduce identical runs.
    let again = run_policy(&ctx, all_policies()[0], &path, choice_seed, true).unwrap();
    assert_eq!(again, runs[0]);
}

#[test]
fn expired_resources_sell_nothing() {
    let mut inst = scaling_base_instance();
    inst.resources[0].expiry = 0.4;
    let ctx =
        PolicyContext::prepare(inst, &CdlpOptions::default(), 2000, Execution::Sequential).unwrap();
    for m in 0..200 {
        let (path_seed, choice_seed) = replication_seeds(5, m);
        let path = generate_arrivals(&ctx.instance, path_seed);
        for policy in all_policies() {
            let run = run_policy(&ctx, policy, &path, choice_seed, true).unwrap();
            for row in run.trace.unwrap() {
                if row.accepted && ctx.instance.resource_of(row.choice) == 0 {
                    assert!(row.time <= 0.4, "{} sold at {}", policy.label(), row.time);
                }
            }
        }
    }
}
