//! Seeded random instances and fixed demonstration instances.
//!
//! Random instances draw every parameter uniformly from the ranges in
//! [`GeneratorConfig`]; the same `(config, seed)` always yields the same
//! instance.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::choice::{Assortment, AttractionModel, ChoiceModel, MixtureModel, TabulatedModel};
use crate::model::{CustomerType, Instance, Product, RateCurve, Resource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Mnl,
    /// Attraction model with shadow attraction `mu` as well as `nu`.
    Gam,
    /// Two-segment MNL mixture.
    Mixture,
    /// Enumerated table of a random two-segment mixture.
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub products: RangeInclusive<usize>,
    pub resources: RangeInclusive<usize>,
    pub types: RangeInclusive<usize>,
    pub capacity: RangeInclusive<u32>,
    /// Expected arrivals per type over the horizon.
    pub arrivals: (f64, f64),
    pub reward: (f64, f64),
    /// Attraction weights `nu`.
    pub attraction: (f64, f64),
    /// Shadow weights `mu` (GAM only).
    pub shadow: (f64, f64),
    /// Probability that a type ignores a given product.
    pub ignore_probability: f64,
    /// Probability that a type pays its own reward for a given product.
    pub override_probability: f64,
    /// Maximum number of rate segments per type; 1 means constant rates.
    pub max_segments: usize,
    /// Families to pick from, uniformly per type.
    pub families: Vec<ModelFamily>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            products: 2..=6,
            resources: 1..=3,
            types: 1..=3,
            capacity: 1..=6,
            arrivals: (1.0, 6.0),
            reward: (0.5, 2.0),
            attraction: (0.2, 2.0),
            shadow: (0.0, 0.5),
            ignore_probability: 0.2,
            override_probability: 0.3,
            max_segments: 3,
            families: vec![ModelFamily::Mnl, ModelFamily::Gam, ModelFamily::Mixture],
        }
    }
}

impl GeneratorConfig {
    /// Small instances for checks that enumerate every assortment.
    pub fn enumerable() -> Self {
        GeneratorConfig {
            products: 2..=8,
            resources: 1..=4,
            types: 1..=3,
            families: vec![ModelFamily::Mnl, ModelFamily::Gam, ModelFamily::Table],
            ..GeneratorConfig::default()
        }
    }

    /// Single-resource instances.
    pub fn single_resource() -> Self {
        GeneratorConfig {
            resources: 1..=1,
            ..GeneratorConfig::default()
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn attraction(
    rng: &mut ChaCha8Rng,
    cfg: &GeneratorConfig,
    n: usize,
    shadow: bool,
) -> AttractionModel {
    let mut nu = vec![0.0; n];
    let mut mu = vec![0.0; n];
    for i in 0..n {
        if !rng.gen_bool(cfg.ignore_probability) {
            nu[i] = uniform(rng, cfg.attraction);
            if shadow {
                mu[i] = uniform(rng, cfg.shadow);
            }
        }
    }
    if nu.iter().all(|&v| v == 0.0) {
        let i = rng.gen_range(0..n);
        nu[i] = uniform(rng, cfg.attraction);
    }
    AttractionModel::new(mu, nu).expect("generated weights are nonnegative")
}

fn choice_model(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig, n: usize) -> ChoiceModel {
    let family = *cfg.families.choose(rng).unwrap_or(&ModelFamily::Mnl);
    match family {
        ModelFamily::Mnl => ChoiceModel::Attraction(attraction(rng, cfg, n, false)),
        ModelFamily::Gam => ChoiceModel::Attraction(attraction(rng, cfg, n, true)),
        ModelFamily::Mixture | ModelFamily::Table => {
            let w = rng.gen_range(0.2..0.8);
            let mix = MixtureModel::new(vec![
                (w, attraction(rng, cfg, n, false)),
                (1.0 - w, attraction(rng, cfg, n, false)),
            ])
            .expect("weights sum to one");
            let model = ChoiceModel::Mixture(mix);
            if family == ModelFamily::Table {
                ChoiceModel::Table(TabulatedModel::from_model(&model))
            } else {
                model
            }
        }
    }
}

fn rate_curve(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig) -> RateCurve {
    let total = uniform(rng, cfg.arrivals);
    let segments = rng.gen_range(1..=cfg.max_segments.max(1));
    if segments == 1 {
        return RateCurve::constant(total);
    }
    let mut cuts: Vec<f64> = (1..segments).map(|_| rng.gen_range(0.05..0.95)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut breakpoints = vec![0.0];
    breakpoints.extend(cuts);
    breakpoints.push(1.0);
    let weights: Vec<f64> = (1..breakpoints.len())
        .map(|_| rng.gen_range(0.1..1.0))
        .collect();
    let mass: f64 = weights
        .iter()
        .zip(breakpoints.windows(2))
        .map(|(w, b)| w * (b[1] - b[0]))
        .sum();
    let rates = weights.iter().map(|w| w * total / mass).collect();
    RateCurve::new(breakpoints, rates).expect("generated curve is well formed")
}

/// A random instance. Every resource carries at least one product.
pub fn random_instance(cfg: &GeneratorConfig, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l_count = rng.gen_range(cfg.resources.clone());
    let n_count = rng.gen_range(cfg.products.clone()).max(l_count);
    let k_count = rng.gen_range(cfg.types.clone());

    let resources = (0..l_count)
        .map(|_| Resource::new(rng.gen_range(cfg.capacity.clone())))
        .collect();
    let mut owners: Vec<usize> = (0..n_count)
        .map(|i| {
            if i < l_count {
                i
            } else {
                rng.gen_range(0..l_count)
            }
        })
        .collect();
    owners.shuffle(&mut rng);
    let products = owners
        .into_iter()
        .map(|resource| Product {
            resource,
            reward: uniform(&mut rng, cfg.reward),
        })
        .collect();
    let types = (0..k_count)
        .map(|_| {
            let rate = rate_curve(&mut rng, cfg);
            let mut ty = CustomerType::new(rate, choice_model(&mut rng, cfg, n_count));
            for n in 1..=n_count {
                if rng.gen_bool(cfg.override_probability) {
                    ty.reward_override.insert(n, uniform(&mut rng, cfg.reward));
                }
            }
            ty
        })
        .collect();
    Instance {
        resources,
        products,
        types,
    }
}

/// Two resources, four products and two MNL types with constant rates;
/// demand exceeds capacity on both resources. Used as the base of scaling
/// experiments.
pub fn scaling_base_instance() -> Instance {
    let product = |resource, reward| Product { resource, reward };
    Instance {
        resources: vec![Resource::new(3), Resource::new(2)],
        products: vec![
            product(0, 1.0),
            product(0, 0.6),
            product(1, 1.2),
            product(1, 0.5),
        ],
        types: vec![
            CustomerType::new(
                RateCurve::constant(4.0),
                ChoiceModel::Attraction(AttractionModel::mnl(vec![1.0, 1.5, 0.8, 1.2])),
            ),
            CustomerType::new(
                RateCurve::constant(3.0),
                ChoiceModel::Attraction(AttractionModel::mnl(vec![0.5, 1.0, 1.5, 0.0])),
            ),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeConfig {
    /// Inverse width of the terminal burst; 1 spreads it over the horizon.
    pub sharpness: f64,
    pub capacity: u32,
    /// Expected low-reward arrivals.
    pub low_arrivals: f64,
    /// Expected high-reward arrivals, all inside the burst.
    pub high_arrivals: f64,
    pub low_reward: f64,
    pub high_reward: f64,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        SpikeConfig {
            sharpness: 1.0,
            capacity: 1,
            low_arrivals: 1.0,
            high_arrivals: 1.0,
            low_reward: 1.0,
            high_reward: 4.0,
        }
    }
}

/// One product on one resource. A low-reward type arrives uniformly over
/// the horizon; a high-reward type arrives in `[1 - 1/sharpness, 1)`.
/// Every arrival buys the product when offered.
pub fn spike_instance(cfg: &SpikeConfig) -> Instance {
    let table = BTreeMap::from([(Assortment::new([1]), BTreeMap::from([(1, 1.0)]))]);
    let model = ChoiceModel::Table(TabulatedModel::new(1, table).expect("valid table"));
    let start = 1.0 - 1.0 / cfg.sharpness.max(1.0);
    let width = 1.0 - start;
    let mut low = CustomerType::new(RateCurve::constant(cfg.low_arrivals), model.clone());
    low.reward_override.insert(1, cfg.low_reward);
    let high = CustomerType::new(
        RateCurve::window(start, 1.0, cfg.high_arrivals / width),
        model,
    );
    Instance {
        resources: vec![Resource::new(cfg.capacity)],
        products: vec![Product {
            resource: 0,
            reward: cfg.high_reward,
        }],
        types: vec![low, high],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instances_validate() {
        for cfg in [
            GeneratorConfig::default(),
            GeneratorConfig::enumerable(),
            GeneratorConfig::single_resource(),
        ] {
            for seed in 0..40 {
                let inst = random_instance(&cfg, seed);
                let report = inst.validate();
                assert!(report.passed(), "seed {seed}: {report}");
                assert!(
                    cfg.products.contains(&inst.num_products())
                        || inst.num_products() == inst.num_resources()
                );
                for l in 0..inst.num_resources() {
                    assert!(!inst.products_of_resource(l).unwrap().is_empty());
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig::default();
        assert_eq!(random_instance(&cfg, 11), random_instance(&cfg, 11));
        assert_ne!(random_instance(&cfg, 11), random_instance(&cfg, 12));
    }

    #[test]
    fn arrival_mass_is_in_range() {
        let cfg = GeneratorConfig::default();
        for seed in 0..40 {
            let inst = random_instance(&cfg, seed);
            for k in 0..inst.num_types() {
                let total = inst.total_arrivals(k).unwrap();
                assert!((1.0 - 1e-9..=6.0 + 1e-9).contains(&total));
            }
        }
    }

    #[test]
    fn spike_shape() {
        let inst = spike_instance(&SpikeConfig {
            sharpness: 4.0,
            ..SpikeConfig::default()
        });
        assert!(inst.validate().passed());
        assert!((inst.total_arrivals(1).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(inst.types[1].rate.rate_at(0.5), 0.0);
        assert_eq!(inst.types[1].rate.rate_at(0.8), 4.0);
        assert_eq!(inst.reward(0, 1), 1.0);
        assert_eq!(inst.reward(1, 1), 4.0);
        let flat = spike_instance(&SpikeConfig::default());
        assert_eq!(flat.types[1].rate, RateCurve::constant(1.0));
    }
}
