//! JSON instance files.
//!
//! Resources and types are referenced by 0-based position; products are
//! listed in id order, so the first product has id 1. Attraction weights
//! are arrays with one entry per product.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use choicerm::choice::{Assortment, AttractionModel, ChoiceModel, MixtureModel, TabulatedModel};
use choicerm::model::{CustomerType, Instance, Product, ProductId, RateCurve, Resource};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub resources: Vec<ResourceEntry>,
    pub products: Vec<ProductEntry>,
    pub types: Vec<TypeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceEntry {
    pub capacity: u32,
    #[serde(default = "full_horizon")]
    pub expiry: f64,
}

fn full_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductEntry {
    pub resource: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeEntry {
    pub rate: RateEntry,
    pub choice: ChoiceEntry,
    /// Type-specific rewards keyed by product id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rewards: BTreeMap<ProductId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateEntry {
    Constant(f64),
    Piecewise {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChoiceEntry {
    Mnl {
        nu: Vec<f64>,
    },
    Attraction {
        mu: Vec<f64>,
        nu: Vec<f64>,
    },
    Mixture {
        segments: Vec<SegmentEntry>,
    },
    Table {
        products: usize,
        entries: Vec<TableRow>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentEntry {
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub assortment: Vec<ProductId>,
    /// Purchase probabilities keyed by product id; `0` is no-purchase.
    #[serde(deserialize_with = "product_keyed")]
    pub probabilities: BTreeMap<ProductId, f64>,
}

/// Tagged enums buffer their content, which loses serde_json's coercion of
/// string object keys to integers, so the keys are parsed here.
fn product_keyed<'de, D>(de: D) -> Result<BTreeMap<ProductId, f64>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    BTreeMap::<String, f64>::deserialize(de)?
        .into_iter()
        .map(|(key, p)| {
            key.parse()
                .map(|id| (id, p))
                .map_err(|_| serde::de::Error::custom(format!("product id expected, got {key:?}")))
        })
        .collect()
}

#[derive(Debug)]
pub enum LoadError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    /// The document parsed but describes an impossible model.
    Invalid(String),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(e) => write!(f, "cannot read instance: {e}"),
            LoadError::Parse(e) => write!(f, "malformed instance document: {e}"),
            LoadError::Invalid(msg) => write!(f, "invalid instance: {msg}"),
        }
    }
}

impl std::error::Error for LoadError {}

fn attraction(mu: Option<Vec<f64>>, nu: Vec<f64>) -> Result<AttractionModel, LoadError> {
    let mu = mu.unwrap_or_else(|| vec![0.0; nu.len()]);
    AttractionModel::new(mu, nu).map_err(|e| LoadError::Invalid(e.to_string()))
}

impl ChoiceEntry {
    fn into_model(self) -> Result<ChoiceModel, LoadError> {
        Ok(match self {
            ChoiceEntry::Mnl { nu } => ChoiceModel::Attraction(attraction(None, nu)?),
            ChoiceEntry::Attraction { mu, nu } => {
                ChoiceModel::Attraction(attraction(Some(mu), nu)?)
            }
            ChoiceEntry::Mixture { segments } => {
                let segments = segments
                    .into_iter()
                    .map(|s| Ok((s.weight, attraction(s.mu, s.nu)?)))
                    .collect::<Result<Vec<_>, LoadError>>()?;
                ChoiceModel::Mixture(
                    MixtureModel::new(segments).map_err(|e| LoadError::Invalid(e.to_string()))?,
                )
            }
            ChoiceEntry::Table { products, entries } => {
                let table = entries
                    .into_iter()
                    .map(|row| (Assortment::new(row.assortment), row.probabilities))
                    .collect();
                ChoiceModel::Table(
                    TabulatedModel::new(products, table)
                        .map_err(|e| LoadError::Invalid(e.to_string()))?,
                )
            }
        })
    }

    fn from_model(model: &ChoiceModel) -> Self {
        let shadowed = |m: &AttractionModel| m.mu_weights().iter().any(|&w| w != 0.0);
        match model {
            ChoiceModel::Attraction(m) if shadowed(m) => ChoiceEntry::Attraction {
                mu: m.mu_weights().to_vec(),
                nu: m.nu_weights().to_vec(),
            },
            ChoiceModel::Attraction(m) => ChoiceEntry::Mnl {
                nu: m.nu_weights().to_vec(),
            },
            ChoiceModel::Mixture(mix) => ChoiceEntry::Mixture {
                segments: mix
                    .segments()
                    .iter()
                    .map(|(w, m)| SegmentEntry {
                        weight: *w,
                        mu: shadowed(m).then(|| m.mu_weights().to_vec()),
                        nu: m.nu_weights().to_vec(),
                    })
                    .collect(),
            },
            ChoiceModel::Table(t) => ChoiceEntry::Table {
                products: t.num_products(),
                entries: t
                    .entries()
                    .iter()
                    .map(|(s, row)| TableRow {
                        assortment: s.products().to_vec(),
                        probabilities: row.clone(),
                    })
                    .collect(),
            },
        }
    }
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance, LoadError> {
        let resources = self
            .resources
            .into_iter()
            .map(|r| Resource {
                capacity: r.capacity,
                expiry: r.expiry,
            })
            .collect();
        let products = self
            .products
            .into_iter()
            .map(|p| Product {
                resource: p.resource,
                reward: p.reward,
            })
            .collect();
        let types = self
            .types
            .into_iter()
            .map(|t| {
                let rate = match t.rate {
                    RateEntry::Constant(r) => RateCurve::constant(r),
                    RateEntry::Piecewise { breakpoints, rates } => RateCurve { breakpoints, rates },
                };
                Ok(CustomerType {
                    rate,
                    choice: t.choice.into_model()?,
                    reward_override: t.rewards,
                })
            })
            .collect::<Result<Vec<_>, LoadError>>()?;
        Ok(Instance {
            resources,
            products,
            types,
        })
    }

    pub fn from_instance(inst: &Instance) -> Self {
        InstanceFile {
            resources: inst
                .resources
                .iter()
                .map(|r| ResourceEntry {
                    capacity: r.capacity,
                    expiry: r.expiry,
                })
                .collect(),
            products: inst
                .products
                .iter()
                .map(|p| ProductEntry {
                    resource: p.resource,
                    reward: p.reward,
                })
                .collect(),
            types: inst
                .types
                .iter()
                .map(|t| TypeEntry {
                    rate: if t.rate.rates.len() == 1 {
                        RateEntry::Constant(t.rate.rates[0])
                    } else {
                        RateEntry::Piecewise {
                            breakpoints: t.rate.breakpoints.clone(),
                            rates: t.rate.rates.clone(),
                        }
                    },
                    choice: ChoiceEntry::from_model(&t.choice),
                    rewards: t.reward_override.clone(),
                })
                .collect(),
        }
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, LoadError> {
    serde_json::from_str::<InstanceFile>(text)
        .map_err(LoadError::Parse)?
        .into_instance()
}

pub fn load_instance(path: &Path) -> Result<Instance, LoadError> {
    parse_instance(&fs::read_to_string(path).map_err(LoadError::Io)?)
}

pub fn instance_json(inst: &Instance) -> String {
    let mut text = serde_json::to_string_pretty(&InstanceFile::from_instance(inst))
        .expect("instance files always serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use choicerm::generate::{random_instance, spike_instance, GeneratorConfig, SpikeConfig};

    const SMALL: &str = r#"{
        "resources": [{"capacity": 2}],
        "products": [{"resource": 0, "reward": 1.0}, {"resource": 0, "reward": 0.5}],
        "types": [
            {"rate": 3.0, "choice": {"kind": "mnl", "nu": [1.0, 2.0]}},
            {"rate": {"breakpoints": [0.0, 0.5, 1.0], "rates": [0.0, 4.0]},
             "choice": {"kind": "attraction", "mu": [0.1, 0.0], "nu": [1.0, 1.0]},
             "rewards": {"1": 1.5}}
        ]
    }"#;

    #[test]
    fn parses_the_documented_shape() {
        let inst = parse_instance(SMALL).unwrap();
        assert_eq!(inst.num_products(), 2);
        assert_eq!(inst.resources[0].expiry, 1.0);
        assert_eq!(inst.reward(1, 1), 1.5);
        assert_eq!(inst.reward(0, 1), 1.0);
        assert_eq!(inst.types[1].rate.rate_at(0.7), 4.0);
        assert!(inst.validate().passed());
    }

    #[test]
    fn round_trips_every_family() {
        let mut cfg = GeneratorConfig::enumerable();
        cfg.families = vec![
            choicerm::generate::ModelFamily::Mnl,
            choicerm::generate::ModelFamily::Gam,
            choicerm::generate::ModelFamily::Mixture,
            choicerm::generate::ModelFamily::Table,
        ];
        cfg.products = 2..=4;
        for seed in 0..20 {
            let inst = random_instance(&cfg, seed);
            assert_eq!(parse_instance(&instance_json(&inst)).unwrap(), inst);
        }
        let spike = spike_instance(&SpikeConfig::default());
        assert_eq!(parse_instance(&instance_json(&spike)).unwrap(), spike);
    }

    #[test]
    fn syntax_and_semantic_errors_differ() {
        assert!(matches!(parse_instance("{"), Err(LoadError::Parse(_))));
        assert!(matches!(
            parse_instance(r#"{"resources": [], "products": [], "types": [], "extra": 1}"#),
            Err(LoadError::Parse(_))
        ));
        let negative = SMALL.replace("\"nu\": [1.0, 2.0]", "\"nu\": [1.0, -2.0]");
        assert!(matches!(
            parse_instance(&negative),
            Err(LoadError::Invalid(_))
        ));
    }
}
