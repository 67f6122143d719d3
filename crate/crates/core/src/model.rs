//! Problem instances: resources, products, customer types and their
//! piecewise-constant arrival-rate curves.
//!
//! The selling horizon is always `[0, 1]`. Products are numbered `1..=N`;
//! id `0` is the no-purchase option and carries no reward. Resources and
//! customer types are indexed from zero.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::choice::ChoiceModel;

/// Product identifier. `0` is the no-purchase option.
pub type ProductId = usize;

/// The no-purchase option.
pub const NO_PURCHASE: ProductId = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("resource index {0} out of range")]
    UnknownResource(usize),
    #[error("product id {0} out of range")]
    UnknownProduct(ProductId),
    #[error("customer type {0} out of range")]
    UnknownType(usize),
    #[error("scaling factor must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("invalid rate curve: {0}")]
    RateCurve(String),
    #[error("instance failed validation:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resource {
    pub capacity: u32,
    /// Time after which products of this resource can no longer be sold.
    pub expiry: f64,
}

impl Resource {
    pub fn new(capacity: u32) -> Self {
        Resource {
            capacity,
            expiry: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Product {
    pub resource: usize,
    pub reward: f64,
}

/// Piecewise-constant arrival rate on `[0, 1]`.
///
/// Segment `i` covers `[breakpoints[i], breakpoints[i + 1])` at rate
/// `rates[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub breakpoints: Vec<f64>,
    pub rates: Vec<f64>,
}

impl RateCurve {
    pub fn new(breakpoints: Vec<f64>, rates: Vec<f64>) -> Result<Self, ModelError> {
        let curve = RateCurve { breakpoints, rates };
        let problems = curve.problems();
        if let Some(p) = problems.into_iter().next() {
            return Err(ModelError::RateCurve(p.1));
        }
        Ok(curve)
    }

    pub fn constant(rate: f64) -> Self {
        RateCurve {
            breakpoints: vec![0.0, 1.0],
            rates: vec![rate],
        }
    }

    /// Zero outside `[start, end)`, `rate` inside.
    pub fn window(start: f64, end: f64, rate: f64) -> Self {
        let mut breakpoints = vec![0.0];
        let mut rates = Vec::new();
        if start > 0.0 {
            breakpoints.push(start);
            rates.push(0.0);
        }
        rates.push(rate);
        breakpoints.push(end);
        if end < 1.0 {
            rates.push(0.0);
            breakpoints.push(1.0);
        }
        RateCurve { breakpoints, rates }
    }

    fn problems(&self) -> Vec<(IssueKind, String)> {
        let mut out = Vec::new();
        let bp = &self.breakpoints;
        if bp.len() != self.rates.len() + 1 || self.rates.is_empty() {
            out.push((
                IssueKind::MalformedRateCurve,
                format!(
                    "{} breakpoints for {} rates (need rates + 1)",
                    bp.len(),
                    self.rates.len()
                ),
            ));
            return out;
        }
        if bp[0] != 0.0 || bp[bp.len() - 1] != 1.0 {
            out.push((
                IssueKind::MalformedRateCurve,
                "breakpoints must start at 0 and end at 1".to_string(),
            ));
        }
        if bp.windows(2).any(|w| !(w[0] < w[1])) {
            out.push((
                IssueKind::NonMonotoneBreakpoints,
                "breakpoints must be strictly increasing".to_string(),
            ));
        }
        if let Some(r) = self.rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            out.push((IssueKind::NegativeRate, format!("negative rate {r}")));
        }
        out
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.rates)
            .map(|(w, &r)| (w[0], w[1], r))
    }

    /// Rate at time `t`; segments are closed on the left.
    pub fn rate_at(&self, t: f64) -> f64 {
        let idx = self.breakpoints[1..].partition_point(|&b| b <= t);
        self.rates[idx.min(self.rates.len() - 1)]
    }

    /// Exact integral of the rate over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.segments()
            .map(|(s, e, r)| {
                let lo = s.max(a);
                let hi = e.min(b);
                if hi > lo {
                    r * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Expected number of arrivals over the horizon.
    pub fn total(&self) -> f64 {
        self.segments().map(|(s, e, r)| r * (e - s)).sum()
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    fn scaled(&self, theta: f64) -> Self {
        RateCurve {
            breakpoints: self.breakpoints.clone(),
            rates: self.rates.iter().map(|r| r * theta).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomerType {
    pub rate: RateCurve,
    pub choice: ChoiceModel,
    /// Type-specific rewards; products not listed use the base reward.
    pub reward_override: BTreeMap<ProductId, f64>,
}

impl CustomerType {
    pub fn new(rate: RateCurve, choice: ChoiceModel) -> Self {
        CustomerType {
            rate,
            choice,
            reward_override: BTreeMap::new(),
        }
    }

    /// Expected number of arrivals of this type over `[0, 1]`.
    pub fn total_arrivals(&self) -> f64 {
        self.rate.total()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub resources: Vec<Resource>,
    /// `products[i]` is product id `i + 1`.
    pub products: Vec<Product>,
    pub types: Vec<CustomerType>,
}

impl Instance {
    pub fn num_products(&self) -> usize {
        self.products.len()
    }

    pub fn num_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    /// All product ids, ascending.
    pub fn product_ids(&self) -> impl Iterator<Item = ProductId> {
        1..=self.products.len()
    }

    pub fn product(&self, n: ProductId) -> Result<&Product, ModelError> {
        if n == NO_PURCHASE {
            return Err(ModelError::UnknownProduct(n));
        }
        self.products
            .get(n - 1)
            .ok_or(ModelError::UnknownProduct(n))
    }

    /// Resource consumed by product `n`. Panics on an invalid id.
    pub fn resource_of(&self, n: ProductId) -> usize {
        self.products[n - 1].resource
    }

    /// Reward earned when a type-`k` customer buys product `n`.
    pub fn reward(&self, k: usize, n: ProductId) -> f64 {
        if n == NO_PURCHASE {
            return 0.0;
        }
        self.types[k]
            .reward_override
            .get(&n)
            .copied()
            .unwrap_or(self.products[n - 1].reward)
    }

    /// Reward vector of type `k`, indexed by product id (entry 0 is zero).
    pub fn rewards_for(&self, k: usize) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(self.product_ids().map(|n| self.reward(k, n)))
            .collect()
    }

    pub fn products_of_resource(&self, l: usize) -> Result<Vec<ProductId>, ModelError> {
        if l >= self.resources.len() {
            return Err(ModelError::UnknownResource(l));
        }
        Ok(self
            .product_ids()
            .filter(|&n| self.products[n - 1].resource == l)
            .collect())
    }

    pub fn total_arrivals(&self, k: usize) -> Result<f64, ModelError> {
        self.types
            .get(k)
            .map(CustomerType::total_arrivals)
            .ok_or(ModelError::UnknownType(k))
    }

    /// Multiply every capacity and every arrival rate by `theta`.
    ///
    /// Capacities are rounded half up.
    pub fn scale(&self, theta: f64) -> Result<Instance, ModelError> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(ModelError::NonPositiveScale(theta));
        }
        let resources = self
            .resources
            .iter()
            .map(|r| Resource {
                capacity: (theta * r.capacity as f64 + 0.5).floor() as u32,
                expiry: r.expiry,
            })
            .collect();
        let types = self
            .types
            .iter()
            .map(|t| CustomerType {
                rate: t.rate.scaled(theta),
                choice: t.choice.clone(),
                reward_override: t.reward_override.clone(),
            })
            .collect();
        Ok(Instance {
            resources,
            products: self.products.clone(),
            types,
        })
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n_products = self.products.len();

        for (l, r) in self.resources.iter().enumerate() {
            if !(r.expiry > 0.0 && r.expiry <= 1.0) {
                report.error(
                    IssueKind::BadExpiry,
                    format!("resource {l}: expiry {} outside (0, 1]", r.expiry),
                );
            }
        }
        for (i, p) in self.products.iter().enumerate() {
            let n = i + 1;
            if p.resource >= self.resources.len() {
                report.error(
                    IssueKind::DanglingResource,
                    format!("product {n}: dangling resource {}", p.resource),
                );
            }
            if !(p.reward.is_finite() && p.reward >= 0.0) {
                report.error(
                    IssueKind::NegativeReward,
                    format!("product {n}: negative reward {}", p.reward),
                );
            }
        }
        for (k, t) in self.types.iter().enumerate() {
            for (kind, msg) in t.rate.problems() {
                report.error(kind, format!("type {k}: {msg}"));
            }
            for msg in t.choice.problems(n_products) {
                report.error(IssueKind::BadChoiceModel, format!("type {k}: {msg}"));
            }
            for (&n, &r) in &t.reward_override {
                if n == NO_PURCHASE || n > n_products {
                    report.error(
                        IssueKind::BadRewardOverride,
                        format!("type {k}: reward override for unknown product {n}"),
                    );
                } else if !(r.is_finite() && r >= 0.0) {
                    report.error(
                        IssueKind::BadRewardOverride,
                        format!("type {k}: negative reward override {r} for product {n}"),
                    );
                }
            }
        }
        if !report.passed() {
            return report;
        }
        // Sales after expiry are filtered at the policy layer; flag types
        // that would want them.
        for (k, t) in self.types.iter().enumerate() {
            for (l, r) in self.resources.iter().enumerate() {
                if r.expiry >= 1.0 || t.rate.integral(r.expiry, 1.0) <= 0.0 {
                    continue;
                }
                for (i, p) in self.products.iter().enumerate() {
                    if p.resource == l && t.choice.can_choose(i + 1) {
                        report.warning(
                            IssueKind::ReachableAfterExpiry,
                            format!(
                                "type {k}: product {} reachable after resource {l} expires at {}",
                                i + 1,
                                r.expiry
                            ),
                        );
                    }
                }
            }
        }
        report
    }

    /// `Ok` if [`Instance::validate`] reports no errors.
    pub fn ensure_valid(&self) -> Result<(), ModelError> {
        let report = self.validate();
        if report.passed() {
            Ok(())
        } else {
            Err(ModelError::Invalid(report))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    DanglingResource,
    NegativeReward,
    BadExpiry,
    MalformedRateCurve,
    NonMonotoneBreakpoints,
    NegativeRate,
    BadChoiceModel,
    BadRewardOverride,
    ReachableAfterExpiry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub severity: Severity,
    pub kind: IssueKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn error(&mut self, kind: IssueKind, message: String) {
        self.issues.push(Issue {
            severity: Severity::Error,
            kind,
            message,
        });
    }

    fn warning(&mut self, kind: IssueKind, message: String) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            kind,
            message,
        });
    }

    pub fn passed(&self) -> bool {
        self.issues.iter().all(|i| i.severity == Severity::Warning)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let tag = match issue.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, "{tag}: {}", issue.message)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::AttractionModel;

    fn one_product(rate: RateCurve) -> Instance {
        Instance {
            resources: vec![Resource::new(1)],
            products: vec![Product {
                resource: 0,
                reward: 1.0,
            }],
            types: vec![CustomerType::new(
                rate,
                ChoiceModel::Attraction(AttractionModel::mnl(vec![1.0])),
            )],
        }
    }

    #[test]
    fn well_formed_instance_passes() {
        let inst = one_product(RateCurve::constant(1.0));
        assert!(inst.validate().passed());
        assert!(inst.validate().issues.is_empty());
    }

    #[test]
    fn dangling_resource_is_reported() {
        let mut inst = one_product(RateCurve::constant(1.0));
        inst.products[0].resource = 3;
        let report = inst.validate();
        assert!(!report.passed());
        assert!(report.has(IssueKind::DanglingResource));
        assert!(report.to_string().contains("dangling resource"));
    }

    #[test]
    fn negative_rate_is_reported() {
        let inst = one_product(RateCurve {
            breakpoints: vec![0.0, 1.0],
            rates: vec![-1.0],
        });
        let report = inst.validate();
        assert!(report.has(IssueKind::NegativeRate));
        assert!(report.to_string().contains("negative rate"));
    }

    #[test]
    fn non_monotone_breakpoints_are_reported() {
        let curve = RateCurve {
            breakpoints: vec![0.0, 0.6, 0.4, 1.0],
            rates: vec![1.0, 1.0, 1.0],
        };
        assert!(RateCurve::new(curve.breakpoints.clone(), curve.rates.clone()).is_err());
        assert!(one_product(curve)
            .validate()
            .has(IssueKind::NonMonotoneBreakpoints));
    }

    #[test]
    fn expired_but_reachable_is_a_warning() {
        let mut inst = one_product(RateCurve::constant(1.0));
        inst.resources[0].expiry = 0.5;
        let report = inst.validate();
        assert!(report.passed());
        assert!(report.has(IssueKind::ReachableAfterExpiry));
    }

    #[test]
    fn total_arrivals_is_the_rectangle_area() {
        assert_eq!(RateCurve::constant(2.0).total(), 2.0);
        let front = RateCurve::new(vec![0.0, 0.25, 1.0], vec![4.0, 0.0]).unwrap();
        assert_eq!(front.total(), 1.0);
        assert_eq!(RateCurve::constant(0.0).total(), 0.0);
        assert_eq!(front.rate_at(0.1), 4.0);
        assert_eq!(front.rate_at(0.25), 0.0);
        assert_eq!(front.rate_at(1.0), 0.0);
        assert!((front.integral(0.2, 0.5) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn products_of_resource_partitions_ids() {
        let mnl = ChoiceModel::Attraction(AttractionModel::mnl(vec![1.0; 3]));
        let inst = Instance {
            resources: vec![Resource::new(1), Resource::new(1), Resource::new(1)],
            products: vec![
                Product {
                    resource: 0,
                    reward: 1.0,
                },
                Product {
                    resource: 0,
                    reward: 1.0,
                },
                Product {
                    resource: 1,
                    reward: 1.0,
                },
            ],
            types: vec![CustomerType::new(RateCurve::constant(1.0), mnl)],
        };
        assert_eq!(inst.products_of_resource(0).unwrap(), vec![1, 2]);
        assert_eq!(inst.products_of_resource(1).unwrap(), vec![3]);
        assert!(inst.products_of_resource(2).unwrap().is_empty());
        assert_eq!(
            inst.products_of_resource(3),
            Err(ModelError::UnknownResource(3))
        );
    }

    #[test]
    fn scaling_multiplies_capacity_and_rates() {
        let mut inst = one_product(RateCurve::constant(1.0));
        inst.resources = vec![Resource::new(2), Resource::new(3)];
        assert_eq!(inst.scale(1.0).unwrap(), inst);
        let s = inst.scale(4.0).unwrap();
        assert_eq!(s.resources[0].capacity, 8);
        assert_eq!(s.resources[1].capacity, 12);
        assert_eq!(s.types[0].rate.rates, vec![4.0]);
        assert_eq!(s.products, inst.products);

        inst.resources = vec![Resource::new(3)];
        assert_eq!(inst.scale(2.5).unwrap().resources[0].capacity, 8);
        assert_eq!(inst.scale(0.0), Err(ModelError::NonPositiveScale(0.0)));
        assert!(inst.scale(-1.0).is_err());
    }

    #[test]
    fn type_override_replaces_base_reward() {
        let mut inst = one_product(RateCurve::constant(1.0));
        inst.types[0].reward_override.insert(1, 5.0);
        assert_eq!(inst.reward(0, 1), 5.0);
        assert_eq!(inst.reward(0, NO_PURCHASE), 0.0);
        assert_eq!(inst.rewards_for(0), vec![0.0, 5.0]);
    }
}
