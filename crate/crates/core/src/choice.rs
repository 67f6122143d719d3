//! Customer choice models `P(n, S)`.
//!
//! Three families are supported:
//!
//! * attraction form `(mu_n + nu_n) / (sum_all mu + sum_{i in S} nu_i + 1)`,
//!   which covers independent demand (`nu = 0`), MNL (`mu = 0`) and the
//!   general attraction model;
//! * finite mixtures of attraction models (mixed MNL);
//! * explicit probability tables, used to pose arbitrary `P(n, S)`.
//!
//! Products are ordered by ascending id everywhere, and the no-purchase
//! option always comes last when sampling.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::{ProductId, NO_PURCHASE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChoiceError {
    #[error("product {product} is not in assortment {assortment}")]
    NotOffered {
        product: ProductId,
        assortment: Assortment,
    },
    #[error("invalid choice model: {0}")]
    Invalid(String),
}

/// A set of products offered together. Never contains the no-purchase id;
/// stored sorted and deduplicated so that the derived ordering is
/// lexicographic on product ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assortment(Vec<ProductId>);

impl Assortment {
    pub fn empty() -> Self {
        Assortment(Vec::new())
    }

    pub fn new(products: impl IntoIterator<Item = ProductId>) -> Self {
        let mut v: Vec<ProductId> = products.into_iter().filter(|&n| n != NO_PURCHASE).collect();
        v.sort_unstable();
        v.dedup();
        Assortment(v)
    }

    /// Subset of `universe` selected by the bits of `mask`.
    pub fn from_mask(mask: u64, universe: &[ProductId]) -> Self {
        Assortment::new(
            universe
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &n)| n),
        )
    }

    pub fn products(&self) -> &[ProductId] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = ProductId> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, n: ProductId) -> bool {
        self.0.binary_search(&n).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn filter(&self, mut keep: impl FnMut(ProductId) -> bool) -> Assortment {
        Assortment(self.0.iter().copied().filter(|&n| keep(n)).collect())
    }
}

impl fmt::Display for Assortment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<ProductId> for Assortment {
    fn from_iter<I: IntoIterator<Item = ProductId>>(iter: I) -> Self {
        Assortment::new(iter)
    }
}

/// Attraction-form choice model. `mu[i]` and `nu[i]` belong to product `i + 1`.
///
/// `mu` enters the denominator for every product whether offered or not;
/// the no-purchase weight is fixed to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionModel {
    mu: Vec<f64>,
    nu: Vec<f64>,
    base: f64,
}

impl AttractionModel {
    pub fn new(mu: Vec<f64>, nu: Vec<f64>) -> Result<Self, ChoiceError> {
        if mu.len() != nu.len() {
            return Err(ChoiceError::Invalid(format!(
                "mu has {} entries, nu has {}",
                mu.len(),
                nu.len()
            )));
        }
        if mu.iter().chain(&nu).any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ChoiceError::Invalid("negative attraction weight".into()));
        }
        Ok(Self::new_unchecked(mu, nu))
    }

    fn new_unchecked(mu: Vec<f64>, nu: Vec<f64>) -> Self {
        let base = 1.0 + mu.iter().sum::<f64>();
        AttractionModel { mu, nu, base }
    }

    /// Multinomial logit with preference weights `nu`.
    pub fn mnl(nu: Vec<f64>) -> Self {
        let mu = vec![0.0; nu.len()];
        AttractionModel::new(mu, nu).expect("MNL weights must be non-negative")
    }

    pub fn num_products(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self, n: ProductId) -> f64 {
        self.mu[n - 1]
    }

    pub fn nu(&self, n: ProductId) -> f64 {
        self.nu[n - 1]
    }

    pub fn mu_weights(&self) -> &[f64] {
        &self.mu
    }

    pub fn nu_weights(&self) -> &[f64] {
        &self.nu
    }

    fn denominator(&self, s: &Assortment) -> f64 {
        self.base + s.iter().map(|n| self.nu[n - 1]).sum::<f64>()
    }

    fn probability_in(&self, n: ProductId, s: &Assortment) -> f64 {
        (self.mu[n - 1] + self.nu[n - 1]) / self.denominator(s)
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.mu.len() != self.nu.len() {
            out.push("mu and nu lengths differ".into());
        }
        if self
            .mu
            .iter()
            .chain(&self.nu)
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            out.push("negative attraction weight".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    segments: Vec<(f64, AttractionModel)>,
}

impl MixtureModel {
    pub fn new(segments: Vec<(f64, AttractionModel)>) -> Result<Self, ChoiceError> {
        let m = MixtureModel { segments };
        match m.problems().into_iter().next() {
            Some(p) => Err(ChoiceError::Invalid(p)),
            None => Ok(m),
        }
    }

    pub fn segments(&self) -> &[(f64, AttractionModel)] {
        &self.segments
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.segments.is_empty() {
            out.push("mixture without segments".into());
            return out;
        }
        let n = self.segments[0].1.num_products();
        if self.segments.iter().any(|(_, m)| m.num_products() != n) {
            out.push("mixture segments disagree on product count".into());
        }
        if self
            .segments
            .iter()
            .any(|(w, _)| !(w.is_finite() && *w >= 0.0))
        {
            out.push("negative mixture weight".into());
        }
        let total: f64 = self.segments.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            out.push(format!("mixture weights sum to {total}, not 1"));
        }
        for (_, m) in &self.segments {
            out.extend(m.problems());
        }
        out
    }
}

/// Explicit `P(n, S)` table. Assortments missing from the table send all
/// mass to the no-purchase option.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedModel {
    num_products: usize,
    table: BTreeMap<Assortment, BTreeMap<ProductId, f64>>,
}

impl TabulatedModel {
    pub fn new(
        num_products: usize,
        table: BTreeMap<Assortment, BTreeMap<ProductId, f64>>,
    ) -> Result<Self, ChoiceError> {
        let m = TabulatedModel {
            num_products,
            table,
        };
        match m.problems().into_iter().next() {
            Some(p) => Err(ChoiceError::Invalid(p)),
            None => Ok(m),
        }
    }

    /// Builds a complete table by evaluating `model` on every subset of
    /// `1..=num_products`.
    pub fn from_model(model: &ChoiceModel) -> Self {
        let n = model.num_products();
        let universe: Vec<ProductId> = (1..=n).collect();
        let mut table = BTreeMap::new();
        for mask in 0..(1u64 << n) {
            let s = Assortment::from_mask(mask, &universe);
            let mut row = BTreeMap::new();
            let probs = model.probabilities(&s);
            let mut used = 0.0;
            for (n, p) in s.iter().zip(probs) {
                row.insert(n, p);
                used += p;
            }
            row.insert(NO_PURCHASE, 1.0 - used);
            table.insert(s, row);
        }
        TabulatedModel {
            num_products: n,
            table,
        }
    }

    pub fn num_products(&self) -> usize {
        self.num_products
    }

    pub fn entries(&self) -> &BTreeMap<Assortment, BTreeMap<ProductId, f64>> {
        &self.table
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (s, row) in &self.table {
            if s.iter().any(|n| n > self.num_products) {
                out.push(format!("table assortment {s} names an unknown product"));
                continue;
            }
            let mut total = 0.0;
            for (&n, &p) in row {
                if !(p.is_finite() && p >= 0.0) {
                    out.push(format!("negative probability {p} for product {n} in {s}"));
                }
                if n != NO_PURCHASE && !s.contains(n) && p != 0.0 {
                    out.push(format!("product {n} has mass {p} but is not in {s}"));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-9 {
                out.push(format!("probabilities for {s} sum to {total}, not 1"));
            }
        }
        out
    }

    fn probability_in(&self, n: ProductId, s: &Assortment) -> f64 {
        self.table
            .get(s)
            .and_then(|row| row.get(&n))
            .copied()
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChoiceModel {
    Attraction(AttractionModel),
    Mixture(MixtureModel),
    Table(TabulatedModel),
}

impl ChoiceModel {
    pub fn num_products(&self) -> usize {
        match self {
            ChoiceModel::Attraction(m) => m.num_products(),
            ChoiceModel::Mixture(m) => m.segments.first().map_or(0, |(_, s)| s.num_products()),
            ChoiceModel::Table(t) => t.num_products,
        }
    }

    pub fn as_attraction(&self) -> Option<&AttractionModel> {
        match self {
            ChoiceModel::Attraction(m) => Some(m),
            _ => None,
        }
    }

    pub(crate) fn problems(&self, num_products: usize) -> Vec<String> {
        let mut out = match self {
            ChoiceModel::Attraction(m) => m.problems(),
            ChoiceModel::Mixture(m) => m.problems(),
            ChoiceModel::Table(t) => t.problems(),
        };
        if self.num_products() != num_products {
            out.push(format!(
                "choice model covers {} products, instance has {num_products}",
                self.num_products()
            ));
        }
        out
    }

    /// Whether product `n` can ever be chosen.
    pub fn can_choose(&self, n: ProductId) -> bool {
        match self {
            ChoiceModel::Attraction(m) => m.mu(n) + m.nu(n) > 0.0,
            ChoiceModel::Mixture(m) => m
                .segments
                .iter()
                .any(|(w, s)| *w > 0.0 && s.mu(n) + s.nu(n) > 0.0),
            ChoiceModel::Table(t) => t
                .table
                .values()
                .any(|row| row.get(&n).is_some_and(|p| *p > 0.0)),
        }
    }

    /// `P(n, S)`; `n` must be in `S` or be the no-purchase option.
    pub fn probability(&self, n: ProductId, s: &Assortment) -> Result<f64, ChoiceError> {
        if n == NO_PURCHASE {
            let bought: f64 = self.probabilities(s).iter().sum();
            return Ok((1.0 - bought).max(0.0));
        }
        if !s.contains(n) {
            return Err(ChoiceError::NotOffered {
                product: n,
                assortment: s.clone(),
            });
        }
        Ok(self.probability_in(n, s))
    }

    fn probability_in(&self, n: ProductId, s: &Assortment) -> f64 {
        match self {
            ChoiceModel::Attraction(m) => m.probability_in(n, s),
            ChoiceModel::Mixture(m) => m
                .segments
                .iter()
                .map(|(w, seg)| w * seg.probability_in(n, s))
                .sum(),
            ChoiceModel::Table(t) => t.probability_in(n, s),
        }
    }

    /// Purchase probabilities of the products of `s`, in ascending id order.
    pub fn probabilities(&self, s: &Assortment) -> Vec<f64> {
        match self {
            ChoiceModel::Attraction(m) => {
                let d = m.denominator(s);
                s.iter().map(|n| (m.mu(n) + m.nu(n)) / d).collect()
            }
            ChoiceModel::Mixture(mix) => {
                let mut out = vec![0.0; s.len()];
                for (w, seg) in &mix.segments {
                    let d = seg.denominator(s);
                    for (o, n) in out.iter_mut().zip(s.iter()) {
                        *o += w * (seg.mu(n) + seg.nu(n)) / d;
                    }
                }
                out
            }
            ChoiceModel::Table(t) => s.iter().map(|n| t.probability_in(n, s)).collect(),
        }
    }

    /// Inverse-transform sample: products of `s` in ascending id order,
    /// then no-purchase.
    pub fn sample(&self, s: &Assortment, u: f64) -> ProductId {
        let mut cum = 0.0;
        for (n, p) in s.iter().zip(self.probabilities(s)) {
            cum += p;
            if u < cum {
                return n;
            }
        }
        NO_PURCHASE
    }

    /// `sum_{n in S} P(n, S) * price[n]`; `price` is indexed by product id.
    pub fn expected_revenue(&self, s: &Assortment, price: &[f64]) -> f64 {
        s.iter()
            .zip(self.probabilities(s))
            .map(|(n, p)| p * price[n])
            .sum()
    }

    /// Whether dropping non-positively priced products from any assortment
    /// never lowers its expected revenue, for every price vector.
    ///
    /// For a fixed pair `H ⊆ S` the condition is linear in the prices, so it
    /// reduces to `P(n, H) >= P(n, S)` for all `n in H`. Attraction models and
    /// their mixtures always satisfy it; tables are checked by enumerating
    /// every subset pair, so this is exponential in the product count.
    pub fn satisfies_pruning_property(&self) -> bool {
        let ChoiceModel::Table(t) = self else {
            return true;
        };
        let n = t.num_products;
        assert!(n <= 16, "pruning check enumerates 3^N subset pairs");
        let universe: Vec<ProductId> = (1..=n).collect();
        for mask in 0..(1u64 << n) {
            let s = Assortment::from_mask(mask, &universe);
            let ps: Vec<f64> = self.probabilities(&s);
            let mut sub = mask;
            loop {
                let h = Assortment::from_mask(sub, &universe);
                for n in h.iter() {
                    let idx = s.products().binary_search(&n).unwrap();
                    if t.probability_in(n, &h) + 1e-12 < ps[idx] {
                        return false;
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & mask;
            }
        }
        true
    }
}

/// Products of `s` whose price is strictly positive.
pub fn prune_nonpositive(s: &Assortment, price: &[f64]) -> Assortment {
    s.filter(|n| price[n] > 0.0)
}
