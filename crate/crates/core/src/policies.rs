//! The online policies: first-come-first-served, primal routing and
//! optimized primal routing.
//!
//! FCFS and PR share the static random offer drawn from the CDLP solution;
//! they differ in acceptance. OPR re-optimizes the offer for every arrival
//! using the PR marginal values as resource costs.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cdlp::{CdlpSolution, SubproblemSolver};
use crate::choice::{prune_nonpositive, Assortment};
use crate::model::{Instance, ProductId, NO_PURCHASE};
use crate::valuefn::{MarginalValue, ResourceValueGrid, ValueFnError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("purchase of product {product} from depleted resource {resource}")]
    Depleted { product: ProductId, resource: usize },
    #[error("offer {assortment} contains unavailable product {product}")]
    UnavailableOffered {
        assortment: Assortment,
        product: ProductId,
    },
    #[error("offer value {offered} below the fallback floor {floor}")]
    BelowFloor { offered: f64, floor: f64 },
    #[error(transparent)]
    ValueFn(#[from] ValueFnError),
    #[error("unknown policy {0:?}; expected fcfs, pr or opr")]
    UnknownPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKind {
    Fcfs,
    Pr,
    Opr,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Fcfs, PolicyKind::Pr, PolicyKind::Opr];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Fcfs => "fcfs",
            PolicyKind::Pr => "pr",
            PolicyKind::Opr => "opr",
        }
    }

    /// Whether the policy needs value grids.
    pub fn uses_grids(self) -> bool {
        !matches!(self, PolicyKind::Fcfs)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fcfs" => Ok(PolicyKind::Fcfs),
            "pr" => Ok(PolicyKind::Pr),
            "opr" => Ok(PolicyKind::Opr),
            _ => Err(PolicyError::UnknownPolicy(s.to_string())),
        }
    }
}

/// A policy together with its substitution semantics.
///
/// In relaxed mode the static offer may contain unavailable products; a
/// customer choosing one simply leaves. Otherwise unavailable products are
/// removed from every offer. OPR never offers unavailable products, so the
/// flag has no effect on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Policy {
    pub kind: PolicyKind,
    pub relaxed: bool,
}

impl Policy {
    pub fn new(kind: PolicyKind) -> Self {
        Policy {
            kind,
            relaxed: false,
        }
    }

    pub fn relaxed(kind: PolicyKind) -> Self {
        Policy {
            kind,
            relaxed: kind != PolicyKind::Opr,
        }
    }

    pub fn label(&self) -> String {
        if self.relaxed {
            format!("{}-relaxed", self.kind)
        } else {
            self.kind.name().to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub inventory: Vec<u32>,
    pub now: f64,
}

impl PolicyState {
    pub fn initial(inst: &Instance) -> Self {
        PolicyState {
            inventory: inst.resources.iter().map(|r| r.capacity).collect(),
            now: 0.0,
        }
    }

    /// Resource `l` still has stock and has not expired.
    pub fn resource_open(&self, inst: &Instance, l: usize) -> bool {
        self.inventory[l] > 0 && self.now <= inst.resources[l].expiry
    }

    pub fn product_available(&self, inst: &Instance, n: ProductId) -> bool {
        n != NO_PURCHASE && self.resource_open(inst, inst.resource_of(n))
    }

    /// `s` without its unavailable products.
    pub fn restrict(&self, inst: &Instance, s: &Assortment) -> Assortment {
        s.filter(|n| self.product_available(inst, n))
    }
}

/// Draws the static offer for a type-`k` arrival: assortments of `O_k` in
/// ascending order partition `[0, 1)`, and the residual mass offers nothing.
pub fn fcfs_offer(solution: &CdlpSolution, k: usize, u: f64) -> Assortment {
    let mut cum = 0.0;
    for (s, &x) in &solution.offers[k] {
        cum += x;
        if u < cum {
            return s.clone();
        }
    }
    Assortment::empty()
}

pub fn fcfs_accept(inst: &Instance, state: &PolicyState, n: ProductId) -> bool {
    state.product_available(inst, n)
}

/// Marginal value of the next unit of the resource behind product `n`.
pub fn marginal_for(
    inst: &Instance,
    state: &PolicyState,
    grids: &[ResourceValueGrid],
    n: ProductId,
) -> Result<MarginalValue, PolicyError> {
    let l = inst.resource_of(n);
    if !state.resource_open(inst, l) {
        return Ok(MarginalValue::Infinite);
    }
    let t = state.now.min(1.0);
    Ok(grids[l].marginal_value(state.inventory[l], t)?)
}

/// Accept iff the resource is open and the reward reaches its marginal
/// value; ties accept.
pub fn pr_accept(
    inst: &Instance,
    state: &PolicyState,
    grids: &[ResourceValueGrid],
    k: usize,
    n: ProductId,
) -> Result<bool, PolicyError> {
    if !state.product_available(inst, n) {
        return Ok(false);
    }
    Ok(marginal_for(inst, state, grids, n)?.admits(inst.reward(k, n)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OprDecision {
    pub assortment: Assortment,
    /// Expected marginal reward of `assortment`.
    pub marginal_reward: f64,
    /// Expected marginal reward of the best pruned static offer.
    pub floor: f64,
}

/// OPR offer for a type-`k` arrival in `state`.
///
/// The optimizer's assortment is kept unless the pruned best static offer
/// is strictly better, so the returned value never falls below `floor`.
pub fn opr_offer(
    inst: &Instance,
    state: &PolicyState,
    grids: &[ResourceValueGrid],
    solution: &CdlpSolution,
    solver: &SubproblemSolver,
    k: usize,
) -> Result<OprDecision, PolicyError> {
    let mut price = vec![0.0; inst.num_products() + 1];
    let mut universe = Vec::new();
    for n in inst.product_ids() {
        if let MarginalValue::Finite(delta) = marginal_for(inst, state, grids, n)? {
            price[n] = inst.reward(k, n) - delta;
            if price[n] > 0.0 {
                universe.push(n);
            }
        }
    }
    let model = &inst.types[k].choice;

    let mut floor = 0.0;
    let mut fallback = Assortment::empty();
    for s in solution.offers[k].keys() {
        let h = prune_nonpositive(&state.restrict(inst, s), &price);
        let v = model.expected_revenue(&h, &price);
        if v > floor {
            floor = v;
            fallback = h;
        }
    }

    let (assortment, marginal_reward) = match solver.solve(model, &price, &universe) {
        Ok(r) if r.value >= floor => (r.assortment, r.value),
        _ => (fallback, floor),
    };

    let unavailable = assortment
        .iter()
        .find(|&n| !state.product_available(inst, n));
    if let Some(n) = unavailable {
        return Err(PolicyError::UnavailableOffered {
            assortment,
            product: n,
        });
    }
    if marginal_reward < floor {
        return Err(PolicyError::BelowFloor {
            offered: marginal_reward,
            floor,
        });
    }
    Ok(OprDecision {
        assortment,
        marginal_reward,
        floor,
    })
}

/// Depletes one unit of the resource behind `n`; no-purchase is a no-op.
pub fn apply_purchase(
    inst: &Instance,
    state: &mut PolicyState,
    n: ProductId,
) -> Result<(), PolicyError> {
    if n == NO_PURCHASE {
        return Ok(());
    }
    let l = inst.resource_of(n);
    if state.inventory[l] == 0 {
        return Err(PolicyError::Depleted {
            product: n,
            resource: l,
        });
    }
    state.inventory[l] -= 1;
    Ok(())
}
