//! Per-resource value functions of primal routing.
//!
//! Once the static offer is fixed, each resource sees independent demand
//! classes: a type-`k` arrival picks product `n` with probability `s*_kn`,
//! so class `(k, n)` arrives at rate `lambda_k(t) s*_kn` and pays
//! `r_kn`. The optimal single-resource admission value satisfies
//!
//! ```text
//! dV(c,t)/dt = -sum_classes rate(t) [r - (V(c,t) - V(c-1,t))]^+
//! V(0,t) = 0,  V(c,1) = 0
//! ```
//!
//! which is integrated backward on a uniform grid with explicit Euler.
//! Rates are averaged exactly over each cell, so piecewise-constant curves
//! introduce no quadrature error of their own.

use thiserror::Error;

use crate::model::{Instance, ModelError, ProductId};
use crate::par::{try_map_indexed, Execution};

pub const DEFAULT_GRID: usize = 10_000;
pub const MIN_GRID: usize = 100;

/// Largest `h * total rate` allowed per Euler step; finer grids are used
/// automatically when the requested one is coarser.
const MAX_STEP_MASS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValueFnError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("grid of {0} steps is below the minimum of {MIN_GRID}")]
    GridTooSmall(usize),
    #[error("selection probabilities have {got} rows for {expected} types")]
    BadSelection { expected: usize, got: usize },
    #[error("inventory {c} outside 0..={capacity}")]
    InventoryOutOfRange { c: u32, capacity: u32 },
    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("no value grid for resource {0}")]
    MissingResource(usize),
}

/// Demand for one resource from type `customer_type` choosing `product`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandClass {
    pub customer_type: usize,
    pub product: ProductId,
    /// Share of type arrivals that pick this product (`s*_kn`).
    pub share: f64,
    pub reward: f64,
}

/// Marginal value of one unit of inventory. Zero inventory is an explicit
/// infinite marker so that no infinity enters arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalValue {
    Finite(f64),
    Infinite,
}

impl MarginalValue {
    /// Whether a sale at `reward` clears the threshold (`reward >= value`).
    pub fn admits(self, reward: f64) -> bool {
        match self {
            MarginalValue::Finite(v) => reward >= v,
            MarginalValue::Infinite => false,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            MarginalValue::Finite(v) => Some(v),
            MarginalValue::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceValueGrid {
    pub resource: usize,
    pub capacity: u32,
    steps: usize,
    /// `values[c * (steps + 1) + g]`.
    values: Vec<f64>,
    pub classes: Vec<DemandClass>,
}

impl ResourceValueGrid {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, g: usize) -> f64 {
        g as f64 / self.steps as f64
    }

    pub fn value(&self, c: u32, g: usize) -> f64 {
        self.values[c as usize * (self.steps + 1) + g]
    }

    /// `V(C, 0)`.
    pub fn initial_value(&self) -> f64 {
        self.value(self.capacity, 0)
    }

    fn locate(&self, t: f64) -> Result<(usize, f64), ValueFnError> {
        if !(-1e-12..=1.0 + 1e-12).contains(&t) {
            return Err(ValueFnError::TimeOutOfRange(t));
        }
        let x = t.clamp(0.0, 1.0) * self.steps as f64;
        let g = (x.floor() as usize).min(self.steps - 1);
        Ok((g, x - g as f64))
    }

    /// `V(c, t)` with linear interpolation between grid times.
    pub fn value_at(&self, c: u32, t: f64) -> Result<f64, ValueFnError> {
        if c > self.capacity {
            return Err(ValueFnError::InventoryOutOfRange {
                c,
                capacity: self.capacity,
            });
        }
        let (g, frac) = self.locate(t)?;
        Ok(self.value(c, g) * (1.0 - frac) + self.value(c, g + 1) * frac)
    }

    /// `V(c, t) - V(c - 1, t)`, infinite at `c = 0`.
    pub fn marginal_value(&self, c: u32, t: f64) -> Result<MarginalValue, ValueFnError> {
        if c > self.capacity {
            return Err(ValueFnError::InventoryOutOfRange {
                c,
                capacity: self.capacity,
            });
        }
        let (g, frac) = self.locate(t)?;
        if c == 0 {
            return Ok(MarginalValue::Infinite);
        }
        let at = |g| self.value(c, g) - self.value(c - 1, g);
        Ok(MarginalValue::Finite(
            at(g) * (1.0 - frac) + at(g + 1) * frac,
        ))
    }

    /// Grid rows `(t, c, V)` every `stride` time steps, for plotting.
    pub fn rows(&self, stride: usize) -> impl Iterator<Item = (f64, u32, f64)> + '_ {
        let stride = stride.max(1);
        let mut gs: Vec<usize> = (0..=self.steps).step_by(stride).collect();
        if *gs.last().unwrap() != self.steps {
            gs.push(self.steps);
        }
        gs.into_iter().flat_map(move |g| {
            (0..=self.capacity).map(move |c| (self.time(g), c, self.value(c, g)))
        })
    }
}

/// Demand classes of resource `l` under the static selection `s_star`.
pub fn demand_classes(
    inst: &Instance,
    s_star: &[Vec<f64>],
    l: usize,
) -> Result<Vec<DemandClass>, ValueFnError> {
    if s_star.len() != inst.num_types() {
        return Err(ValueFnError::BadSelection {
            expected: inst.num_types(),
            got: s_star.len(),
        });
    }
    let products = inst.products_of_resource(l)?;
    let mut out = Vec::new();
    for (k, row) in s_star.iter().enumerate() {
        for &n in &products {
            let share = row.get(n).copied().unwrap_or(0.0);
            let reward = inst.reward(k, n);
            if share > 0.0 && reward > 0.0 {
                out.push(DemandClass {
                    customer_type: k,
                    product: n,
                    share,
                    reward,
                });
            }
        }
    }
    Ok(out)
}

/// Arrival mass of type `k` that can still buy from resource `l` on `[a, b]`.
fn type_mass(inst: &Instance, k: usize, l: usize, a: f64, b: f64) -> f64 {
    let end = b.min(inst.resources[l].expiry);
    inst.types[k].rate.integral(a, end)
}

/// Backward Euler solution of the single-resource admission problem.
pub fn solve_resource_hjb(
    inst: &Instance,
    s_star: &[Vec<f64>],
    l: usize,
    grid: usize,
) -> Result<ResourceValueGrid, ValueFnError> {
    if grid < MIN_GRID {
        return Err(ValueFnError::GridTooSmall(grid));
    }
    let classes = demand_classes(inst, s_star, l)?;
    let capacity = inst.resources[l].capacity;

    let peak: f64 = classes
        .iter()
        .map(|c| c.share * inst.types[c.customer_type].rate.max_rate())
        .sum();
    let steps = grid.max((peak / MAX_STEP_MASS).ceil() as usize);
    let h = 1.0 / steps as f64;
    let width = steps + 1;
    let mut values = vec![0.0; (capacity as usize + 1) * width];

    let mut types: Vec<usize> = classes.iter().map(|c| c.customer_type).collect();
    types.sort_unstable();
    types.dedup();
    let mut cell_rate = vec![0.0; inst.num_types()];

    for g in (0..steps).rev() {
        let (a, b) = (g as f64 * h, (g + 1) as f64 * h);
        for &k in &types {
            cell_rate[k] = type_mass(inst, k, l, a, b) / h;
        }
        for c in 1..=capacity as usize {
            let next = values[c * width + g + 1];
            let delta = next - values[(c - 1) * width + g + 1];
            let drift: f64 = classes
                .iter()
                .map(|cl| cell_rate[cl.customer_type] * cl.share * (cl.reward - delta).max(0.0))
                .sum();
            values[c * width + g] = next + h * drift;
        }
    }

    Ok(ResourceValueGrid {
        resource: l,
        capacity,
        steps,
        values,
        classes,
    })
}

/// Grids for every resource, computed independently.
pub fn solve_all(
    inst: &Instance,
    s_star: &[Vec<f64>],
    grid: usize,
    exec: Execution,
) -> Result<Vec<ResourceValueGrid>, ValueFnError> {
    try_map_indexed(inst.num_resources(), exec, |l| {
        solve_resource_hjb(inst, s_star, l, grid)
    })
}

/// `sum_l V_l(C_l, 0)`, the expected reward of primal routing.
pub fn pr_total_value(inst: &Instance, grids: &[ResourceValueGrid]) -> Result<f64, ValueFnError> {
    (0..inst.num_resources())
        .map(|l| {
            grids
                .iter()
                .find(|g| g.resource == l)
                .map(ResourceValueGrid::initial_value)
                .ok_or(ValueFnError::MissingResource(l))
        })
        .sum()
}

/// Exact value of one unit sold on `[a, b]` to the classes of resource `l`
/// (optimal admission, unit salvage zero at `b`).
///
/// Between rate breakpoints the equation is linear in the value while the
/// set of classes with `reward > value` stays fixed, so it is solved in
/// closed form piece by piece, switching whenever the value reaches the
/// reward of the cheapest active class.
pub fn single_unit_value(
    inst: &Instance,
    classes: &[DemandClass],
    l: usize,
    a: f64,
    b: f64,
) -> f64 {
    let expiry = inst.resources[l].expiry;
    let mut cuts: Vec<f64> = vec![a, b];
    for cl in classes {
        cuts.extend(
            inst.types[cl.customer_type]
                .rate
                .breakpoints
                .iter()
                .copied()
                .filter(|&x| x > a && x < b),
        );
    }
    if expiry > a && expiry < b {
        cuts.push(expiry);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut value = 0.0;
    for w in cuts.windows(2).rev() {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 0.0 {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let rates: Vec<(f64, f64)> = if mid > expiry {
            Vec::new()
        } else {
            classes
                .iter()
                .map(|cl| {
                    (
                        inst.types[cl.customer_type].rate.rate_at(mid) * cl.share,
                        cl.reward,
                    )
                })
                .filter(|(rate, _)| *rate > 0.0)
                .collect()
        };
        let mut remaining = hi - lo;
        while remaining > 0.0 {
            let active: Vec<&(f64, f64)> = rates.iter().filter(|(_, r)| *r > value).collect();
            let beta: f64 = active.iter().map(|(q, _)| q).sum();
            if beta <= 0.0 {
                break;
            }
            let alpha: f64 = active.iter().map(|(q, r)| q * r).sum();
            let target = alpha / beta;
            let floor = active.iter().map(|(_, r)| *r).fold(f64::INFINITY, f64::min);
            let reach = if target > floor {
                ((target - value) / (target - floor)).ln() / beta
            } else {
                f64::INFINITY
            };
            if reach >= remaining {
                value = target - (target - value) * (-beta * remaining).exp();
                break;
            }
            value = floor;
            remaining -= reach;
        }
    }
    value
}

/// Value of the split-horizon policy: the `C` units of resource `l` are
/// assigned to consecutive intervals carrying equal expected demand, and
/// each unit is managed optimally within its own interval.
pub fn interval_decomposition_bound(
    inst: &Instance,
    s_star: &[Vec<f64>],
    l: usize,
) -> Result<f64, ValueFnError> {
    let classes = demand_classes(inst, s_star, l)?;
    let capacity = inst.resources[l].capacity;
    let mass = |t: f64| -> f64 {
        classes
            .iter()
            .map(|cl| cl.share * type_mass(inst, cl.customer_type, l, 0.0, t))
            .sum()
    };
    let total = mass(1.0);
    if total <= 0.0 || capacity == 0 {
        return Ok(0.0);
    }
    let per_unit = total / capacity as f64;
    let mut bounds = vec![0.0];
    for i in 1..capacity {
        let target = per_unit * i as f64;
        let (mut lo, mut hi) = (*bounds.last().unwrap(), 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let m = mass(mid);
            if (m - target).abs() <= 1e-12 {
                lo = mid;
                hi = mid;
                break;
            }
            if m < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        bounds.push(0.5 * (lo + hi));
    }
    bounds.push(1.0);
    Ok(bounds
        .windows(2)
        .map(|w| single_unit_value(inst, &classes, l, w[0], w[1]))
        .sum())
}
