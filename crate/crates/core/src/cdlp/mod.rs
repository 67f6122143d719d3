//! Choice-based deterministic LP solved by column generation.
//!
//! Variables `x_k(S)` are the probabilities of showing assortment `S` to a
//! type-`k` arrival. The master maximizes expected reward subject to one
//! capacity row per resource and one convexity row per type. Columns are
//! priced with the assortment subproblem under prices `r_n - pi(l_n)`; a
//! column enters when `Lambda_k * value - sigma(k)` is positive.
//!
//! With an exact pricing solver the procedure ends at the LP optimum. With
//! a solver that only reaches a fraction `1 / (1 + eps)` of the best
//! pricing value, termination still certifies `pi, (1 + eps) sigma` as a
//! feasible dual, so the final objective is at least `V / (1 + eps)`.

mod subproblem;

pub use subproblem::{
    assortment_subproblem_bruteforce, assortment_subproblem_localsearch,
    assortment_subproblem_sort, SubproblemError, SubproblemResult, SubproblemSolver,
    DEFAULT_LOCAL_SEARCH_GUARANTEE, DEFAULT_N_MAX,
};

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::choice::Assortment;
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus};
use crate::model::{Instance, ModelError, ProductId};

/// Reduced costs at or below this (relative to `1 + sigma`) do not enter.
pub const REDUCED_COST_TOLERANCE: f64 = 1e-9;

/// Probabilities at or below this are treated as zero when reading `O_k`.
const SUPPORT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CdlpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Subproblem(#[from] SubproblemError),
    #[error("restricted master ended with status {0:?}")]
    Master(LpStatus),
    #[error("epsilon must be finite and non-negative, got {0}")]
    BadEpsilon(f64),
    #[error("pricing guarantee {guarantee} too weak for epsilon {eps} (need at least {needed})")]
    InsufficientGuarantee {
        eps: f64,
        guarantee: f64,
        needed: f64,
    },
    #[error("expected {expected} demand values, got {got}")]
    DemandLength { expected: usize, got: usize },
    #[error("column generation stopped after {} master solves without a certificate", .0.iterations)]
    IterationCap(Box<CdlpSolution>),
}

#[derive(Debug, Clone)]
pub struct CdlpOptions {
    pub eps: f64,
    pub solver: SubproblemSolver,
    /// Master solves allowed; defaults to `10 (L + K + N)`.
    pub max_iterations: Option<usize>,
}

impl Default for CdlpOptions {
    fn default() -> Self {
        CdlpOptions {
            eps: 0.0,
            solver: SubproblemSolver::Auto,
            max_iterations: None,
        }
    }
}

impl CdlpOptions {
    pub fn exact(solver: SubproblemSolver) -> Self {
        CdlpOptions {
            eps: 0.0,
            solver,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdlpSolution {
    /// Generated columns per type, including zero-probability ones.
    pub columns: Vec<Vec<Assortment>>,
    /// `O_k`: assortments with positive probability, per type.
    pub offers: Vec<BTreeMap<Assortment, f64>>,
    /// Capacity duals, one per resource.
    pub pi: Vec<f64>,
    /// Convexity duals, one per type.
    pub sigma: Vec<f64>,
    pub objective: f64,
    pub epsilon: f64,
    pub certified: bool,
    pub iterations: usize,
    /// Master objective after each solve.
    pub history: Vec<f64>,
    /// Expected arrivals per type used in the program.
    pub demand: Vec<f64>,
    /// `s*[k][n]`, probability a type-`k` arrival picks `n` under the static
    /// offer. Index 0 is unused.
    pub s_star: Vec<Vec<f64>>,
}

/// Static selection probabilities and the demand they route to each resource.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSelection {
    pub s_star: Vec<Vec<f64>>,
    /// `E[D_j] = sum_k Lambda_k sum_{n in N_j} s*_kn`.
    pub expected_demand: Vec<f64>,
}

impl CdlpSolution {
    /// `sum_j C_j pi(j) + sum_k sigma(k)`.
    pub fn dual_bound(&self, inst: &Instance) -> f64 {
        inst.resources
            .iter()
            .zip(&self.pi)
            .map(|(r, p)| r.capacity as f64 * p)
            .sum::<f64>()
            + self.sigma.iter().sum::<f64>()
    }

    /// Number of `(k, S)` pairs with positive probability.
    pub fn support_size(&self) -> usize {
        self.offers.iter().map(BTreeMap::len).sum()
    }

    pub fn static_selection(&self, inst: &Instance) -> StaticSelection {
        let mut expected_demand = vec![0.0; inst.num_resources()];
        for (k, row) in self.s_star.iter().enumerate() {
            for n in inst.product_ids() {
                expected_demand[inst.resource_of(n)] += self.demand[k] * row[n];
            }
        }
        StaticSelection {
            s_star: self.s_star.clone(),
            expected_demand,
        }
    }
}

/// The master LP over the given columns; variables are ordered by type,
/// then by the order of `columns[k]`.
pub fn build_master(
    inst: &Instance,
    demand: &[f64],
    columns: &[Vec<Assortment>],
) -> Result<LinearProgram, CdlpError> {
    inst.ensure_valid()?;
    if demand.len() != inst.num_types() || columns.len() != inst.num_types() {
        return Err(CdlpError::DemandLength {
            expected: inst.num_types(),
            got: demand.len().min(columns.len()),
        });
    }
    let l_count = inst.num_resources();
    let k_count = inst.num_types();
    let n_vars: usize = columns.iter().map(Vec::len).sum();
    let mut objective = Vec::with_capacity(n_vars);
    let mut rows = vec![vec![0.0; n_vars]; l_count + k_count];
    let mut j = 0;
    for (k, cols) in columns.iter().enumerate() {
        let model = &inst.types[k].choice;
        for s in cols {
            let probs = model.probabilities(s);
            let mut reward = 0.0;
            for (n, p) in s.iter().zip(&probs) {
                reward += p * inst.reward(k, n);
                rows[inst.resource_of(n)][j] += demand[k] * p;
            }
            objective.push(demand[k] * reward);
            rows[l_count + k][j] = 1.0;
            j += 1;
        }
    }
    let mut lp = LinearProgram::new(objective);
    for (l, row) in rows.drain(..l_count).enumerate() {
        lp.add_le(row, inst.resources[l].capacity as f64);
    }
    for row in rows {
        lp.add_le(row, 1.0);
    }
    Ok(lp)
}

/// Solves the program with each type's expected arrivals `Lambda_k`.
pub fn solve_cdlp(inst: &Instance, opts: &CdlpOptions) -> Result<CdlpSolution, CdlpError> {
    let demand: Vec<f64> = inst.types.iter().map(|t| t.total_arrivals()).collect();
    solve_cdlp_with_demand(inst, &demand, opts)
}

/// Column generation with arbitrary per-type arrival counts in place of
/// `Lambda_k` (used for the per-path hindsight benchmark).
pub fn solve_cdlp_with_demand(
    inst: &Instance,
    demand: &[f64],
    opts: &CdlpOptions,
) -> Result<CdlpSolution, CdlpError> {
    inst.ensure_valid()?;
    let eps = opts.eps;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(CdlpError::BadEpsilon(eps));
    }
    if demand.len() != inst.num_types() {
        return Err(CdlpError::DemandLength {
            expected: inst.num_types(),
            got: demand.len(),
        });
    }
    let universe: Vec<ProductId> = inst.product_ids().collect();
    let needed = 1.0 / (1.0 + eps);
    for t in &inst.types {
        let guarantee = opts.solver.guarantee(&t.choice, universe.len());
        let short = if eps == 0.0 {
            guarantee < 1.0
        } else {
            guarantee < needed - 1e-12
        };
        if short {
            return Err(CdlpError::InsufficientGuarantee {
                eps,
                guarantee,
                needed,
            });
        }
    }

    let k_count = inst.num_types();
    let l_count = inst.num_resources();
    let cap = opts
        .max_iterations
        .unwrap_or(10 * (l_count + k_count + universe.len()));

    let mut seen: Vec<BTreeSet<Assortment>> = vec![BTreeSet::new(); k_count];
    let mut columns: Vec<Vec<Assortment>> = vec![Vec::new(); k_count];
    for k in 0..k_count {
        let mut push = |s: Assortment| {
            if seen[k].insert(s.clone()) {
                columns[k].push(s);
            }
        };
        push(Assortment::empty());
        let model = &inst.types[k].choice;
        let best_single = universe
            .iter()
            .map(|&n| {
                let s = Assortment::new([n]);
                let v = model.probabilities(&s)[0] * inst.reward(k, n);
                (s, v)
            })
            .filter(|(_, v)| *v > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        if let Some((s, _)) = best_single {
            push(s);
        }
    }

    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let lp = build_master(inst, demand, &columns)?;
        let sol = solve_lp(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(CdlpError::Master(sol.status));
        }
        iterations += 1;
        history.push(sol.objective_value);
        let pi = sol.duals[..l_count].to_vec();
        let sigma = sol.duals[l_count..].to_vec();

        let solved_columns = columns.clone();
        let mut added = false;
        for k in 0..k_count {
            if demand[k] <= 0.0 {
                continue;
            }
            let mut price = inst.rewards_for(k);
            for n in inst.product_ids() {
                price[n] -= pi[inst.resource_of(n)];
            }
            let r = opts
                .solver
                .solve(&inst.types[k].choice, &price, &universe)?;
            let reduced = demand[k] * r.value - sigma[k];
            if reduced > REDUCED_COST_TOLERANCE * (1.0 + sigma[k])
                && seen[k].insert(r.assortment.clone())
            {
                columns[k].push(r.assortment);
                added = true;
            }
        }

        if !added || iterations >= cap {
            let solution = assemble(
                inst,
                demand,
                &solved_columns,
                &sol.primal,
                pi,
                sigma,
                history,
                iterations,
                eps,
                !added,
            );
            if added {
                return Err(CdlpError::IterationCap(Box::new(solution)));
            }
            return Ok(solution);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    inst: &Instance,
    demand: &[f64],
    columns: &[Vec<Assortment>],
    primal: &[f64],
    pi: Vec<f64>,
    sigma: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
    eps: f64,
    certified: bool,
) -> CdlpSolution {
    let n = inst.num_products();
    let mut offers = Vec::with_capacity(columns.len());
    let mut s_star = Vec::with_capacity(columns.len());
    let mut objective = 0.0;
    let mut j = 0;
    for (k, cols) in columns.iter().enumerate() {
        let model = &inst.types[k].choice;
        let mut o_k = BTreeMap::new();
        let mut s_k = vec![0.0; n + 1];
        for s in cols {
            let x = primal[j];
            j += 1;
            if x <= SUPPORT_TOLERANCE {
                continue;
            }
            for (prod, p) in s.iter().zip(model.probabilities(s)) {
                s_k[prod] += x * p;
                objective += demand[k] * x * p * inst.reward(k, prod);
            }
            o_k.insert(s.clone(), x);
        }
        offers.push(o_k);
        s_star.push(s_k);
    }
    CdlpSolution {
        columns: columns.to_vec(),
        offers,
        pi,
        sigma,
        objective,
        epsilon: eps,
        certified,
        iterations,
        history,
        demand: demand.to_vec(),
        s_star,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{AttractionModel, ChoiceModel};
    use crate::model::{CustomerType, Product, RateCurve, Resource};

    /// One resource, one product, one type that always buys when offered.
    fn always_buys(capacity: u32, lambda: f64) -> Instance {
        let mut table = BTreeMap::new();
        table.insert(Assortment::new([1]), BTreeMap::from([(0, 0.0), (1, 1.0)]));
        let choice = ChoiceModel::Table(crate::choice::TabulatedModel::new(1, table).unwrap());
        Instance {
            resources: vec![Resource::new(capacity)],
            products: vec![Product {
                resource: 0,
                reward: 1.0,
            }],
            types: vec![CustomerType::new(RateCurve::constant(lambda), choice)],
        }
    }

    #[test]
    fn master_for_single_product() {
        let inst = always_buys(1, 2.0);
        let lp = build_master(&inst, &[2.0], &[vec![Assortment::new([1])]]).unwrap();
        assert_eq!(lp.objective, vec![2.0]);
        assert_eq!(lp.constraints[0].coefficients, vec![2.0]);
        assert_eq!(lp.constraints[0].rhs, 1.0);
        assert_eq!(lp.constraints[1].coefficients, vec![1.0]);
        assert_eq!(lp.constraints[1].rhs, 1.0);
    }

    #[test]
    fn master_with_only_empty_column_is_zero() {
        let inst = always_buys(1, 2.0);
        let lp = build_master(&inst, &[2.0], &[vec![Assortment::empty()]]).unwrap();
        assert_eq!(lp.objective, vec![0.0]);
        assert_eq!(solve_lp(&lp).unwrap().objective_value, 0.0);
    }

    #[test]
    fn shared_resource_row_sums_both_types() {
        let mnl = ChoiceModel::Attraction(AttractionModel::mnl(vec![1.0]));
        let inst = Instance {
            resources: vec![Resource::new(3)],
            products: vec![Product {
                resource: 0,
                reward: 2.0,
            }],
            types: vec![
                CustomerType::new(RateCurve::constant(1.0), mnl.clone()),
                CustomerType::new(RateCurve::constant(4.0), mnl),
            ],
        };
        let s = Assortment::new([1]);
        let lp = build_master(&inst, &[1.0, 4.0], &[vec![s.clone()], vec![s]]).unwrap();
        assert_eq!(lp.constraints[0].coefficients, vec![0.5, 2.0]);
        assert_eq!(lp.objective, vec![1.0, 4.0]);
        assert_eq!(lp.constraints[1].coefficients, vec![1.0, 0.0]);
        assert_eq!(lp.constraints[2].coefficients, vec![0.0, 1.0]);
    }

    #[test]
    fn capacity_binding_single_product() {
        let inst = always_buys(1, 2.0);
        let sol = solve_cdlp(&inst, &CdlpOptions::exact(SubproblemSolver::brute_force())).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!((sol.offers[0][&Assortment::new([1])] - 0.5).abs() < 1e-12);
        assert!((sol.pi[0] - 1.0).abs() < 1e-12);
        assert!(sol.sigma[0].abs() < 1e-12);
        assert!(sol.certified);
        assert!((sol.dual_bound(&inst) - sol.objective).abs() < 1e-8);
        let stat = sol.static_selection(&inst);
        assert!((stat.s_star[0][1] - 0.5).abs() < 1e-12);
        assert!((stat.expected_demand[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slack_capacity_single_product() {
        let inst = always_buys(1, 0.5);
        let sol = solve_cdlp(&inst, &CdlpOptions::exact(SubproblemSolver::brute_force())).unwrap();
        assert!((sol.objective - 0.5).abs() < 1e-12);
        assert!((sol.offers[0][&Assortment::new([1])] - 1.0).abs() < 1e-12);
        assert!(sol.pi[0].abs() < 1e-12);
    }

    #[test]
    fn zero_demand_gives_zero() {
        let inst = always_buys(2, 0.0);
        let sol = solve_cdlp(&inst, &CdlpOptions::default()).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.dual_bound(&inst), 0.0);
        assert!(sol.s_star[0].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn exact_mode_rejects_heuristic_pricing() {
        let inst = always_buys(1, 1.0);
        let opts = CdlpOptions::exact(SubproblemSolver::local_search(2, 0));
        assert!(matches!(
            solve_cdlp(&inst, &opts),
            Err(CdlpError::InsufficientGuarantee { .. })
        ));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mnl = ChoiceModel::Attraction(AttractionModel::mnl(vec![1.0, 0.3, 2.0]));
        let inst = Instance {
            resources: vec![Resource::new(1), Resource::new(1)],
            products: vec![
                Product {
                    resource: 0,
                    reward: 3.0,
                },
                Product {
                    resource: 0,
                    reward: 1.0,
                },
                Product {
                    resource: 1,
                    reward: 2.0,
                },
            ],
            types: vec![CustomerType::new(RateCurve::constant(5.0), mnl)],
        };
        let opts = CdlpOptions {
            max_iterations: Some(1),
            ..CdlpOptions::default()
        };
        match solve_cdlp(&inst, &opts) {
            Err(CdlpError::IterationCap(best)) => assert!(!best.certified),
            other => panic!("expected iteration cap, got {other:?}"),
        }
    }
}
