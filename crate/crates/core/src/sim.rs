//! Arrival sampling, policy replay and Monte Carlo aggregation.
//!
//! Every random quantity comes from a seed-indexed ChaCha stream:
//!
//! - arrivals of type `k` use stream `k` of the path seed;
//! - the two draws of event `i` (offer, then choice) use stream `i` of the
//!   choice seed, so every policy replayed on a path sees identical draws;
//! - replication `m` takes its path and choice seeds from stream `m` of the
//!   base seed.
//!
//! Results therefore depend only on seeds, never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::cdlp::{
    solve_cdlp, solve_cdlp_with_demand, CdlpError, CdlpOptions, CdlpSolution, SubproblemSolver,
};
use crate::choice::Assortment;
use crate::model::{Instance, ProductId, NO_PURCHASE};
use crate::par::{try_map_indexed, Execution};
use crate::policies::{
    apply_purchase, fcfs_accept, fcfs_offer, opr_offer, pr_accept, Policy, PolicyError, PolicyKind,
    PolicyState,
};
use crate::valuefn::{solve_all, ResourceValueGrid, ValueFnError};

/// Normal quantile for two-sided 95% intervals.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Cdlp(#[from] CdlpError),
    #[error(transparent)]
    ValueFn(#[from] ValueFnError),
    #[error("at least 2 replications are required, got {0}")]
    TooFewReplications(usize),
    #[error("benchmark must be positive, got {0}")]
    NonPositiveBenchmark(f64),
    #[error("policy {policy} broke an invariant at t={time}: {source}")]
    Invariant {
        policy: String,
        time: f64,
        source: PolicyError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalEvent {
    pub time: f64,
    pub customer_type: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub events: Vec<ArrivalEvent>,
    pub seed: u64,
    /// Realized arrivals per type.
    pub counts: Vec<u32>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One Poisson path over `[0, 1]`. Within each constant-rate segment the
/// gaps are exponential, which samples the piecewise-homogeneous process
/// exactly.
pub fn generate_arrivals(inst: &Instance, seed: u64) -> SamplePath {
    let mut events = Vec::new();
    let mut counts = vec![0u32; inst.num_types()];
    for (k, ty) in inst.types.iter().enumerate() {
        let mut rng = stream_rng(seed, k as u64);
        for (a, b, rate) in ty.rate.segments() {
            if rate <= 0.0 {
                continue;
            }
            let gap = Exp::new(rate).expect("positive rate");
            let mut t = a;
            loop {
                t += gap.sample(&mut rng);
                if t >= b {
                    break;
                }
                events.push(ArrivalEvent {
                    time: t,
                    customer_type: k,
                });
                counts[k] += 1;
            }
        }
    }
    events.sort_by(|x, y| {
        x.time
            .total_cmp(&y.time)
            .then(x.customer_type.cmp(&y.customer_type))
    });
    SamplePath {
        events,
        seed,
        counts,
    }
}

/// Everything a policy needs besides the path: the instance, its CDLP
/// solution and the PR value grids.
#[derive(Debug, Clone)]
pub struct PolicyContext {
    pub instance: Instance,
    pub solution: CdlpSolution,
    pub grids: Vec<ResourceValueGrid>,
    /// Optimizer behind the OPR offer.
    pub opr_solver: SubproblemSolver,
}

impl PolicyContext {
    pub fn new(instance: Instance, solution: CdlpSolution, grids: Vec<ResourceValueGrid>) -> Self {
        PolicyContext {
            instance,
            solution,
            grids,
            opr_solver: SubproblemSolver::Auto,
        }
    }

    /// Solves the CDLP and all value grids for `instance`.
    pub fn prepare(
        instance: Instance,
        cdlp: &CdlpOptions,
        grid: usize,
        exec: Execution,
    ) -> Result<Self, SimError> {
        let solution = solve_cdlp(&instance, cdlp)?;
        let grids = solve_all(&instance, &solution.s_star, grid, exec)?;
        Ok(PolicyContext::new(instance, solution, grids))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub customer_type: usize,
    pub offered: Assortment,
    pub choice: ProductId,
    pub accepted: bool,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub policy: Policy,
    pub reward: f64,
    pub sales: Vec<u32>,
    pub trace: Option<Vec<TraceRow>>,
}

/// Replays `policy` over `path`.
pub fn run_policy(
    ctx: &PolicyContext,
    policy: Policy,
    path: &SamplePath,
    choice_seed: u64,
    record_trace: bool,
) -> Result<ReplicationReport, SimError> {
    let inst = &ctx.instance;
    let mut state = PolicyState::initial(inst);
    let mut sales = vec![0u32; inst.num_resources()];
    let mut reward = 0.0;
    let mut trace = record_trace.then(Vec::new);
    let mut rng = ChaCha8Rng::seed_from_u64(choice_seed);

    for (i, ev) in path.events.iter().enumerate() {
        rng.set_stream(i as u64);
        rng.set_word_pos(0);
        let u_offer: f64 = rng.gen();
        let u_choice: f64 = rng.gen();
        let k = ev.customer_type;
        state.now = ev.time;
        let invariant = |source: PolicyError| SimError::Invariant {
            policy: policy.label(),
            time: ev.time,
            source,
        };

        let offered = match policy.kind {
            PolicyKind::Fcfs | PolicyKind::Pr => {
                let s = fcfs_offer(&ctx.solution, k, u_offer);
                if policy.relaxed {
                    s
                } else {
                    state.restrict(inst, &s)
                }
            }
            PolicyKind::Opr => {
                opr_offer(inst, &state, &ctx.grids, &ctx.solution, &ctx.opr_solver, k)
                    .map_err(invariant)?
                    .assortment
            }
        };
        let choice = inst.types[k].choice.sample(&offered, u_choice);
        let accepted = choice != NO_PURCHASE
            && match policy.kind {
                PolicyKind::Fcfs => fcfs_accept(inst, &state, choice),
                PolicyKind::Pr => {
                    pr_accept(inst, &state, &ctx.grids, k, choice).map_err(invariant)?
                }
                PolicyKind::Opr => true,
            };
        let mut earned = 0.0;
        if accepted {
            apply_purchase(inst, &mut state, choice).map_err(invariant)?;
            earned = inst.reward(k, choice);
            reward += earned;
            sales[inst.resource_of(choice)] += 1;
        }
        if let Some(rows) = trace.as_mut() {
            rows.push(TraceRow {
                time: ev.time,
                customer_type: k,
                offered,
                choice,
                accepted,
                reward: earned,
            });
        }
    }

    Ok(ReplicationReport {
        policy,
        reward,
        sales,
        trace,
    })
}

/// Path and choice seeds of replication `m`.
pub fn replication_seeds(base_seed: u64, m: usize) -> (u64, u64) {
    let mut rng = stream_rng(base_seed, m as u64);
    (rng.gen(), rng.gen())
}

/// Sample mean with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub half_width: f64,
    pub reps: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z_95 * (var / n as f64).sqrt()
        };
        Summary {
            mean,
            half_width,
            reps: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub policy: Policy,
    pub mean: f64,
    pub half_width: f64,
    pub reps: usize,
    /// Average units sold per resource.
    pub mean_sales: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloOptions {
    pub reps: usize,
    pub base_seed: u64,
    pub exec: Execution,
}

/// Rewards of several policies replayed on common paths and draws.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloBatch {
    pub policies: Vec<Policy>,
    /// `rewards[p][m]`.
    pub rewards: Vec<Vec<f64>>,
    /// `sales[p][l]`, summed over replications.
    pub sales: Vec<Vec<u64>>,
}

impl MonteCarloBatch {
    pub fn reps(&self) -> usize {
        self.rewards.first().map_or(0, Vec::len)
    }

    pub fn summary(&self, p: usize) -> Summary {
        Summary::of(&self.rewards[p])
    }

    pub fn report(&self, p: usize) -> MonteCarloReport {
        let s = self.summary(p);
        MonteCarloReport {
            policy: self.policies[p],
            mean: s.mean,
            half_width: s.half_width,
            reps: s.reps,
            mean_sales: self.sales[p]
                .iter()
                .map(|&x| x as f64 / s.reps as f64)
                .collect(),
        }
    }

    pub fn reports(&self) -> Vec<MonteCarloReport> {
        (0..self.policies.len()).map(|p| self.report(p)).collect()
    }

    /// Summary of `reward[a] - reward[b]` across paired replications.
    pub fn paired(&self, a: usize, b: usize) -> Summary {
        let diff: Vec<f64> = self.rewards[a]
            .iter()
            .zip(&self.rewards[b])
            .map(|(x, y)| x - y)
            .collect();
        Summary::of(&diff)
    }

    pub fn index_of(&self, policy: Policy) -> Option<usize> {
        self.policies.iter().position(|&p| p == policy)
    }
}

/// Runs every policy on the same `reps` replications.
pub fn monte_carlo_batch(
    ctx: &PolicyContext,
    policies: &[Policy],
    opts: MonteCarloOptions,
) -> Result<MonteCarloBatch, SimError> {
    if opts.reps < 2 {
        return Err(SimError::TooFewReplications(opts.reps));
    }
    let per_rep = try_map_indexed(opts.reps, opts.exec, |m| {
        let (path_seed, choice_seed) = replication_seeds(opts.base_seed, m);
        let path = generate_arrivals(&ctx.instance, path_seed);
        policies
            .iter()
            .map(|&p| run_policy(ctx, p, &path, choice_seed, false))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let l_count = ctx.instance.num_resources();
    let mut rewards = vec![Vec::with_capacity(opts.reps); policies.len()];
    let mut sales = vec![vec![0u64; l_count]; policies.len()];
    for rep in per_rep {
        for (p, r) in rep.into_iter().enumerate() {
            rewards[p].push(r.reward);
            for (acc, &s) in sales[p].iter_mut().zip(&r.sales) {
                *acc += s as u64;
            }
        }
    }
    Ok(MonteCarloBatch {
        policies: policies.to_vec(),
        rewards,
        sales,
    })
}

/// Monte Carlo estimate of a single policy's expected reward.
pub fn monte_carlo(
    ctx: &PolicyContext,
    policy: Policy,
    opts: MonteCarloOptions,
) -> Result<MonteCarloReport, SimError> {
    Ok(monte_carlo_batch(ctx, &[policy], opts)?.report(0))
}

/// CDLP optimum with the realized arrival counts of `path` as demand.
pub fn hindsight_bound(
    inst: &Instance,
    path: &SamplePath,
    opts: &CdlpOptions,
) -> Result<f64, SimError> {
    let demand: Vec<f64> = path.counts.iter().map(|&c| c as f64).collect();
    Ok(solve_cdlp_with_demand(inst, &demand, opts)?.objective)
}

/// Hindsight bounds on the paths of replications `0..reps`, the same paths
/// a [`monte_carlo_batch`] with this base seed replays.
pub fn hindsight_summary(
    inst: &Instance,
    opts: &CdlpOptions,
    mc: MonteCarloOptions,
) -> Result<Summary, SimError> {
    if mc.reps < 2 {
        return Err(SimError::TooFewReplications(mc.reps));
    }
    let values = try_map_indexed(mc.reps, mc.exec, |m| {
        let (path_seed, _) = replication_seeds(mc.base_seed, m);
        hindsight_bound(inst, &generate_arrivals(inst, path_seed), opts)
    })?;
    Ok(Summary::of(&values))
}

/// `mean / benchmark` with the half-width scaled alike.
pub fn estimate_ratio(report: &MonteCarloReport, benchmark: f64) -> Result<(f64, f64), SimError> {
    if benchmark <= 0.0 || !benchmark.is_finite() {
        return Err(SimError::NonPositiveBenchmark(benchmark));
    }
    Ok((report.mean / benchmark, report.half_width / benchmark))
}
