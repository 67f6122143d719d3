//! Numerical checks of the guarantees, grouped into named suites.
//!
//! Each check carries its own oracle (closed forms, full enumeration or
//! paired Monte Carlo) and reports a pass flag with a one-line detail.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cdlp::{
    assortment_subproblem_bruteforce, assortment_subproblem_sort, build_master, solve_cdlp,
    CdlpError, CdlpOptions, SubproblemSolver, DEFAULT_N_MAX,
};
use crate::choice::{Assortment, AttractionModel, ChoiceModel};
use crate::generate::{
    random_instance, scaling_base_instance, spike_instance, GeneratorConfig, SpikeConfig,
};
use crate::lp::solve_lp;
use crate::model::{CustomerType, Instance, Product, RateCurve, Resource};
use crate::par::{try_map_indexed, Execution};
use crate::policies::{Policy, PolicyKind};
use crate::sim::{
    estimate_ratio, hindsight_summary, monte_carlo, monte_carlo_batch, MonteCarloOptions,
    PolicyContext, SimError,
};
use crate::valuefn::{interval_decomposition_bound, solve_resource_hjb, DEFAULT_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Inequality,
    Hjb,
    Cdlp,
    Dominance,
    Bounds,
    Scaling,
    Spike,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Inequality,
        Suite::Hjb,
        Suite::Cdlp,
        Suite::Dominance,
        Suite::Bounds,
        Suite::Scaling,
        Suite::Spike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Inequality => "inequality",
            Suite::Hjb => "hjb",
            Suite::Cdlp => "cdlp",
            Suite::Dominance => "dominance",
            Suite::Bounds => "bounds",
            Suite::Scaling => "scaling",
            Suite::Spike => "spike",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                format!("unknown suite {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, err: impl fmt::Display) -> Self {
        Check::new(name, false, format!("error: {err}"))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Paired replications per instance in simulation checks.
    pub reps: usize,
    /// Paths averaged by the hindsight comparison.
    pub hindsight_paths: usize,
    /// Random instances in the simulation checks.
    pub sim_instances: usize,
    /// Random instances in the enumeration checks.
    pub lp_instances: usize,
    pub grid: usize,
    pub exec: Execution,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 2024,
            reps: 10_000,
            hindsight_paths: 1_000,
            sim_instances: 20,
            lp_instances: 50,
            grid: DEFAULT_GRID,
            exec: Execution::default(),
        }
    }
}

impl VerifyConfig {
    fn mc(&self, salt: u64) -> MonteCarloOptions {
        MonteCarloOptions {
            reps: self.reps,
            base_seed: self.seed.wrapping_mul(1_000_003).wrapping_add(salt),
            exec: self.exec,
        }
    }

    fn instance_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Vec<Check> {
    match suite {
        Suite::Inequality => vec![poisson_inequality()],
        Suite::Hjb => {
            let mut out = vec![hjb_accuracy(cfg.grid)];
            out.push(hjb_invariants(cfg));
            out.push(hjb_convergence());
            out.push(sandwich(cfg));
            out
        }
        Suite::Cdlp => vec![
            cdlp_exactness(cfg),
            epsilon_certificate(cfg),
            sort_exactness(cfg.seed),
        ],
        Suite::Dominance => vec![dominance(cfg)],
        Suite::Bounds => vec![constant_factor_bounds(cfg), upper_bound_sanity(cfg)],
        Suite::Scaling => vec![asymptotic_optimality(cfg)],
        Suite::Spike => vec![spike_sweep(cfg)],
    }
}

/// `sum_{i=0}^{ceil(x)} x^i/i! e^{-x} (i/x)`, which telescopes to
/// `P(Poisson(x) <= ceil(x) - 1)`.
pub fn poisson_inequality_sum(x: f64) -> f64 {
    let top = x.ceil() as u64;
    let mut term = (-x).exp();
    let mut sum = 0.0;
    for j in 0..top {
        sum += term;
        term *= x / (j + 1) as f64;
    }
    sum
}

pub fn poisson_inequality() -> Check {
    let bound = (-1.0f64).exp();
    let (argmin, min) = (1..=5000)
        .map(|i| {
            let x = i as f64 / 100.0;
            (x, poisson_inequality_sum(x))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let at_one = poisson_inequality_sum(1.0);
    let equality = (at_one - bound).abs() <= f64::EPSILON;
    Check::new(
        "poisson inequality",
        min >= bound - 1e-12 && equality,
        format!(
            "min {min:.15} at x={argmin:.2}, 1/e = {bound:.15}, f(1) - 1/e = {:e}",
            at_one - bound
        ),
    )
}

fn one_product_instance(capacity: u32, lambda: f64) -> Instance {
    Instance {
        resources: vec![Resource::new(capacity)],
        products: vec![Product {
            resource: 0,
            reward: 1.0,
        }],
        types: vec![CustomerType::new(
            RateCurve::constant(lambda),
            ChoiceModel::Attraction(AttractionModel::mnl(vec![1.0])),
        )],
    }
}

/// Single-product value grids against `1 - e^{-L}` and `E[min(Poisson(L), 2)]`.
pub fn hjb_accuracy(grid: usize) -> Check {
    let mut worst: f64 = 0.0;
    for lambda in [0.5f64, 1.0, 2.0] {
        let e = (-lambda).exp();
        for (capacity, exact) in [(1, 1.0 - e), (2, 2.0 - 2.0 * e - lambda * e)] {
            let inst = one_product_instance(capacity, lambda);
            let s = vec![vec![0.0, 1.0]];
            match solve_resource_hjb(&inst, &s, 0, grid) {
                Ok(g) => worst = worst.max((g.initial_value() - exact).abs()),
                Err(e) => return Check::failed("hjb accuracy", e),
            }
        }
    }
    Check::new(
        "hjb accuracy",
        worst <= 1e-3,
        format!("max |V - oracle| = {worst:.2e} at G = {grid} (tolerance 1e-3)"),
    )
}

/// Boundary, monotonicity and concavity of the grids of random instances.
pub fn hjb_invariants(cfg: &VerifyConfig) -> Check {
    let gen = GeneratorConfig::default();
    let mut violations = Vec::new();
    for i in 0..cfg.sim_instances {
        let inst = random_instance(&gen, cfg.instance_seed(i));
        let sol = match solve_cdlp(&inst, &CdlpOptions::default()) {
            Ok(s) => s,
            Err(e) => return Check::failed("hjb invariants", e),
        };
        for l in 0..inst.num_resources() {
            let g = match solve_resource_hjb(&inst, &sol.s_star, l, 2000) {
                Ok(g) => g,
                Err(e) => return Check::failed("hjb invariants", e),
            };
            let cap = g.capacity;
            let steps = g.steps();
            for t in 0..=steps {
                if g.value(0, t) != 0.0 {
                    violations.push(format!("instance {i} resource {l}: V(0,{t}) != 0"));
                }
                for c in 1..=cap {
                    if g.value(c, t) + 1e-12 < g.value(c - 1, t) {
                        violations.push(format!("instance {i} resource {l}: not increasing in c"));
                    }
                    if t < steps && g.value(c, t) + 1e-12 < g.value(c, t + 1) {
                        violations.push(format!("instance {i} resource {l}: increasing in t"));
                    }
                    if c < cap {
                        let d1 = g.value(c, t) - g.value(c - 1, t);
                        let d2 = g.value(c + 1, t) - g.value(c, t);
                        if d2 > d1 + 1e-9 {
                            violations
                                .push(format!("instance {i} resource {l}: not concave at c={c}"));
                        }
                    }
                }
            }
            for c in 0..=cap {
                if g.value(c, steps) != 0.0 {
                    violations.push(format!("instance {i} resource {l}: V({c},1) != 0"));
                }
            }
        }
    }
    violations.dedup();
    Check::new(
        "hjb invariants",
        violations.is_empty(),
        if violations.is_empty() {
            format!("{} instances, boundary/monotone/concave", cfg.sim_instances)
        } else {
            format!("{} violations, first: {}", violations.len(), violations[0])
        },
    )
}

/// Errors at `(C, 0)` against a fine reference shrink about twofold per
/// halving of the step.
pub fn hjb_convergence() -> Check {
    let inst = one_product_instance(3, 6.0);
    let s = vec![vec![0.0, 1.0]];
    let value = |g| solve_resource_hjb(&inst, &s, 0, g).map(|v| v.initial_value());
    let grids = [100, 200, 400, 800, 1600];
    let reference = match value(409_600) {
        Ok(v) => v,
        Err(e) => return Check::failed("hjb convergence", e),
    };
    let errors: Result<Vec<f64>, _> = grids
        .iter()
        .map(|&g| value(g).map(|v| (v - reference).abs()))
        .collect();
    let errors = match errors {
        Ok(e) => e,
        Err(e) => return Check::failed("hjb convergence", e),
    };
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|&r| (1.6..=2.5).contains(&r));
    Check::new(
        "hjb convergence",
        ok,
        format!(
            "error ratios per halving {:?}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    )
}

/// Half the fluid revenue of a resource, the split-horizon value and the
/// PR value are ordered, on random single-resource instances.
pub fn sandwich(cfg: &VerifyConfig) -> Check {
    let gen = GeneratorConfig::single_resource();
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for i in 0..cfg.sim_instances {
        let inst = random_instance(&gen, cfg.instance_seed(i));
        let outcome = (|| -> Result<(f64, f64, f64, f64), String> {
            let sol = solve_cdlp(&inst, &CdlpOptions::default()).map_err(|e| e.to_string())?;
            let fluid: f64 = (0..inst.num_types())
                .map(|k| {
                    sol.demand[k]
                        * inst
                            .product_ids()
                            .map(|n| sol.s_star[k][n] * inst.reward(k, n))
                            .sum::<f64>()
                })
                .sum();
            let split =
                interval_decomposition_bound(&inst, &sol.s_star, 0).map_err(|e| e.to_string())?;
            let pr = solve_resource_hjb(&inst, &sol.s_star, 0, cfg.grid)
                .map_err(|e| e.to_string())?
                .initial_value();
            Ok((0.5 * fluid, split, pr, fluid))
        })();
        match outcome {
            Ok((half, split, pr, fluid)) => {
                let tol = 1e-3 * fluid.max(1e-12);
                let ok = half <= split + tol && split <= pr + tol && pr <= fluid + tol;
                if !ok {
                    failures.push(format!(
                        "instance {i}: {half:.6} <= {split:.6} <= {pr:.6} <= {fluid:.6}"
                    ));
                }
                if half > 0.0 {
                    worst = worst.min(split / half);
                }
            }
            Err(e) => failures.push(format!("instance {i}: {e}")),
        }
    }
    Check::new(
        "sandwich",
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{} instances; min split/half-fluid = {worst:.4}",
                cfg.sim_instances
            )
        } else {
            failures.join("; ")
        },
    )
}

/// Optimum of the master program over every assortment of every type.
pub fn enumeration_optimum(inst: &Instance) -> Result<f64, CdlpError> {
    let universe: Vec<_> = inst.product_ids().collect();
    let all: Vec<Assortment> = (0..1u64 << universe.len())
        .map(|m| Assortment::from_mask(m, &universe))
        .collect();
    let demand: Vec<f64> = inst.types.iter().map(|t| t.total_arrivals()).collect();
    let columns = vec![all; inst.num_types()];
    let lp = build_master(inst, &demand, &columns)?;
    Ok(solve_lp(&lp)?.objective_value)
}

fn enumerable_instances(cfg: &VerifyConfig) -> Vec<Instance> {
    let gen = GeneratorConfig::enumerable();
    (0..cfg.lp_instances)
        .map(|i| random_instance(&gen, cfg.instance_seed(i)))
        .collect()
}

pub fn cdlp_exactness(cfg: &VerifyConfig) -> Check {
    let instances = enumerable_instances(cfg);
    let opts = CdlpOptions::exact(SubproblemSolver::brute_force());
    let gaps = try_map_indexed(
        instances.len(),
        cfg.exec,
        |i| -> Result<(f64, bool), CdlpError> {
            let inst = &instances[i];
            let exact = enumeration_optimum(inst)?;
            let sol = solve_cdlp(inst, &opts)?;
            Ok((
                (sol.objective - exact).abs() / exact.abs().max(1.0),
                sol.certified,
            ))
        },
    );
    match gaps {
        Ok(gaps) => {
            let worst = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
            let certified = gaps.iter().all(|g| g.1);
            Check::new(
                "cdlp exactness",
                worst <= 1e-6 && certified,
                format!(
                    "{} instances, max relative gap {worst:.2e} (tolerance 1e-6), all certified: {certified}",
                    gaps.len()
                ),
            )
        }
        Err(e) => Check::failed("cdlp exactness", e),
    }
}

pub fn epsilon_certificate(cfg: &VerifyConfig) -> Check {
    let instances = enumerable_instances(cfg);
    let mut failures = Vec::new();
    let mut worst_ratio = f64::INFINITY;
    for eps in [0.05, 0.1] {
        let opts = CdlpOptions {
            eps,
            solver: SubproblemSolver::Adversarial {
                guarantee: 1.0 - eps / (1.0 + eps),
                n_max: DEFAULT_N_MAX,
            },
            max_iterations: None,
        };
        let results = try_map_indexed(instances.len(), cfg.exec, |i| -> Result<_, CdlpError> {
            let inst = &instances[i];
            let exact = enumeration_optimum(inst)?;
            let sol = solve_cdlp(inst, &opts)?;
            Ok((exact, sol.objective, sol.dual_bound(inst)))
        });
        match results {
            Ok(rows) => {
                for (i, (exact, objective, dual)) in rows.into_iter().enumerate() {
                    if exact > 0.0 {
                        worst_ratio = worst_ratio.min(objective / exact);
                    }
                    if objective < (1.0 - eps) * exact - 1e-9 || dual < exact / (1.0 + eps) - 1e-8 {
                        failures.push(format!(
                            "eps {eps} instance {i}: objective {objective}, dual {dual}, optimum {exact}"
                        ));
                    }
                }
            }
            Err(e) => return Check::failed("epsilon certificate", e),
        }
    }
    Check::new(
        "epsilon certificate",
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "eps in {{0.05, 0.1}} on {} instances; min objective/optimum {worst_ratio:.6}",
                instances.len()
            )
        } else {
            failures.join("; ")
        },
    )
}

pub fn sort_exactness(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=12);
        let shadow = rng.gen_bool(0.5);
        let nu: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    0.0
                } else {
                    rng.gen_range(0.01..3.0)
                }
            })
            .collect();
        let mu: Vec<f64> = (0..n)
            .map(|_| if shadow { rng.gen_range(0.0..1.0) } else { 0.0 })
            .collect();
        let model = AttractionModel::new(mu, nu).expect("nonnegative weights");
        let mut price = vec![0.0];
        price.extend((0..n).map(|_| rng.gen_range(-0.5..2.0)));
        let universe: Vec<_> = (1..=n).collect();
        let sorted = assortment_subproblem_sort(&model, &price, &universe);
        let brute = assortment_subproblem_bruteforce(
            &ChoiceModel::Attraction(model),
            &price,
            &universe,
            DEFAULT_N_MAX,
        )
        .expect("n <= 12");
        worst = worst.max((sorted.value - brute.value).abs());
    }
    Check::new(
        "sort exactness",
        worst <= 1e-9,
        format!("200 cases, max |sort - brute force| = {worst:.2e} (tolerance 1e-9)"),
    )
}

fn prepared(cfg: &VerifyConfig, i: usize) -> Result<PolicyContext, SimError> {
    let inst = random_instance(&GeneratorConfig::default(), cfg.instance_seed(i));
    PolicyContext::prepare(inst, &CdlpOptions::default(), cfg.grid, cfg.exec)
}

const THEOREM_POLICIES: [Policy; 3] = [
    Policy {
        kind: PolicyKind::Opr,
        relaxed: false,
    },
    Policy {
        kind: PolicyKind::Pr,
        relaxed: true,
    },
    Policy {
        kind: PolicyKind::Fcfs,
        relaxed: true,
    },
];

/// Paired comparisons OPR vs PR and PR vs FCFS, both static policies in
/// relaxed mode.
pub fn dominance(cfg: &VerifyConfig) -> Check {
    let mut failures = Vec::new();
    let mut margins = (f64::INFINITY, f64::INFINITY);
    for i in 0..cfg.sim_instances {
        let batch = prepared(cfg, i)
            .and_then(|ctx| monte_carlo_batch(&ctx, &THEOREM_POLICIES, cfg.mc(i as u64)));
        let batch = match batch {
            Ok(b) => b,
            Err(e) => return Check::failed("dominance", e),
        };
        let opr_pr = batch.paired(0, 1);
        let pr_fcfs = batch.paired(1, 2);
        let m1 = opr_pr.mean + 2.0 * opr_pr.half_width;
        let m2 = pr_fcfs.mean + 2.0 * pr_fcfs.half_width;
        margins = (margins.0.min(m1), margins.1.min(m2));
        if m1 < 0.0 {
            failures.push(format!(
                "instance {i}: OPR - PR = {:.4} +- {:.4}",
                opr_pr.mean, opr_pr.half_width
            ));
        }
        if m2 < 0.0 {
            failures.push(format!(
                "instance {i}: PR - FCFS = {:.4} +- {:.4}",
                pr_fcfs.mean, pr_fcfs.half_width
            ));
        }
    }
    Check::new(
        "dominance",
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{} instances x {} paired reps; min (diff + 2 CI): OPR-PR {:.4}, PR-FCFS {:.4}",
                cfg.sim_instances, cfg.reps, margins.0, margins.1
            )
        } else {
            failures.join("; ")
        },
    )
}

/// PR earns at least half and FCFS at least `1/e` of the CDLP value.
pub fn constant_factor_bounds(cfg: &VerifyConfig) -> Check {
    let mut failures = Vec::new();
    let (mut pr_min, mut fcfs_min) = (f64::INFINITY, f64::INFINITY);
    for i in 0..cfg.sim_instances {
        let outcome = prepared(cfg, i).and_then(|ctx| {
            let batch = monte_carlo_batch(&ctx, &THEOREM_POLICIES[1..], cfg.mc(i as u64))?;
            let v = ctx.solution.objective;
            Ok((ctx.solution.epsilon, v, batch))
        });
        let (eps, v, batch) = match outcome {
            Ok(o) => o,
            Err(e) => return Check::failed("constant-factor bounds", e),
        };
        if v <= 0.0 {
            continue;
        }
        let ratio = |p| estimate_ratio(&batch.report(p), v).expect("positive benchmark");
        let (pr, pr_ci) = ratio(0);
        let (fcfs, fcfs_ci) = ratio(1);
        pr_min = pr_min.min(pr);
        fcfs_min = fcfs_min.min(fcfs);
        if pr < 0.5 * (1.0 - eps) - pr_ci {
            failures.push(format!("instance {i}: PR ratio {pr:.4} +- {pr_ci:.4}"));
        }
        if fcfs < (1.0 - eps) / std::f64::consts::E - fcfs_ci {
            failures.push(format!(
                "instance {i}: FCFS ratio {fcfs:.4} +- {fcfs_ci:.4}"
            ));
        }
    }
    Check::new(
        "constant-factor bounds",
        failures.is_empty(),
        if failures.is_empty() {
            format!("min ratio PR {pr_min:.4} (>= 0.5), FCFS {fcfs_min:.4} (>= 1/e)")
        } else {
            failures.join("; ")
        },
    )
}

/// Every simulated mean stays below the CDLP value and below the average
/// hindsight bound, up to confidence intervals.
pub fn upper_bound_sanity(cfg: &VerifyConfig) -> Check {
    let mut failures = Vec::new();
    let mut slack = f64::INFINITY;
    let mut hind_slack = f64::INFINITY;
    let policies = [
        THEOREM_POLICIES[0],
        THEOREM_POLICIES[1],
        THEOREM_POLICIES[2],
        Policy::new(PolicyKind::Pr),
        Policy::new(PolicyKind::Fcfs),
    ];
    for i in 0..cfg.sim_instances {
        let outcome = prepared(cfg, i).and_then(|ctx| {
            let batch = monte_carlo_batch(&ctx, &policies, cfg.mc(i as u64))?;
            let hind = hindsight_summary(
                &ctx.instance,
                &CdlpOptions::default(),
                MonteCarloOptions {
                    reps: cfg.hindsight_paths,
                    ..cfg.mc(i as u64)
                },
            )?;
            Ok((ctx.solution.objective, hind, batch))
        });
        let (v, hind, batch) = match outcome {
            Ok(o) => o,
            Err(e) => return Check::failed("upper-bound sanity", e),
        };
        for report in batch.reports() {
            slack = slack.min(v - report.mean);
            hind_slack = hind_slack.min(hind.mean - report.mean);
            if report.mean > v + report.half_width {
                failures.push(format!(
                    "instance {i} {}: mean {:.4} > CDLP {v:.4}",
                    report.policy.label(),
                    report.mean
                ));
            }
            if report.mean > hind.mean + report.half_width + hind.half_width {
                failures.push(format!(
                    "instance {i} {}: mean {:.4} > hindsight {:.4}",
                    report.policy.label(),
                    report.mean,
                    hind.mean
                ));
            }
        }
    }
    Check::new(
        "upper-bound sanity",
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{} instances x {} policies; min CDLP - mean = {slack:.4}, min hindsight - mean = {hind_slack:.4}",
                cfg.sim_instances,
                policies.len()
            )
        } else {
            failures.join("; ")
        },
    )
}

pub const SCALING_FACTORS: [f64; 4] = [1.0, 4.0, 16.0, 64.0];

/// OPR ratio to the CDLP value on the scaled base instance, per factor.
pub fn scaling_ratios(cfg: &VerifyConfig) -> Result<Vec<(f64, f64, f64)>, SimError> {
    let base = scaling_base_instance();
    SCALING_FACTORS
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let inst = base.scale(theta).map_err(CdlpError::from)?;
            let ctx = PolicyContext::prepare(inst, &CdlpOptions::default(), cfg.grid, cfg.exec)?;
            let report = monte_carlo(&ctx, Policy::new(PolicyKind::Opr), cfg.mc(100 + i as u64))?;
            let (ratio, ci) = estimate_ratio(&report, ctx.solution.objective)?;
            Ok((theta, ratio, ci))
        })
        .collect()
}

pub fn asymptotic_optimality(cfg: &VerifyConfig) -> Check {
    match scaling_ratios(cfg) {
        Ok(rows) => {
            let monotone = rows.windows(2).all(|w| w[1].1 + w[1].2 >= w[0].1 - w[0].2);
            let last = rows.last().expect("four factors").1;
            Check::new(
                "asymptotic optimality",
                monotone && last >= 0.95,
                rows.iter()
                    .map(|(t, r, c)| format!("theta {t}: {r:.4} +- {c:.4}"))
                    .collect::<Vec<_>>()
                    .join(", "),
            )
        }
        Err(e) => Check::failed("asymptotic optimality", e),
    }
}

pub const SPIKE_SHARPNESS: [f64; 4] = [1.0, 4.0, 16.0, 64.0];

/// OPR ratio to the CDLP value on the spike instance, per sharpness.
pub fn spike_ratios(
    cfg: &VerifyConfig,
    base: SpikeConfig,
) -> Result<Vec<(f64, f64, f64)>, SimError> {
    SPIKE_SHARPNESS
        .iter()
        .enumerate()
        .map(|(i, &sharpness)| {
            let inst = spike_instance(&SpikeConfig { sharpness, ..base });
            let ctx = PolicyContext::prepare(inst, &CdlpOptions::default(), cfg.grid, cfg.exec)?;
            let report = monte_carlo(&ctx, Policy::new(PolicyKind::Opr), cfg.mc(200 + i as u64))?;
            let (ratio, ci) = estimate_ratio(&report, ctx.solution.objective)?;
            Ok((sharpness, ratio, ci))
        })
        .collect()
}

pub fn spike_sweep(cfg: &VerifyConfig) -> Check {
    match spike_ratios(cfg, SpikeConfig::default()) {
        Ok(rows) => {
            let monotone = rows.windows(2).all(|w| w[1].1 - w[1].2 <= w[0].1 + w[0].2);
            Check::new(
                "spike sweep",
                monotone,
                rows.iter()
                    .map(|(s, r, c)| format!("sharpness {s}: {r:.4} +- {c:.4}"))
                    .collect::<Vec<_>>()
                    .join(", "),
            )
        }
        Err(e) => Check::failed("spike sweep", e),
    }
}
