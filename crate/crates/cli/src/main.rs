// `!(x > y)` is the NaN-rejecting form throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod format;
mod report;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use choicerm::cdlp::{solve_cdlp, CdlpError, CdlpOptions, CdlpSolution, SubproblemSolver};
use choicerm::generate::{
    random_instance, scaling_base_instance, spike_instance, GeneratorConfig, SpikeConfig,
};
use choicerm::model::Instance;
use choicerm::par::Execution;
use choicerm::policies::{Policy, PolicyKind};
use choicerm::sim::{
    estimate_ratio, generate_arrivals, monte_carlo, monte_carlo_batch, replication_seeds,
    run_policy, MonteCarloOptions, PolicyContext, SimError,
};
use choicerm::valuefn::DEFAULT_GRID;
use choicerm::verify::{run_suite, Suite, VerifyConfig};

use crate::format::{instance_json, load_instance, LoadError};
use crate::report::{
    write_cdlp, write_checks, write_grids, write_simulation, write_spike, write_traces, SimRow,
    SpikeRow,
};

const EXIT_INVARIANT: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_UNCERTIFIED: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

fn fail(code: u8, message: impl Into<String>) -> anyhow::Error {
    Failure {
        code,
        message: message.into(),
    }
    .into()
}

#[derive(Debug, Parser)]
#[command(
    name = "choicerm",
    version,
    about = "Network revenue management under customer choice"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an instance file and list every problem found.
    Validate(InstanceArg),
    /// Solve the choice-based LP and print its solution.
    Cdlp(CdlpArgs),
    /// Simulate policies and write a report CSV.
    Simulate(SimulateArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// OPR-to-CDLP ratios on the terminal-burst instance.
    Spike(SpikeArgs),
    /// Write a generated instance file.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct InstanceArg {
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Auto,
    Sort,
    BruteForce,
    LocalSearch,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Optimality slack of the column generation.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    solver: SolverArg,
}

impl SolveArgs {
    fn options(&self, seed: u64) -> CdlpOptions {
        let solver = match self.solver {
            SolverArg::Auto => SubproblemSolver::Auto,
            SolverArg::Sort => SubproblemSolver::Sort,
            SolverArg::BruteForce => SubproblemSolver::brute_force(),
            SolverArg::LocalSearch => SubproblemSolver::local_search(8, seed),
        };
        CdlpOptions {
            eps: self.eps,
            solver,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Args)]
struct CdlpArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    solve: SolveArgs,
    /// Seed of the local-search solver.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `cdlp.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    /// Time steps of the value grids.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Worker threads; 1 runs sequentially, omitted uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn exec(&self) -> Execution {
        self.workers
            .map_or(Execution::default(), Execution::with_workers)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    solve: SolveArgs,
    /// Scale factors applied to capacities and arrival rates.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    theta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "fcfs,pr,opr")]
    policies: Vec<PolicyKind>,
    /// Let FCFS and PR offer unavailable products.
    #[arg(long)]
    relaxed_mode: bool,
    /// Also write decision traces of the first replication.
    #[arg(long)]
    trace: bool,
    /// Also write the value grids, one row every this many time steps.
    #[arg(long)]
    grid_dump: Option<usize>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Suite name or `all`.
    #[arg(long, default_value = "all")]
    suite: String,
    #[command(flatten)]
    run: RunArgs,
    /// Random instances in the simulation checks.
    #[arg(long, default_value_t = 20)]
    instances: usize,
}

#[derive(Debug, Args)]
struct SpikeArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,4,16,64")]
    sharpness: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    capacity: u32,
    #[arg(long, default_value_t = 4.0)]
    high_reward: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GenerateKind {
    Random,
    Scaling,
    Spike,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = GenerateKind::Random)]
    kind: GenerateKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Burst sharpness of the spike instance.
    #[arg(long, default_value_t = 1.0)]
    sharpness: f64,
    /// Destination file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(path: &Path) -> Result<Instance> {
    match load_instance(path) {
        Ok(inst) => Ok(inst),
        Err(e @ (LoadError::Parse(_) | LoadError::Io(_))) => Err(fail(EXIT_PARSE, e.to_string())),
        Err(e) => Err(fail(EXIT_INVARIANT, e.to_string())),
    }
}

fn load_valid(path: &Path) -> Result<Instance> {
    let inst = load(path)?;
    let report = inst.validate();
    if !report.passed() {
        return Err(fail(
            EXIT_INVARIANT,
            format!("{}\n{report}", path.display()),
        ));
    }
    if !report.issues.is_empty() {
        eprintln!("{report}");
    }
    Ok(inst)
}

fn solve(inst: &Instance, opts: &CdlpOptions) -> Result<CdlpSolution> {
    match solve_cdlp(inst, opts) {
        Ok(sol) => Ok(sol),
        Err(CdlpError::IterationCap(best)) => Err(fail(
            EXIT_UNCERTIFIED,
            format!(
                "column generation stopped after {} iterations without a certificate (objective {})",
                best.iterations, best.objective
            ),
        )),
        Err(e @ CdlpError::InsufficientGuarantee { .. }) => Err(fail(EXIT_INVARIANT, e.to_string())),
        Err(e) => Err(e.into()),
    }
}

fn sim_failure(e: SimError) -> anyhow::Error {
    match e {
        SimError::Cdlp(CdlpError::IterationCap(_)) => fail(EXIT_UNCERTIFIED, e.to_string()),
        SimError::Invariant { .. } => fail(EXIT_INVARIANT, e.to_string()),
        other => other.into(),
    }
}

fn instance_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into())
}

/// Writes `contents` to `dir/name`, or to stdout without a directory.
fn emit(dir: Option<&Path>, name: &str, contents: &[u8]) -> Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(contents)?;
            Ok(())
        }
    }
}

fn cmd_validate(args: InstanceArg) -> Result<()> {
    let inst = load(&args.instance)?;
    let report = inst.validate();
    if !report.issues.is_empty() {
        println!("{report}");
    }
    if !report.passed() {
        return Err(fail(EXIT_INVARIANT, "validation failed"));
    }
    println!(
        "ok: {} resources, {} products, {} types",
        inst.num_resources(),
        inst.num_products(),
        inst.num_types()
    );
    Ok(())
}

fn cmd_cdlp(args: CdlpArgs) -> Result<()> {
    let inst = load_valid(&args.instance)?;
    let sol = solve(&inst, &args.solve.options(args.seed))?;
    println!("objective {}", sol.objective);
    println!("dual bound {}", sol.dual_bound(&inst));
    println!("certified {} (eps {})", sol.certified, sol.epsilon);
    println!("iterations {}", sol.iterations);
    for (l, p) in sol.pi.iter().enumerate() {
        println!("pi[{l}] {p}");
    }
    for (k, s) in sol.sigma.iter().enumerate() {
        println!("sigma[{k}] {s}");
    }
    for (k, offers) in sol.offers.iter().enumerate() {
        for (s, x) in offers {
            println!("type {k} offers {s} with probability {x}");
        }
    }
    if let Some(dir) = &args.out {
        emit(Some(dir), "cdlp.csv", &write_cdlp(&sol)?)?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let base = load_valid(&args.instance)?;
    if let Some(t) = args.theta.iter().find(|t| !(**t > 0.0)) {
        return Err(fail(
            EXIT_INVARIANT,
            format!("scale factor {t} must be positive"),
        ));
    }
    let exec = args.run.exec();
    let opts = args.solve.options(args.run.seed);
    let policies: Vec<Policy> = args
        .policies
        .iter()
        .map(|&kind| {
            if args.relaxed_mode {
                Policy::relaxed(kind)
            } else {
                Policy::new(kind)
            }
        })
        .collect();
    let id = instance_id(&args.instance);

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut grids = Vec::new();
    for &theta in &args.theta {
        let inst = base.scale(theta)?;
        let ctx = PolicyContext::prepare(inst, &opts, args.run.grid, exec).map_err(sim_failure)?;
        let mc = MonteCarloOptions {
            reps: args.run.reps,
            base_seed: args.run.seed,
            exec,
        };
        let batch = monte_carlo_batch(&ctx, &policies, mc).map_err(sim_failure)?;
        let v = ctx.solution.objective;
        for report in batch.reports() {
            let ratio = estimate_ratio(&report, v).ok();
            rows.push(SimRow {
                instance: id.clone(),
                theta,
                report,
                v_cdlp: v,
                ratio,
                seed: args.run.seed,
            });
        }
        if args.trace {
            let (path_seed, choice_seed) = replication_seeds(args.run.seed, 0);
            let path = generate_arrivals(&ctx.instance, path_seed);
            for &p in &policies {
                let r = run_policy(&ctx, p, &path, choice_seed, true).map_err(sim_failure)?;
                traces.push((theta, r));
            }
        }
        if args.grid_dump.is_some() {
            grids.push((theta, ctx.grids));
        }
    }

    let out = args.run.out.as_deref();
    emit(out, "report.csv", &write_simulation(&rows)?)?;
    if args.trace {
        emit(out, "trace.csv", &write_traces(&traces)?)?;
    }
    if let Some(stride) = args.grid_dump {
        emit(out, "values.csv", &write_grids(&grids, stride)?)?;
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let suites: Vec<Suite> = if args.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![args
            .suite
            .parse()
            .map_err(|e: String| fail(EXIT_PARSE, e))?]
    };
    let cfg = VerifyConfig {
        seed: args.run.seed,
        reps: args.run.reps,
        sim_instances: args.instances,
        grid: args.run.grid,
        exec: args.run.exec(),
        ..VerifyConfig::default()
    };
    if cfg.reps < 2 {
        return Err(fail(EXIT_INVARIANT, "at least 2 replications are required"));
    }
    let mut results = Vec::new();
    for suite in suites {
        for check in run_suite(suite, &cfg) {
            eprintln!("[{suite}] {check}");
            results.push((suite, check));
        }
    }
    emit(
        args.run.out.as_deref(),
        "verify.csv",
        &write_checks(&results)?,
    )?;
    let failed = results.iter().filter(|(_, c)| !c.passed).count();
    if failed > 0 {
        return Err(fail(
            EXIT_VERIFY,
            format!("{failed} of {} checks failed", results.len()),
        ));
    }
    Ok(())
}

fn cmd_spike(args: SpikeArgs) -> Result<()> {
    if let Some(s) = args.sharpness.iter().find(|s| !(**s >= 1.0)) {
        return Err(fail(
            EXIT_INVARIANT,
            format!("sharpness {s} must be at least 1"),
        ));
    }
    let exec = args.run.exec();
    let mut rows = Vec::new();
    for &sharpness in &args.sharpness {
        let inst = spike_instance(&SpikeConfig {
            sharpness,
            capacity: args.capacity,
            high_reward: args.high_reward,
            ..SpikeConfig::default()
        });
        let ctx = PolicyContext::prepare(inst, &CdlpOptions::default(), args.run.grid, exec)
            .map_err(sim_failure)?;
        let mc = MonteCarloOptions {
            reps: args.run.reps,
            base_seed: args.run.seed,
            exec,
        };
        let report = monte_carlo(&ctx, Policy::new(PolicyKind::Opr), mc).map_err(sim_failure)?;
        let v = ctx.solution.objective;
        rows.push(SpikeRow {
            sharpness,
            capacity: args.capacity,
            ratio: estimate_ratio(&report, v).ok(),
            report,
            v_cdlp: v,
            seed: args.run.seed,
        });
    }
    emit(args.run.out.as_deref(), "spike.csv", &write_spike(&rows)?)
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let inst = match args.kind {
        GenerateKind::Random => random_instance(&GeneratorConfig::default(), args.seed),
        GenerateKind::Scaling => scaling_base_instance(),
        GenerateKind::Spike => {
            if !(args.sharpness >= 1.0) {
                bail!("sharpness {} must be at least 1", args.sharpness);
            }
            spike_instance(&SpikeConfig {
                sharpness: args.sharpness,
                ..SpikeConfig::default()
            })
        }
    };
    let text = instance_json(&inst);
    match &args.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Cdlp(a) => cmd_cdlp(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Spike(a) => cmd_spike(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<Failure>()
                .map_or(EXIT_INVARIANT, |f| f.code);
            ExitCode::from(code)
        }
    }
}
