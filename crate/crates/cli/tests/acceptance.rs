//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use choicerm::verify::{
    asymptotic_optimality, cdlp_exactness, constant_factor_bounds, dominance, epsilon_certificate,
    hjb_accuracy, poisson_inequality, sandwich, sort_exactness, upper_bound_sanity, Check,
    VerifyConfig,
};

const BIN: &str = env!("CARGO_BIN_EXE_choicerm");

fn run(args: &[&str]) -> Result<(), String> {
    let out = Command::new(BIN)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn read(dir: &Path, name: &str) -> Result<Vec<u8>, String> {
    std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))
}

/// Runs every CSV-producing command twice (and once more single-threaded)
/// and compares the bytes.
fn determinism() -> Check {
    let outcome = (|| -> Result<String, String> {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let base = tmp.path();
        let instance = base.join("instance.json");
        let instance = instance.to_str().unwrap();
        run(&[
            "generate", "--kind", "random", "--seed", "3", "--out", instance,
        ])?;

        let commands: Vec<(Vec<&str>, &str)> = vec![
            (
                vec![
                    "simulate",
                    "--instance",
                    instance,
                    "--seed",
                    "11",
                    "--reps",
                    "2000",
                    "--theta",
                    "1,2",
                    "--trace",
                    "--grid-dump",
                    "500",
                ],
                "report.csv",
            ),
            (
                vec![
                    "simulate",
                    "--instance",
                    instance,
                    "--seed",
                    "11",
                    "--reps",
                    "2000",
                    "--relaxed-mode",
                ],
                "report.csv",
            ),
            (vec!["cdlp", "--instance", instance], "cdlp.csv"),
            (vec!["spike", "--seed", "4", "--reps", "2000"], "spike.csv"),
            (
                vec![
                    "verify",
                    "--suite",
                    "inequality",
                    "--seed",
                    "1",
                    "--reps",
                    "100",
                ],
                "verify.csv",
            ),
        ];
        let mut compared = 0;
        for (i, (args, file)) in commands.iter().enumerate() {
            let mut outputs = Vec::new();
            for (j, workers) in [None, None, Some("1")].into_iter().enumerate() {
                let dir = base.join(format!("run-{i}-{j}"));
                let mut full = args.clone();
                let dir_str = dir.to_str().unwrap().to_string();
                full.extend(["--out", &dir_str]);
                if let Some(w) = workers {
                    if args[0] != "cdlp" {
                        full.extend(["--workers", w]);
                    }
                }
                run(&full)?;
                let mut bytes = read(&dir, file)?;
                for extra in ["trace.csv", "values.csv"] {
                    if let Ok(more) = read(&dir, extra) {
                        bytes.extend(more);
                    }
                }
                outputs.push(bytes);
            }
            if outputs.iter().any(|o| o != &outputs[0]) {
                return Err(format!("{} output differs between runs", args[0]));
            }
            compared += 1;
        }
        Ok(format!(
            "{compared} commands byte-identical across reruns and worker counts"
        ))
    })();
    match outcome {
        Ok(detail) => Check {
            name: "determinism".into(),
            passed: true,
            detail,
        },
        Err(detail) => Check {
            name: "determinism".into(),
            passed: false,
            detail,
        },
    }
}

fn main() {
    let cfg = VerifyConfig::default();
    let criteria: Vec<(u32, Box<dyn Fn() -> Check>)> = vec![
        (1, Box::new(move || cdlp_exactness(&cfg))),
        (2, Box::new(move || epsilon_certificate(&cfg))),
        (3, Box::new(move || sort_exactness(cfg.seed))),
        (4, Box::new(move || hjb_accuracy(cfg.grid))),
        (5, Box::new(move || dominance(&cfg))),
        (6, Box::new(move || constant_factor_bounds(&cfg))),
        (7, Box::new(move || sandwich(&cfg))),
        (8, Box::new(poisson_inequality)),
        (9, Box::new(move || asymptotic_optimality(&cfg))),
        (10, Box::new(move || upper_bound_sanity(&cfg))),
        (11, Box::new(determinism)),
    ];

    let mut failed = 0;
    for (id, criterion) in &criteria {
        let start = Instant::now();
        let check = criterion();
        if !check.passed {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {check} [{:.1}s]",
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
