use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_choicerm");

const ONE_PRODUCT: &str = r#"{
    "resources": [{"capacity": 1}],
    "products": [{"resource": 0, "reward": 1.0}],
    "types": [{"rate": 2.0, "choice": {"kind": "mnl", "nu": [1.0]}}]
}"#;

fn choicerm(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn generated(dir: &Path, kind: &str) -> PathBuf {
    let path = dir.join(format!("{kind}.json"));
    let out = choicerm(&[
        "generate",
        "--kind",
        kind,
        "--seed",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    path
}

#[test]
fn validate_reports_success() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "one.json", ONE_PRODUCT);
    let out = choicerm(&["validate", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "ok: 1 resources, 1 products, 1 types");
}

#[test]
fn malformed_documents_exit_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.json", "{\"resources\": [");
    let out = choicerm(&["validate", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = choicerm(&["validate", "--instance", "/nonexistent/instance.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn invalid_models_exit_with_invariant_code() {
    let dir = tempfile::tempdir().unwrap();
    let dangling = ONE_PRODUCT.replace("\"resource\": 0", "\"resource\": 3");
    let path = write(dir.path(), "dangling.json", &dangling);
    let out = choicerm(&["validate", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let negative = ONE_PRODUCT.replace("\"nu\": [1.0]", "\"nu\": [-1.0]");
    let path = write(dir.path(), "negative.json", &negative);
    let out = choicerm(&["cdlp", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cdlp_prints_binding_capacity_solution() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "one.json", ONE_PRODUCT);
    let out = choicerm(&[
        "cdlp",
        "--instance",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let objective: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("objective "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((objective - 1.0).abs() < 1e-9, "{text}");
    assert!(text.contains("certified true"));
    let csv = fs::read_to_string(dir.path().join("cdlp.csv")).unwrap();
    assert!(csv.starts_with("type,assortment,probability\n"));
}

#[test]
fn zero_demand_has_zero_objective() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "idle.json", &ONE_PRODUCT.replace("2.0", "0.0"));
    let out = choicerm(&["cdlp", "--instance", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(
        stdout(&out).lines().any(|l| l == "objective 0"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn local_search_cannot_certify_exact_solve() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "one.json", ONE_PRODUCT);
    let out = choicerm(&[
        "cdlp",
        "--instance",
        path.to_str().unwrap(),
        "--eps",
        "0",
        "--solver",
        "local-search",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let ok = choicerm(&[
        "cdlp",
        "--instance",
        path.to_str().unwrap(),
        "--eps",
        "0.1",
        "--solver",
        "local-search",
    ]);
    assert!(ok.status.success());
}

#[test]
fn simulate_writes_one_row_per_theta_and_policy() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generated(dir.path(), "scaling");
    let out_dir = dir.path().join("out");
    let out = choicerm(&[
        "simulate",
        "--instance",
        inst.to_str().unwrap(),
        "--reps",
        "200",
        "--theta",
        "1,4",
        "--policies",
        "fcfs,opr",
        "--seed",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let mut reader = csv::Reader::from_path(out_dir.join("report.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "instance_id",
            "theta",
            "policy",
            "M",
            "mean",
            "ci_half_width",
            "V_CDLP",
            "ratio",
            "ratio_ci_half_width",
            "seed"
        ]
    );
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let keys: Vec<_> = rows
        .iter()
        .map(|r| (r[1].to_string(), r[2].to_string()))
        .collect();
    assert_eq!(
        keys,
        [("1", "fcfs"), ("1", "opr"), ("4", "fcfs"), ("4", "opr")]
            .map(|(a, b)| (a.to_string(), b.to_string()))
    );
    for row in &rows {
        assert_eq!(&row[0], "scaling");
        assert_eq!(&row[3], "200");
        let mean: f64 = row[4].parse().unwrap();
        let bound: f64 = row[6].parse().unwrap();
        assert!(mean > 0.0 && bound > 0.0);
    }
    // Bounds scale linearly with theta.
    let b1: f64 = rows[0][6].parse().unwrap();
    let b4: f64 = rows[2][6].parse().unwrap();
    assert!((b4 - 4.0 * b1).abs() < 1e-9 * b4);
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generated(dir.path(), "random");
    let run = |seed: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = choicerm(&[
            "simulate",
            "--instance",
            inst.to_str().unwrap(),
            "--reps",
            "300",
            "--seed",
            seed,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{out:?}");
        fs::read(out_dir.join("report.csv")).unwrap()
    };
    let a = run("9", "a");
    assert_eq!(a, run("9", "b"));
    assert_ne!(a, run("10", "c"));
}

#[test]
fn nonpositive_theta_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "one.json", ONE_PRODUCT);
    let out = choicerm(&[
        "simulate",
        "--instance",
        path.to_str().unwrap(),
        "--seed",
        "1",
        "--theta",
        "1,0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_single_suite_passes() {
    let out = choicerm(&["verify", "--suite", "inequality", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
    assert!(stdout(&out).starts_with("suite,check,passed,detail\n"));
}

#[test]
fn generated_instances_validate() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["random", "scaling", "spike"] {
        let path = generated(dir.path(), kind);
        let out = choicerm(&["validate", "--instance", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{kind}: {out:?}");
    }
}
