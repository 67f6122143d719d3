//! Every verification suite at reduced effort and a seed distinct from the
//! acceptance run.

use choicerm::verify::{run_suite, Suite, VerifyConfig};

fn reduced() -> VerifyConfig {
    VerifyConfig {
        seed: 77,
        reps: 3000,
        hindsight_paths: 300,
        sim_instances: 8,
        lp_instances: 25,
        ..VerifyConfig::default()
    }
}

fn assert_suite(suite: Suite) {
    let checks = run_suite(suite, &reduced());
    assert!(!checks.is_empty());
    for check in &checks {
        assert!(check.passed, "{check}");
    }
}

#[test]
fn inequality() {
    assert_suite(Suite::Inequality);
}

#[test]
fn hjb() {
    assert_suite(Suite::Hjb);
}

#[test]
fn cdlp() {
    assert_suite(Suite::Cdlp);
}

#[test]
fn dominance() {
    assert_suite(Suite::Dominance);
}

#[test]
fn bounds() {
    assert_suite(Suite::Bounds);
}

#[test]
fn scaling() {
    assert_suite(Suite::Scaling);
}

#[test]
fn spike() {
    assert_suite(Suite::Spike);
}

#[test]
fn suite_names_round_trip() {
    for suite in Suite::ALL {
        assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
    }
    assert!("nonsense".parse::<Suite>().is_err());
}
