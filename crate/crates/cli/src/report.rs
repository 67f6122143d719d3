//! CSV outputs. Every writer renders into memory so callers decide where
//! the bytes go; floats use the shortest round-trip representation.

use anyhow::Result;
use choicerm::cdlp::CdlpSolution;
use choicerm::sim::{MonteCarloReport, ReplicationReport};
use choicerm::valuefn::ResourceValueGrid;
use choicerm::verify::{Check, Suite};

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub struct SimRow {
    pub instance: String,
    pub theta: f64,
    pub report: MonteCarloReport,
    pub v_cdlp: f64,
    /// `(ratio, half-width)`; absent when the benchmark is zero.
    pub ratio: Option<(f64, f64)>,
    pub seed: u64,
}

pub fn write_simulation(rows: &[SimRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance_id",
        "theta",
        "policy",
        "M",
        "mean",
        "ci_half_width",
        "V_CDLP",
        "ratio",
        "ratio_ci_half_width",
        "seed",
    ])?;
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.theta.to_string(),
            r.report.policy.label(),
            r.report.reps.to_string(),
            r.report.mean.to_string(),
            r.report.half_width.to_string(),
            r.v_cdlp.to_string(),
            opt(r.ratio.map(|x| x.0)),
            opt(r.ratio.map(|x| x.1)),
            r.seed.to_string(),
        ])?;
    }
    finish(w)
}

pub fn write_traces(runs: &[(f64, ReplicationReport)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "theta",
        "policy",
        "time",
        "type",
        "assortment",
        "choice",
        "accept",
        "reward",
    ])?;
    for (theta, run) in runs {
        for row in run.trace.iter().flatten() {
            w.write_record([
                theta.to_string(),
                run.policy.label(),
                row.time.to_string(),
                row.customer_type.to_string(),
                row.offered.to_string(),
                row.choice.to_string(),
                row.accepted.to_string(),
                row.reward.to_string(),
            ])?;
        }
    }
    finish(w)
}

pub fn write_grids(grids: &[(f64, Vec<ResourceValueGrid>)], stride: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta", "resource", "t", "c", "V"])?;
    for (theta, per_resource) in grids {
        for g in per_resource {
            for (t, c, v) in g.rows(stride) {
                w.write_record([
                    theta.to_string(),
                    g.resource.to_string(),
                    t.to_string(),
                    c.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    finish(w)
}

pub fn write_cdlp(sol: &CdlpSolution) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["type", "assortment", "probability"])?;
    for (k, offers) in sol.offers.iter().enumerate() {
        for (s, x) in offers {
            w.write_record([k.to_string(), s.to_string(), x.to_string()])?;
        }
    }
    finish(w)
}

pub fn write_checks(results: &[(Suite, Check)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["suite", "check", "passed", "detail"])?;
    for (suite, c) in results {
        w.write_record([
            suite.name().to_string(),
            c.name.clone(),
            c.passed.to_string(),
            c.detail.clone(),
        ])?;
    }
    finish(w)
}

pub struct SpikeRow {
    pub sharpness: f64,
    pub capacity: u32,
    pub report: MonteCarloReport,
    pub v_cdlp: f64,
    pub ratio: Option<(f64, f64)>,
    pub seed: u64,
}

pub fn write_spike(rows: &[SpikeRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "sharpness",
        "capacity",
        "M",
        "mean",
        "ci_half_width",
        "V_CDLP",
        "ratio",
        "ratio_ci_half_width",
        "seed",
    ])?;
    for r in rows {
        w.write_record([
            r.sharpness.to_string(),
            r.capacity.to_string(),
            r.report.reps.to_string(),
            r.report.mean.to_string(),
            r.report.half_width.to_string(),
            r.v_cdlp.to_string(),
            opt(r.ratio.map(|x| x.0)),
            opt(r.ratio.map(|x| x.1)),
            r.seed.to_string(),
        ])?;
    }
    finish(w)
}
