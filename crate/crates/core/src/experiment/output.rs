//! File formats: the sweep trace CSV, the diagnostics CSV, the JSON summary,
//! and per-learning-rate plot data.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::ExperimentConfig;
use super::runner::SweepOutcome;
use super::trace::{log_suboptimality, RunTrace, LOG_SUBOPT_FLOOR};
use crate::error::{Error, Result};
use crate::rng;

pub const TRACE_HEADER_PREFIX: [&str; 7] = [
    "run_seed",
    "eta",
    "t",
    "subopt",
    "log_subopt",
    "underflow",
    "pi_star",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn sorted(traces: &[RunTrace]) -> Vec<&RunTrace> {
    let mut v: Vec<&RunTrace> = traces.iter().collect();
    v.sort_by_key(|t| t.key());
    v
}

/// Writes `run_seed,eta,t,subopt,log_subopt,underflow,pi_star,count_1..count_K,theta_1..theta_K`,
/// rows sorted by `(eta, seed, t)`.
pub fn write_trace_csv<W: Write>(traces: &[RunTrace], out: W) -> Result<()> {
    let k = traces.first().map_or(0, |t| t.k);
    if traces.iter().any(|t| t.k != k) {
        return Err(Error::InvalidInput(
            "traces disagree on the number of arms".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = TRACE_HEADER_PREFIX.iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|a| format!("count_{a}")));
    header.extend((1..=k).map(|a| format!("theta_{a}")));
    w.write_record(&header)?;
    for trace in sorted(traces) {
        for row in &trace.rows {
            let (log_subopt, underflow) = log_suboptimality(row.subopt);
            let mut record = vec![
                trace.seed.to_string(),
                fmt17(trace.eta),
                row.t.to_string(),
                fmt17(row.subopt),
                fmt17(log_subopt),
                u8::from(underflow).to_string(),
                fmt17(row.pi_star),
            ];
            record.extend(row.counts.iter().map(u64::to_string));
            record.extend(row.theta.iter().map(|&x| fmt17(x)));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per `(run, checkpoint, arm)` for runs recorded with diagnostics.
pub fn write_diagnostics_csv<W: Write>(traces: &[RunTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run_seed",
        "eta",
        "t",
        "arm",
        "cum_progress",
        "cum_noise",
        "variance_proxy",
        "residual",
    ])?;
    for trace in sorted(traces) {
        for row in &trace.rows {
            let Some(d) = &row.diagnostics else { continue };
            for a in 0..trace.k {
                w.write_record([
                    trace.seed.to_string(),
                    fmt17(trace.eta),
                    row.t.to_string(),
                    (a + 1).to_string(),
                    fmt17(d.cum_progress[a]),
                    fmt17(d.cum_noise[a]),
                    fmt17(d.variance_proxy[a]),
                    fmt17(d.residual),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-run terminal values plus failures, as JSON.
pub fn summary_json(config: &ExperimentConfig, outcome: &SweepOutcome) -> serde_json::Value {
    let mut runs: Vec<&RunTrace> = outcome.traces.iter().collect();
    runs.sort_by_key(|t| t.key());
    let runs: Vec<_> = runs
        .into_iter()
        .map(|t| {
            let (log_subopt, underflow) = log_suboptimality(t.terminal.subopt);
            json!({
                "eta": t.eta,
                "seed": t.seed,
                "horizon": t.horizon,
                "final_subopt": t.terminal.subopt,
                "final_log_subopt": log_subopt,
                "underflow": underflow,
                "pi_star": t.terminal.pi_star,
                "counts": t.terminal.counts,
            })
        })
        .collect();
    let failures: Vec<_> = outcome
        .failures
        .iter()
        .map(|f| json!({"eta": f.key.eta, "seed": f.key.seed, "error": f.error.to_string()}))
        .collect();
    json!({
        "generator": rng::ALGORITHM,
        "master_seed": config.master_seed,
        "horizon": config.horizon,
        "means": config.env.means,
        "runs": runs,
        "failures": failures,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceCsvRow {
    pub seed: u64,
    pub eta: f64,
    pub t: u64,
    pub subopt: f64,
    pub log_subopt: f64,
    pub underflow: bool,
    pub pi_star: f64,
    pub counts: Vec<u64>,
    pub theta: Vec<f64>,
}

fn parse<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::Parse(format!("missing column {name}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad value in column {name}")))
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceCsvRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.len() < TRACE_HEADER_PREFIX.len() + 4
        || header.iter().zip(TRACE_HEADER_PREFIX).any(|(a, b)| a != b)
    {
        return Err(Error::Parse("not a trace CSV header".into()));
    }
    let k = (header.len() - TRACE_HEADER_PREFIX.len()) / 2;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        let counts = (0..k)
            .map(|a| parse(r.get(7 + a), "count"))
            .collect::<Result<Vec<u64>>>()?;
        let theta = (0..k)
            .map(|a| parse(r.get(7 + k + a), "theta"))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(TraceCsvRow {
            seed: parse(r.get(0), "run_seed")?,
            eta: parse(r.get(1), "eta")?,
            t: parse(r.get(2), "t")?,
            subopt: parse(r.get(3), "subopt")?,
            log_subopt: parse(r.get(4), "log_subopt")?,
            underflow: parse::<u8>(r.get(5), "underflow")? != 0,
            pi_star: parse(r.get(6), "pi_star")?,
            counts,
            theta,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotFile {
    pub eta: f64,
    pub path: PathBuf,
    pub seeds: usize,
    pub rows: usize,
}

/// Writes `plot_eta_<eta>.csv` files with columns `log_t,log_subopt,seed,underflow`.
pub fn emit_plot_data(rows: &[TraceCsvRow], out_dir: &Path) -> Result<Vec<PlotFile>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("trace has no rows".into()));
    }
    let mut by_eta: BTreeMap<u64, Vec<&TraceCsvRow>> = BTreeMap::new();
    for row in rows {
        // eta > 0, so the bit pattern orders like the value
        by_eta.entry(row.eta.to_bits()).or_default().push(row);
    }
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for (bits, mut group) in by_eta {
        let eta = f64::from_bits(bits);
        group.sort_by_key(|r| (r.seed, r.t));
        let path = out_dir.join(format!("plot_eta_{eta}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["log_t", "log_subopt", "seed", "underflow"])?;
        for r in &group {
            let log_subopt = if r.underflow {
                LOG_SUBOPT_FLOOR
            } else {
                r.log_subopt
            };
            w.write_record([
                fmt17((r.t as f64).ln()),
                fmt17(log_subopt),
                r.seed.to_string(),
                u8::from(r.underflow).to_string(),
            ])?;
        }
        w.flush()?;
        let mut seeds: Vec<u64> = group.iter().map(|r| r.seed).collect();
        seeds.dedup();
        files.push(PlotFile {
            eta,
            path,
            seeds: seeds.len(),
            rows: group.len(),
        });
    }
    Ok(files)
}
