//! CSV summaries and JSONL traces.
//!
//! Summary columns, in order: `scenario_id, policy, engine, beta, alpha,
//! epsilon, h, T, seed, avg_queue_<id>..., avg_cost, interruptions, drops,
//! tv_to_reference`. Floats use the shortest representation that
//! round-trips; absent values are empty cells.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use graphpack_core::engine::{TraceHeader, TraceRecord};
use graphpack_core::{Instance, SchedulerParams, Trace};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::experiment::{AggregateRecord, Estimate, RunRecord};

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn param_cells(p: &SchedulerParams) -> [String; 5] {
    [num(p.beta), num(p.alpha), num(p.epsilon), num(p.h), num(p.frame_length)]
}

pub fn summary_header(instance: &Instance) -> Vec<String> {
    let mut h: Vec<String> =
        ["scenario_id", "policy", "engine", "beta", "alpha", "epsilon", "h", "T", "seed"].map(String::from).to_vec();
    h.extend(instance.jobs.iter().map(|j| format!("avg_queue_{}", j.id)));
    h.extend(["avg_cost", "interruptions", "drops", "tv_to_reference"].map(String::from));
    h
}

pub fn summary_row(r: &RunRecord) -> Vec<String> {
    let mut row = vec![r.scenario_id.clone(), r.policy.name().into(), r.engine.name().into()];
    row.extend(param_cells(&r.params));
    row.push(r.seed.to_string());
    row.extend(r.avg_queue.iter().copied().map(num));
    row.extend([num(r.avg_cost), r.interruptions.to_string(), r.drops.to_string(), opt(r.tv_to_reference)]);
    row
}

pub fn aggregate_header(instance: &Instance) -> Vec<String> {
    let mut h: Vec<String> =
        ["scenario_id", "policy", "engine", "beta", "alpha", "epsilon", "h", "T", "runs"].map(String::from).to_vec();
    for j in &instance.jobs {
        h.push(format!("mean_queue_{}", j.id));
        h.push(format!("ci_queue_{}", j.id));
    }
    h.extend(
        ["mean_total_queue", "ci_total_queue", "mean_cost", "ci_cost", "mean_interruptions", "mean_drops", "mean_tv", "ci_tv"]
            .map(String::from),
    );
    h
}

pub fn aggregate_row(a: &AggregateRecord) -> Vec<String> {
    let est = |e: &Estimate| [num(e.mean), opt(e.half_width)];
    let mut row = vec![a.scenario_id.clone(), a.policy.name().into(), a.engine.name().into()];
    row.extend(param_cells(&a.params));
    row.push(a.runs.to_string());
    for q in &a.queue {
        row.extend(est(q));
    }
    row.extend(est(&a.total_queue));
    row.extend(est(&a.cost));
    row.extend([num(a.interruptions), num(a.drops)]);
    match &a.tv_to_reference {
        Some(e) => row.extend(est(e)),
        None => row.extend([String::new(), String::new()]),
    }
    row
}

fn write_csv<W: Write>(out: W, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_summary<W: Write>(out: W, instance: &Instance, runs: &[RunRecord]) -> Result<()> {
    write_csv(out, summary_header(instance), runs.iter().map(summary_row))
}

pub fn write_aggregate<W: Write>(out: W, instance: &Instance, aggs: &[AggregateRecord]) -> Result<()> {
    write_csv(out, aggregate_header(instance), aggs.iter().map(aggregate_row))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Run identity carried by the first line of each trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub scenario_id: String,
    pub seed: u64,
    pub params: SchedulerParams,
    pub trace: TraceHeader,
}

/// One JSONL line: a run header or one event of that run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceLine {
    run: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    header: Option<RunHeader>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    event: Option<TraceRecord>,
}

/// Writes each trace as a header line followed by its events.
pub fn write_traces<W: Write>(mut out: W, traces: &[(usize, RunHeader, &Trace)]) -> Result<()> {
    for (run, header, trace) in traces {
        let line = TraceLine { run: *run, header: Some(header.clone()), event: None };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| CliError::io("<trace>", e))?;
        for r in &trace.records {
            let line = TraceLine { run: *run, header: None, event: Some(r.clone()) };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(|e| CliError::io("<trace>", e))?;
        }
    }
    out.flush().map_err(|e| CliError::io("<trace>", e))
}

/// Inverse of [`write_traces`].
pub fn read_traces(path: &Path) -> Result<Vec<(usize, RunHeader, Trace)>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out: Vec<(usize, RunHeader, Trace)> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(&line).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        let bad = |message: &str| CliError::Parse { path: path.to_path_buf(), line: i + 1, column: 1, message: message.into() };
        match (parsed.header, parsed.event) {
            (Some(h), None) => {
                let trace = Trace { header: h.trace.clone(), records: Vec::new() };
                out.push((parsed.run, h, trace));
            }
            (None, Some(ev)) => match out.last_mut() {
                Some((run, _, t)) if *run == parsed.run => t.records.push(ev),
                _ => return Err(bad("event line does not follow a header of the same run")),
            },
            _ => return Err(bad("line needs exactly one of `header` or `event`")),
        }
    }
    Ok(out)
}
