//! Runs every sweep point × seed of a scenario and aggregates the results.

use graphpack_core::exact::{
    closed_form_pi, fixed_weight_fn, gamma_distribution, gamma_hat_distribution, total_variation,
    StationaryDistribution,
};
use graphpack_core::{
    enumerate_configurations, run_continuous, run_jump_chain, run_loss_system, ConfigKey, Error as CoreError,
    MetricsReport, PolicyKind, RunOptions, SchedulerParams, Trace,
};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CliError, Result};
use crate::scenario::{reference_available, EngineKind, Scenario};

/// Confidence level of the aggregate half-widths.
pub const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Default)]
pub struct ExperimentOptions {
    pub record_trace: bool,
    pub check_invariants: bool,
    /// run only the base point, ignoring the sweep
    pub base_only: bool,
}

/// One run: a sweep point and a seed. Averages are over the post-warm-up
/// window.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario_id: String,
    pub policy: PolicyKind,
    pub engine: EngineKind,
    pub point: usize,
    pub params: SchedulerParams,
    pub seed: u64,
    pub avg_queue: Vec<f64>,
    pub avg_cost: f64,
    pub interruptions: u64,
    pub drops: u64,
    pub tv_to_reference: Option<f64>,
    pub report: MetricsReport,
}

/// Mean and confidence half-width; the half-width needs two runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: Option<f64>,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self { mean, half_width: None };
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
        let q = t.inverse_cdf(0.5 + CONFIDENCE / 2.0);
        Self { mean, half_width: Some(q * (var / n as f64).sqrt()) }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width.unwrap_or(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width.unwrap_or(0.0)
    }
}

/// Seeds of one sweep point pooled together.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub scenario_id: String,
    pub policy: PolicyKind,
    pub engine: EngineKind,
    pub params: SchedulerParams,
    pub runs: usize,
    pub queue: Vec<Estimate>,
    pub total_queue: Estimate,
    pub cost: Estimate,
    pub interruptions: f64,
    pub drops: f64,
    pub tv_to_reference: Option<Estimate>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRecord>,
    /// `(run index, trace)` in run order
    pub traces: Vec<(usize, Trace)>,
}

/// Completed runs preceding the first failure, with that failure.
#[derive(Debug)]
pub struct PartialFailure {
    pub partial: ExperimentResult,
    pub error: CliError,
}

/// Exact stationary law the engine should converge to at one point.
fn reference(scenario: &Scenario, params: SchedulerParams) -> Result<(Vec<ConfigKey>, StationaryDistribution)> {
    let inst = &scenario.instance;
    let space = enumerate_configurations(inst, scenario.max_states)?;
    let kind = scenario.policy.kind;
    let dist = if scenario.engine == EngineKind::Loss || kind == PolicyKind::Loss {
        gamma_distribution(inst, &space)
    } else {
        let policy = scenario.policy_at(params);
        let w = fixed_weight_fn(&policy, inst.total_slots())?;
        let base = match kind {
            PolicyKind::Adgp => gamma_hat_distribution(inst, params.clock_rate, &space),
            _ => gamma_distribution(inst, &space),
        };
        closed_form_pi(&base, w, params.beta)?
    };
    Ok((space, dist))
}

fn run_one(
    scenario: &Scenario,
    point: usize,
    params: SchedulerParams,
    seed: u64,
    reference: Option<&(Vec<ConfigKey>, StationaryDistribution)>,
    opts: &ExperimentOptions,
) -> Result<(RunRecord, Option<Trace>)> {
    let inst = &scenario.instance;
    let policy = scenario.policy_at(params);
    let run_opts = RunOptions {
        seed,
        warmup_fraction: scenario.warmup,
        record_trace: opts.record_trace,
        check_invariants: opts.check_invariants,
        occupancy_threshold: if reference.is_some() { u128::MAX } else { RunOptions::default().occupancy_threshold },
        max_states: scenario.max_states,
    };
    let out = match scenario.engine {
        EngineKind::Continuous => run_continuous(inst, &policy, scenario.horizon, &run_opts)?,
        EngineKind::JumpChain => run_jump_chain(inst, &policy, scenario.steps, &run_opts)?,
        EngineKind::Loss => run_loss_system(inst, scenario.horizon, &run_opts)?,
    };
    let report = out.report;
    let tv = match reference {
        Some((space, dist)) => {
            let empirical = report
                .steady
                .distribution_over(space)
                .ok_or_else(|| CoreError::Numerical("configuration occupancy was not tracked".into()))?;
            Some(total_variation(&empirical, &dist.probs)?)
        }
        None => None,
    };
    let record = RunRecord {
        scenario_id: scenario.id.clone(),
        policy: scenario.policy.kind,
        engine: scenario.engine,
        point,
        params,
        seed,
        avg_queue: report.steady.queue.clone(),
        avg_cost: report.steady.cost,
        interruptions: report.interruptions,
        drops: report.drops,
        tv_to_reference: tv,
        report,
    };
    Ok((record, out.trace))
}

fn aggregate(runs: &[RunRecord]) -> AggregateRecord {
    let first = &runs[0];
    let jobs = first.avg_queue.len();
    let col = |f: &dyn Fn(&RunRecord) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    let tvs: Option<Vec<f64>> = runs.iter().map(|r| r.tv_to_reference).collect();
    AggregateRecord {
        scenario_id: first.scenario_id.clone(),
        policy: first.policy,
        engine: first.engine,
        params: first.params,
        runs: runs.len(),
        queue: (0..jobs).map(|j| Estimate::of(&col(&|r| r.avg_queue[j]))).collect(),
        total_queue: Estimate::of(&col(&|r| r.avg_queue.iter().sum())),
        cost: Estimate::of(&col(&|r| r.avg_cost)),
        interruptions: Estimate::of(&col(&|r| r.interruptions as f64)).mean,
        drops: Estimate::of(&col(&|r| r.drops as f64)).mean,
        tv_to_reference: tvs.map(|v| Estimate::of(&v)),
    }
}

fn aggregates(runs: &[RunRecord]) -> Vec<AggregateRecord> {
    runs.chunk_by(|a, b| a.point == b.point).map(aggregate).collect()
}

/// Executes all runs on the rayon pool. Results keep sweep-major, seed-minor
/// order regardless of scheduling.
pub fn run_experiment(scenario: &Scenario, opts: &ExperimentOptions) -> Result<ExperimentResult, PartialFailure> {
    let mut points = scenario.points();
    if opts.base_only {
        points.truncate(1);
    }
    let fail = |error: CliError| PartialFailure { partial: ExperimentResult::default(), error };
    let references: Vec<Option<_>> = if scenario.reference && reference_available(scenario) {
        points.iter().map(|&p| reference(scenario, p).map(Some)).collect::<Result<_>>().map_err(fail)?
    } else {
        vec![None; points.len()]
    };
    let jobs: Vec<(usize, SchedulerParams, u64)> =
        points.iter().enumerate().flat_map(|(i, &p)| scenario.seeds.iter().map(move |&s| (i, p, s))).collect();
    let outcomes: Vec<Result<(RunRecord, Option<Trace>)>> = jobs
        .par_iter()
        .map(|&(i, p, seed)| run_one(scenario, i, p, seed, references[i].as_ref(), opts))
        .collect();

    let mut result = ExperimentResult::default();
    let mut error = None;
    for (idx, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((record, trace)) => {
                if let Some(t) = trace {
                    result.traces.push((idx, t));
                }
                result.runs.push(record);
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    // a point is aggregated only if all its seeds completed
    let complete = |point: usize| result.runs.iter().filter(|r| r.point == point).count() == scenario.seeds.len();
    result.aggregates = aggregates(&result.runs).into_iter().enumerate().filter(|(i, _)| complete(*i)).map(|(_, a)| a).collect();
    match error {
        None => Ok(result),
        Some(error) => Err(PartialFailure { partial: result, error }),
    }
}
