//! Scenario files, experiment orchestration and output emission on top of
//! `graphpack-core`.

pub mod error;
pub mod experiment;
pub mod output;
pub mod scenario;

use std::io::Write;
use std::path::{Path, PathBuf};

use graphpack_core::exact::{
    build_fixed_weight_generator, capacity_margin, closed_form_pi, detailed_balance_error, fixed_weight_fn,
    gamma_distribution, gamma_hat_distribution, max_weight, solve_stationary, static_optimum, theorem_bounds,
    total_variation, ChainVariant, Theorem,
};
use graphpack_core::{enumerate_configurations, PolicyKind, WeightMode};
use serde_json::{json, Value};

pub use error::{CliError, Issue, Result};
pub use experiment::{run_experiment, ExperimentOptions, ExperimentResult};
pub use scenario::{emit_scenario, load_scenario, load_scenario_str, Scenario};

/// Flags shared by every subcommand; each overrides the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Globals {
    /// replaces the seed list with this single seed
    pub seed: Option<u64>,
    /// directory receiving `summary.csv`, `aggregate.csv` and JSON reports
    pub out: Option<PathBuf>,
    /// JSONL trace destination
    pub trace: Option<PathBuf>,
    pub max_states: Option<usize>,
}

impl Globals {
    pub fn apply(&self, scenario: &mut Scenario) {
        if let Some(s) = self.seed {
            scenario.seeds = vec![s];
        }
        if let Some(m) = self.max_states {
            scenario.max_states = m;
        }
        if let Some(t) = &self.trace {
            scenario.output.trace = Some(t.clone());
        }
        if let Some(dir) = &self.out {
            scenario.output.summary = Some(dir.join("summary.csv"));
            scenario.output.aggregate = Some(dir.join("aggregate.csv"));
        }
    }

    fn report_path(&self, name: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|d| d.join(name))
    }
}

fn emit_results(scenario: &Scenario, result: &ExperimentResult, stdout: &mut dyn Write, sweep: bool) -> Result<()> {
    let inst = &scenario.instance;
    match &scenario.output.summary {
        Some(p) => output::write_summary(output::create(p)?, inst, &result.runs)?,
        None => output::write_summary(&mut *stdout, inst, &result.runs)?,
    }
    match &scenario.output.aggregate {
        Some(p) => output::write_aggregate(output::create(p)?, inst, &result.aggregates)?,
        None if sweep => output::write_aggregate(&mut *stdout, inst, &result.aggregates)?,
        None => {}
    }
    if let Some(p) = &scenario.output.trace {
        let traces: Vec<_> = result
            .traces
            .iter()
            .map(|(run, t)| {
                let r = &result.runs[*run];
                let header = output::RunHeader {
                    scenario_id: r.scenario_id.clone(),
                    seed: r.seed,
                    params: r.params,
                    trace: t.header.clone(),
                };
                (*run, header, t)
            })
            .collect();
        output::write_traces(output::create(p)?, &traces)?;
    }
    Ok(())
}

/// Runs the scenario (the base point only unless `sweep`) and writes its
/// outputs. Runs completed before a failure are still written.
pub fn simulate(scenario: &Scenario, sweep: bool, stdout: &mut dyn Write) -> Result<ExperimentResult> {
    let opts = ExperimentOptions { record_trace: scenario.output.trace.is_some(), base_only: !sweep, ..Default::default() };
    match run_experiment(scenario, &opts) {
        Ok(result) => {
            emit_results(scenario, &result, stdout, sweep)?;
            Ok(result)
        }
        Err(failure) => {
            if !failure.partial.runs.is_empty() {
                emit_results(scenario, &failure.partial, stdout, sweep)?;
            }
            Err(failure.error)
        }
    }
}

fn write_json(value: &Value, path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => output::create(p)?.write_all(text.as_bytes()).map_err(|e| CliError::io(p, e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

/// γ over the enumerated space and, for fixed weights, `π*` in closed form
/// and by solving the generator at each sweep point.
pub fn exact(scenario: &Scenario, globals: &Globals, stdout: &mut dyn Write) -> Result<Value> {
    let inst = &scenario.instance;
    let space = enumerate_configurations(inst, scenario.max_states)?;
    let gamma = gamma_distribution(inst, &space);
    let mut points = Vec::new();
    let kind = scenario.policy.kind;
    if scenario.policy.weights != WeightMode::Live && matches!(kind, PolicyKind::Dgp | PolicyKind::Adgp) {
        for params in scenario.points() {
            let policy = scenario.policy_at(params);
            let w = fixed_weight_fn(&policy, inst.total_slots())?;
            let (base, variant) = match kind {
                PolicyKind::Adgp => (
                    gamma_hat_distribution(inst, params.clock_rate, &space),
                    ChainVariant::AdgpBar { clock_rate: params.clock_rate },
                ),
                _ => (gamma.clone(), ChainVariant::DgpBar),
            };
            let closed = closed_form_pi(&base, &w, params.beta)?;
            let generator = build_fixed_weight_generator(inst, &space, &w, params.beta, variant)?;
            let solved = solve_stationary(&generator)?;
            let (best, argmax) = max_weight(&space, &w)?;
            points.push(json!({
                "params": params,
                "pi": closed.probs,
                "solver_tv": total_variation(&solved.probs, &closed.probs)?,
                "solver_residual": solved.residual,
                "detailed_balance_error": detailed_balance_error(&generator, &closed),
                "max_weight": best,
                "argmax": argmax,
                "expected_weight": closed.expectation(|c| c.templates().iter().map(|t| w(t).unwrap_or(f64::NAN)).sum()),
            }));
        }
    }
    let value = json!({
        "scenario_id": scenario.id,
        "states": space,
        "gamma": gamma.probs,
        "gamma_min": gamma.min_prob(),
        "points": points,
    });
    write_json(&value, globals.report_path("exact.json").as_deref(), stdout)?;
    Ok(value)
}

/// `G(x*)`, its time-sharing solution and the capacity margin `δ*`.
pub fn static_opt(scenario: &Scenario, globals: &Globals, stdout: &mut dyn Write) -> Result<Value> {
    let inst = &scenario.instance;
    let space = enumerate_configurations(inst, scenario.max_states)?;
    let rho = inst.loads();
    let margin = capacity_margin(inst, &space, &rho)?;
    let opt = static_optimum(inst, &space, &rho)?;
    let x: Vec<Value> = opt
        .x
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(t, v)| json!({ "job_type": inst.jobs[t.job()].id, "slots": t.slots(), "cost": t.cost(), "x": v }))
        .collect();
    let pi: Vec<Value> = space
        .iter()
        .zip(&opt.pi)
        .filter(|(_, p)| **p > 0.0)
        .map(|(c, p)| json!({ "config": c, "share": p }))
        .collect();
    let value = json!({
        "scenario_id": scenario.id,
        "loads": rho,
        "static_optimum": opt.value,
        "capacity_margin": margin.value(),
        "x": x,
        "time_sharing": pi,
    });
    write_json(&value, globals.report_path("static-opt.json").as_deref(), stdout)?;
    Ok(value)
}

/// Bound evaluation at every sweep point.
pub fn bounds(scenario: &Scenario, theorem: Theorem, globals: &Globals, stdout: &mut dyn Write) -> Result<Value> {
    let reports = scenario
        .points()
        .into_iter()
        .map(|p| theorem_bounds(&scenario.instance, &p, theorem, scenario.max_states))
        .collect::<Result<Vec<_>, _>>()?;
    let value = json!({ "scenario_id": scenario.id, "bounds": reports });
    write_json(&value, globals.report_path("bounds.json").as_deref(), stdout)?;
    Ok(value)
}
