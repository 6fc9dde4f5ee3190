//! JSON scenario files.
//!
//! A scenario names a cluster, its job types, one scheduling policy, an
//! engine, run lengths, seeds, an optional parameter sweep and output
//! paths. Every field except `cluster` and `job_types` has a default.
//! Loading collects every violated invariant before failing, each with the
//! line of the offending value.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use graphpack_core::schedulers::FixedWeights;
use graphpack_core::{
    ClusterSpec, Edge, Instance, JobType, Machine, Policy, PolicyKind, SchedulerParams, Slot, Template, WeightMode,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Issue, Result};

pub const DEFAULT_HORIZON: f64 = 1000.0;
pub const DEFAULT_STEPS: u64 = 100_000;
pub const DEFAULT_WARMUP: f64 = 0.1;
pub const DEFAULT_MAX_STATES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    #[default]
    Continuous,
    JumpChain,
    Loss,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Continuous => "continuous",
            EngineKind::JumpChain => "jump-chain",
            EngineKind::Loss => "loss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `α = β²`, `h = exp((1/β)^(1/(1-b)))`, `ε = β^(b²/4)` at every β
    Tradeoff,
}

// ---- file layout -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_id")]
    pub id: String,
    pub cluster: ClusterFile,
    pub job_types: Vec<JobFile>,
    #[serde(default)]
    pub policy: PolicyFile,
    #[serde(default)]
    pub engine: EngineKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_states: Option<usize>,
    /// compare against the exact stationary law when one is available
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<bool>,
}

fn default_id() -> String {
    "scenario".into()
}

/// Either an explicit machine list or `machines × slots`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub machines: Option<Vec<MachineFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<UniformFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u32>,
    pub slots: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformFile {
    pub machines: u32,
    pub slots: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u32>,
    pub nodes: usize,
    #[serde(default)]
    pub edges: Vec<EdgeFile>,
    pub arrival_rate: f64,
    #[serde(default = "one")]
    pub service_rate: f64,
}

fn one() -> f64 {
    1.0
}

/// `[u, v]`, `[u, v, weight]` or `{"u", "v", "weight"}`; weight defaults to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeFile {
    Object {
        u: usize,
        v: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
    },
    Weighted(usize, usize, f64),
    Pair(usize, usize),
}

impl EdgeFile {
    fn edge(&self) -> Edge {
        match *self {
            EdgeFile::Object { u, v, weight } => Edge { u, v, weight: weight.unwrap_or(1.0) },
            EdgeFile::Weighted(u, v, weight) => Edge { u, v, weight },
            EdgeFile::Pair(u, v) => Edge::unit(u, v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    #[serde(default = "default_kind")]
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// defaults to `β²` at every sweep point
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsFile>,
}

fn default_kind() -> PolicyKind {
    PolicyKind::Dgp
}

impl Default for PolicyFile {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Dgp,
            beta: None,
            alpha: None,
            epsilon: None,
            h: None,
            b: None,
            frame_length: None,
            clock_rate: None,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsFile {
    Live,
    /// one weight per job type, in file order
    PerJob(Vec<f64>),
    /// queue snapshot, one length per job type
    Frozen(Vec<usize>),
    Table(Vec<TableEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    /// job type id
    pub job_type: u32,
    /// global slot indices, one per job node
    pub slots: Vec<u32>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilon: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frame_length: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

// ---- validated form ----------------------------------------------------

/// Policy with every default resolved except `α`, which follows `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub beta: f64,
    pub alpha: Option<f64>,
    pub epsilon: f64,
    pub h: f64,
    pub b: f64,
    pub frame_length: f64,
    pub clock_rate: f64,
    pub weights: WeightMode,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sweep {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub h: Vec<f64>,
    pub frame_length: Vec<f64>,
    pub preset: Option<Preset>,
}

impl Sweep {
    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
            && self.alpha.is_empty()
            && self.epsilon.is_empty()
            && self.h.is_empty()
            && self.frame_length.is_empty()
            && self.preset.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputPaths {
    pub summary: Option<PathBuf>,
    pub aggregate: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub instance: Instance,
    pub policy: PolicySpec,
    pub engine: EngineKind,
    pub horizon: f64,
    pub steps: u64,
    pub warmup: f64,
    pub seeds: Vec<u64>,
    pub sweep: Sweep,
    pub output: OutputPaths,
    pub max_states: usize,
    pub reference: bool,
}

impl Scenario {
    /// Parameter sets in sweep order: β outermost, then α, ε, h, T.
    pub fn points(&self) -> Vec<SchedulerParams> {
        let p = &self.policy;
        let or = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
        let s = &self.sweep;
        let mut out = Vec::new();
        for &beta in &or(&s.beta, p.beta) {
            for &t in &or(&s.frame_length, p.frame_length) {
                if s.preset == Some(Preset::Tradeoff) {
                    out.push(SchedulerParams {
                        frame_length: t,
                        clock_rate: p.clock_rate,
                        ..SchedulerParams::tradeoff(beta, p.b)
                    });
                    continue;
                }
                for &alpha in &or(&s.alpha, p.alpha.unwrap_or(beta * beta)) {
                    for &epsilon in &or(&s.epsilon, p.epsilon) {
                        for &h in &or(&s.h, p.h) {
                            out.push(SchedulerParams {
                                alpha,
                                beta,
                                epsilon,
                                h,
                                b: p.b,
                                frame_length: t,
                                clock_rate: p.clock_rate,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn policy_at(&self, params: SchedulerParams) -> Policy {
        Policy { kind: self.policy.kind, params, weights: self.policy.weights.clone() }
    }

    /// Canonical file form with every default written out.
    pub fn to_file(&self) -> ScenarioFile {
        let inst = &self.instance;
        let p = &self.policy;
        let weights = match &p.weights {
            WeightMode::Live => WeightsFile::Live,
            WeightMode::Fixed(FixedWeights::PerJob(w)) => WeightsFile::PerJob(w.clone()),
            WeightMode::Fixed(FixedWeights::Frozen(q)) => WeightsFile::Frozen(q.clone()),
            WeightMode::Fixed(FixedWeights::Table(t)) => WeightsFile::Table(
                t.iter()
                    .map(|(a, &weight)| TableEntry {
                        job_type: inst.jobs[a.job()].id,
                        slots: a.slots().iter().map(|s| s.0).collect(),
                        weight,
                    })
                    .collect(),
            ),
        };
        let nonempty = |v: &Option<PathBuf>| v.clone();
        ScenarioFile {
            id: self.id.clone(),
            cluster: ClusterFile {
                machines: Some(
                    inst.cluster.machines().iter().map(|m| MachineFile { id: Some(m.id), slots: m.slots }).collect(),
                ),
                uniform: None,
            },
            job_types: inst
                .jobs
                .iter()
                .map(|j| JobFile {
                    id: Some(j.id),
                    nodes: j.nodes,
                    edges: j.edges.iter().map(|e| EdgeFile::Weighted(e.u, e.v, e.weight)).collect(),
                    arrival_rate: j.arrival_rate,
                    service_rate: j.service_rate,
                })
                .collect(),
            policy: PolicyFile {
                kind: p.kind,
                beta: Some(p.beta),
                alpha: p.alpha,
                epsilon: Some(p.epsilon),
                h: Some(p.h),
                b: Some(p.b),
                frame_length: Some(p.frame_length),
                clock_rate: Some(p.clock_rate),
                weights: Some(weights),
            },
            engine: self.engine,
            horizon: Some(self.horizon),
            steps: Some(self.steps),
            warmup: Some(self.warmup),
            seeds: Some(self.seeds.clone()),
            sweep: (!self.sweep.is_empty()).then(|| SweepFile {
                beta: self.sweep.beta.clone(),
                alpha: self.sweep.alpha.clone(),
                epsilon: self.sweep.epsilon.clone(),
                h: self.sweep.h.clone(),
                frame_length: self.sweep.frame_length.clone(),
                preset: self.sweep.preset,
            }),
            output: (self.output != OutputPaths::default()).then(|| OutputFile {
                summary: nonempty(&self.output.summary),
                aggregate: nonempty(&self.output.aggregate),
                trace: nonempty(&self.output.trace),
            }),
            max_states: Some(self.max_states),
            reference: Some(self.reference),
        }
    }
}

/// Pretty JSON that [`load_scenario_str`] reads back to an equal scenario.
pub fn emit_scenario(scenario: &Scenario) -> String {
    let mut s = serde_json::to_string_pretty(&scenario.to_file()).expect("scenario serializes");
    s.push('\n');
    s
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    load_scenario_str(&text, path)
}

/// `path` only labels errors.
pub fn load_scenario_str(text: &str, path: &Path) -> Result<Scenario> {
    let raw: ScenarioFile = serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    let locator = Locator::new(text);
    let mut v = Validator { locator: &locator, issues: Vec::new() };
    let scenario = v.scenario(raw);
    match scenario {
        Some(s) if v.issues.is_empty() => Ok(s),
        _ => Err(CliError::Validation { path: path.to_path_buf(), issues: v.issues }),
    }
}

/// serde_json appends " at line L column C"; the error type reports both.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

// ---- validation --------------------------------------------------------

struct Validator<'a> {
    locator: &'a Locator,
    issues: Vec<Issue>,
}

impl Validator<'_> {
    fn issue(&mut self, path: impl Into<String>, message: impl Into<String>) {
        let path = path.into();
        let line = self.locator.line_of(&path);
        self.issues.push(Issue { path, line, message: message.into() });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.issue(path, format!("must be finite and positive, got {v}"));
        }
    }

    fn scenario(&mut self, raw: ScenarioFile) -> Option<Scenario> {
        if raw.id.is_empty() || raw.id.contains([',', '"', '\n']) {
            self.issue("id", "must be nonempty without commas, quotes or newlines");
        }
        let cluster = self.cluster(&raw.cluster);
        let jobs = self.jobs(&raw.job_types, cluster.as_ref());
        let instance = match (cluster, jobs) {
            (Some(c), Some(j)) => match Instance::new(c, j) {
                Ok(i) => Some(i),
                Err(e) => {
                    self.issue("job_types", e.to_string());
                    None
                }
            },
            _ => None,
        };
        let engine = raw.engine;
        let horizon = raw.horizon.unwrap_or(DEFAULT_HORIZON);
        if !(horizon >= 0.0 && horizon.is_finite()) {
            self.issue("horizon", format!("must be finite and nonnegative, got {horizon}"));
        }
        let steps = raw.steps.unwrap_or(DEFAULT_STEPS);
        let warmup = raw.warmup.unwrap_or(DEFAULT_WARMUP);
        if !(0.0..1.0).contains(&warmup) {
            self.issue("warmup", format!("must lie in [0, 1), got {warmup}"));
        }
        let seeds = raw.seeds.unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            self.issue("seeds", "must list at least one seed");
        }
        let max_states = raw.max_states.unwrap_or(DEFAULT_MAX_STATES);
        if max_states == 0 {
            self.issue("max_states", "must be positive");
        }
        let reference = raw.reference.unwrap_or(false);
        let sweep = self.sweep(raw.sweep.unwrap_or_default());
        let policy = self.policy(&raw.policy, engine, &sweep, instance.as_ref());
        let output = raw.output.unwrap_or_default();
        let scenario = Scenario {
            id: raw.id,
            instance: instance?,
            policy: policy?,
            engine,
            horizon,
            steps,
            warmup,
            seeds,
            sweep,
            output: OutputPaths { summary: output.summary, aggregate: output.aggregate, trace: output.trace },
            max_states,
            reference,
        };
        self.points(&scenario);
        if scenario.reference && !reference_available(&scenario) {
            self.issue(
                "reference",
                "an exact reference exists only for the loss engine or fixed-weight dgp/adgp on the continuous engine",
            );
        }
        Some(scenario)
    }

    fn cluster(&mut self, raw: &ClusterFile) -> Option<ClusterSpec> {
        let machines: Vec<Machine> = match (&raw.machines, &raw.uniform) {
            (Some(list), None) => {
                if list.is_empty() {
                    self.issue("cluster.machines", "must list at least one machine");
                }
                let mut seen = HashMap::new();
                let mut out = Vec::new();
                for (i, m) in list.iter().enumerate() {
                    let id = m.id.unwrap_or(i as u32);
                    if m.slots == 0 {
                        self.issue(format!("cluster.machines[{i}].slots"), "machine must have at least one slot");
                    }
                    if let Some(prev) = seen.insert(id, i) {
                        self.issue(format!("cluster.machines[{i}].id"), format!("duplicates the id of machine {prev}"));
                    }
                    out.push(Machine { id, slots: m.slots });
                }
                out
            }
            (None, Some(u)) => {
                if u.machines == 0 {
                    self.issue("cluster.uniform.machines", "must be positive");
                }
                if u.slots == 0 {
                    self.issue("cluster.uniform.slots", "must be positive");
                }
                (0..u.machines).map(|id| Machine { id, slots: u.slots }).collect()
            }
            _ => {
                self.issue("cluster", "give exactly one of `machines` or `uniform`");
                return None;
            }
        };
        ClusterSpec::new(machines).ok()
    }

    fn jobs(&mut self, raw: &[JobFile], cluster: Option<&ClusterSpec>) -> Option<Vec<JobType>> {
        if raw.is_empty() {
            self.issue("job_types", "must list at least one job type");
        }
        let before = self.issues.len();
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for (i, j) in raw.iter().enumerate() {
            let at = |f: &str| format!("job_types[{i}].{f}");
            let id = j.id.unwrap_or(i as u32);
            if let Some(prev) = seen.insert(id, i) {
                self.issue(at("id"), format!("duplicates the id of job type {prev}"));
            }
            if j.nodes == 0 {
                self.issue(at("nodes"), "job graph needs at least one node");
            }
            if let Some(c) = cluster {
                let m = c.total_slots();
                if j.nodes >= m {
                    self.issue(at("nodes"), format!("violates |V_j| < M: {} nodes on a cluster with M = {m} slots", j.nodes));
                }
            }
            if !(j.arrival_rate >= 0.0 && j.arrival_rate.is_finite()) {
                self.issue(at("arrival_rate"), format!("must be finite and nonnegative, got {}", j.arrival_rate));
            }
            self.positive(&at("service_rate"), j.service_rate);
            let mut pairs = BTreeMap::new();
            let edges: Vec<Edge> = j.edges.iter().map(EdgeFile::edge).collect();
            for (k, e) in edges.iter().enumerate() {
                let path = format!("job_types[{i}].edges[{k}]");
                if e.u >= j.nodes || e.v >= j.nodes {
                    self.issue(&path, format!("edge ({}, {}) references a node outside 0..{}", e.u, e.v, j.nodes));
                } else if e.u == e.v {
                    self.issue(&path, format!("self-loop on node {}", e.u));
                } else if let Some(prev) = pairs.insert((e.u.min(e.v), e.u.max(e.v)), k) {
                    self.issue(&path, format!("duplicates edge {prev}"));
                }
                if !(e.weight >= 0.0 && e.weight.is_finite()) {
                    self.issue(&path, format!("weight must be finite and nonnegative, got {}", e.weight));
                }
            }
            out.push(JobType { id, nodes: j.nodes, edges, arrival_rate: j.arrival_rate, service_rate: j.service_rate });
        }
        (self.issues.len() == before && cluster.is_some()).then_some(out)
    }

    fn sweep(&mut self, raw: SweepFile) -> Sweep {
        for (name, list) in [
            ("beta", &raw.beta),
            ("alpha", &raw.alpha),
            ("epsilon", &raw.epsilon),
            ("h", &raw.h),
            ("frame_length", &raw.frame_length),
        ] {
            for (i, &v) in list.iter().enumerate() {
                if !v.is_finite() {
                    self.issue(format!("sweep.{name}[{i}]"), format!("must be finite, got {v}"));
                }
            }
        }
        if raw.preset == Some(Preset::Tradeoff)
            && !(raw.alpha.is_empty() && raw.epsilon.is_empty() && raw.h.is_empty())
        {
            self.issue("sweep.preset", "the tradeoff preset sets alpha, epsilon and h; drop those sweep lists");
        }
        Sweep {
            beta: raw.beta,
            alpha: raw.alpha,
            epsilon: raw.epsilon,
            h: raw.h,
            frame_length: raw.frame_length,
            preset: raw.preset,
        }
    }

    fn policy(
        &mut self,
        raw: &PolicyFile,
        engine: EngineKind,
        sweep: &Sweep,
        instance: Option<&Instance>,
    ) -> Option<PolicySpec> {
        let d = SchedulerParams::default();
        let kind = raw.kind;
        if kind == PolicyKind::FrameBased && raw.frame_length.is_none() && sweep.frame_length.is_empty() {
            self.issue("policy", "frame-based policy needs `frame_length` (or a frame_length sweep)");
        }
        if kind == PolicyKind::Adgp && raw.clock_rate.is_none() {
            self.issue("policy", "adgp policy needs `clock_rate`");
        }
        match engine {
            EngineKind::Loss if kind != PolicyKind::Loss => {
                self.issue("engine", format!("the loss engine runs the loss policy, not {}", kind.name()))
            }
            EngineKind::JumpChain if matches!(kind, PolicyKind::Adgp | PolicyKind::FrameBased) => {
                self.issue("engine", format!("the jump-chain engine does not support {}", kind.name()))
            }
            _ => {}
        }
        let weights = match raw.weights.clone().unwrap_or(WeightsFile::Live) {
            WeightsFile::Live => WeightMode::Live,
            WeightsFile::PerJob(w) => WeightMode::Fixed(FixedWeights::PerJob(w)),
            WeightsFile::Frozen(q) => WeightMode::Fixed(FixedWeights::Frozen(q)),
            WeightsFile::Table(entries) => {
                let inst = instance?;
                let mut table = BTreeMap::new();
                for (i, e) in entries.iter().enumerate() {
                    let path = format!("policy.weights.table[{i}]");
                    let Some(pos) = inst.jobs.iter().position(|j| j.id == e.job_type) else {
                        self.issue(path, format!("no job type with id {}", e.job_type));
                        continue;
                    };
                    match Template::new(pos, e.slots.iter().map(|&s| Slot(s)).collect(), inst) {
                        Ok(t) => {
                            if table.insert(t, e.weight).is_some() {
                                self.issue(path, "template listed twice");
                            }
                        }
                        Err(err) => self.issue(path, err.to_string()),
                    }
                }
                WeightMode::Fixed(FixedWeights::Table(table))
            }
        };
        if weights != WeightMode::Live && matches!(kind, PolicyKind::RoundRobin | PolicyKind::Loss) {
            self.issue("policy.weights", format!("{} ignores weights; use \"live\"", kind.name()));
        }
        let spec = PolicySpec {
            kind,
            beta: raw.beta.unwrap_or(d.beta),
            alpha: raw.alpha,
            epsilon: raw.epsilon.unwrap_or(d.epsilon),
            h: raw.h.unwrap_or(d.h),
            b: raw.b.unwrap_or(d.b),
            frame_length: raw.frame_length.unwrap_or(d.frame_length),
            clock_rate: raw.clock_rate.unwrap_or(d.clock_rate),
            weights,
        };
        self.positive("policy.beta", spec.beta);
        if let Some(a) = spec.alpha {
            self.positive("policy.alpha", a);
        }
        if !(spec.epsilon > 0.0 && spec.epsilon <= 1.0) {
            self.issue("policy.epsilon", format!("must lie in (0, 1], got {}", spec.epsilon));
        }
        if !(spec.h >= 1.0 && spec.h.is_finite()) {
            self.issue("policy.h", format!("must be finite and at least 1, got {}", spec.h));
        }
        if !(spec.b > 0.0 && spec.b < 1.0) {
            self.issue("policy.b", format!("must lie in (0, 1), got {}", spec.b));
        }
        self.positive("policy.frame_length", spec.frame_length);
        self.positive("policy.clock_rate", spec.clock_rate);
        if let Some(inst) = instance {
            let policy = Policy { kind, params: d, weights: spec.weights.clone() };
            if let Err(e) = policy.validate(inst) {
                self.issue("policy.weights", e.to_string());
            }
        }
        Some(spec)
    }

    /// Every sweep point must be a valid parameter set; the tradeoff preset
    /// can overflow `h` for small β.
    fn points(&mut self, scenario: &Scenario) {
        if self.issues.iter().any(|i| i.path.starts_with("policy") || i.path.starts_with("sweep")) {
            return;
        }
        for p in scenario.points() {
            if let Err(e) = p.validate() {
                self.issue("sweep", format!("point beta = {}, alpha = {}: {e}", p.beta, p.alpha));
            }
        }
    }
}

/// An exact stationary law exists for the loss system and for fixed-weight
/// DGP and ADGP in continuous time.
pub fn reference_available(s: &Scenario) -> bool {
    match s.engine {
        EngineKind::Loss => true,
        EngineKind::Continuous => match s.policy.kind {
            PolicyKind::Loss => true,
            PolicyKind::Dgp | PolicyKind::Adgp => s.policy.weights != WeightMode::Live,
            _ => false,
        },
        EngineKind::JumpChain => s.policy.kind == PolicyKind::Dgp && s.policy.weights != WeightMode::Live,
    }
}

// ---- line locator ------------------------------------------------------

/// Line of every value in a JSON document, keyed by dotted path.
struct Locator {
    lines: HashMap<String, usize>,
}

impl Locator {
    /// `text` must already have parsed as JSON.
    fn new(text: &str) -> Self {
        let mut scan = Scan { b: text.as_bytes(), pos: 0, line: 1, lines: HashMap::new() };
        scan.value(String::new());
        Self { lines: scan.lines }
    }

    /// Falls back to the closest enclosing value for defaulted fields.
    fn line_of(&self, path: &str) -> Option<usize> {
        let mut p = path;
        loop {
            if let Some(&l) = self.lines.get(p) {
                return Some(l);
            }
            let cut = p.rfind(['.', '['])?;
            p = &p[..cut];
        }
    }
}

struct Scan<'a> {
    b: &'a [u8],
    pos: usize,
    line: usize,
    lines: HashMap<String, usize>,
}

impl Scan<'_> {
    fn peek(&self) -> Option<u8> {
        self.b.get(self.pos).copied()
    }

    fn ws(&mut self) {
        while let Some(c) = self.peek() {
            match c {
                b'\n' => self.line += 1,
                b' ' | b'\t' | b'\r' => {}
                _ => return,
            }
            self.pos += 1;
        }
    }

    fn string(&mut self) -> String {
        self.pos += 1;
        let start = self.pos;
        while let Some(c) = self.peek() {
            match c {
                b'"' => break,
                b'\\' => self.pos += 2,
                _ => self.pos += 1,
            }
        }
        let s = String::from_utf8_lossy(&self.b[start..self.pos.min(self.b.len())]).into_owned();
        self.pos += 1;
        s
    }

    fn value(&mut self, path: String) {
        self.ws();
        self.lines.entry(path.clone()).or_insert(self.line);
        match self.peek() {
            Some(b'{') => {
                self.pos += 1;
                loop {
                    self.ws();
                    match self.peek() {
                        Some(b'}') | None => break,
                        Some(b',') => self.pos += 1,
                        _ => {
                            let key = self.string();
                            self.ws();
                            self.pos += 1; // ':'
                            let child = if path.is_empty() { key } else { format!("{path}.{key}") };
                            self.value(child);
                        }
                    }
                }
                self.pos += 1;
            }
            Some(b'[') => {
                self.pos += 1;
                let mut i = 0;
                loop {
                    self.ws();
                    match self.peek() {
                        Some(b']') | None => break,
                        Some(b',') => self.pos += 1,
                        _ => {
                            self.value(format!("{path}[{i}]"));
                            i += 1;
                        }
                    }
                }
                self.pos += 1;
            }
            Some(b'"') => {
                self.string();
            }
            _ => {
                while let Some(c) = self.peek() {
                    if matches!(c, b',' | b']' | b'}' | b' ' | b'\n' | b'\t' | b'\r') {
                        break;
                    }
                    self.pos += 1;
                }
            }
        }
    }
}
