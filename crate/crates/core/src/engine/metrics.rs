//! Time-integral accumulators shared by the engines and by trace replay.
//!
//! Both paths feed the same `(segment, snapshot)` sequence through
//! [`Accumulator::observe`], so a replayed trace reproduces the online report
//! bit for bit.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::Serialize;

use crate::cluster::{ConfigKey, Tag, Template};
use crate::kernel::f_eval;

/// Piecewise-constant integrals over one time window.
#[derive(Debug, Clone, PartialEq)]
struct Integrals {
    duration: f64,
    queue: Vec<f64>,
    f_queue: f64,
    cost: f64,
    templates: f64,
    actual: f64,
    configs: Option<BTreeMap<ConfigKey, f64>>,
    per_template: Option<BTreeMap<Template, f64>>,
    // keyed by cost bits: costs are nonnegative, so bit order is numeric order
    cost_levels: BTreeMap<u64, f64>,
}

impl Integrals {
    fn new(jobs: usize, track: bool) -> Self {
        Self {
            duration: 0.0,
            queue: alloc::vec![0.0; jobs],
            f_queue: 0.0,
            cost: 0.0,
            templates: 0.0,
            actual: 0.0,
            configs: track.then(BTreeMap::new),
            per_template: track.then(BTreeMap::new),
            cost_levels: BTreeMap::new(),
        }
    }

    fn add(&mut self, dt: f64, s: &Snapshot<'_>) {
        self.duration += dt;
        for (acc, &q) in self.queue.iter_mut().zip(s.queues) {
            *acc += dt * q as f64;
        }
        self.f_queue += dt * s.f_queue;
        self.cost += dt * s.cost;
        self.templates += dt * s.templates.len() as f64;
        self.actual += dt * s.actual as f64;
        *self.cost_levels.entry(s.cost.to_bits()).or_insert(0.0) += dt;
        if let Some(map) = &mut self.configs {
            let key = ConfigKey::new(s.templates.iter().map(|&t| t.clone()).collect());
            *map.entry(key).or_insert(0.0) += dt;
        }
        if let Some(map) = &mut self.per_template {
            for &t in &s.templates {
                *map.entry(t.clone()).or_insert(0.0) += dt;
            }
        }
    }

    fn finish(&self) -> Averages {
        let d = self.duration;
        let avg = |v: f64| if d > 0.0 { v / d } else { 0.0 };
        Averages {
            duration: d,
            queue: self.queue.iter().map(|&v| avg(v)).collect(),
            f_queue: avg(self.f_queue),
            cost: avg(self.cost),
            templates: avg(self.templates),
            actual_templates: avg(self.actual),
            config_occupancy: self.configs.as_ref().map(|m| m.iter().map(|(k, &v)| (k.clone(), avg(v))).collect()),
            template_occupancy: self
                .per_template
                .as_ref()
                .map(|m| m.iter().map(|(k, &v)| (k.clone(), avg(v))).collect()),
            cost_histogram: self.cost_levels.iter().map(|(&k, &v)| (f64::from_bits(k), avg(v))).collect(),
        }
    }
}

/// State observed over one segment.
pub(crate) struct Snapshot<'a> {
    queues: &'a [usize],
    f_queue: f64,
    cost: f64,
    actual: usize,
    templates: Vec<&'a Template>,
}

impl<'a> Snapshot<'a> {
    /// `entries` must come in template-id order.
    pub(crate) fn new(
        queues: &'a [usize],
        entries: impl Iterator<Item = (&'a Template, Tag)>,
        h: f64,
        b: f64,
    ) -> Self {
        let mut cost = 0.0;
        let mut actual = 0;
        let mut templates = Vec::new();
        for (t, tag) in entries {
            cost += t.cost();
            actual += usize::from(tag.is_actual());
            templates.push(t);
        }
        // h >= 1 is validated upstream, so f is defined
        let f_queue = queues.iter().map(|&q| f_eval(h + q as f64, b).unwrap_or(0.0)).sum();
        Self { queues, f_queue, cost, actual, templates }
    }
}

/// Full-horizon and post-warm-up integrals.
#[derive(Debug, Clone)]
pub(crate) struct Accumulator {
    full: Integrals,
    steady: Integrals,
    warmup: f64,
}

impl Accumulator {
    pub(crate) fn new(jobs: usize, track: bool, warmup: f64) -> Self {
        Self { full: Integrals::new(jobs, track), steady: Integrals::new(jobs, track), warmup }
    }

    /// Integrates `snapshot` over `[from, to)`.
    pub(crate) fn observe(&mut self, from: f64, to: f64, snapshot: &Snapshot<'_>) {
        if to > from {
            self.full.add(to - from, snapshot);
        }
        let start = from.max(self.warmup);
        if to > start {
            self.steady.add(to - start, snapshot);
        }
    }

    pub(crate) fn finish(&self) -> (Averages, Averages) {
        (self.full.finish(), self.steady.finish())
    }
}

/// Time averages over one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Averages {
    pub duration: f64,
    /// mean `Q^(j)` per type
    pub queue: Vec<f64>,
    /// mean `Σ_j f(h + Q^(j))`
    pub f_queue: f64,
    /// mean instantaneous partitioning cost
    pub cost: f64,
    /// mean number of templates, actual or virtual
    pub templates: f64,
    pub actual_templates: f64,
    /// fraction of time in each configuration (tracked instances only)
    pub config_occupancy: Option<Vec<(ConfigKey, f64)>>,
    /// `x_A`: fraction of time template `A` is in the configuration
    pub template_occupancy: Option<Vec<(Template, f64)>>,
    /// fraction of time at each instantaneous cost level, ascending
    pub cost_histogram: Vec<(f64, f64)>,
}

impl Averages {
    /// Occupancy fractions laid out along `space`; configurations never
    /// visited get 0. `None` when configurations were not tracked.
    pub fn distribution_over(&self, space: &[ConfigKey]) -> Option<Vec<f64>> {
        let occ = self.config_occupancy.as_ref()?;
        let map: BTreeMap<&ConfigKey, f64> = occ.iter().map(|(k, v)| (k, *v)).collect();
        Some(space.iter().map(|k| map.get(k).copied().unwrap_or(0.0)).collect())
    }

    pub fn total_queue(&self) -> f64 {
        self.queue.iter().sum()
    }
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub horizon: f64,
    /// start of the post-warm-up window
    pub warmup: f64,
    /// processed events (stale clocks excluded)
    pub events: u64,
    pub full: Averages,
    /// averages over `[warmup, horizon)`
    pub steady: Averages,
    pub interruptions: u64,
    pub drops: u64,
    pub final_queues: Vec<usize>,
    pub arrivals: Vec<u64>,
    pub departures: Vec<u64>,
}
