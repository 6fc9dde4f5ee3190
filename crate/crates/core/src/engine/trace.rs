//! Event traces and their replay.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::metrics::{Accumulator, MetricsReport, Snapshot};
use crate::cluster::{Slot, Tag, Template, TemplateId};
use crate::error::{Error, Result};
use crate::schedulers::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Arrival,
    Departure,
    Tick,
    Epoch,
}

/// Everything replay needs besides the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub horizon: f64,
    pub warmup: f64,
    pub jobs: usize,
    pub h: f64,
    pub b: f64,
    /// whether configuration and template occupancy were tracked
    pub track_occupancy: bool,
}

/// One processed event. `queues` is the queue vector after the event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub job_type: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub template_id: Option<TemplateId>,
    pub actions: Vec<Action>,
    pub queues: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// Trace of a run that ended at time 0 without events.
    pub fn empty(jobs: usize) -> Self {
        Self {
            header: TraceHeader {
                horizon: 0.0,
                warmup: 0.0,
                jobs,
                h: core::f64::consts::E,
                b: 0.5,
                track_occupancy: false,
            },
            records: Vec::new(),
        }
    }
}

fn malformed(i: usize, what: impl core::fmt::Display) -> Error {
    Error::MalformedTrace(format!("record {i}: {what}"))
}

/// Recomputes the metrics of a run from its trace alone.
pub fn summarize_trace(trace: &Trace) -> Result<MetricsReport> {
    let hd = &trace.header;
    if !(hd.horizon >= 0.0 && hd.horizon.is_finite()) {
        return Err(Error::MalformedTrace(format!("horizon {}", hd.horizon)));
    }
    if !(hd.warmup >= 0.0 && hd.warmup <= hd.horizon) {
        return Err(Error::MalformedTrace(format!("warm-up {} outside [0, {}]", hd.warmup, hd.horizon)));
    }
    if !(hd.h >= 1.0 && hd.b > 0.0 && hd.b < 1.0) {
        return Err(Error::MalformedTrace(format!("h = {}, b = {}", hd.h, hd.b)));
    }
    let jobs = hd.jobs;
    let mut acc = Accumulator::new(jobs, hd.track_occupancy, hd.warmup);
    let mut entries: BTreeMap<TemplateId, (Template, Tag)> = BTreeMap::new();
    let mut owner: BTreeMap<Slot, TemplateId> = BTreeMap::new();
    let mut queues = alloc::vec![0usize; jobs];
    let mut arrivals = alloc::vec![0u64; jobs];
    let mut departures = alloc::vec![0u64; jobs];
    let (mut interruptions, mut drops) = (0u64, 0u64);
    let mut last = 0.0;

    for (i, r) in trace.records.iter().enumerate() {
        if !(r.time >= last && r.time < hd.horizon) {
            return Err(malformed(i, format_args!("time {} out of order or past the horizon", r.time)));
        }
        if r.queues.len() != jobs {
            return Err(malformed(i, format_args!("{} queue entries for {jobs} job types", r.queues.len())));
        }
        let snapshot = Snapshot::new(&queues, entries.values().map(|(t, tag)| (t, *tag)), hd.h, hd.b);
        acc.observe(last, r.time, &snapshot);

        for a in &r.actions {
            match a {
                Action::JobEnqueued { job_type, .. } => {
                    *arrivals.get_mut(*job_type).ok_or_else(|| malformed(i, "unknown job type"))? += 1;
                }
                Action::TemplateCreated { id, template, tag } => {
                    if template.job() >= jobs {
                        return Err(malformed(i, "template of an unknown job type"));
                    }
                    if entries.contains_key(id) {
                        return Err(malformed(i, format_args!("template id {} created twice", id.0)));
                    }
                    for s in template.slots() {
                        if owner.insert(*s, *id).is_some() {
                            return Err(malformed(i, format_args!("slot {} held twice", s.0)));
                        }
                    }
                    entries.insert(*id, (template.clone(), *tag));
                }
                Action::TemplateRejected { .. } => {}
                Action::TemplateDestroyed { id } => {
                    let (t, _) = entries.remove(id).ok_or_else(|| malformed(i, format_args!("unknown template {}", id.0)))?;
                    for s in t.slots() {
                        owner.remove(s);
                    }
                }
                Action::JobStarted { id, job } => {
                    let e = entries.get_mut(id).ok_or_else(|| malformed(i, format_args!("unknown template {}", id.0)))?;
                    e.1 = Tag::Actual(*job);
                }
                Action::JobDeparted { id, .. } | Action::JobInterrupted { id, .. } => {
                    let e = entries.get_mut(id).ok_or_else(|| malformed(i, format_args!("unknown template {}", id.0)))?;
                    if !e.1.is_actual() {
                        return Err(malformed(i, format_args!("template {} holds no job", id.0)));
                    }
                    e.1 = Tag::Virtual;
                    if matches!(a, Action::JobDeparted { .. }) {
                        departures[e.0.job()] += 1;
                    } else {
                        interruptions += 1;
                    }
                }
                Action::JobDropped { .. } => drops += 1,
            }
        }
        for j in 0..jobs {
            if r.queues[j] as i128 != arrivals[j] as i128 - departures[j] as i128 {
                return Err(malformed(i, format_args!("queue {j} breaks conservation")));
            }
        }
        queues.clone_from(&r.queues);
        last = r.time;
    }
    let snapshot = Snapshot::new(&queues, entries.values().map(|(t, tag)| (t, *tag)), hd.h, hd.b);
    acc.observe(last, hd.horizon, &snapshot);
    let (full, steady) = acc.finish();
    Ok(MetricsReport {
        horizon: hd.horizon,
        warmup: hd.warmup,
        events: trace.records.len() as u64,
        full,
        steady,
        interruptions,
        drops,
        final_queues: queues,
        arrivals,
        departures,
    })
}
