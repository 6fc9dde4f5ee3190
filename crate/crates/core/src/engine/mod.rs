//! Simulation engines: the continuous-time exponential race, the uniformized
//! jump chain and the reference loss system.
//!
//! Simultaneous events are ordered by `(time, kind, sequence number)` with
//! frame epochs first, then departures, arrivals and dedicated clock ticks.

mod metrics;
mod trace;

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

pub use metrics::{Averages, MetricsReport};
pub use trace::{summarize_trace, EventKind, Trace, TraceHeader, TraceRecord};

use crate::cluster::{enumerate_configurations, ConfigKey, Instance, TemplateId};
use crate::error::{Error, Result};
use crate::kernel::{RandomStreams, SchedulerParams, Substream};
use crate::schedulers::{handle, Action, Event, EventOutcome, Policy, PolicyKind, SystemState};
use metrics::{Accumulator, Snapshot};

/// Knobs shared by every engine.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    /// initial fraction of the horizon excluded from the steady averages
    pub warmup_fraction: f64,
    pub record_trace: bool,
    /// check the state invariants after every event
    pub check_invariants: bool,
    /// configuration and `x_A` occupancy are tracked only below this many
    /// templates
    pub occupancy_threshold: u128,
    /// configuration-space limit for the frame-based policy
    pub max_states: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            warmup_fraction: 0.1,
            record_trace: false,
            check_invariants: false,
            occupancy_threshold: 10_000,
            max_states: 100_000,
        }
    }
}

impl RunOptions {
    pub fn seeded(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub trace: Option<Trace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Payload {
    Epoch(u64),
    Departure(TemplateId),
    Arrival(usize),
    Tick(usize),
}

impl Payload {
    fn priority(self) -> u8 {
        match self {
            Payload::Epoch(_) => 0,
            Payload::Departure(_) => 1,
            Payload::Arrival(_) => 2,
            Payload::Tick(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    seq: u64,
    payload: Payload,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// reversed: BinaryHeap is a max-heap
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.payload.priority().cmp(&self.payload.priority()))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Shared bookkeeping of one replication.
struct Run<'a> {
    instance: &'a Instance,
    policy: &'a Policy,
    state: SystemState,
    streams: RandomStreams,
    acc: Accumulator,
    last: f64,
    events: u64,
    records: Option<Vec<TraceRecord>>,
    check: bool,
    horizon: f64,
    warmup: f64,
    track: bool,
}

impl<'a> Run<'a> {
    fn new(instance: &'a Instance, policy: &'a Policy, horizon: f64, opts: &RunOptions) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParams(format!("horizon must be finite and nonnegative, got {horizon}")));
        }
        if !(0.0..1.0).contains(&opts.warmup_fraction) {
            return Err(Error::InvalidParams(format!("warm-up fraction {} outside [0, 1)", opts.warmup_fraction)));
        }
        policy.validate(instance)?;
        let track = instance.template_space_size() < opts.occupancy_threshold;
        let warmup = opts.warmup_fraction * horizon;
        Ok(Self {
            instance,
            policy,
            state: SystemState::new(instance),
            streams: RandomStreams::new(opts.seed),
            acc: Accumulator::new(instance.jobs.len(), track, warmup),
            last: 0.0,
            events: 0,
            records: opts.record_trace.then(Vec::new),
            check: opts.check_invariants,
            horizon,
            warmup,
            track,
        })
    }

    fn observe_until(&mut self, t: f64) {
        let queues = self.state.queue_lengths();
        let p = &self.policy.params;
        let snapshot = Snapshot::new(&queues, self.state.config.iter().map(|(_, r)| (&r.template, r.tag)), p.h, p.b);
        self.acc.observe(self.last, t, &snapshot);
        self.last = t;
    }

    fn apply(&mut self, time: f64, kind: EventKind, event: Event, space: Option<&[ConfigKey]>) -> Result<EventOutcome> {
        self.observe_until(time);
        self.state.clock = time;
        let outcome = handle(&mut self.state, self.instance, self.policy, event, &mut self.streams, space)?;
        if self.check {
            self.state
                .check_invariants(self.instance, self.policy.kind)
                .map_err(|what| Error::InvariantViolated { time, what })?;
        }
        self.events += 1;
        if let Some(records) = &mut self.records {
            let (job_type, template_id) = match event {
                Event::Arrival(j) | Event::Tick(j) => (Some(j), None),
                Event::Departure(id) => (None, Some(id)),
                Event::FrameEpoch => (None, None),
            };
            records.push(TraceRecord {
                time,
                kind,
                job_type,
                template_id,
                actions: outcome.actions.clone(),
                queues: self.state.queue_lengths(),
            });
        }
        Ok(outcome)
    }

    fn finish(mut self) -> RunOutput {
        self.observe_until(self.horizon);
        let (full, steady) = self.acc.finish();
        let report = MetricsReport {
            horizon: self.horizon,
            warmup: self.warmup,
            events: self.events,
            full,
            steady,
            interruptions: self.state.interruptions,
            drops: self.state.drops,
            final_queues: self.state.queue_lengths(),
            arrivals: self.state.arrivals.clone(),
            departures: self.state.departures.clone(),
        };
        let trace = self.records.map(|records| Trace {
            header: TraceHeader {
                horizon: self.horizon,
                warmup: self.warmup,
                jobs: self.instance.jobs.len(),
                h: self.policy.params.h,
                b: self.policy.params.b,
                track_occupancy: self.track,
            },
            records,
        });
        RunOutput { report, trace }
    }
}

struct Calendar {
    heap: BinaryHeap<Pending>,
    seq: u64,
    /// live departure clock of each template (or job, frame-based)
    clocks: BTreeMap<TemplateId, u64>,
    ticks: Vec<u64>,
}

impl Calendar {
    /// Returns the sequence number; infinite times are not queued.
    fn schedule(&mut self, time: f64, payload: Payload) -> u64 {
        self.seq += 1;
        if time.is_finite() {
            self.heap.push(Pending { time, seq: self.seq, payload });
        }
        self.seq
    }

    fn arm_departure(&mut self, now: f64, id: TemplateId, rate: f64, streams: &mut RandomStreams) {
        let t = now + streams.exponential(Substream::Clocks, rate);
        let seq = self.schedule(t, Payload::Departure(id));
        self.clocks.insert(id, seq);
    }
}

/// Simulates the continuous-time system up to `horizon`.
pub fn run_continuous(instance: &Instance, policy: &Policy, horizon: f64, opts: &RunOptions) -> Result<RunOutput> {
    let mut run = Run::new(instance, policy, horizon, opts)?;
    let space = match policy.kind {
        PolicyKind::FrameBased => Some(enumerate_configurations(instance, opts.max_states)?),
        _ => None,
    };
    let jobs = instance.jobs.len();
    let slots = instance.total_slots();
    let mut cal = Calendar { heap: BinaryHeap::new(), seq: 0, clocks: BTreeMap::new(), ticks: alloc::vec![0; jobs] };

    for (j, ty) in instance.jobs.iter().enumerate() {
        let t = run.streams.exponential(Substream::Arrivals, ty.arrival_rate);
        cal.schedule(t, Payload::Arrival(j));
    }
    let adgp = policy.kind == PolicyKind::Adgp;
    let rearm_tick = |cal: &mut Calendar, run: &mut Run<'_>, j: usize, now: f64| -> Result<()> {
        let rate = policy.clock_rate(j, &run.state.queue_lengths(), slots)?;
        let t = now + run.streams.exponential(Substream::Clocks, rate);
        cal.ticks[j] = cal.schedule(t, Payload::Tick(j));
        Ok(())
    };
    if adgp {
        for j in 0..jobs {
            rearm_tick(&mut cal, &mut run, j, 0.0)?;
        }
    }
    if space.is_some() {
        cal.schedule(0.0, Payload::Epoch(0));
    }

    while let Some(p) = cal.heap.pop() {
        if p.time >= horizon {
            break;
        }
        let (kind, event) = match p.payload {
            Payload::Arrival(j) => {
                let t = p.time + run.streams.exponential(Substream::Arrivals, instance.jobs[j].arrival_rate);
                cal.schedule(t, Payload::Arrival(j));
                (EventKind::Arrival, Event::Arrival(j))
            }
            Payload::Departure(id) => {
                if cal.clocks.get(&id) != Some(&p.seq) {
                    continue;
                }
                cal.clocks.remove(&id);
                (EventKind::Departure, Event::Departure(id))
            }
            Payload::Tick(j) => {
                if cal.ticks[j] != p.seq {
                    continue;
                }
                (EventKind::Tick, Event::Tick(j))
            }
            Payload::Epoch(k) => {
                let next = (k + 1) as f64 * policy.params.frame_length;
                cal.schedule(next, Payload::Epoch(k + 1));
                (EventKind::Epoch, Event::FrameEpoch)
            }
        };
        let before = run.state.queue_lengths();
        let outcome = run.apply(p.time, kind, event, space.as_deref())?;

        for a in &outcome.actions {
            match *a {
                Action::TemplateCreated { id, ref template, .. } if policy.kind.clocks_follow_templates() => {
                    cal.arm_departure(p.time, id, instance.jobs[template.job()].service_rate, &mut run.streams);
                }
                Action::JobStarted { id, .. } if !policy.kind.clocks_follow_templates() => {
                    if let Some(r) = run.state.config.get(id) {
                        let rate = instance.jobs[r.template.job()].service_rate;
                        cal.arm_departure(p.time, id, rate, &mut run.streams);
                    }
                }
                Action::JobDeparted { id, .. } | Action::JobInterrupted { id, .. }
                    if !policy.kind.clocks_follow_templates() =>
                {
                    cal.clocks.remove(&id);
                }
                Action::TemplateDestroyed { id } => {
                    cal.clocks.remove(&id);
                }
                _ => {}
            }
        }
        if adgp {
            if run.state.queue_lengths() != before {
                for j in 0..jobs {
                    rearm_tick(&mut cal, &mut run, j, p.time)?;
                }
            } else if let Event::Tick(j) = event {
                rearm_tick(&mut cal, &mut run, j, p.time)?;
            }
        }
    }
    Ok(run.finish())
}

/// Simulates `steps` transitions of the uniformized jump chain at rate
/// `ξ = 2(Σλ_j + M Σμ_j)`. Step `n` happens at time `n/ξ`, so time averages
/// are step averages.
pub fn run_jump_chain(instance: &Instance, policy: &Policy, steps: u64, opts: &RunOptions) -> Result<RunOutput> {
    match policy.kind {
        PolicyKind::Dgp | PolicyKind::RoundRobin | PolicyKind::Loss => {}
        PolicyKind::Adgp => return Err(Error::Unsupported("jump chain with state-dependent ADGP clocks")),
        PolicyKind::FrameBased => return Err(Error::Unsupported("jump chain with deterministic frame epochs")),
    }
    let xi = instance.uniformization_rate();
    let horizon = steps as f64 / xi;
    let mut run = Run::new(instance, policy, horizon, opts)?;
    let lambda: Vec<f64> = instance.jobs.iter().map(|j| j.arrival_rate).collect();
    for n in 0..steps {
        let t = n as f64 / xi;
        let mut u = run.streams.uniform(Substream::Clocks) * xi;
        let mut chosen = None;
        for (j, &l) in lambda.iter().enumerate() {
            if u < l {
                chosen = Some((EventKind::Arrival, Event::Arrival(j)));
                break;
            }
            u -= l;
        }
        if chosen.is_none() {
            for (j, ty) in instance.jobs.iter().enumerate() {
                let ids = run.state.config.ids_of(j);
                let r = ids.len() as f64 * ty.service_rate;
                if u < r {
                    let id = ids[run.streams.get(Substream::Clocks).random_range(0..ids.len())];
                    chosen = Some((EventKind::Departure, Event::Departure(id)));
                    break;
                }
                u -= r;
            }
        }
        if let Some((kind, event)) = chosen {
            run.apply(t, kind, event, None)?;
        }
    }
    Ok(run.finish())
}

/// Reference loss system: arrivals are placed at random if possible and
/// dropped otherwise; templates live for an exponential service time.
pub fn run_loss_system(instance: &Instance, horizon: f64, opts: &RunOptions) -> Result<RunOutput> {
    let policy = Policy::live(PolicyKind::Loss, SchedulerParams::default());
    run_continuous(instance, &policy, horizon, opts)
}
