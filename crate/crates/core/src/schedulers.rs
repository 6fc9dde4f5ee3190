//! Event handlers for the scheduling policies.
//!
//! Every handler takes the current [`SystemState`] by mutable reference,
//! applies one event, and returns the list of [`Action`]s it performed. The
//! handlers never touch timers: the engine arms a departure clock for every
//! `TemplateCreated` (template-owned clocks) or every `JobStarted`
//! (frame-based policy, where clocks belong to jobs) and discards clocks of
//! destroyed templates.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{ConfigKey, Configuration, Instance, Tag, Template, TemplateId};
use crate::error::{Error, Result};
use crate::kernel::{
    accept_probability, f_eval, queue_weight, random_partition, tilde_weight, RandomStreams, SchedulerParams, Substream,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// dynamic graph partitioning, decisions at arrivals and departures
    Dgp,
    /// dynamic graph partitioning driven by dedicated per-type clocks
    Adgp,
    /// Max Weight configuration reset every frame
    FrameBased,
    /// round-robin slot filling, no templates kept idle
    RoundRobin,
    /// reference loss system: place at random or drop
    Loss,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Dgp => "dgp",
            PolicyKind::Adgp => "adgp",
            PolicyKind::FrameBased => "frame-based",
            PolicyKind::RoundRobin => "round-robin",
            PolicyKind::Loss => "loss",
        }
    }

    /// Whether departure clocks belong to templates (created virtual or
    /// actual) rather than to jobs.
    pub fn clocks_follow_templates(self) -> bool {
        !matches!(self, PolicyKind::FrameBased)
    }

    fn never_interrupts(self) -> bool {
        !matches!(self, PolicyKind::FrameBased)
    }
}

/// Frozen weight tables.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedWeights {
    /// one weight for every template of each job type
    PerJob(Vec<f64>),
    /// the live formula evaluated at a fixed queue snapshot
    Frozen(Vec<usize>),
    /// an explicit weight per template
    Table(BTreeMap<Template, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightMode {
    Live,
    Fixed(FixedWeights),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub kind: PolicyKind,
    pub params: SchedulerParams,
    pub weights: WeightMode,
}

impl Policy {
    pub fn live(kind: PolicyKind, params: SchedulerParams) -> Self {
        Self { kind, params, weights: WeightMode::Live }
    }

    pub fn fixed(kind: PolicyKind, params: SchedulerParams, weights: FixedWeights) -> Self {
        Self { kind, params, weights: WeightMode::Fixed(weights) }
    }

    pub fn validate(&self, instance: &Instance) -> Result<()> {
        self.params.validate()?;
        let jobs = instance.jobs.len();
        match &self.weights {
            WeightMode::Live => Ok(()),
            WeightMode::Fixed(FixedWeights::PerJob(w)) => {
                if w.len() != jobs {
                    return Err(Error::InvalidParams(format!("{} per-job weights for {jobs} job types", w.len())));
                }
                if let Some(bad) = w.iter().find(|v| !v.is_finite()) {
                    return Err(Error::InvalidParams(format!("non-finite weight {bad}")));
                }
                Ok(())
            }
            WeightMode::Fixed(FixedWeights::Frozen(q)) => {
                if q.len() != jobs {
                    return Err(Error::InvalidParams(format!("{} frozen queues for {jobs} job types", q.len())));
                }
                Ok(())
            }
            WeightMode::Fixed(FixedWeights::Table(table)) => {
                let empty = Configuration::empty(&instance.cluster);
                for j in 0..jobs {
                    for t in crate::cluster::enumerate_feasible_templates(&empty, instance, j) {
                        if !table.contains_key(&t) {
                            return Err(Error::InvalidParams(format!(
                                "weight table misses a template of job type {}",
                                instance.jobs[j].id
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Weight of `template` given the current queue lengths.
    pub fn template_weight(&self, template: &Template, queues: &[usize], slots: usize) -> Result<f64> {
        let j = template.job();
        match &self.weights {
            WeightMode::Live => tilde_weight(j, template.cost(), queues, &self.params, slots),
            WeightMode::Fixed(FixedWeights::PerJob(w)) => {
                w.get(j).copied().ok_or_else(|| Error::InvalidParams(format!("no weight for job {j}")))
            }
            WeightMode::Fixed(FixedWeights::Frozen(q)) => tilde_weight(j, template.cost(), q, &self.params, slots),
            WeightMode::Fixed(FixedWeights::Table(t)) => {
                t.get(template).copied().ok_or_else(|| Error::InvalidParams("template missing from weight table".into()))
            }
        }
    }

    /// Exponent `c_j` of the ADGP clock rate `λ̂ e^(c_j/β)`. Templates are then
    /// kept with probability `e^((w - c_j)/β)`, which for live weights is the
    /// cost factor `e^(-b_A/β)`.
    pub fn clock_exponent(&self, job: usize, queues: &[usize], slots: usize) -> Result<f64> {
        match &self.weights {
            WeightMode::Live => queue_weight(job, queues, &self.params, slots),
            WeightMode::Fixed(FixedWeights::PerJob(w)) => {
                w.get(job).copied().ok_or_else(|| Error::InvalidParams(format!("no weight for job {job}")))
            }
            WeightMode::Fixed(FixedWeights::Frozen(q)) => queue_weight(job, q, &self.params, slots),
            WeightMode::Fixed(FixedWeights::Table(t)) => Ok(t
                .iter()
                .filter(|(k, _)| k.job() == job)
                .map(|(_, &w)| w)
                .fold(f64::NEG_INFINITY, f64::max)),
        }
    }

    /// Rate of the dedicated clock of `job`.
    pub fn clock_rate(&self, job: usize, queues: &[usize], slots: usize) -> Result<f64> {
        let c = self.clock_exponent(job, queues, slots)?;
        let rate = self.params.clock_rate * libm::exp(c / self.params.beta);
        if rate.is_nan() || rate.is_infinite() {
            return Err(Error::Numerical(format!("clock rate of job {job} overflows (exponent {c})")));
        }
        Ok(rate)
    }
}

/// Jobs of one type that are in the system.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JobQueue {
    /// waiting jobs, head of line first
    pub waiting: VecDeque<u64>,
    /// jobs held by actual templates
    pub in_service: usize,
}

/// `(Q(t), C(t))` plus counters.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub config: Configuration,
    pub queues: Vec<JobQueue>,
    pub clock: f64,
    /// `H^(j)(0, t)`
    pub arrivals: Vec<u64>,
    /// `D^(j)(0, t)`
    pub departures: Vec<u64>,
    pub interruptions: u64,
    pub drops: u64,
    initial: Vec<usize>,
    next_job: u64,
    rr_cursor: usize,
}

impl SystemState {
    pub fn new(instance: &Instance) -> Self {
        let n = instance.jobs.len();
        Self {
            config: Configuration::empty(&instance.cluster),
            queues: (0..n).map(|_| JobQueue::default()).collect(),
            clock: 0.0,
            arrivals: alloc::vec![0; n],
            departures: alloc::vec![0; n],
            interruptions: 0,
            drops: 0,
            initial: alloc::vec![0; n],
            next_job: 0,
            rr_cursor: 0,
        }
    }

    /// `Q^(j)`: waiting plus in service.
    pub fn queue_len(&self, job: usize) -> usize {
        let q = &self.queues[job];
        q.waiting.len() + q.in_service
    }

    pub fn queue_lengths(&self) -> Vec<usize> {
        (0..self.queues.len()).map(|j| self.queue_len(j)).collect()
    }

    pub fn round_robin_cursor(&self) -> usize {
        self.rr_cursor
    }

    pub fn set_round_robin_cursor(&mut self, cursor: usize) {
        self.rr_cursor = cursor;
    }

    /// Checks the state invariants that every handler must preserve.
    pub fn check_invariants(&self, instance: &Instance, kind: PolicyKind) -> Result<(), String> {
        self.config.check()?;
        let used: usize = self.config.iter().map(|(_, r)| r.template.slots().len()).sum();
        if used > instance.total_slots() {
            return Err(format!("{used} slots used out of {}", instance.total_slots()));
        }
        for j in 0..self.queues.len() {
            let actual = self.config.count_actual(j);
            if actual != self.queues[j].in_service {
                return Err(format!("job type {j}: {actual} actual templates but {} jobs in service", self.queues[j].in_service));
            }
            let expected = self.initial[j] as i128 + self.arrivals[j] as i128 - self.departures[j] as i128;
            if self.queue_len(j) as i128 != expected {
                return Err(format!("job type {j}: queue {} violates Q(0) + H - D = {expected}", self.queue_len(j)));
            }
            let idle = self.config.count(j) - actual;
            match kind {
                PolicyKind::RoundRobin | PolicyKind::Loss => {
                    if idle > 0 {
                        return Err(format!("job type {j}: {idle} virtual templates under {}", kind.name()));
                    }
                }
                _ => {
                    if idle > 0 && !self.queues[j].waiting.is_empty() {
                        return Err(format!(
                            "job type {j}: {} waiting jobs coexist with {idle} idle virtual templates",
                            self.queues[j].waiting.len()
                        ));
                    }
                }
            }
        }
        if kind.never_interrupts() && self.interruptions > 0 {
            return Err(format!("{} interruptions under {}", self.interruptions, kind.name()));
        }
        Ok(())
    }

    fn enqueue(&mut self, job_type: usize) -> Action {
        let job = self.next_job;
        self.next_job += 1;
        self.queues[job_type].waiting.push_back(job);
        self.arrivals[job_type] += 1;
        Action::JobEnqueued { job_type, job }
    }

    /// Removes a template; a resident job departs.
    fn release(&mut self, id: TemplateId, actions: &mut Vec<Action>) -> Result<Template> {
        let entry = self.config.remove_template(id)?;
        let j = entry.template.job();
        if let Tag::Actual(job) = entry.tag {
            self.queues[j].in_service -= 1;
            self.departures[j] += 1;
            actions.push(Action::JobDeparted { id, job });
        }
        actions.push(Action::TemplateDestroyed { id });
        Ok(entry.template)
    }

    /// Moves head-of-line jobs of `job_type` into uniformly chosen virtual
    /// templates of that type until one side runs out.
    fn fill_from_queue<R: Rng + ?Sized>(&mut self, job_type: usize, rng: &mut R, actions: &mut Vec<Action>) {
        while !self.queues[job_type].waiting.is_empty() {
            let idle = self.config.virtual_ids(job_type);
            if idle.is_empty() {
                break;
            }
            let id = idle[rng.random_range(0..idle.len())];
            let job = self.queues[job_type].waiting.pop_front().expect("nonempty");
            self.config.set_tag(id, Tag::Actual(job)).expect("id from virtual_ids");
            self.queues[job_type].in_service += 1;
            actions.push(Action::JobStarted { id, job });
        }
    }
}

/// What a handler did, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum Action {
    JobEnqueued { job_type: usize, job: u64 },
    TemplateCreated { id: TemplateId, template: Template, tag: Tag },
    TemplateRejected { job_type: usize, cost: f64 },
    TemplateDestroyed { id: TemplateId },
    JobStarted { id: TemplateId, job: u64 },
    JobDeparted { id: TemplateId, job: u64 },
    JobInterrupted { id: TemplateId, job: u64 },
    JobDropped { job_type: usize },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventOutcome {
    pub actions: Vec<Action>,
    /// jobs interrupted by this event (frame epochs only)
    pub interrupted: usize,
}

impl EventOutcome {
    fn from(actions: Vec<Action>) -> Self {
        Self { actions, interrupted: 0 }
    }
}

/// Events dispatched by the engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Arrival(usize),
    Departure(TemplateId),
    Tick(usize),
    FrameEpoch,
}

/// Proposes a template with the random partition procedure and keeps it
/// with probability `keep(template)`.
fn propose(
    state: &mut SystemState,
    instance: &Instance,
    job_type: usize,
    streams: &mut RandomStreams,
    actions: &mut Vec<Action>,
    keep: impl FnOnce(&Template) -> Result<f64>,
) -> Result<()> {
    if let Some(t) = random_partition(&state.config, instance, job_type, streams.get(Substream::Placement)) {
        let p = keep(&t)?;
        if streams.uniform(Substream::Acceptance) < p {
            let id = state.config.add_template(t.clone(), Tag::Virtual)?;
            actions.push(Action::TemplateCreated { id, template: t, tag: Tag::Virtual });
        } else {
            actions.push(Action::TemplateRejected { job_type, cost: t.cost() });
        }
    }
    Ok(())
}

/// DGP arrival: enqueue, propose a virtual template kept with the logistic
/// probability of its weight at `t+`, then fill from the queue.
pub fn dgp_on_arrival(
    state: &mut SystemState,
    instance: &Instance,
    policy: &Policy,
    job_type: usize,
    streams: &mut RandomStreams,
) -> Result<EventOutcome> {
    let mut actions = alloc::vec![state.enqueue(job_type)];
    let queues = state.queue_lengths();
    let m = instance.total_slots();
    propose(state, instance, job_type, streams, &mut actions, |t| {
        Ok(accept_probability(policy.template_weight(t, &queues, m)?, policy.params.beta))
    })?;
    state.fill_from_queue(job_type, streams.get(Substream::Selection), &mut actions);
    Ok(EventOutcome::from(actions))
}

/// DGP departure: the template leaves (with its job, if any), a virtual
/// template on the same slots is re-added with the logistic probability at
/// `t+`, then the queue fills idle templates.
pub fn dgp_on_departure(
    state: &mut SystemState,
    instance: &Instance,
    policy: &Policy,
    id: TemplateId,
    streams: &mut RandomStreams,
) -> Result<EventOutcome> {
    let mut actions = Vec::new();
    let template = state.release(id, &mut actions)?;
    let j = template.job();
    let queues = state.queue_lengths();
    let w = policy.template_weight(&template, &queues, instance.total_slots())?;
    if streams.uniform(Substream::Acceptance) < accept_probability(w, policy.params.beta) {
        let new_id = state.config.add_template(template.clone(), Tag::Virtual)?;
        actions.push(Action::TemplateCreated { id: new_id, template, tag: Tag::Virtual });
    }
    state.fill_from_queue(j, streams.get(Substream::Selection), &mut actions);
    Ok(EventOutcome::from(actions))
}

/// ADGP clock tick of `job_type`: propose a template, keep it with
/// probability `e^((w - c_j)/β)`, fill from the queue.
pub fn adgp_on_clock(
    state: &mut SystemState,
    instance: &Instance,
    policy: &Policy,
    job_type: usize,
    streams: &mut RandomStreams,
) -> Result<EventOutcome> {
    let mut actions = Vec::new();
    let queues = state.queue_lengths();
    let m = instance.total_slots();
    let c = policy.clock_exponent(job_type, &queues, m)?;
    propose(state, instance, job_type, streams, &mut actions, |t| {
        let w = policy.template_weight(t, &queues, m)?;
        Ok(libm::exp(((w - c) / policy.params.beta).min(0.0)))
    })?;
    state.fill_from_queue(job_type, streams.get(Substream::Selection), &mut actions);
    Ok(EventOutcome::from(actions))
}

/// ADGP arrival: the job only joins the queue. An idle virtual template of
/// its type, if one exists, takes it at once (a tag flip, the template set is
/// unchanged).
pub fn adgp_on_arrival(state: &mut SystemState, job_type: usize, streams: &mut RandomStreams) -> EventOutcome {
    let mut actions = alloc::vec![state.enqueue(job_type)];
    state.fill_from_queue(job_type, streams.get(Substream::Selection), &mut actions);
    EventOutcome::from(actions)
}

/// ADGP (and loss system) departure: the template is removed, no re-add.
pub fn adgp_on_departure(state: &mut SystemState, id: TemplateId) -> Result<EventOutcome> {
    let mut actions = Vec::new();
    state.release(id, &mut actions)?;
    Ok(EventOutcome::from(actions))
}

/// Frame-based weight of a template: `α f(Q^(j)) - b_A` with `f(q)` read as
/// `f(max(q, 1))`, so an empty queue contributes nothing.
fn frame_weight(policy: &Policy, template: &Template, queues: &[usize], slots: usize) -> Result<f64> {
    match policy.weights {
        WeightMode::Live => {
            let q = queues[template.job()].max(1) as f64;
            Ok(policy.params.alpha * f_eval(q, policy.params.b)? - template.cost())
        }
        WeightMode::Fixed(_) => policy.template_weight(template, queues, slots),
    }
}

/// Max Weight configuration over the enumerated space; ties (within a
/// relative `1e-9`) are broken uniformly at random.
pub fn frame_select_config<R: Rng + ?Sized>(
    state: &SystemState,
    instance: &Instance,
    policy: &Policy,
    space: &[ConfigKey],
    rng: &mut R,
) -> Result<ConfigKey> {
    if space.is_empty() {
        return Err(Error::InvalidParams("empty configuration space".into()));
    }
    let queues = state.queue_lengths();
    let m = instance.total_slots();
    let mut scores = Vec::with_capacity(space.len());
    for c in space {
        let mut s = 0.0;
        for t in c.templates() {
            s += frame_weight(policy, t, &queues, m)?;
        }
        scores.push(s);
    }
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * best.abs().max(1.0);
    let ties: Vec<usize> = (0..space.len()).filter(|&i| scores[i] >= best - tol).collect();
    Ok(space[ties[rng.random_range(0..ties.len())]].clone())
}

/// Frame epoch: switch to `target`. Templates present in both (same type and
/// slot assignment) are retained with their jobs; dropped templates
/// interrupt their jobs, which rejoin the head of their queue. New templates
/// start virtual and are filled from the queues.
pub fn frame_apply_epoch(
    state: &mut SystemState,
    target: &ConfigKey,
    streams: &mut RandomStreams,
) -> Result<EventOutcome> {
    let mut actions = Vec::new();
    let mut interrupted = 0;
    let current: Vec<TemplateId> = state.config.iter().map(|(id, _)| id).collect();
    // newest first, so that older interrupted jobs end up nearer the head
    for &id in current.iter().rev() {
        if target.contains(&state.config.get(id).expect("listed").template) {
            continue;
        }
        let entry = state.config.remove_template(id)?;
        let j = entry.template.job();
        if let Tag::Actual(job) = entry.tag {
            state.queues[j].in_service -= 1;
            state.queues[j].waiting.push_front(job);
            state.interruptions += 1;
            interrupted += 1;
            actions.push(Action::JobInterrupted { id, job });
        }
        actions.push(Action::TemplateDestroyed { id });
    }
    for t in target.templates() {
        if state.config.find(t).is_none() {
            let id = state.config.add_template(t.clone(), Tag::Virtual)?;
            actions.push(Action::TemplateCreated { id, template: t.clone(), tag: Tag::Virtual });
        }
    }
    for j in 0..state.queues.len() {
        state.fill_from_queue(j, streams.get(Substream::Selection), &mut actions);
    }
    Ok(EventOutcome { actions, interrupted })
}

/// Frame-based arrival: fetched immediately by an idle template of its type.
pub fn frame_on_arrival(state: &mut SystemState, job_type: usize, streams: &mut RandomStreams) -> EventOutcome {
    adgp_on_arrival(state, job_type, streams)
}

/// Frame-based service completion: the job departs, its template stays in
/// the configuration as a virtual template and serves the next waiting job.
pub fn frame_on_completion(state: &mut SystemState, id: TemplateId, streams: &mut RandomStreams) -> Result<EventOutcome> {
    let entry = state.config.get(id).ok_or(Error::UnknownTemplate(id.0))?;
    let j = entry.template.job();
    let Tag::Actual(job) = entry.tag else {
        return Err(Error::InvalidTemplate(format!("template {} completed without a job", id.0)));
    };
    state.config.set_tag(id, Tag::Virtual)?;
    state.queues[j].in_service -= 1;
    state.departures[j] += 1;
    let mut actions = alloc::vec![Action::JobDeparted { id, job }];
    state.fill_from_queue(j, streams.get(Substream::Selection), &mut actions);
    Ok(EventOutcome::from(actions))
}

/// Places head-of-line jobs of `job_type` round-robin over machines, one node
/// per machine with a free slot, starting at the cursor.
fn round_robin_dispatch(state: &mut SystemState, instance: &Instance, job_type: usize, actions: &mut Vec<Action>) -> Result<()> {
    let nodes = instance.jobs[job_type].nodes;
    let machines = instance.cluster.machines().len();
    while !state.queues[job_type].waiting.is_empty() && state.config.free_count() >= nodes {
        let mut free: Vec<VecDeque<u32>> = (0..machines)
            .map(|pos| {
                (0..instance.cluster.machines()[pos].slots)
                    .filter(|&i| {
                        let slot = instance.cluster.slot_at(pos, i).expect("in range");
                        state.config.holder(slot).is_none()
                    })
                    .collect()
            })
            .collect();
        let mut cursor = state.rr_cursor % machines;
        let mut slots = Vec::with_capacity(nodes);
        while slots.len() < nodes {
            if let Some(i) = free[cursor].pop_front() {
                slots.push(instance.cluster.slot_at(cursor, i).expect("in range"));
            }
            cursor = (cursor + 1) % machines;
        }
        state.rr_cursor = cursor;
        let template = Template::new(job_type, slots, instance)?;
        let job = state.queues[job_type].waiting.pop_front().expect("nonempty");
        let id = state.config.add_template(template.clone(), Tag::Actual(job))?;
        state.queues[job_type].in_service += 1;
        actions.push(Action::TemplateCreated { id, template, tag: Tag::Actual(job) });
        actions.push(Action::JobStarted { id, job });
    }
    Ok(())
}

/// Round-robin arrival: enqueue, then place as many head-of-line jobs as fit.
pub fn round_robin_place(state: &mut SystemState, instance: &Instance, job_type: usize) -> Result<EventOutcome> {
    let mut actions = alloc::vec![state.enqueue(job_type)];
    round_robin_dispatch(state, instance, job_type, &mut actions)?;
    Ok(EventOutcome::from(actions))
}

/// Round-robin departure: free the slots and retry every job type in order.
pub fn round_robin_on_departure(state: &mut SystemState, instance: &Instance, id: TemplateId) -> Result<EventOutcome> {
    let mut actions = Vec::new();
    state.release(id, &mut actions)?;
    for j in 0..state.queues.len() {
        round_robin_dispatch(state, instance, j, &mut actions)?;
    }
    Ok(EventOutcome::from(actions))
}

/// Loss-system arrival: place at random if possible, otherwise drop.
pub fn loss_on_arrival(
    state: &mut SystemState,
    instance: &Instance,
    job_type: usize,
    streams: &mut RandomStreams,
) -> Result<EventOutcome> {
    match random_partition(&state.config, instance, job_type, streams.get(Substream::Placement)) {
        None => {
            state.drops += 1;
            Ok(EventOutcome::from(alloc::vec![Action::JobDropped { job_type }]))
        }
        Some(t) => {
            let enq = state.enqueue(job_type);
            let job = state.queues[job_type].waiting.pop_back().expect("just enqueued");
            let id = state.config.add_template(t.clone(), Tag::Actual(job))?;
            state.queues[job_type].in_service += 1;
            Ok(EventOutcome::from(alloc::vec![
                enq,
                Action::TemplateCreated { id, template: t, tag: Tag::Actual(job) },
                Action::JobStarted { id, job },
            ]))
        }
    }
}

/// Routes one event to the handler of `policy`. `frame_space` is the
/// enumerated configuration space, required by the frame-based policy.
pub fn handle(
    state: &mut SystemState,
    instance: &Instance,
    policy: &Policy,
    event: Event,
    streams: &mut RandomStreams,
    frame_space: Option<&[ConfigKey]>,
) -> Result<EventOutcome> {
    use PolicyKind::*;
    match (policy.kind, event) {
        (Dgp, Event::Arrival(j)) => dgp_on_arrival(state, instance, policy, j, streams),
        (Dgp, Event::Departure(id)) => dgp_on_departure(state, instance, policy, id, streams),
        (Adgp, Event::Arrival(j)) => Ok(adgp_on_arrival(state, j, streams)),
        (Adgp, Event::Departure(id)) | (Loss, Event::Departure(id)) => adgp_on_departure(state, id),
        (Adgp, Event::Tick(j)) => adgp_on_clock(state, instance, policy, j, streams),
        (FrameBased, Event::Arrival(j)) => Ok(frame_on_arrival(state, j, streams)),
        (FrameBased, Event::Departure(id)) => frame_on_completion(state, id, streams),
        (FrameBased, Event::FrameEpoch) => {
            let space = frame_space.ok_or(Error::Unsupported("frame-based policy without a configuration space"))?;
            let target = frame_select_config(state, instance, policy, space, streams.get(Substream::Selection))?;
            frame_apply_epoch(state, &target, streams)
        }
        (RoundRobin, Event::Arrival(j)) => round_robin_place(state, instance, j),
        (RoundRobin, Event::Departure(id)) => round_robin_on_departure(state, instance, id),
        (Loss, Event::Arrival(j)) => loss_on_arrival(state, instance, j, streams),
        (_, Event::Tick(_)) => Err(Error::Unsupported("dedicated clock ticks outside ADGP")),
        (_, Event::FrameEpoch) => Err(Error::Unsupported("frame epochs outside the frame-based policy")),
    }
}
