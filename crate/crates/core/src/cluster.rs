//! Clusters, job graphs, templates and configurations.
//!
//! A cluster is an ordered list of machines, each holding a number of slots.
//! Slots are addressed by a global index ([`Slot`]) running over machines in
//! order; [`SlotRef`] gives the `(machine-id, slot-index)` view of the same
//! slot. A [`Template`] assigns every node of one job graph to a distinct
//! slot, and a [`Configuration`] is a slot-disjoint collection of templates,
//! each tagged actual (holding a job) or virtual (reserved, empty).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Global slot index in `0..M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Slot(pub u32);

/// Machine-local view of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SlotRef {
    pub machine: u32,
    pub index: u32,
}

impl fmt::Display for SlotRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.machine, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Machine {
    pub id: u32,
    pub slots: u32,
}

/// Machines and their slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    machines: Vec<Machine>,
    /// machine position for every global slot
    slot_machine: Vec<u32>,
    /// global index of the first slot of every machine
    first_slot: Vec<u32>,
}

impl ClusterSpec {
    pub fn new(machines: Vec<Machine>) -> Result<Self> {
        if machines.is_empty() {
            return Err(Error::InvalidCluster("cluster has no machines".into()));
        }
        let mut seen = BTreeMap::new();
        let mut slot_machine = Vec::new();
        let mut first_slot = Vec::with_capacity(machines.len());
        for (pos, m) in machines.iter().enumerate() {
            if m.slots == 0 {
                return Err(Error::InvalidCluster(format!("machine {} has no slots", m.id)));
            }
            if seen.insert(m.id, pos).is_some() {
                return Err(Error::InvalidCluster(format!("duplicate machine id {}", m.id)));
            }
            first_slot.push(slot_machine.len() as u32);
            slot_machine.extend(core::iter::repeat(pos as u32).take(m.slots as usize));
        }
        Ok(Self { machines, slot_machine, first_slot })
    }

    /// `machines` machines with ids `0..machines`, each with `slots` slots.
    pub fn uniform(machines: u32, slots: u32) -> Result<Self> {
        Self::new((0..machines).map(|id| Machine { id, slots }).collect())
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    /// Total slot count `M`.
    pub fn total_slots(&self) -> usize {
        self.slot_machine.len()
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        (0..self.slot_machine.len() as u32).map(Slot)
    }

    /// Position (not id) of the machine holding `slot`.
    pub fn machine_of(&self, slot: Slot) -> Option<usize> {
        self.slot_machine.get(slot.0 as usize).map(|&m| m as usize)
    }

    pub fn slot_ref(&self, slot: Slot) -> Option<SlotRef> {
        let pos = self.machine_of(slot)?;
        Some(SlotRef {
            machine: self.machines[pos].id,
            index: slot.0 - self.first_slot[pos],
        })
    }

    /// Global slot for the `index`-th slot of the machine at position `machine`.
    pub fn slot_at(&self, machine: usize, index: u32) -> Option<Slot> {
        let m = self.machines.get(machine)?;
        (index < m.slots).then(|| Slot(self.first_slot[machine] + index))
    }

    pub fn slot_of(&self, slot: SlotRef) -> Option<Slot> {
        let pos = self.machines.iter().position(|m| m.id == slot.machine)?;
        self.slot_at(pos, slot.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    pub fn unit(u: usize, v: usize) -> Self {
        Self { u, v, weight: 1.0 }
    }
}

/// A job graph with its arrival and service rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobType {
    pub id: u32,
    pub nodes: usize,
    pub edges: Vec<Edge>,
    pub arrival_rate: f64,
    pub service_rate: f64,
}

impl JobType {
    pub fn new(id: u32, nodes: usize, edges: Vec<Edge>, arrival_rate: f64, service_rate: f64) -> Result<Self> {
        let job = Self { id, nodes, edges, arrival_rate, service_rate };
        job.validate()?;
        Ok(job)
    }

    /// Unit-weight path `0 - 1 - ... - (nodes-1)`.
    pub fn path(id: u32, nodes: usize, arrival_rate: f64, service_rate: f64) -> Result<Self> {
        let edges = (1..nodes).map(|v| Edge::unit(v - 1, v)).collect();
        Self::new(id, nodes, edges, arrival_rate, service_rate)
    }

    pub fn load(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }

    /// Checks every invariant that does not depend on the cluster.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: alloc::string::String| Err(Error::InvalidJob { job: self.id, reason });
        if self.nodes == 0 {
            return bad("job graph has no nodes".into());
        }
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return bad(format!("arrival rate must be finite and nonnegative, got {}", self.arrival_rate));
        }
        if !(self.service_rate > 0.0 && self.service_rate.is_finite()) {
            return bad(format!("service rate must be finite and positive, got {}", self.service_rate));
        }
        let mut seen = BTreeMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            if e.u >= self.nodes || e.v >= self.nodes {
                return bad(format!("edge {i} ({}, {}) references a node outside 0..{}", e.u, e.v, self.nodes));
            }
            if e.u == e.v {
                return bad(format!("edge {i} is a self-loop on node {}", e.u));
            }
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return bad(format!("edge {i} has weight {}", e.weight));
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            if let Some(prev) = seen.insert(key, i) {
                return bad(format!("edge {i} duplicates edge {prev} ({}, {})", key.0, key.1));
            }
        }
        Ok(())
    }
}

/// A cluster together with the job types that share it.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub cluster: ClusterSpec,
    pub jobs: Vec<JobType>,
}

impl Instance {
    pub fn new(cluster: ClusterSpec, jobs: Vec<JobType>) -> Result<Self> {
        let m = cluster.total_slots();
        let mut ids = BTreeMap::new();
        for job in &jobs {
            job.validate()?;
            if job.nodes >= m {
                return Err(Error::InvalidJob {
                    job: job.id,
                    reason: format!("|V_j| = {} must be smaller than M = {}", job.nodes, m),
                });
            }
            if ids.insert(job.id, ()).is_some() {
                return Err(Error::InvalidJob { job: job.id, reason: "duplicate job type id".into() });
            }
        }
        if jobs.is_empty() {
            return Err(Error::InvalidCluster("no job types".into()));
        }
        Ok(Self { cluster, jobs })
    }

    pub fn total_slots(&self) -> usize {
        self.cluster.total_slots()
    }

    pub fn loads(&self) -> Vec<f64> {
        self.jobs.iter().map(JobType::load).collect()
    }

    /// `ξ = 2(Σλ_j + M Σμ_j)`, the uniformization rate.
    pub fn uniformization_rate(&self) -> f64 {
        let lambda: f64 = self.jobs.iter().map(|j| j.arrival_rate).sum();
        let mu: f64 = self.jobs.iter().map(|j| j.service_rate).sum();
        2.0 * (lambda + self.total_slots() as f64 * mu)
    }

    /// Number of templates of every type on the empty cluster.
    pub fn template_space_size(&self) -> u128 {
        self.jobs
            .iter()
            .map(|j| falling_factorial(self.total_slots(), j.nodes))
            .fold(0u128, u128::saturating_add)
    }
}

/// Partitioning cost: total weight of edges whose endpoints land on
/// different machines.
pub fn template_cost(assignment: &[Slot], job: &JobType, cluster: &ClusterSpec) -> Result<f64> {
    if assignment.len() != job.nodes {
        return Err(Error::InvalidTemplate(format!(
            "job type {} has {} nodes but {} are assigned",
            job.id,
            job.nodes,
            assignment.len()
        )));
    }
    let mut cost = 0.0;
    for e in &job.edges {
        let (a, b) = match (assignment.get(e.u), assignment.get(e.v)) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::InvalidTemplate(format!("edge ({}, {}) has an unassigned endpoint", e.u, e.v))),
        };
        let ma = cluster
            .machine_of(a)
            .ok_or_else(|| Error::InvalidTemplate(format!("slot {} is outside the cluster", a.0)))?;
        let mb = cluster
            .machine_of(b)
            .ok_or_else(|| Error::InvalidTemplate(format!("slot {} is outside the cluster", b.0)))?;
        if ma != mb {
            cost += e.weight;
        }
    }
    Ok(cost)
}

/// An injective assignment of one job type's nodes to slots.
///
/// Identity is `(job, slots)`; the cost is derived from it and cached.
/// `job` is the position of the job type in [`Instance::jobs`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Template {
    job: usize,
    slots: Vec<Slot>,
    cost: f64,
}

impl Template {
    pub fn new(job: usize, slots: Vec<Slot>, instance: &Instance) -> Result<Self> {
        let ty = instance
            .jobs
            .get(job)
            .ok_or_else(|| Error::InvalidTemplate(format!("no job type at position {job}")))?;
        let m = instance.total_slots();
        let mut used = vec![false; m];
        for s in &slots {
            match used.get_mut(s.0 as usize) {
                None => return Err(Error::InvalidTemplate(format!("slot {} is outside the cluster", s.0))),
                Some(true) => return Err(Error::InvalidTemplate(format!("slot {} is assigned twice", s.0))),
                Some(u) => *u = true,
            }
        }
        let cost = template_cost(&slots, ty, &instance.cluster)?;
        Ok(Self { job, slots, cost })
    }

    pub fn job(&self) -> usize {
        self.job
    }

    /// `slots()[v]` is the slot holding node `v`.
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }
}

impl PartialEq for Template {
    fn eq(&self, other: &Self) -> bool {
        self.job == other.job && self.slots == other.slots
    }
}

impl Eq for Template {}

impl PartialOrd for Template {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Template {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.job, &self.slots).cmp(&(other.job, &other.slots))
    }
}

impl core::hash::Hash for Template {
    fn hash<H: core::hash::Hasher>(&self, state: &mut H) {
        self.job.hash(state);
        self.slots.hash(state);
    }
}

/// Handle of a template reserved in a [`Configuration`]. Never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Virtual,
    /// Holds the job with this id.
    Actual(u64),
}

impl Tag {
    pub fn is_actual(self) -> bool {
        matches!(self, Tag::Actual(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Reserved {
    pub template: Template,
    pub tag: Tag,
}

/// Anything that knows which slots are taken.
pub trait SlotOccupancy {
    fn occupied(&self, cluster: &ClusterSpec) -> Vec<bool>;

    fn free_slots(&self, cluster: &ClusterSpec) -> Vec<Slot> {
        self.occupied(cluster)
            .iter()
            .enumerate()
            .filter(|(_, &used)| !used)
            .map(|(i, _)| Slot(i as u32))
            .collect()
    }
}

/// The set of reserved templates, slot-disjoint across all job types.
#[derive(Debug, Clone)]
pub struct Configuration {
    entries: BTreeMap<TemplateId, Reserved>,
    owner: Vec<Option<TemplateId>>,
    next_id: u64,
}

impl Configuration {
    pub fn empty(cluster: &ClusterSpec) -> Self {
        Self { entries: BTreeMap::new(), owner: vec![None; cluster.total_slots()], next_id: 0 }
    }

    /// `C ⊕ A`: reserves the template's slots under a fresh id.
    pub fn add_template(&mut self, template: Template, tag: Tag) -> Result<TemplateId> {
        for s in template.slots() {
            match self.owner.get(s.0 as usize) {
                None => return Err(Error::InvalidTemplate(format!("slot {} is outside the cluster", s.0))),
                Some(Some(holder)) => return Err(Error::SlotCollision { slot: s.0, holder: holder.0 }),
                Some(None) => {}
            }
        }
        let id = TemplateId(self.next_id);
        self.next_id += 1;
        for s in template.slots() {
            self.owner[s.0 as usize] = Some(id);
        }
        self.entries.insert(id, Reserved { template, tag });
        Ok(id)
    }

    pub fn remove_template(&mut self, id: TemplateId) -> Result<Reserved> {
        let entry = self.entries.remove(&id).ok_or(Error::UnknownTemplate(id.0))?;
        for s in entry.template.slots() {
            self.owner[s.0 as usize] = None;
        }
        Ok(entry)
    }

    pub fn get(&self, id: TemplateId) -> Option<&Reserved> {
        self.entries.get(&id)
    }

    pub fn set_tag(&mut self, id: TemplateId, tag: Tag) -> Result<()> {
        self.entries.get_mut(&id).ok_or(Error::UnknownTemplate(id.0))?.tag = tag;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (TemplateId, &Reserved)> {
        self.entries.iter().map(|(&id, r)| (id, r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn holder(&self, slot: Slot) -> Option<TemplateId> {
        self.owner.get(slot.0 as usize).copied().flatten()
    }

    pub fn free_count(&self) -> usize {
        self.owner.iter().filter(|o| o.is_none()).count()
    }

    /// `|C^(j)|`
    pub fn count(&self, job: usize) -> usize {
        self.entries.values().filter(|r| r.template.job() == job).count()
    }

    /// `|C_a^(j)|`
    pub fn count_actual(&self, job: usize) -> usize {
        self.entries.values().filter(|r| r.template.job() == job && r.tag.is_actual()).count()
    }

    /// Ids of the virtual templates of type `job`, in id order.
    pub fn virtual_ids(&self, job: usize) -> Vec<TemplateId> {
        self.entries
            .iter()
            .filter(|(_, r)| r.template.job() == job && !r.tag.is_actual())
            .map(|(&id, _)| id)
            .collect()
    }

    /// Ids of all templates of type `job`, in id order.
    pub fn ids_of(&self, job: usize) -> Vec<TemplateId> {
        self.entries.iter().filter(|(_, r)| r.template.job() == job).map(|(&id, _)| id).collect()
    }

    /// Instantaneous partitioning cost, summed in id order.
    pub fn total_cost(&self) -> f64 {
        self.entries.values().map(|r| r.template.cost()).sum()
    }

    /// Tag-free canonical identity of the configuration.
    pub fn key(&self) -> ConfigKey {
        ConfigKey::new(self.entries.values().map(|r| r.template.clone()).collect())
    }

    /// Looks up a reserved template by identity.
    pub fn find(&self, template: &Template) -> Option<TemplateId> {
        let first = template.slots().first()?;
        let id = self.holder(*first)?;
        (self.entries[&id].template == *template).then_some(id)
    }

    /// Checks slot-disjointness and owner-table coherence.
    pub fn check(&self) -> Result<(), alloc::string::String> {
        let mut owner = vec![None; self.owner.len()];
        for (&id, r) in &self.entries {
            for s in r.template.slots() {
                let cell = owner.get_mut(s.0 as usize).ok_or_else(|| format!("slot {} out of range", s.0))?;
                if let Some(other) = *cell {
                    return Err(format!("slot {} held by templates {} and {}", s.0, other, id.0));
                }
                *cell = Some(id.0);
            }
        }
        for (i, (a, b)) in owner.iter().zip(&self.owner).enumerate() {
            if *a != b.map(|id| id.0) {
                return Err(format!("owner table incoherent at slot {i}"));
            }
        }
        Ok(())
    }

    fn sorted_entries(&self) -> Vec<&Reserved> {
        let mut v: Vec<_> = self.entries.values().collect();
        v.sort();
        v
    }
}

/// Equality ignores handles: two configurations are equal when they hold the
/// same templates with the same tags.
impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.owner.len() == other.owner.len() && self.sorted_entries() == other.sorted_entries()
    }
}

impl SlotOccupancy for Configuration {
    fn occupied(&self, _cluster: &ClusterSpec) -> Vec<bool> {
        self.owner.iter().map(Option::is_some).collect()
    }
}

/// Canonical, tag-free identity of a configuration: its templates sorted by
/// `(job, slots)`. Keys order by template count first, then
/// lexicographically, which gives the deterministic state indexing used by
/// exact analysis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct ConfigKey(Vec<Template>);

impl ConfigKey {
    pub fn new(mut templates: Vec<Template>) -> Self {
        templates.sort();
        Self(templates)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn templates(&self) -> &[Template] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, job: usize) -> usize {
        self.0.iter().filter(|t| t.job() == job).count()
    }

    pub fn cost(&self) -> f64 {
        self.0.iter().map(Template::cost).sum()
    }

    pub fn contains(&self, template: &Template) -> bool {
        self.0.binary_search(template).is_ok()
    }

    pub fn with(&self, template: Template) -> Self {
        let mut v = self.0.clone();
        let pos = v.binary_search(&template).unwrap_or_else(|p| p);
        v.insert(pos, template);
        Self(v)
    }

    pub fn without(&self, template: &Template) -> Self {
        let mut v = self.0.clone();
        if let Ok(pos) = v.binary_search(template) {
            v.remove(pos);
        }
        Self(v)
    }

    /// Number of slots used by all templates.
    pub fn used_slots(&self) -> usize {
        self.0.iter().map(|t| t.slots().len()).sum()
    }
}

impl PartialOrd for ConfigKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ConfigKey {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0.len(), &self.0).cmp(&(other.0.len(), &other.0))
    }
}

impl SlotOccupancy for ConfigKey {
    fn occupied(&self, cluster: &ClusterSpec) -> Vec<bool> {
        let mut used = vec![false; cluster.total_slots()];
        for t in &self.0 {
            for s in t.slots() {
                used[s.0 as usize] = true;
            }
        }
        used
    }
}

/// `n! / (n-k)!`, saturating.
pub fn falling_factorial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    ((n - k + 1)..=n).fold(1u128, |acc, x| acc.saturating_mul(x as u128))
}

/// Every ordered selection of `k` distinct slots from `free`, in
/// lexicographic order of the slot sequence.
fn injections(free: &[Slot], k: usize) -> Vec<Vec<Slot>> {
    fn rec(free: &[Slot], k: usize, used: &mut [bool], cur: &mut Vec<Slot>, out: &mut Vec<Vec<Slot>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..free.len() {
            if !used[i] {
                used[i] = true;
                cur.push(free[i]);
                rec(free, k, used, cur, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    if k <= free.len() {
        let mut used = vec![false; free.len()];
        rec(free, k, &mut used, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// `A^(j)(C)`: every injective map of the job's nodes into the free slots.
pub fn enumerate_feasible_templates(
    occupancy: &impl SlotOccupancy,
    instance: &Instance,
    job: usize,
) -> Vec<Template> {
    let Some(ty) = instance.jobs.get(job) else { return Vec::new() };
    let free = occupancy.free_slots(&instance.cluster);
    injections(&free, ty.nodes)
        .into_iter()
        .map(|slots| {
            let cost = template_cost(&slots, ty, &instance.cluster).expect("injection on free slots is valid");
            Template { job, slots, cost }
        })
        .collect()
}

/// The configuration space `C`: every slot-disjoint set of templates over all
/// job types, the empty configuration included, in canonical order.
pub fn enumerate_configurations(instance: &Instance, max_states: usize) -> Result<Vec<ConfigKey>> {
    let singles = instance.template_space_size();
    if singles.saturating_add(1) > max_states as u128 {
        return Err(Error::StateSpaceTooLarge {
            limit: max_states,
            reached: usize::try_from(singles.saturating_add(1)).unwrap_or(usize::MAX),
        });
    }
    let empty = Configuration::empty(&instance.cluster);
    let all: Vec<Template> = (0..instance.jobs.len())
        .flat_map(|j| enumerate_feasible_templates(&empty, instance, j))
        .collect();

    struct Walk<'a> {
        all: &'a [Template],
        used: Vec<bool>,
        current: Vec<Template>,
        out: Vec<ConfigKey>,
        limit: usize,
    }

    impl Walk<'_> {
        fn visit(&mut self, start: usize) -> Result<()> {
            self.out.push(ConfigKey::new(self.current.clone()));
            if self.out.len() > self.limit {
                return Err(Error::StateSpaceTooLarge { limit: self.limit, reached: self.out.len() });
            }
            for i in start..self.all.len() {
                let t = &self.all[i];
                if t.slots().iter().any(|s| self.used[s.0 as usize]) {
                    continue;
                }
                for s in t.slots() {
                    self.used[s.0 as usize] = true;
                }
                self.current.push(t.clone());
                self.visit(i + 1)?;
                self.current.pop();
                for s in t.slots() {
                    self.used[s.0 as usize] = false;
                }
            }
            Ok(())
        }
    }

    let mut walk = Walk {
        all: &all,
        used: vec![false; instance.total_slots()],
        current: Vec::new(),
        out: Vec::new(),
        limit: max_states,
    };
    walk.visit(0)?;
    let mut out = walk.out;
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_node(slots: u32, machines: u32) -> Instance {
        Instance::new(
            ClusterSpec::uniform(machines, slots).unwrap(),
            vec![JobType::new(0, 1, vec![], 1.0, 1.0).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn cluster_counts_and_refs() {
        let c = ClusterSpec::new(vec![Machine { id: 7, slots: 2 }, Machine { id: 3, slots: 3 }]).unwrap();
        assert_eq!(c.total_slots(), 5);
        assert_eq!(c.slot_ref(Slot(3)), Some(SlotRef { machine: 3, index: 1 }));
        assert_eq!(c.slot_of(SlotRef { machine: 3, index: 1 }), Some(Slot(3)));
        assert_eq!(c.slot_ref(Slot(5)), None);
    }

    #[test]
    fn cluster_rejects_bad_machines() {
        assert!(ClusterSpec::new(vec![Machine { id: 0, slots: 0 }]).is_err());
        assert!(ClusterSpec::new(vec![Machine { id: 0, slots: 1 }, Machine { id: 0, slots: 1 }]).is_err());
        assert!(ClusterSpec::new(vec![]).is_err());
    }

    #[test]
    fn job_validation() {
        assert!(JobType::new(0, 2, vec![Edge::unit(0, 2)], 1.0, 1.0).is_err());
        assert!(JobType::new(0, 2, vec![Edge::unit(1, 1)], 1.0, 1.0).is_err());
        assert!(JobType::new(0, 2, vec![Edge::unit(0, 1), Edge::unit(1, 0)], 1.0, 1.0).is_err());
        assert!(JobType::new(0, 2, vec![Edge::unit(0, 1)], 1.0, 0.0).is_err());
        let big = JobType::path(0, 4, 1.0, 1.0).unwrap();
        let err = Instance::new(ClusterSpec::uniform(2, 2).unwrap(), vec![big]).unwrap_err();
        assert!(matches!(err, Error::InvalidJob { .. }));
    }

    #[test]
    fn cost_of_two_node_job() {
        let cluster = ClusterSpec::uniform(2, 2).unwrap();
        let job = JobType::path(0, 2, 1.0, 1.0).unwrap();
        assert_eq!(template_cost(&[Slot(0), Slot(1)], &job, &cluster).unwrap(), 0.0);
        assert_eq!(template_cost(&[Slot(0), Slot(2)], &job, &cluster).unwrap(), 1.0);
    }

    #[test]
    fn cost_of_split_path() {
        // {0,2} on machine 0, {1} on machine 1: both edges cross.
        let cluster = ClusterSpec::uniform(2, 2).unwrap();
        let job = JobType::path(0, 3, 1.0, 1.0).unwrap();
        assert_eq!(template_cost(&[Slot(0), Slot(2), Slot(1)], &job, &cluster).unwrap(), 2.0);
    }

    #[test]
    fn cost_errors() {
        let cluster = ClusterSpec::uniform(1, 2).unwrap();
        let job = JobType::path(0, 2, 1.0, 1.0).unwrap();
        assert!(template_cost(&[Slot(0)], &job, &cluster).is_err());
        assert!(template_cost(&[Slot(0), Slot(9)], &job, &cluster).is_err());
    }

    #[test]
    fn weighted_edges_are_direction_blind() {
        let cluster = ClusterSpec::uniform(2, 2).unwrap();
        let job = JobType::new(0, 2, vec![Edge { u: 1, v: 0, weight: 2.5 }], 1.0, 1.0).unwrap();
        assert_eq!(template_cost(&[Slot(0), Slot(3)], &job, &cluster).unwrap(), 2.5);
    }

    #[test]
    fn feasible_template_counts() {
        let inst = Instance::new(
            ClusterSpec::uniform(2, 2).unwrap(),
            vec![JobType::path(0, 2, 1.0, 1.0).unwrap(), JobType::path(1, 3, 1.0, 1.0).unwrap()],
        )
        .unwrap();
        let mut config = Configuration::empty(&inst.cluster);
        assert_eq!(enumerate_feasible_templates(&config, &inst, 0).len(), 12);
        let t = Template::new(0, vec![Slot(0), Slot(1)], &inst).unwrap();
        config.add_template(t, Tag::Virtual).unwrap();
        // three nodes, two free slots
        assert!(enumerate_feasible_templates(&config, &inst, 1).is_empty());
        assert_eq!(enumerate_feasible_templates(&config, &inst, 0).len(), 2);
    }

    #[test]
    fn single_slot_single_template() {
        let inst = single_node(2, 1);
        let mut config = Configuration::empty(&inst.cluster);
        config.add_template(Template::new(0, vec![Slot(0)], &inst).unwrap(), Tag::Virtual).unwrap();
        let ts = enumerate_feasible_templates(&config, &inst, 0);
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].slots(), &[Slot(1)]);
    }

    #[test]
    fn add_and_collide() {
        let inst = single_node(2, 1);
        let mut config = Configuration::empty(&inst.cluster);
        let t = Template::new(0, vec![Slot(0)], &inst).unwrap();
        let id = config.add_template(t.clone(), Tag::Virtual).unwrap();
        assert_eq!(config.len(), 1);
        assert_eq!(config.add_template(t, Tag::Virtual), Err(Error::SlotCollision { slot: 0, holder: id.0 }));
    }

    #[test]
    fn add_on_other_machine_keeps_disjointness() {
        let inst = Instance::new(ClusterSpec::uniform(2, 2).unwrap(), vec![JobType::path(0, 2, 1.0, 1.0).unwrap()]).unwrap();
        let mut config = Configuration::empty(&inst.cluster);
        config.add_template(Template::new(0, vec![Slot(0), Slot(1)], &inst).unwrap(), Tag::Virtual).unwrap();
        config.add_template(Template::new(0, vec![Slot(3), Slot(2)], &inst).unwrap(), Tag::Actual(4)).unwrap();
        assert_eq!(config.len(), 2);
        assert_eq!(config.free_count(), 0);
        config.check().unwrap();
    }

    #[test]
    fn remove_round_trip() {
        let inst = single_node(2, 1);
        let empty = Configuration::empty(&inst.cluster);
        let mut config = empty.clone();
        let t = Template::new(0, vec![Slot(1)], &inst).unwrap();
        let id = config.add_template(t.clone(), Tag::Virtual).unwrap();
        let before = config.clone();
        let removed = config.remove_template(id).unwrap();
        assert_eq!(config, empty);
        config.add_template(removed.template, removed.tag).unwrap();
        assert_eq!(config, before);
        assert_eq!(config.remove_template(TemplateId(99)), Err(Error::UnknownTemplate(99)));
    }

    #[test]
    fn configuration_space_hand_counts() {
        let l1 = single_node(2, 1);
        let space = enumerate_configurations(&l1, 100).unwrap();
        assert_eq!(space.len(), 4);
        assert!(space[0].is_empty());
        assert_eq!(space[1].templates()[0].slots(), &[Slot(0)]);
        assert_eq!(space[2].templates()[0].slots(), &[Slot(1)]);
        assert_eq!(space[3].len(), 2);

        let two_machines = single_node(1, 2);
        assert_eq!(enumerate_configurations(&two_machines, 100).unwrap().len(), 4);

        // 1 × 1 slot cannot host a 2-node job; the instance itself is
        // rejected because |V_j| < M fails, so check the raw enumeration.
        let cluster = ClusterSpec::uniform(1, 1).unwrap();
        let raw = Instance { cluster, jobs: vec![JobType::path(0, 2, 1.0, 1.0).unwrap()] };
        assert_eq!(enumerate_configurations(&raw, 100).unwrap(), vec![ConfigKey::empty()]);
    }

    #[test]
    fn configuration_space_limit() {
        let inst = Instance::new(ClusterSpec::uniform(2, 2).unwrap(), vec![JobType::path(0, 2, 1.0, 1.0).unwrap()]).unwrap();
        assert_eq!(enumerate_configurations(&inst, 1000).unwrap().len(), 25);
        match enumerate_configurations(&inst, 20) {
            Err(Error::StateSpaceTooLarge { limit: 20, reached }) => assert!(reached > 20),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn find_by_identity() {
        let inst = Instance::new(ClusterSpec::uniform(1, 3).unwrap(), vec![JobType::path(0, 2, 1.0, 1.0).unwrap()]).unwrap();
        let mut config = Configuration::empty(&inst.cluster);
        let t = Template::new(0, vec![Slot(0), Slot(1)], &inst).unwrap();
        let id = config.add_template(t.clone(), Tag::Virtual).unwrap();
        assert_eq!(config.find(&t), Some(id));
        let swapped = Template::new(0, vec![Slot(1), Slot(0)], &inst).unwrap();
        assert_eq!(config.find(&swapped), None);
    }
}
