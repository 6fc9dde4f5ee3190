//! Dynamic partitioning and packing of graph-structured jobs onto a slotted
//! cluster.
//!
//! The crate is `no_std` (with `alloc`) and purely computational:
//!
//! - [`cluster`]: clusters, job graphs, templates, configurations and the
//!   configuration algebra.
//! - [`kernel`]: weight functions, acceptance probabilities, the random
//!   partition procedure and seeded random substreams.
//! - [`schedulers`]: event handlers for DGP, ADGP, frame-based Max Weight,
//!   round-robin and the reference loss system.
//! - [`engine`]: continuous-time and uniformized jump-chain simulators,
//!   metrics and event traces.
//! - [`exact`]: closed-form stationary laws, generator construction, exact
//!   stationary solves, divergences, the static LP optimum and the bound
//!   calculators.
//!
//! File formats and the command line live in the `graphpack` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cluster;
pub mod engine;
mod error;
pub mod exact;
pub mod kernel;
pub mod schedulers;

pub use cluster::{
    enumerate_configurations, enumerate_feasible_templates, template_cost, ClusterSpec,
    ConfigKey, Configuration, Edge, Instance, JobType, Machine, Reserved, Slot, SlotRef, Tag,
    Template, TemplateId,
};
pub use error::{Error, Result};
pub use kernel::{RandomStreams, SchedulerParams, Substream};
pub use engine::{run_continuous, run_jump_chain, run_loss_system, summarize_trace, MetricsReport, RunOptions, RunOutput, Trace};
pub use schedulers::{Action, Event, EventOutcome, FixedWeights, Policy, PolicyKind, SystemState, WeightMode};

