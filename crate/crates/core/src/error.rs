use alloc::string::String;

/// Errors raised anywhere in the core crate.
///
/// The variants are grouped so that callers can map them onto coarse
/// categories (validation, capacity/state space, numerical).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid cluster: {0}")]
    InvalidCluster(String),
    #[error("invalid job type {job}: {reason}")]
    InvalidJob { job: u32, reason: String },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("slot {slot} is already occupied by template {holder}")]
    SlotCollision { slot: u32, holder: u64 },
    #[error("unknown template {0}")]
    UnknownTemplate(u64),
    #[error("f is only defined for x >= 1, got {0}")]
    Domain(f64),
    #[error("state space exceeds {limit} configurations (reached {reached})")]
    StateSpaceTooLarge { limit: usize, reached: usize },
    #[error("load vector lies outside the capacity region")]
    InfeasibleLoad,
    #[error("generator is reducible: state {0} is not mutually reachable from state 0")]
    Reducible(usize),
    #[error("linear system is singular")]
    Singular,
    #[error("distributions differ in support: {0}")]
    SupportMismatch(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0} is not supported by this engine")]
    Unsupported(&'static str),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("invariant violated at t={time}: {what}")]
    InvariantViolated { time: f64, what: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
