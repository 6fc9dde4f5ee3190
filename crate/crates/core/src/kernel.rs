//! Weight functions, acceptance probabilities, the random partition
//! procedure and the seeded randomness shared by every scheduler.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{template_cost, Instance, SlotOccupancy, Template};
use crate::error::{Error, Result};

/// Tunable parameters of the randomized schedulers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerParams {
    /// queue-weight scale
    pub alpha: f64,
    /// temperature
    pub beta: f64,
    /// weight-mixing floor
    pub epsilon: f64,
    /// queue bias
    pub h: f64,
    /// exponent in `f(x) = ln(x)^(1-b)`
    pub b: f64,
    /// frame length, frame-based policy only
    pub frame_length: f64,
    /// dedicated clock base rate, ADGP only
    pub clock_rate: f64,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            epsilon: 0.1,
            h: core::f64::consts::E,
            b: 0.5,
            frame_length: 1.0,
            clock_rate: 1.0,
        }
    }
}

impl SchedulerParams {
    /// Defaults with `α = β²`.
    pub fn with_beta(beta: f64) -> Self {
        Self { alpha: beta * beta, beta, ..Self::default() }
    }

    /// `α = β²`, `h = exp((1/β)^(1/(1-b)))`, `ε = β^(b²/4)`.
    pub fn tradeoff(beta: f64, b: f64) -> Self {
        Self {
            alpha: beta * beta,
            beta,
            epsilon: libm::pow(beta, b * b / 4.0),
            h: libm::exp(libm::pow(1.0 / beta, 1.0 / (1.0 - b))),
            b,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be finite and positive, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        positive("frame_length", self.frame_length)?;
        positive("clock_rate", self.clock_rate)?;
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParams(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::InvalidParams(format!("b must lie in (0, 1), got {}", self.b)));
        }
        // h may be +inf only through overflow of the tradeoff preset; refuse it.
        if !(self.h >= 1.0 && self.h.is_finite()) {
            return Err(Error::InvalidParams(format!("h must be finite and at least 1, got {}", self.h)));
        }
        Ok(())
    }
}

/// `f(x) = ln(x)^(1-b)` for `x >= 1`.
pub fn f_eval(x: f64, b: f64) -> Result<f64> {
    if !(x >= 1.0) {
        return Err(Error::Domain(x));
    }
    Ok(libm::pow(libm::log(x), 1.0 - b))
}

/// `f'(x) = (1-b) ln(x)^(-b) / x`; infinite at `x = 1`.
pub fn f_derivative(x: f64, b: f64) -> Result<f64> {
    if !(x >= 1.0) {
        return Err(Error::Domain(x));
    }
    Ok((1.0 - b) * libm::pow(libm::log(x), -b) / x)
}

/// `f^(j)(x) = max{ f(x_j), ε/(8M) f(x_max) }`.
pub fn f_group(j: usize, x: &[f64], b: f64, epsilon: f64, slots: usize) -> Result<f64> {
    let xj = *x.get(j).ok_or_else(|| Error::InvalidParams(format!("no component {j}")))?;
    let fj = f_eval(xj, b)?;
    let mut xmax = xj;
    for &v in x {
        if !(v >= 1.0) {
            return Err(Error::Domain(v));
        }
        xmax = xmax.max(v);
    }
    let floor = epsilon / (8.0 * slots as f64) * f_eval(xmax, b)?;
    Ok(fj.max(floor))
}

/// `α f^(j)(h·1 + Q)`, the queue part of every type-`j` template weight.
pub fn queue_weight(j: usize, queues: &[usize], params: &SchedulerParams, slots: usize) -> Result<f64> {
    let x: Vec<f64> = queues.iter().map(|&q| params.h + q as f64).collect();
    Ok(params.alpha * f_group(j, &x, params.b, params.epsilon, slots)?)
}

/// `w̃^(j)_A = α f^(j)(h + Q) - b^(j)_A`.
pub fn tilde_weight(j: usize, cost: f64, queues: &[usize], params: &SchedulerParams, slots: usize) -> Result<f64> {
    Ok(queue_weight(j, queues, params, slots)? - cost)
}

/// Logistic `e^(w/β) / (1 + e^(w/β))`, evaluated on the branch that cannot
/// overflow.
pub fn accept_probability(w: f64, beta: f64) -> f64 {
    let z = w / beta;
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Random partition procedure: places the job's nodes one after another in a
/// uniformly chosen free slot. Returns `None` when fewer free slots remain
/// than the job has nodes.
pub fn random_partition<R: Rng + ?Sized>(
    occupancy: &impl SlotOccupancy,
    instance: &Instance,
    job: usize,
    rng: &mut R,
) -> Option<Template> {
    let ty = instance.jobs.get(job)?;
    let mut free = occupancy.free_slots(&instance.cluster);
    if free.len() < ty.nodes {
        return None;
    }
    let mut slots = Vec::with_capacity(ty.nodes);
    for _ in 0..ty.nodes {
        let k = rng.random_range(0..free.len());
        slots.push(free.swap_remove(k));
    }
    debug_assert!(template_cost(&slots, ty, &instance.cluster).is_ok());
    Template::new(job, slots, instance).ok()
}

/// Named substreams of a simulation replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Substream {
    Arrivals = 0,
    Departures = 1,
    Placement = 2,
    Acceptance = 3,
    Selection = 4,
    Clocks = 5,
}

const SUBSTREAMS: usize = 6;

/// Independent ChaCha8 streams sharing one seed and differing in stream id,
/// so that draws for one purpose never shift the draws for another.
#[derive(Debug, Clone)]
pub struct RandomStreams {
    streams: [ChaCha8Rng; SUBSTREAMS],
}

impl RandomStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            streams: core::array::from_fn(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                rng
            }),
        }
    }

    pub fn get(&mut self, which: Substream) -> &mut ChaCha8Rng {
        &mut self.streams[which as usize]
    }

    /// Uniform draw in `[0, 1)` from `which`.
    pub fn uniform(&mut self, which: Substream) -> f64 {
        self.get(which).random::<f64>()
    }

    /// Exponential draw with the given rate from `which`.
    pub fn exponential(&mut self, which: Substream, rate: f64) -> f64 {
        match rand_distr::Exp::new(rate) {
            Ok(d) => self.get(which).sample(d),
            Err(_) => f64::INFINITY,
        }
    }
}
