//! Plug-in evaluation of the queue and cost bounds for the frame-based and
//! DGP policies.

use alloc::format;

use serde::Serialize;

use super::{capacity_margin, gamma_distribution, max_template_cost, static_optimum, CapacityMargin};
use crate::cluster::{enumerate_configurations, Instance};
use crate::error::{Error, Result};
use crate::kernel::{f_derivative, f_eval, SchedulerParams};

/// Which bound to evaluate, with its user-supplied constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "theorem", rename_all = "kebab-case")]
pub enum Theorem {
    FrameBased { b1: f64, b2: f64 },
    /// `c0` enables the bias precondition check
    Dgp { c0: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preconditions {
    /// `ρ(1 + δ*)` inside the capacity region for some `δ* > 0`
    pub margin_positive: bool,
    pub delta_below_one: bool,
    pub alpha_le_beta: bool,
    pub beta_below_one: bool,
    pub epsilon_le_delta: bool,
    /// `h >= exp(C0 (1/β) (1/ε)^((2-b+1/b)/(1-b)))`, when `C0` is given
    pub h_condition: Option<bool>,
}

impl Preconditions {
    /// All hypotheses of the selected bound hold (the bias check counts only
    /// when evaluated).
    pub fn all(&self, theorem: &Theorem) -> bool {
        match theorem {
            Theorem::FrameBased { .. } => self.margin_positive,
            Theorem::Dgp { .. } => {
                self.margin_positive
                    && self.delta_below_one
                    && self.alpha_le_beta
                    && self.beta_below_one
                    && self.epsilon_le_delta
                    && self.h_condition.unwrap_or(true)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub h: f64,
    pub b: f64,
    pub frame_length: f64,
    /// `G(x*)`
    pub static_optimum: f64,
    pub gamma_min: f64,
    pub b_max: f64,
    pub delta_star: f64,
    pub rho_min: f64,
    /// `f'(h)(M + Σρ_j)`
    pub k2_hat: f64,
    /// `f(M + h) M`
    pub k3_hat: f64,
    /// bound on `Σ_j E f(Q^(j))`
    pub queue_bound: f64,
    /// bound on the mean partitioning cost
    pub cost_bound: f64,
    pub preconditions: Preconditions,
}

/// `log h >= C0 (1/β) (1/ε)^p`, compared in doubly-logarithmic form.
fn h_condition(h: f64, beta: f64, epsilon: f64, b: f64, c0: f64) -> bool {
    let log_h = libm::log(h);
    if c0 <= 0.0 {
        return log_h >= 0.0;
    }
    if log_h <= 0.0 {
        return false;
    }
    let p = (2.0 - b + 1.0 / b) / (1.0 - b);
    let log_rhs = libm::log(c0) - libm::log(beta) + p * libm::log(1.0 / epsilon);
    libm::log(log_h) >= log_rhs
}

/// Evaluates the right-hand sides of the chosen bound with constants
/// computed from the enumerated configuration space.
pub fn theorem_bounds(
    instance: &Instance,
    params: &SchedulerParams,
    theorem: Theorem,
    max_states: usize,
) -> Result<BoundReport> {
    let SchedulerParams { alpha, beta, epsilon, h, b, frame_length, .. } = *params;
    for (name, v) in [("alpha", alpha), ("beta", beta), ("epsilon", epsilon), ("frame_length", frame_length)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} must be finite and positive, got {v}")));
        }
    }
    if !(b > 0.0 && b < 1.0) || !(h >= 1.0 && h.is_finite()) {
        return Err(Error::InvalidParams(format!("need b in (0, 1) and finite h >= 1, got b = {b}, h = {h}")));
    }
    let space = enumerate_configurations(instance, max_states)?;
    let rho = instance.loads();
    let delta = match capacity_margin(instance, &space, &rho)? {
        CapacityMargin::Unconstrained => {
            return Err(Error::InvalidParams("bounds need a positive load for every job type".into()))
        }
        CapacityMargin::Margin(d) if d <= 1e-12 => return Err(Error::InfeasibleLoad),
        CapacityMargin::Margin(d) => d,
    };
    let rho_min = rho.iter().copied().fold(f64::INFINITY, f64::min);
    if !(rho_min > 0.0) {
        return Err(Error::InvalidParams("bounds need a positive load for every job type".into()));
    }
    let g = static_optimum(instance, &space, &rho)?.value;
    let gamma_min = gamma_distribution(instance, &space).min_prob();
    let log_gamma_min = libm::log(gamma_min);
    let b_max = max_template_cost(instance);
    let m = instance.total_slots() as f64;
    let k2 = f_derivative(h, b)? * (m + rho.iter().sum::<f64>());
    let k3 = f_eval(m + h, b)? * m;

    let (queue_bound, cost_bound, h_ok) = match theorem {
        Theorem::FrameBased { b1, b2 } => {
            let bt = b1 + b2 * frame_length;
            ((bt + (1.0 + delta) * g / alpha) / (delta * rho_min) + b1 * frame_length, g + alpha * bt, None)
        }
        Theorem::Dgp { c0 } => {
            let q = 2.0 / (rho_min * delta)
                * (k2 + k3 - beta / alpha * log_gamma_min + (1.0 + delta / 2.0) * g / alpha + epsilon / alpha * b_max);
            let c = g + alpha * (k2 + k3) - beta * log_gamma_min + epsilon * b_max;
            (q, c, c0.map(|c0| h_condition(h, beta, epsilon, b, c0)))
        }
    };
    if !queue_bound.is_finite() || !cost_bound.is_finite() {
        return Err(Error::Numerical(format!("non-finite bound: queue {queue_bound}, cost {cost_bound}")));
    }
    Ok(BoundReport {
        theorem,
        alpha,
        beta,
        epsilon,
        h,
        b,
        frame_length,
        static_optimum: g,
        gamma_min,
        b_max,
        delta_star: delta,
        rho_min,
        k2_hat: k2,
        k3_hat: k3,
        queue_bound,
        cost_bound,
        preconditions: Preconditions {
            margin_positive: true,
            delta_below_one: delta < 1.0,
            alpha_le_beta: alpha <= beta,
            beta_below_one: beta < 1.0,
            epsilon_le_delta: epsilon <= delta,
            h_condition: h_ok,
        },
    })
}
