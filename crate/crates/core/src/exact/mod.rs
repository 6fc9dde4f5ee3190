//! Exact analysis of desk-scale instances over the enumerated configuration
//! space: closed-form stationary laws, fixed-weight generators, linear
//! stationary solves, divergences, the static partitioning LP and the bound
//! calculators.

mod bounds;
mod lp;

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use bounds::{theorem_bounds, BoundReport, Preconditions, Theorem};

use crate::cluster::{enumerate_feasible_templates, falling_factorial, ConfigKey, Instance, Template};
use crate::error::{Error, Result};
use crate::kernel::accept_probability;
use crate::schedulers::{Policy, WeightMode};
use lp::{minimize, LpOutcome};

/// A probability vector over an enumerated configuration list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub states: Vec<ConfigKey>,
    pub probs: Vec<f64>,
    /// `|Σπ - 1|` for closed forms, `‖πQ‖∞` for generator solves
    pub residual: f64,
}

impl StationaryDistribution {
    fn from_logs(states: Vec<ConfigKey>, logs: &[f64]) -> Self {
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|&l| libm::exp(l - max)).collect();
        let z: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|v| v / z).collect();
        let residual = (probs.iter().sum::<f64>() - 1.0).abs();
        Self { states, probs, residual }
    }

    pub fn prob_of(&self, key: &ConfigKey) -> Option<f64> {
        self.states.iter().position(|s| s == key).map(|i| self.probs[i])
    }

    /// `E[g(C)]`.
    pub fn expectation(&self, mut g: impl FnMut(&ConfigKey) -> f64) -> f64 {
        self.states.iter().zip(&self.probs).map(|(s, p)| p * g(s)).sum()
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn log_product_form(instance: &Instance, space: &[ConfigKey], log_ratio: &[f64]) -> Vec<f64> {
    let m = instance.total_slots();
    space
        .iter()
        .map(|c| {
            let free = m - c.used_slots();
            let mut l = libm::lgamma(free as f64 + 1.0);
            for (j, &lr) in log_ratio.iter().enumerate() {
                let n = c.count(j);
                if n > 0 {
                    l += n as f64 * lr;
                }
            }
            l
        })
        .collect()
}

/// Loss-system law `γ_C ∝ (free slots)! Π_j ρ_j^|C^(j)|`.
pub fn gamma_distribution(instance: &Instance, space: &[ConfigKey]) -> StationaryDistribution {
    let lr: Vec<f64> = instance.loads().iter().map(|&r| libm::log(r)).collect();
    StationaryDistribution::from_logs(space.to_vec(), &log_product_form(instance, space, &lr))
}

/// `γ̂`: the same form with `ρ_j` replaced by `λ̂/μ_j`.
pub fn gamma_hat_distribution(instance: &Instance, clock_rate: f64, space: &[ConfigKey]) -> StationaryDistribution {
    let lr: Vec<f64> = instance.jobs.iter().map(|j| libm::log(clock_rate / j.service_rate)).collect();
    StationaryDistribution::from_logs(space.to_vec(), &log_product_form(instance, space, &lr))
}

/// `π*(C) ∝ γ(C) exp((1/β) Σ_{A∈C} w̃_A)`.
pub fn closed_form_pi<W>(gamma: &StationaryDistribution, weight: W, beta: f64) -> Result<StationaryDistribution>
where
    W: Fn(&Template) -> Result<f64>,
{
    let mut logs = Vec::with_capacity(gamma.states.len());
    for (c, &p) in gamma.states.iter().zip(&gamma.probs) {
        let mut s = 0.0;
        for t in c.templates() {
            s += weight(t)?;
        }
        logs.push(libm::log(p) + s / beta);
    }
    Ok(StationaryDistribution::from_logs(gamma.states.clone(), &logs))
}

/// Weight function of a fixed-weight policy; live weights have none.
pub fn fixed_weight_fn(policy: &Policy, slots: usize) -> Result<impl Fn(&Template) -> Result<f64> + '_> {
    if policy.weights == WeightMode::Live {
        return Err(Error::InvalidParams("exact analysis needs a fixed weight table".into()));
    }
    // fixed modes never read the live queues
    Ok(move |t: &Template| policy.template_weight(t, &[], slots))
}

/// `Σ_{A∈C} w̃_A` maximized over the space, with its maximizer.
pub fn max_weight<W>(space: &[ConfigKey], weight: W) -> Result<(f64, ConfigKey)>
where
    W: Fn(&Template) -> Result<f64>,
{
    let mut best: Option<(f64, &ConfigKey)> = None;
    for c in space {
        let mut s = 0.0;
        for t in c.templates() {
            s += weight(t)?;
        }
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, c));
        }
    }
    let (v, c) = best.ok_or_else(|| Error::InvalidParams("empty configuration space".into()))?;
    Ok((v, c.clone()))
}

/// Which fixed-weight chain to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainVariant {
    /// `C -> C⊕A` at `(λ_j/|A(C)|) σ(w/β)`, `C⊕A -> C` at `μ_j (1 - σ(w/β))`
    DgpBar,
    /// `C -> C⊕A` at `λ̂ e^(w/β) / |A(C)|`, `C⊕A -> C` at `μ_j`
    AdgpBar { clock_rate: f64 },
}

/// Rate matrix over an enumerated space; rows sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub states: Vec<ConfigKey>,
    pub rates: DMatrix<f64>,
}

/// Builds the generator of the configuration process under fixed weights.
pub fn build_fixed_weight_generator<W>(
    instance: &Instance,
    space: &[ConfigKey],
    weight: W,
    beta: f64,
    variant: ChainVariant,
) -> Result<Generator>
where
    W: Fn(&Template) -> Result<f64>,
{
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParams(format!("beta must be finite and positive, got {beta}")));
    }
    let n = space.len();
    let index: BTreeMap<&ConfigKey, usize> = space.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut q = DMatrix::<f64>::zeros(n, n);
    let m = instance.total_slots();
    for (i, c) in space.iter().enumerate() {
        let free = m - c.used_slots();
        for (j, ty) in instance.jobs.iter().enumerate() {
            let size = falling_factorial(free, ty.nodes) as f64;
            for t in enumerate_feasible_templates(c, instance, j) {
                let w = weight(&t)?;
                let rate = match variant {
                    ChainVariant::DgpBar => ty.arrival_rate / size * accept_probability(w, beta),
                    ChainVariant::AdgpBar { clock_rate } => clock_rate * libm::exp(w / beta) / size,
                };
                let k = *index
                    .get(&c.with(t))
                    .ok_or_else(|| Error::InvalidParams("configuration space is not closed under additions".into()))?;
                q[(i, k)] += rate;
            }
        }
        for t in c.templates() {
            let ty = &instance.jobs[t.job()];
            let rate = match variant {
                ChainVariant::DgpBar => ty.service_rate * accept_probability(-weight(t)?, beta),
                ChainVariant::AdgpBar { .. } => ty.service_rate,
            };
            let k = *index
                .get(&c.without(t))
                .ok_or_else(|| Error::InvalidParams("configuration space is not closed under removals".into()))?;
            q[(i, k)] += rate;
        }
        let out: f64 = (0..n).filter(|&k| k != i).map(|k| q[(i, k)]).sum();
        q[(i, i)] = -out;
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite transition rate".into()));
    }
    Ok(Generator { states: space.to_vec(), rates: q })
}

fn reachable(q: &DMatrix<f64>, forward: bool) -> Vec<bool> {
    let n = q.nrows();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for k in 0..n {
            let r = if forward { q[(i, k)] } else { q[(k, i)] };
            if k != i && r > 0.0 && !seen[k] {
                seen[k] = true;
                queue.push_back(k);
            }
        }
    }
    seen
}

/// Solves `πQ = 0`, `Σπ = 1` by LU with one step of iterative refinement.
pub fn solve_stationary(generator: &Generator) -> Result<StationaryDistribution> {
    let q = &generator.rates;
    let n = q.nrows();
    if n == 0 {
        return Err(Error::Singular);
    }
    for dir in [true, false] {
        if let Some(i) = reachable(q, dir).iter().position(|&s| !s) {
            return Err(Error::Reducible(i));
        }
    }
    let mut a = q.transpose();
    for k in 0..n {
        a[(n - 1, k)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(Error::Singular)?;
    let r = &rhs - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let mut probs: Vec<f64> = x.iter().map(|&v| if v < 0.0 && v > -1e-14 { 0.0 } else { v }).collect();
    if probs.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Numerical("negative stationary mass".into()));
    }
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    let pi = DVector::from_vec(probs.clone());
    let residual = (q.transpose() * pi).amax();
    Ok(StationaryDistribution { states: generator.states.clone(), probs, residual })
}

/// Largest relative violation of `π_i q_ik = π_k q_ki` over all pairs with a
/// positive rate.
pub fn detailed_balance_error(generator: &Generator, pi: &StationaryDistribution) -> f64 {
    let q = &generator.rates;
    let n = q.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in (i + 1)..n {
            let a = pi.probs[i] * q[(i, k)];
            let b = pi.probs[k] * q[(k, i)];
            let scale = a.abs().max(b.abs());
            if scale > 0.0 {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    worst
}

/// Largest relative violation of the ratio identity
/// `π(C⊕A)/π(C) = (r_j/|A(C)|) e^(w_A/β)` over every adjacent pair, where
/// `r_j` is `ρ_j` (loss-system reference) or `λ̂/μ_j`.
pub fn ratio_identity_error<W>(
    instance: &Instance,
    pi: &StationaryDistribution,
    weight: W,
    beta: f64,
    ratios: &[f64],
) -> Result<f64>
where
    W: Fn(&Template) -> Result<f64>,
{
    let index: BTreeMap<&ConfigKey, usize> = pi.states.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut worst = 0.0f64;
    for (i, c) in pi.states.iter().enumerate() {
        let free = instance.total_slots() - c.used_slots();
        for (j, ty) in instance.jobs.iter().enumerate() {
            let size = falling_factorial(free, ty.nodes) as f64;
            for t in enumerate_feasible_templates(c, instance, j) {
                let w = weight(&t)?;
                let Some(&k) = index.get(&c.with(t)) else { continue };
                let lhs = pi.probs[k] / pi.probs[i];
                let rhs = ratios[j] / size * libm::exp(w / beta);
                worst = worst.max((lhs - rhs).abs() / rhs.abs().max(lhs.abs()));
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergences {
    pub tv: f64,
    pub kl: f64,
}

/// `(1/2) Σ |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch(format!("{} vs {} states", p.len(), q.len())));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `Σ p log(p/q)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch(format!("{} vs {} states", p.len(), q.len())));
    }
    let mut d = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::SupportMismatch(format!("q vanishes at state {i} where p = {a}")));
            }
            d += a * libm::log(a / b);
        }
    }
    Ok(d)
}

pub fn divergences(p: &[f64], q: &[f64]) -> Result<Divergences> {
    Ok(Divergences { tv: total_variation(p, q)?, kl: kl_divergence(p, q)? })
}

/// Optimum of the static partitioning problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticOptimum {
    /// `G(x*)`
    pub value: f64,
    /// optimal time-sharing over configurations
    pub pi: Vec<f64>,
    /// `x_A = Σ_{C∋A} π(C)` for templates with positive share
    pub x: Vec<(Template, f64)>,
}

/// `min Σ π(C) cost(C)` s.t. `Σ π(C)|C^(j)| >= ρ_j`, `Σ π = 1`, `π >= 0`.
pub fn static_optimum(instance: &Instance, space: &[ConfigKey], rho: &[f64]) -> Result<StaticOptimum> {
    let jobs = instance.jobs.len();
    if rho.len() != jobs || rho.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::InvalidParams(format!("load vector {rho:?} for {jobs} job types")));
    }
    let n = space.len();
    let mut a = Vec::with_capacity(jobs + 1);
    for j in 0..jobs {
        let mut row: Vec<f64> = space.iter().map(|c| c.count(j) as f64).collect();
        row.extend((0..jobs).map(|k| if k == j { -1.0 } else { 0.0 }));
        a.push(row);
    }
    let mut norm = vec![1.0; n];
    norm.extend(vec![0.0; jobs]);
    a.push(norm);
    let mut b = rho.to_vec();
    b.push(1.0);
    let mut c: Vec<f64> = space.iter().map(ConfigKey::cost).collect();
    c.extend(vec![0.0; jobs]);
    match minimize(&a, &b, &c) {
        LpOutcome::Infeasible => Err(Error::InfeasibleLoad),
        LpOutcome::Unbounded => Err(Error::Numerical("static LP unbounded".into())),
        LpOutcome::Optimal { x, value } => {
            let pi = x[..n].to_vec();
            let mut share: BTreeMap<Template, f64> = BTreeMap::new();
            for (cfg, &p) in space.iter().zip(&pi) {
                if p > 0.0 {
                    for t in cfg.templates() {
                        *share.entry(t.clone()).or_insert(0.0) += p;
                    }
                }
            }
            Ok(StaticOptimum { value, pi, x: share.into_iter().collect() })
        }
    }
}

/// Largest `δ` with `ρ(1 + δ)` inside the capacity region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityMargin {
    /// zero load: any scaling stays inside
    Unconstrained,
    /// `δ*`; negative when `ρ` lies outside the region
    Margin(f64),
}

impl CapacityMargin {
    pub fn value(self) -> f64 {
        match self {
            CapacityMargin::Unconstrained => f64::INFINITY,
            CapacityMargin::Margin(d) => d,
        }
    }
}

/// Solves `max s` s.t. `Σ π(C)|C^(j)| >= s ρ_j`, `Σ π = 1` and returns
/// `δ* = s - 1`.
pub fn capacity_margin(instance: &Instance, space: &[ConfigKey], rho: &[f64]) -> Result<CapacityMargin> {
    let jobs = instance.jobs.len();
    if rho.len() != jobs || rho.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::InvalidParams(format!("load vector {rho:?} for {jobs} job types")));
    }
    if rho.iter().all(|&r| r == 0.0) {
        return Ok(CapacityMargin::Unconstrained);
    }
    let n = space.len();
    // columns: π (n), s, surplus (jobs)
    let mut a = Vec::with_capacity(jobs + 1);
    for j in 0..jobs {
        let mut row: Vec<f64> = space.iter().map(|c| c.count(j) as f64).collect();
        row.push(-rho[j]);
        row.extend((0..jobs).map(|k| if k == j { -1.0 } else { 0.0 }));
        a.push(row);
    }
    let mut norm = vec![1.0; n];
    norm.extend(vec![0.0; jobs + 1]);
    a.push(norm);
    let mut b = vec![0.0; jobs];
    b.push(1.0);
    let mut c = vec![0.0; n + 1 + jobs];
    c[n] = -1.0;
    match minimize(&a, &b, &c) {
        LpOutcome::Optimal { x, .. } => Ok(CapacityMargin::Margin(x[n] - 1.0)),
        LpOutcome::Unbounded => Ok(CapacityMargin::Unconstrained),
        LpOutcome::Infeasible => Err(Error::Numerical("capacity LP infeasible".into())),
    }
}

/// Largest template cost over every job type.
pub fn max_template_cost(instance: &Instance) -> f64 {
    let empty = ConfigKey::empty();
    (0..instance.jobs.len())
        .flat_map(|j| enumerate_feasible_templates(&empty, instance, j))
        .map(|t| t.cost())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests;
