use graphpack_core::cluster::SlotOccupancy;
use graphpack_core::exact::{
    build_fixed_weight_generator, closed_form_pi, detailed_balance_error, divergences, gamma_distribution,
    gamma_hat_distribution, max_weight, ratio_identity_error, solve_stationary, static_optimum, total_variation,
    ChainVariant,
};
use graphpack_core::kernel::{f_eval, f_group, random_partition};
use graphpack_core::schedulers::FixedWeights;
use graphpack_core::{
    enumerate_configurations, enumerate_feasible_templates, run_continuous, run_jump_chain, summarize_trace,
    ClusterSpec, Configuration, Edge, Instance, JobType, Policy, PolicyKind, RandomStreams, RunOptions,
    SchedulerParams, Substream, Tag, Template,
};
use proptest::prelude::*;
use std::collections::BTreeMap;

/// Small instances: up to 3 machines with up to 3 slots, up to 2 job types.
fn small_instance() -> impl Strategy<Value = Instance> {
    (prop::collection::vec(1u32..=3, 1..=3), 1usize..=2)
        .prop_flat_map(|(slots, types)| {
            let m: u32 = slots.iter().sum();
            let max_nodes = (m as usize).saturating_sub(1).clamp(1, 3);
            let jobs = prop::collection::vec((1..=max_nodes, 0.2f64..2.0, 0.5f64..2.0, any::<bool>()), types);
            (Just(slots), jobs)
        })
        .prop_filter_map("needs |V_j| < M", |(slots, jobs)| {
            let machines = slots.iter().enumerate().map(|(i, &s)| graphpack_core::Machine { id: i as u32, slots: s }).collect();
            let cluster = ClusterSpec::new(machines).ok()?;
            let jobs = jobs
                .into_iter()
                .enumerate()
                .map(|(i, (n, l, mu, path))| {
                    let edges = if path && n > 1 { (0..n - 1).map(|v| Edge { u: v, v: v + 1, weight: 1.0 + v as f64 }).collect() } else { vec![] };
                    JobType::new(i as u32, n, edges, l, mu).unwrap()
                })
                .collect();
            Instance::new(cluster, jobs).ok()
        })
}

fn table(instance: &Instance, seed: u64) -> BTreeMap<Template, f64> {
    let mut streams = RandomStreams::new(seed);
    let empty = Configuration::empty(&instance.cluster);
    let mut t = BTreeMap::new();
    for j in 0..instance.jobs.len() {
        for a in enumerate_feasible_templates(&empty, instance, j) {
            t.insert(a, 2.0 * streams.uniform(Substream::Selection) - 1.0);
        }
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn configurations_stay_slot_disjoint(inst in small_instance(), seed in any::<u64>(), ops in prop::collection::vec(any::<(bool, u8)>(), 1..60)) {
        let mut streams = RandomStreams::new(seed);
        let mut c = Configuration::empty(&inst.cluster);
        for (add, j) in ops {
            let j = j as usize % inst.jobs.len();
            if add {
                if let Some(t) = random_partition(&c, &inst, j, streams.get(Substream::Placement)) {
                    c.add_template(t, Tag::Virtual).unwrap();
                }
            } else {
                let first = c.iter().next().map(|(id, _)| id);
                if let Some(id) = first {
                    c.remove_template(id).unwrap();
                }
            }
            prop_assert!(c.check().is_ok());
            let used: usize = c.iter().map(|(_, r)| r.template.slots().len()).sum();
            prop_assert_eq!(used + c.free_count(), inst.total_slots());
            prop_assert_eq!(c.free_slots(&inst.cluster).len(), c.free_count());
        }
        let key = c.key();
        prop_assert_eq!(key.len(), c.len());
        prop_assert!((key.cost() - c.total_cost()).abs() < 1e-9);
    }

    #[test]
    fn feasible_templates_match_falling_factorial(inst in small_instance()) {
        let empty = Configuration::empty(&inst.cluster);
        for (j, ty) in inst.jobs.iter().enumerate() {
            let all = enumerate_feasible_templates(&empty, &inst, j);
            prop_assert_eq!(all.len() as u128, graphpack_core::cluster::falling_factorial(inst.total_slots(), ty.nodes));
            for t in &all {
                prop_assert!(t.cost() >= 0.0);
            }
        }
    }

    #[test]
    fn handlers_preserve_invariants(inst in small_instance(), seed in any::<u64>(), kind in 0usize..5, beta in 0.2f64..2.0) {
        let kind = [PolicyKind::Dgp, PolicyKind::Adgp, PolicyKind::FrameBased, PolicyKind::RoundRobin, PolicyKind::Loss][kind];
        let policy = Policy::live(kind, SchedulerParams { frame_length: 1.5, ..SchedulerParams::with_beta(beta) });
        let opts = RunOptions { seed, record_trace: true, check_invariants: true, max_states: 20_000, ..RunOptions::default() };
        let out = match run_continuous(&inst, &policy, 30.0, &opts) {
            Err(graphpack_core::Error::StateSpaceTooLarge { .. }) => return Ok(()),
            other => other.unwrap(),
        };
        let trace = out.trace.as_ref().unwrap();
        prop_assert_eq!(&summarize_trace(trace).unwrap(), &out.report);
        if kind != PolicyKind::FrameBased {
            prop_assert_eq!(out.report.interruptions, 0);
        }
        for a in [&out.report.full, &out.report.steady] {
            prop_assert!(a.queue.iter().all(|&q| q >= 0.0));
            prop_assert!(a.cost >= 0.0);
            prop_assert!(a.actual_templates <= a.templates + 1e-12);
        }
        for r in &trace.records {
            for j in 0..inst.jobs.len() {
                prop_assert!(r.queues[j] as u64 <= out.report.arrivals[j]);
            }
        }
    }

    #[test]
    fn runs_are_bit_reproducible(inst in small_instance(), seed in any::<u64>()) {
        let policy = Policy::live(PolicyKind::Dgp, SchedulerParams::with_beta(0.5));
        let opts = RunOptions { seed, record_trace: true, ..RunOptions::default() };
        prop_assert_eq!(run_continuous(&inst, &policy, 20.0, &opts).unwrap(), run_continuous(&inst, &policy, 20.0, &opts).unwrap());
        prop_assert_eq!(run_jump_chain(&inst, &policy, 2000, &opts).unwrap(), run_jump_chain(&inst, &policy, 2000, &opts).unwrap());
    }

    #[test]
    fn fixed_weight_chains_are_reversible(inst in small_instance(), seed in any::<u64>(), beta in 0.3f64..2.0) {
        let Ok(space) = enumerate_configurations(&inst, 400) else { return Ok(()) };
        let weights = table(&inst, seed);
        let w = |t: &Template| Ok(weights[t]);
        let gamma = gamma_distribution(&inst, &space);
        let closed = closed_form_pi(&gamma, w, beta).unwrap();
        prop_assert!((closed.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = build_fixed_weight_generator(&inst, &space, w, beta, ChainVariant::DgpBar).unwrap();
        prop_assert!(detailed_balance_error(&q, &closed) < 1e-10);
        prop_assert!(ratio_identity_error(&inst, &closed, w, beta, &inst.loads()).unwrap() < 1e-12);
        let solved = solve_stationary(&q).unwrap();
        prop_assert!(total_variation(&solved.probs, &closed.probs).unwrap() < 1e-10);

        let hat = closed_form_pi(&gamma_hat_distribution(&inst, 1.3, &space), w, beta).unwrap();
        let qa = build_fixed_weight_generator(&inst, &space, w, beta, ChainVariant::AdgpBar { clock_rate: 1.3 }).unwrap();
        prop_assert!(total_variation(&solve_stationary(&qa).unwrap().probs, &hat.probs).unwrap() < 1e-10);
    }

    #[test]
    fn gibbs_expectation_inequality(inst in small_instance(), seed in any::<u64>()) {
        let Ok(space) = enumerate_configurations(&inst, 400) else { return Ok(()) };
        let weights = table(&inst, seed);
        let w = |t: &Template| Ok(weights[t]);
        let gamma = gamma_distribution(&inst, &space);
        let (best, _) = max_weight(&space, w).unwrap();
        let log_gmin = gamma.min_prob().ln();
        let mut last_gap = f64::INFINITY;
        for beta in [1.0, 0.5, 0.25] {
            let pi = closed_form_pi(&gamma, w, beta).unwrap();
            let e = pi.expectation(|c| c.templates().iter().map(|t| weights[t]).sum());
            prop_assert!(e >= best + beta * log_gmin - 1e-9);
            let gap = best - e;
            prop_assert!(gap <= last_gap + 1e-12);
            last_gap = gap;
        }
    }

    #[test]
    fn static_optimum_is_feasible_and_minimal(inst in small_instance(), scale in 0.05f64..0.9) {
        let Ok(space) = enumerate_configurations(&inst, 400) else { return Ok(()) };
        let jobs = inst.jobs.len();
        // loads well inside the region: a fraction of what one type alone can fit
        let rho: Vec<f64> = (0..jobs)
            .map(|j| scale / jobs as f64 * space.iter().map(|c| c.count(j)).max().unwrap() as f64)
            .collect();
        let opt = static_optimum(&inst, &space, &rho).unwrap();
        prop_assert!((opt.pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for j in 0..jobs {
            let served: f64 = space.iter().zip(&opt.pi).map(|(c, p)| p * c.count(j) as f64).sum();
            prop_assert!(served >= rho[j] - 1e-9);
        }
        let x_total: f64 = opt.x.iter().map(|(t, v)| v * t.cost()).sum();
        prop_assert!((x_total - opt.value).abs() < 1e-9);
        // never worse than the cheapest configuration mix that ignores nothing
        prop_assert!(opt.value >= -1e-12);
    }

    #[test]
    fn divergence_properties(p in prop::collection::vec(0.01f64..1.0, 2..8), q in prop::collection::vec(0.01f64..1.0, 8)) {
        let n = p.len();
        let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<_>>() };
        let (p, q) = (norm(&p), norm(&q[..n]));
        let d = divergences(&p, &q).unwrap();
        prop_assert!(d.tv >= 0.0 && d.tv <= 1.0);
        prop_assert!(d.kl >= -1e-15);
        prop_assert_eq!(d.tv, total_variation(&q, &p).unwrap());
        // Pinsker
        prop_assert!(d.tv <= (d.kl / 2.0).sqrt() + 1e-12);
    }

    #[test]
    fn group_weight_floor(x in prop::collection::vec(1.0f64..1e6, 1..5), b in 0.05f64..0.95, eps in 0.01f64..0.99, m in 2usize..50) {
        let xmax = x.iter().copied().fold(1.0, f64::max);
        for j in 0..x.len() {
            let v = f_group(j, &x, b, eps, m).unwrap();
            prop_assert!(v >= f_eval(x[j], b).unwrap());
            prop_assert!(v >= eps / (8.0 * m as f64) * f_eval(xmax, b).unwrap() - 1e-15);
        }
    }

    #[test]
    fn fixed_per_job_weights_validate(inst in small_instance(), w in -3.0f64..3.0) {
        let per = FixedWeights::PerJob(vec![w; inst.jobs.len()]);
        prop_assert!(Policy::fixed(PolicyKind::Dgp, SchedulerParams::default(), per).validate(&inst).is_ok());
    }
}
