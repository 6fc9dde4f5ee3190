use super::*;
use crate::cluster::{enumerate_configurations, ClusterSpec, JobType};
use crate::kernel::SchedulerParams;
use crate::schedulers::{FixedWeights, PolicyKind};

const LN2: f64 = core::f64::consts::LN_2;

fn l1(lambda: f64) -> Instance {
    Instance::new(ClusterSpec::uniform(1, 2).unwrap(), vec![JobType::new(0, 1, vec![], lambda, 1.0).unwrap()]).unwrap()
}

fn p3(lambda: f64) -> Instance {
    Instance::new(ClusterSpec::uniform(2, 2).unwrap(), vec![JobType::path(0, 3, lambda, 1.0).unwrap()]).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
    }
}

fn constant(w: f64) -> impl Fn(&Template) -> Result<f64> {
    move |_| Ok(w)
}

#[test]
fn gamma_on_l1() {
    let inst = l1(1.0);
    let space = enumerate_configurations(&inst, 100).unwrap();
    let g = gamma_distribution(&inst, &space);
    close(&g.probs, &[0.4, 0.2, 0.2, 0.2], 1e-15);
    assert!(g.residual < 1e-15);
    let g2 = gamma_distribution(&l1(2.0), &space);
    assert!((g2.probs[0] - 0.2).abs() < 1e-15);
    close(&g2.probs, &[0.2, 0.2, 0.2, 0.4], 1e-15);
    let tiny = gamma_distribution(&l1(1e-9), &space);
    assert!(tiny.probs[0] > 1.0 - 1e-8);
}

#[test]
fn gamma_hat_cases() {
    let inst = l1(1.0);
    let space = enumerate_configurations(&inst, 100).unwrap();
    close(&gamma_hat_distribution(&inst, 1.0, &space).probs, &[0.4, 0.2, 0.2, 0.2], 1e-15);
    close(&gamma_hat_distribution(&inst, 1.0, &space).probs, &gamma_distribution(&inst, &space).probs, 0.0);
    assert!(gamma_hat_distribution(&inst, 1e-12, &space).probs[0] > 1.0 - 1e-11);
}

#[test]
fn closed_form_cases() {
    let inst = l1(1.0);
    let space = enumerate_configurations(&inst, 100).unwrap();
    let g = gamma_distribution(&inst, &space);
    close(&closed_form_pi(&g, constant(0.0), 1.0).unwrap().probs, &g.probs, 1e-15);
    let beta = 0.7;
    let pi = closed_form_pi(&g, constant(beta * LN2), beta).unwrap();
    close(&pi.probs, &[0.2, 0.2, 0.2, 0.4], 1e-14);
    // large β washes the weights out
    let mut last = f64::INFINITY;
    for beta in [0.5, 1.0, 2.0, 8.0, 64.0] {
        let tv = total_variation(&closed_form_pi(&g, constant(1.0), beta).unwrap().probs, &g.probs).unwrap();
        assert!(tv < last);
        last = tv;
    }
}

#[test]
fn generator_rates_on_l1() {
    let inst = l1(1.0);
    let space = enumerate_configurations(&inst, 100).unwrap();
    let q = build_fixed_weight_generator(&inst, &space, constant(0.0), 1.0, ChainVariant::DgpBar).unwrap();
    assert!((q.rates[(0, 1)] - 0.25).abs() < 1e-15);
    assert!((q.rates[(1, 0)] - 0.5).abs() < 1e-15);
    // full configuration: no add-rates
    assert_eq!(q.rates[(3, 0)], 0.0);
    for i in 0..4 {
        assert!(q.rates.row(i).sum().abs() < 1e-15);
    }
}

#[test]
fn two_state_birth_death() {
    let (a, b) = (0.3, 1.7);
    let g = Generator { states: vec![ConfigKey::empty(), ConfigKey::empty()], rates: DMatrix::from_row_slice(2, 2, &[-a, a, b, -b]) };
    let pi = solve_stationary(&g).unwrap();
    close(&pi.probs, &[b / (a + b), a / (a + b)], 1e-15);
}

#[test]
fn reducible_chain_is_rejected() {
    let g = Generator {
        states: vec![ConfigKey::empty(); 3],
        rates: DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0]),
    };
    assert_eq!(solve_stationary(&g), Err(Error::Reducible(2)));
}

#[test]
fn solver_matches_closed_form() {
    for inst in [l1(1.0), p3(1.0)] {
        let space = enumerate_configurations(&inst, 1000).unwrap();
        let g = gamma_distribution(&inst, &space);
        for beta in [1.0, 0.5] {
            let q = build_fixed_weight_generator(&inst, &space, constant(beta * LN2), beta, ChainVariant::DgpBar).unwrap();
            let solved = solve_stationary(&q).unwrap();
            let closed = closed_form_pi(&g, constant(beta * LN2), beta).unwrap();
            assert!(solved.residual < 1e-10);
            assert!(total_variation(&solved.probs, &closed.probs).unwrap() < 1e-10);
            assert!(detailed_balance_error(&q, &closed) < 1e-12);
            let err = ratio_identity_error(&inst, &closed, constant(beta * LN2), beta, &inst.loads()).unwrap();
            assert!(err < 1e-12);
        }
    }
}

#[test]
fn adgp_bar_matches_gamma_hat() {
    let inst = l1(1.0);
    let space = enumerate_configurations(&inst, 100).unwrap();
    let w = |t: &Template| Ok(0.3 - t.cost() - 0.1 * t.slots()[0].0 as f64);
    let q = build_fixed_weight_generator(&inst, &space, w, 0.5, ChainVariant::AdgpBar { clock_rate: 1.0 }).unwrap();
    let solved = solve_stationary(&q).unwrap();
    let closed = closed_form_pi(&gamma_hat_distribution(&inst, 1.0, &space), w, 0.5).unwrap();
    assert!(total_variation(&solved.probs, &closed.probs).unwrap() < 1e-10);
}

#[test]
fn fixed_weight_fn_requires_fixed_mode() {
    let live = Policy::live(PolicyKind::Dgp, SchedulerParams::default());
    assert!(fixed_weight_fn(&live, 2).is_err());
    let fixed = Policy::fixed(PolicyKind::Dgp, SchedulerParams::default(), FixedWeights::PerJob(vec![0.25]));
    let f = fixed_weight_fn(&fixed, 2).unwrap();
    let inst = l1(1.0);
    let t = Template::new(0, vec![crate::cluster::Slot(0)], &inst).unwrap();
    assert_eq!(f(&t).unwrap(), 0.25);
}

#[test]
fn divergence_cases() {
    assert_eq!(divergences(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), Divergences { tv: 0.0, kl: 0.0 });
    let d = divergences(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
    assert_eq!(d.tv, 0.5);
    assert!((d.kl - LN2).abs() < 1e-15);
    let (p, q) = ([0.1, 0.6, 0.3], [0.4, 0.4, 0.2]);
    assert_eq!(total_variation(&p, &q).unwrap(), total_variation(&q, &p).unwrap());
    assert!((kl_divergence(&p, &q).unwrap() - kl_divergence(&q, &p).unwrap()).abs() > 1e-3);
    assert!(matches!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::SupportMismatch(_))));
    assert!(matches!(total_variation(&[1.0], &[0.5, 0.5]), Err(Error::SupportMismatch(_))));
}

#[test]
fn static_optimum_cases() {
    let inst = p3(1.0);
    let space = enumerate_configurations(&inst, 1000).unwrap();
    let opt = static_optimum(&inst, &space, &[1.0]).unwrap();
    assert!((opt.value - 1.0).abs() < 1e-12);
    // positive costs: the load constraint is tight
    let x: f64 = opt.x.iter().map(|(_, v)| v).sum();
    assert!((x - 1.0).abs() < 1e-12);
    assert!(matches!(static_optimum(&inst, &space, &[1.5]), Err(Error::InfeasibleLoad)));

    let single = Instance::new(ClusterSpec::uniform(1, 4).unwrap(), vec![JobType::path(0, 2, 1.0, 1.0).unwrap()]).unwrap();
    let space = enumerate_configurations(&single, 1000).unwrap();
    assert_eq!(static_optimum(&single, &space, &[1.7]).unwrap().value, 0.0);
}

#[test]
fn capacity_margin_cases() {
    let inst = l1(1.0);
    let space = enumerate_configurations(&inst, 100).unwrap();
    let CapacityMargin::Margin(d) = capacity_margin(&inst, &space, &[1.0]).unwrap() else { panic!() };
    assert!((d - 1.0).abs() < 1e-9);
    assert_eq!(capacity_margin(&inst, &space, &[0.0]).unwrap(), CapacityMargin::Unconstrained);
    let CapacityMargin::Margin(d) = capacity_margin(&inst, &space, &[2.0]).unwrap() else { panic!() };
    assert!(d.abs() < 1e-9);
    let CapacityMargin::Margin(d) = capacity_margin(&inst, &space, &[3.0]).unwrap() else { panic!() };
    assert!(d < 0.0);
    let p = p3(1.0);
    let space = enumerate_configurations(&p, 1000).unwrap();
    let CapacityMargin::Margin(d) = capacity_margin(&p, &space, &[1.0]).unwrap() else { panic!() };
    assert!(d.abs() < 1e-9);
}

#[test]
fn bounds_on_l1() {
    let inst = l1(1.0);
    let params = SchedulerParams { alpha: 0.5, beta: 0.5, epsilon: 1.0, ..SchedulerParams::default() };
    let r = theorem_bounds(&inst, &params, Theorem::Dgp { c0: Some(1.0) }, 100).unwrap();
    assert_eq!(r.b_max, 0.0);
    assert!((r.delta_star - 1.0).abs() < 1e-9);
    assert!((r.gamma_min - 0.2).abs() < 1e-15);
    let expected = 0.5 * (r.k2_hat + r.k3_hat) - 0.5 * libm::log(0.2);
    assert!((r.cost_bound - expected).abs() < 1e-9);
    assert!(r.queue_bound.is_finite());
    assert!(!r.preconditions.delta_below_one);
    let f = theorem_bounds(&inst, &params, Theorem::FrameBased { b1: 1.0, b2: 2.0 }, 100).unwrap();
    assert!((f.cost_bound - 0.5 * 3.0).abs() < 1e-12);
    // ρ on the boundary: no positive margin
    assert_eq!(theorem_bounds(&l1(2.0), &params, Theorem::Dgp { c0: None }, 100), Err(Error::InfeasibleLoad));
}
