use proptest::prelude::*;
use ratchet_core::model::validate_model;
use ratchet_core::ratchet::{backward_recursion, build_rate_grid};
use ratchet_core::unconstrained::optimize_threshold_nr;
use ratchet_core::{ClaimDistribution, IdeSolver, ModelParams, ValidatedModel, XGrid};

fn model(c_bar: f64, claims: ClaimDistribution) -> ValidatedModel {
    let p = ModelParams { premium_rate: 2.3, claim_intensity: 4.0, discount_rate: 0.1, dividend_ceiling: c_bar };
    validate_model(p, claims).unwrap()
}

fn check_surface(m: &ValidatedModel, x_max: f64, h: f64, n: u32) {
    let solver = IdeSolver::new(m, XGrid::new(x_max, h).unwrap());
    let rec = backward_recursion(&solver, &build_rate_grid(n, m)).unwrap();
    let bound = m.value_bound();
    let slack = 1e-9 * bound;
    let curves = &rec.surface.curves;
    for (k, curve) in curves.iter().enumerate() {
        let v = curve.values();
        assert!(v.iter().all(|&x| x >= -slack && x <= bound + slack), "bounds at level {k}");
        assert!(curve.max_decrease() <= slack, "level {k} decreases by {}", curve.max_decrease());
        if k + 1 < curves.len() {
            let above = curves[k + 1].values();
            let worst = v.iter().zip(above).map(|(a, b)| b - a).fold(f64::MIN, f64::max);
            assert!(worst <= slack, "rate monotonicity broken between {k} and {}: {worst}", k + 1);
        }
    }
    let p = m.premium();
    for (k, &c) in rec.strategy.rates.rates().iter().enumerate() {
        let v0 = curves[k].values()[0];
        if c > p {
            assert!(v0.abs() <= slack, "V(0,{c}) = {v0}");
        } else if c == p {
            let expected = p / (m.discount() + m.intensity());
            assert!((v0 - expected).abs() <= 1e-9, "V(0,p) = {v0}, expected {expected}");
        }
    }
}

#[test]
fn ratchet_surface_below_premium() {
    check_surface(&model(1.72, ClaimDistribution::exponential(2.0)), 120.0, 0.01, 3);
}

#[test]
fn ratchet_surface_above_premium() {
    check_surface(&model(4.6, ClaimDistribution::exponential(2.0)), 300.0, 0.01, 3);
}

#[test]
fn ratchet_surface_with_erlang_claims() {
    let p = ModelParams { premium_rate: 4.5, claim_intensity: 2.0, discount_rate: 0.1, dividend_ceiling: 2.0 };
    check_surface(&validate_model(p, ClaimDistribution::Erlang2).unwrap(), 150.0, 0.01, 2);
}

#[test]
fn refinement_is_sandwiched_between_one_switch_and_unconstrained() {
    let m = model(1.72, ClaimDistribution::exponential(2.0));
    let solver = IdeSolver::new(&m, XGrid::new(120.0, 0.01).unwrap());
    let slack = 1e-8 * m.value_bound();
    let one = backward_recursion(&solver, &build_rate_grid(0, &m)).unwrap();
    let fine = backward_recursion(&solver, &build_rate_grid(3, &m)).unwrap();
    let nr = optimize_threshold_nr(&solver).unwrap();
    let (a, b, c) = (one.surface.curve(0).values(), fine.surface.curve(0).values(), nr.curve.values());
    for i in 0..a.len() {
        assert!(a[i] <= b[i] + slack && b[i] <= c[i] + slack, "node {i}: {} {} {}", a[i], b[i], c[i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn top_slice_is_bounded_and_increasing(c_bar in 0.3f64..4.0, lambda in 1.9f64..4.0) {
        let m = model(c_bar, ClaimDistribution::exponential(lambda));
        let solver = IdeSolver::new(&m, XGrid::new(400.0, 0.02).unwrap());
        let top = solver.solve_top_level().unwrap();
        let bound = m.value_bound();
        prop_assert!(top.values().iter().all(|&v| v >= -1e-9 && v <= bound * (1.0 + 1e-9)));
        prop_assert!(top.max_decrease() <= 1e-9 * bound);
    }

    #[test]
    fn one_switch_level_dominates_its_obstacle(c_bar in 0.5f64..2.2) {
        let m = model(c_bar, ClaimDistribution::exponential(2.0));
        let solver = IdeSolver::new(&m, XGrid::new(400.0, 0.02).unwrap());
        let rec = backward_recursion(&solver, &build_rate_grid(0, &m)).unwrap();
        let (low, top) = (rec.surface.curve(0).values(), rec.surface.curve(1).values());
        let worst = low.iter().zip(top).map(|(a, b)| b - a).fold(f64::MIN, f64::max);
        prop_assert!(worst <= 1e-8 * m.value_bound(), "{}", worst);
    }
}
