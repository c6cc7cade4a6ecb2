//! The top slice against the closed form available for exponential claims.
//!
//! With `F(y) = 1 - e^{-λy}`, trying `v(x) = A + Σ B_i e^{r_i x}` in
//! `(p-c) v' - (q+β) v + β ∫_0^x v(x-y) dF(y) + c = 0` leaves three kinds of
//! terms:
//!
//! * constants: `A = c/q`;
//! * `e^{r x}`: `(p-c) r - (q+β) + βλ/(λ+r) = 0`, a quadratic in `r`;
//! * `e^{-λx}`: `A + Σ B_i λ/(λ+r_i) = 0`.
//!
//! For `c < p` boundedness keeps only the negative root. For `c > p` both
//! roots are negative and `v(0) = 0` is the second condition.

use ratchet_core::{ClaimDistribution, IdeSolver, ModelParams, ValidatedModel, XGrid};

fn model(c_bar: f64) -> ValidatedModel {
    let p = ModelParams { premium_rate: 2.3, claim_intensity: 4.0, discount_rate: 0.1, dividend_ceiling: c_bar };
    ratchet_core::model::validate_model(p, ClaimDistribution::exponential(2.0)).unwrap()
}

/// Roots of `(p-c) r² + ((p-c)λ - q - β) r - qλ = 0`, ascending.
fn roots(p: f64, beta: f64, q: f64, lambda: f64, c: f64) -> (f64, f64) {
    let a = p - c;
    let b = a * lambda - q - beta;
    let cc = -q * lambda;
    let disc = (b * b - 4.0 * a * cc).sqrt();
    // Stable pair: one root from the quadratic formula, the other from Vieta.
    let r1 = if b >= 0.0 { (-b - disc) / (2.0 * a) } else { (-b + disc) / (2.0 * a) };
    let r2 = cc / (a * r1);
    (r1.min(r2), r1.max(r2))
}

fn closed_form(p: f64, beta: f64, q: f64, lambda: f64, c: f64) -> impl Fn(f64) -> f64 {
    let a = c / q;
    let (r1, r2) = roots(p, beta, q, lambda, c);
    let (b1, b2) = if c < p {
        let neg = if r1 < 0.0 { r1 } else { r2 };
        (-a * (lambda + neg) / lambda, 0.0)
    } else {
        // A + B1 + B2 = 0 and B1 λ/(λ+r1) + B2 λ/(λ+r2) = -A.
        let (k1, k2) = (lambda / (lambda + r1), lambda / (lambda + r2));
        let b2 = (-a + a * k1) / (k2 - k1);
        (-a - b2, b2)
    };
    let neg = if r1 < 0.0 { r1 } else { r2 };
    move |x: f64| {
        if c < p {
            a + b1 * (neg * x).exp()
        } else {
            a + b1 * (r1 * x).exp() + b2 * (r2 * x).exp()
        }
    }
}

fn sup_error(c_bar: f64, x_max: f64, h: f64) -> f64 {
    let m = model(c_bar);
    let solver = IdeSolver::new(&m, XGrid::new(x_max, h).unwrap());
    let top = solver.solve_top_level().unwrap();
    let exact = closed_form(2.3, 4.0, 0.1, 2.0, c_bar);
    let grid = *top.grid();
    top.values().iter().enumerate().map(|(i, v)| (v - exact(grid.x(i))).abs()).fold(0.0, f64::max)
}

#[test]
fn characteristic_roots_of_the_first_example() {
    let (r_neg, r_pos) = roots(2.3, 4.0, 0.1, 2.0, 1.72);
    assert!((r_neg + 0.06714).abs() < 1e-5, "{r_neg}");
    assert!((r_pos - 5.13610).abs() < 1e-5, "{r_pos}");
}

#[test]
fn closed_form_solves_the_equation() {
    // Independent check of the oracle itself by direct quadrature.
    let v = closed_form(2.3, 4.0, 0.1, 2.0, 1.72);
    let (p, beta, q, lambda, c) = (2.3, 4.0, 0.1, 2.0, 1.72);
    for &x in &[0.0, 0.5, 3.0, 10.0] {
        let n = 20_000;
        let dy = x / n as f64;
        let conv: f64 = (0..n)
            .map(|k| {
                let y = (k as f64 + 0.5) * dy;
                v(x - y) * lambda * (-lambda * y).exp() * dy
            })
            .sum();
        let dv = (v(x + 1e-5) - v((x - 1e-5).max(0.0))) / (x.min(1e-5) + 1e-5);
        let residual = (p - c) * dv - (q + beta) * v(x) + beta * conv + c;
        assert!(residual.abs() < 1e-5, "x={x} residual={residual}");
    }
}

#[test]
fn top_slice_matches_closed_form_below_premium() {
    let err = sup_error(1.72, 250.0, 0.001);
    assert!(err < 1e-5, "sup error {err:e}");
}

#[test]
fn top_slice_matches_closed_form_above_premium() {
    let err = sup_error(4.6, 600.0, 0.001);
    assert!(err < 1e-5, "sup error {err:e}");
}

#[test]
fn halving_the_step_cuts_the_error_by_at_least_three_and_a_half() {
    let coarse = sup_error(1.72, 250.0, 0.04);
    let fine = sup_error(1.72, 250.0, 0.02);
    assert!(coarse / fine >= 3.5, "{coarse:e} -> {fine:e}");
}
