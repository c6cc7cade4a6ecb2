//! Benchmark without ratcheting: the best threshold or two-band dividend
//! strategy, where the rate may go down as well as up.

use alloc::vec::Vec;

use crate::ide::{IdeError, IdeSolver, ValueCurve};
use crate::search;

/// Partition of the surplus axis into no-dividend, pay-`p` and pay-`c̄` sets.
/// Intervals are closed; `None` marks an unbounded right end.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSpec {
    pub no_pay: Vec<(f64, Option<f64>)>,
    pub pay_premium: Vec<f64>,
    pub pay_ceiling: Vec<(f64, Option<f64>)>,
}

impl BandSpec {
    fn threshold(b: f64, c_bar_above_p: bool) -> Self {
        let no_pay = if b > 0.0 { alloc::vec![(0.0, Some(b))] } else { Vec::new() };
        BandSpec {
            no_pay,
            pay_premium: if c_bar_above_p { alloc::vec![b] } else { Vec::new() },
            pay_ceiling: alloc::vec![(b, None)],
        }
    }

    fn band(b1: f64, b2: f64) -> Self {
        BandSpec {
            no_pay: alloc::vec![(b1, Some(b2))],
            pay_premium: Vec::new(),
            pay_ceiling: alloc::vec![(0.0, Some(b1)), (b2, None)],
        }
    }

    /// Start of the right-unbounded pay-ceiling component.
    pub fn upper_threshold(&self) -> f64 {
        self.pay_ceiling.iter().find(|(_, b)| b.is_none()).map(|(a, _)| *a).unwrap_or(f64::INFINITY)
    }

    /// Right end of the pay-ceiling component at zero, if there is one.
    pub fn lower_band(&self) -> Option<f64> {
        self.pay_ceiling.iter().find(|(a, b)| *a == 0.0 && b.is_some()).and_then(|(_, b)| *b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSolution {
    pub threshold: f64,
    pub node: usize,
    pub curve: ValueCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSolution {
    pub spec: BandSpec,
    pub curve: ValueCurve,
}

/// Value of the threshold strategy switching at node `b`: nothing below, the
/// ceiling above (with the premium rate held exactly at `b` when `c̄ > p`).
pub fn threshold_value(solver: &IdeSolver, b: usize) -> Vec<f64> {
    let model = solver.model();
    let (p, c_bar) = (model.premium(), model.ceiling());
    let n = solver.grid().intervals();
    let b = b.min(n);
    if c_bar < p {
        return solver.solve_profile_below_p(&[0.0, c_bar], &|i| usize::from(i >= b));
    }
    let (q, beta) = (model.discount(), model.intensity());
    let [(u, ku), (w, kw)] = solver.basis_from_origin(0.0, b);
    let amp = (p + beta * ku[b] - (q + beta) * u[b]) / ((q + beta) * w[b] - beta * kw[b]);
    let prefix: Vec<f64> = u.iter().zip(&w).map(|(u, w)| u + amp * w).collect();
    if b == n {
        return prefix;
    }
    let tail = if c_bar > p {
        solver.march_from(c_bar, &prefix, b, Some(prefix[b]))
    } else {
        let mut t = solver.march_from(c_bar, &prefix, b + 1, None);
        t.insert(0, prefix[b]);
        t
    };
    let mut out = prefix;
    out.truncate(b);
    out.extend(tail);
    out
}

/// Value of paying the ceiling on `[0, b1) ∪ [b2, ∞)` and nothing in
/// between, for `c̄ < p`.
pub fn band_value(solver: &IdeSolver, b1: usize, b2: usize) -> Vec<f64> {
    let c_bar = solver.model().ceiling();
    solver.solve_profile_below_p(&[0.0, c_bar], &|i| usize::from(i < b1 || i >= b2))
}

fn total(values: &[f64]) -> f64 {
    values.iter().sum()
}

/// Best threshold, scored by the sum of the value curve over the grid.
pub fn optimize_threshold_nr(solver: &IdeSolver) -> Result<ThresholdSolution, IdeError> {
    solver.solve_top_level()?;
    let n = solver.grid().intervals();
    let stride = (n / 64).max(8);
    let (b, _) = search::bracketed_max(0, n - 1, stride, &mut |b| total(&threshold_value(solver, b)));
    let curve = ValueCurve::new(*solver.grid(), threshold_value(solver, b))?;
    Ok(ThresholdSolution { threshold: solver.grid().x(b), node: b, curve })
}

/// Best two-band strategy. For `c̄ ≥ p` the threshold solution is returned.
pub fn optimize_band_nr(solver: &IdeSolver) -> Result<BandSolution, IdeError> {
    let thr = optimize_threshold_nr(solver)?;
    let model = solver.model();
    let grid = *solver.grid();
    if model.ceiling() >= model.premium() {
        return Ok(BandSolution {
            spec: BandSpec::threshold(thr.threshold, model.ceiling() > model.premium()),
            curve: thr.curve,
        });
    }
    let n = grid.intervals();
    let window = (n / 8).max(16);
    let mut inner_best = alloc::collections::BTreeMap::new();
    let mut inner = |b1: usize, center: usize| -> (usize, f64) {
        if let Some(r) = inner_best.get(&b1) {
            return *r;
        }
        let lo = (b1 + 1).max(center.saturating_sub(window));
        let hi = (center + window).min(n).max(lo);
        let r = search::golden_section_max(lo, hi, &mut |b2| total(&band_value(solver, b1, b2)));
        inner_best.insert(b1, r);
        r
    };
    let hi1 = thr.node.max(1);
    let stride = (hi1 / 16).max(1);
    let mut b2_hint = thr.node;
    let (b1, _) = search::bracketed_max(0, hi1 - 1, stride, &mut |b1| {
        let (b2, s) = inner(b1, b2_hint.max(b1 + 1));
        b2_hint = b2;
        s
    });
    let (b2, score) = inner(b1, b2_hint.max(b1 + 1));
    let thr_score = total(thr.curve.values());
    if b1 == 0 || score <= thr_score {
        return Ok(BandSolution { spec: BandSpec::threshold(thr.threshold, false), curve: thr.curve });
    }
    let curve = ValueCurve::new(grid, band_value(solver, b1, b2))?;
    Ok(BandSolution { spec: BandSpec::band(grid.x(b1), grid.x(b2)), curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ide::XGrid;
    use crate::model::{validate_model, ClaimDistribution, ModelParams};

    fn solver(c_bar: f64) -> IdeSolver {
        let p = ModelParams { premium_rate: 2.3, claim_intensity: 4.0, discount_rate: 0.1, dividend_ceiling: c_bar };
        let m = validate_model(p, ClaimDistribution::exponential(2.0)).unwrap();
        IdeSolver::new(&m, XGrid::new(30.0, 0.01).unwrap())
    }

    #[test]
    fn zero_threshold_is_the_constant_strategy() {
        let s = solver(1.72);
        let top = s.solve_top_level().unwrap();
        let thr = threshold_value(&s, 0);
        let err = thr.iter().zip(top.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn threshold_above_premium_holds_p_at_the_threshold() {
        let s = solver(4.6);
        let v = threshold_value(&s, 150);
        // Midpoint quadrature, which differs from the marched cell means at
        // second order in h.
        let k = s.convolution(&v);
        let expected = (2.3 + 4.0 * k[150]) / 4.1;
        assert!((v[150] - expected).abs() < 1e-5, "{}", v[150] - expected);
        let zero = threshold_value(&s, 0);
        assert!((zero[0] - 2.3 / 4.1).abs() < 1e-12);
    }

    #[test]
    fn band_with_empty_lower_part_is_the_threshold() {
        let s = solver(1.72);
        let a = threshold_value(&s, 157);
        let b = band_value(&s, 0, 157);
        assert_eq!(a, b);
    }
}
