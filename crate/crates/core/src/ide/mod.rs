//! The integro-differential operator
//!
//! ```text
//! L_c(v)(x) = c + (p - c) v'(x) - (q + β) v(x) + β ∫_0^x v(x - α) dF(α)
//! ```
//!
//! on a uniform surplus grid, and solvers for `L_c(v) = 0` on the whole grid
//! or on a segment of it.

mod family;
mod kernel;
mod march;

use alloc::vec::Vec;
use core::fmt;

use crate::model::ValidatedModel;
use crate::profile;

pub(crate) use family::Family;
pub(crate) use march::{Coeffs, Context, Step};

use kernel::{ConvState, Kernel};

/// Tail mass of the claim law allowed beyond `x_max`.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Uniform grid `x_i = i h`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XGrid {
    h: f64,
    n: usize,
}

impl XGrid {
    /// Grid on `[0, x_max]` with step close to `h`, adjusted so that `x_max`
    /// is a node.
    pub fn new(x_max: f64, h: f64) -> Result<Self, IdeError> {
        if !(x_max > 0.0) || !(h > 0.0) || !x_max.is_finite() || !h.is_finite() {
            return Err(IdeError::InvalidGrid { x_max, h });
        }
        let n = libm::round(x_max / h) as usize;
        if n < 2 {
            return Err(IdeError::InvalidGrid { x_max, h });
        }
        Ok(XGrid { h: x_max / n as f64, n })
    }

    pub fn with_intervals(h: f64, n: usize) -> Result<Self, IdeError> {
        if !(h > 0.0) || !h.is_finite() || n < 2 {
            return Err(IdeError::InvalidGrid { x_max: h * n as f64, h });
        }
        Ok(XGrid { h, n })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Number of intervals; there are `intervals() + 1` nodes.
    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n)
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Nearest node to `x`, clamped to the grid.
    pub fn node(&self, x: f64) -> usize {
        if x <= 0.0 {
            return 0;
        }
        (libm::round(x / self.h) as usize).min(self.n)
    }
}

/// A function of surplus sampled at every node of an [`XGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueCurve {
    grid: XGrid,
    values: Vec<f64>,
}

impl ValueCurve {
    pub fn new(grid: XGrid, values: Vec<f64>) -> Result<Self, IdeError> {
        if values.len() != grid.len() {
            return Err(IdeError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(IdeError::NonFinite { node: i });
        }
        Ok(ValueCurve { grid, values })
    }

    pub fn from_fn(grid: XGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        ValueCurve { grid, values }
    }

    pub fn grid(&self) -> &XGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolation, constant beyond `x_max`.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.values[0];
        }
        let pos = x / self.grid.h;
        let i = libm::floor(pos) as usize;
        if i >= self.grid.n {
            return self.values[self.grid.n];
        }
        let t = pos - i as f64;
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// Largest decrease between adjacent nodes (zero for a non-decreasing curve).
    pub fn max_decrease(&self) -> f64 {
        self.values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

/// Boundary data of a [`SegmentProblem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentBoundary {
    /// Value at the first node; required when `c > p`.
    Left(f64),
    /// Value at the last node; required when `c < p`.
    Right(f64),
    /// No boundary value; required when `c = p`.
    Free,
}

/// `L_c(v) = 0` on the nodes `start..=end`, with `context` giving the
/// composite solution on the nodes before `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentProblem {
    pub rate: f64,
    pub start: usize,
    pub end: usize,
    pub boundary: SegmentBoundary,
    pub context: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSolution {
    pub start: usize,
    pub values: Vec<f64>,
    /// Largest `|L_c(v)|` over the interior nodes of the segment.
    pub max_residual: f64,
}

impl SegmentSolution {
    /// Fails with [`IdeError::ResidualExceeded`] when the residual is above `tol`.
    pub fn check(&self, tol: f64) -> Result<(), IdeError> {
        if self.max_residual > tol {
            return Err(IdeError::ResidualExceeded { max: self.max_residual, tol });
        }
        Ok(())
    }
}

/// Diagnostics of the variational inequality between two adjacent rate slices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjbReport {
    /// Largest `L_c(V(·,c))`, with kinks handled in the viscosity sense.
    pub max_operator: f64,
    /// Largest `V(x,c⁺) - V(x,c)`; non-positive for a valid surface.
    pub max_rate_increment: f64,
    /// Largest `min(|L_c V|, |V(x,c) - V(x,c⁺)|)`.
    pub complementarity: f64,
    /// Nodes where the operator was not evaluated (concave kinks).
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdeError {
    InvalidGrid { x_max: f64, h: f64 },
    LengthMismatch { expected: usize, got: usize },
    NonFinite { node: usize },
    DomainExceeded { node: usize, len: usize },
    GridTooShort { x_max: f64, tail: f64 },
    SuperpositionIllConditioned { homogeneous_end: f64 },
    ContextIncomplete { needed: usize, got: usize },
    InvalidSegment { start: usize, end: usize, reason: &'static str },
    ResidualExceeded { max: f64, tol: f64 },
}

impl fmt::Display for IdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdeError::InvalidGrid { x_max, h } => write!(f, "invalid grid: x_max={x_max}, h={h}"),
            IdeError::LengthMismatch { expected, got } => {
                write!(f, "curve has {got} values but the grid has {expected} nodes")
            }
            IdeError::NonFinite { node } => write!(f, "non-finite value at node {node}"),
            IdeError::DomainExceeded { node, len } => write!(f, "node {node} outside a grid of {len} nodes"),
            IdeError::GridTooShort { x_max, tail } => {
                write!(f, "grid too short: claim tail mass {tail:e} beyond x_max={x_max}")
            }
            IdeError::SuperpositionIllConditioned { homogeneous_end } => {
                write!(f, "homogeneous solution too small at x_max ({homogeneous_end:e})")
            }
            IdeError::ContextIncomplete { needed, got } => {
                write!(f, "context covers {got} nodes but the segment needs {needed}")
            }
            IdeError::InvalidSegment { start, end, reason } => {
                write!(f, "invalid segment [{start}, {end}]: {reason}")
            }
            IdeError::ResidualExceeded { max, tol } => write!(f, "residual {max:e} exceeds tolerance {tol:e}"),
        }
    }
}

impl core::error::Error for IdeError {}

/// Operator evaluation and interval solvers for one model on one grid.
#[derive(Debug, Clone)]
pub struct IdeSolver {
    model: ValidatedModel,
    grid: XGrid,
    pub(crate) kernel: Kernel,
    pub(crate) co: Coeffs,
}

impl IdeSolver {
    pub fn new(model: &ValidatedModel, grid: XGrid) -> Self {
        let kernel = Kernel::new(model.distribution(), grid.h, grid.n);
        let co = Coeffs {
            p: model.premium(),
            q: model.discount(),
            beta: model.intensity(),
            h: grid.h,
            gamma: 0.5 * kernel.head(),
        };
        IdeSolver { model: model.clone(), grid, kernel, co }
    }

    pub fn model(&self) -> &ValidatedModel {
        &self.model
    }

    pub fn grid(&self) -> &XGrid {
        &self.grid
    }

    /// Default residual tolerance, `1e-6 c̄/q`.
    pub fn residual_tol(&self) -> f64 {
        1e-6 * self.model.value_bound()
    }

    pub(crate) fn step(&self, c: f64) -> Step {
        Step::new(c, &self.co)
    }

    fn check_curve(&self, curve: &ValueCurve, node: usize) -> Result<(), IdeError> {
        if curve.values.len() != self.grid.len() {
            return Err(IdeError::LengthMismatch { expected: self.grid.len(), got: curve.values.len() });
        }
        if node >= curve.values.len() {
            return Err(IdeError::DomainExceeded { node, len: curve.values.len() });
        }
        Ok(())
    }

    /// `∫_0^{x_i} v(x_i - α) dF(α)` by midpoint-increment quadrature.
    pub fn convolve(&self, curve: &ValueCurve, node: usize) -> Result<f64, IdeError> {
        self.check_curve(curve, node)?;
        Ok(self.kernel.direct(&curve.values, node))
    }

    /// The convolution at every node, in linear time for parametric laws.
    pub fn convolution(&self, values: &[f64]) -> Vec<f64> {
        self.convolution_weighted(values, 0.5)
    }

    /// Convolution of a slice of rate `c`, with the first cell averaged the
    /// way a march from the origin averages it.
    pub(crate) fn convolution_at_rate(&self, values: &[f64], c: f64) -> Vec<f64> {
        self.convolution_weighted(values, self.step(c).first_cell_weight(&self.co))
    }

    fn convolution_weighted(&self, values: &[f64], w0: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(values.len());
        let mut st = ConvState::new(&self.kernel);
        out.push(0.0);
        for k in 0..values.len().saturating_sub(1) {
            let w = if k == 0 { w0 } else { 0.5 };
            st.push(&self.kernel, (1.0 - w) * values[k] + w * values[k + 1]);
            out.push(st.value(&self.kernel));
        }
        out
    }

    /// `L_c(v)(x_i)`, with a central derivative inside and second-order
    /// one-sided derivatives at the ends.
    pub fn apply_operator(&self, curve: &ValueCurve, c: f64, node: usize) -> Result<f64, IdeError> {
        self.check_curve(curve, node)?;
        let v = &curve.values;
        let d = derivative(v, self.grid.h, node);
        let k = self.kernel.direct_weighted(v, node, self.step(c).first_cell_weight(&self.co));
        Ok(self.operator_at(c, v[node], d, k))
    }

    fn operator_at(&self, c: f64, v: f64, dv: f64, k: f64) -> f64 {
        let co = &self.co;
        c + (co.p - c) * dv - (co.q + co.beta) * v + co.beta * k
    }

    /// `L_c(v)` at every node.
    pub fn operator(&self, values: &[f64], c: f64) -> Vec<f64> {
        let k = self.convolution_at_rate(values, c);
        (0..values.len()).map(|i| self.operator_at(c, values[i], derivative(values, self.grid.h, i), k[i])).collect()
    }

    /// `L_c(v)` read in the viscosity-supersolution sense: at a convex kink
    /// the derivative is the one-sided slope that makes the operator largest,
    /// and concave kinks (which no smooth function touches from below) yield
    /// `None`. Above the premium the origin holds the ruin condition
    /// `v(0) = 0` rather than the equation and also yields `None`.
    pub fn supersolution_operator(&self, values: &[f64], c: f64) -> Vec<Option<f64>> {
        let h = self.grid.h;
        let k = self.convolution_at_rate(values, c);
        let jumps = profile::slope_jumps(values, h);
        let flags = profile::kink_flags(&jumps, profile::max_abs(values), h);
        let n = values.len();
        (0..n)
            .map(|i| {
                if i == 0 && c > self.co.p {
                    return None;
                }
                let interior = i > 0 && i + 1 < n;
                let jump = if interior { jumps[i - 1] } else { 0.0 };
                let dv = if interior && flags[i - 1] {
                    if jump < 0.0 {
                        return None;
                    }
                    if self.co.p > c {
                        forward_slope(values, h, i)
                    } else {
                        backward_slope(values, h, i)
                    }
                } else {
                    derivative(values, h, i)
                };
                Some(self.operator_at(c, values[i], dv, k[i]))
            })
            .collect()
    }

    /// Compares `V(·,c)` with the next slice `V(·,c⁺)`.
    pub fn hjb_residual(&self, slice: &ValueCurve, next: &ValueCurve, c: f64) -> HjbReport {
        let l = self.supersolution_operator(&slice.values, c);
        let mut report = HjbReport {
            max_operator: f64::NEG_INFINITY,
            max_rate_increment: f64::NEG_INFINITY,
            complementarity: 0.0,
            skipped: 0,
        };
        for (i, li) in l.iter().enumerate() {
            let inc = next.values[i] - slice.values[i];
            report.max_rate_increment = report.max_rate_increment.max(inc);
            match li {
                Some(li) => {
                    report.max_operator = report.max_operator.max(*li);
                    report.complementarity = report.complementarity.max(li.abs().min(inc.abs()));
                }
                None => report.skipped += 1,
            }
        }
        report
    }

    fn check_tail(&self) -> Result<(), IdeError> {
        let tail = self.model.distribution().survival(self.grid.x_max());
        if tail >= TAIL_TOLERANCE {
            return Err(IdeError::GridTooShort { x_max: self.grid.x_max(), tail });
        }
        Ok(())
    }

    /// Value of paying the ceiling forever from every surplus level.
    pub fn solve_top_level(&self) -> Result<ValueCurve, IdeError> {
        self.check_tail()?;
        let c = self.model.ceiling();
        let step = self.step(c);
        let steps = |_: usize| &step;
        let n = self.grid.n;
        let ctx = Context::empty(&self.kernel);
        let values = if step.is_volterra() {
            march::march_forward(&self.kernel, &self.co, &steps, 0, n, ctx, None)
        } else if c > self.co.p {
            march::march_forward(&self.kernel, &self.co, &steps, 0, n, ctx, Some(0.0))
        } else {
            let b_end = self.homogeneous_growth(&step);
            if !(b_end.abs() >= 1e-12) {
                return Err(IdeError::SuperpositionIllConditioned { homogeneous_end: b_end });
            }
            march::march_anchored(&self.kernel, &self.co, &steps, 0, n, ctx, self.model.value_bound())
        };
        ValueCurve::new(self.grid, values)
    }

    /// `ln w(x_max)` for the homogeneous solution with `w(0) = 1`, mapped back
    /// to a magnitude (saturating) for conditioning checks.
    fn homogeneous_growth(&self, step: &Step) -> f64 {
        let steps = |_: usize| step;
        let ratios = march::homogeneous_ratios(&self.kernel, &self.co, &steps, 0, self.grid.n);
        let log: f64 = ratios.iter().map(|r| -libm::log(*r)).sum();
        libm::exp(log.min(700.0))
    }

    /// Solves `L_c(v) = 0` on one segment with the boundary data appropriate
    /// to the sign of `p - c`.
    pub fn solve_segment(&self, problem: &SegmentProblem) -> Result<SegmentSolution, IdeError> {
        let SegmentProblem { rate: c, start, end, boundary, ref context } = *problem;
        if start >= end || end > self.grid.n {
            return Err(IdeError::InvalidSegment { start, end, reason: "need start < end <= last node" });
        }
        if context.len() < start {
            return Err(IdeError::ContextIncomplete { needed: start, got: context.len() });
        }
        let step = self.step(c);
        let steps = |_: usize| &step;
        let ctx = Context::from_values(&self.kernel, context, start);
        let values = match boundary {
            SegmentBoundary::Free if step.is_volterra() => {
                march::march_forward(&self.kernel, &self.co, &steps, start, end, ctx, None)
            }
            SegmentBoundary::Left(g) if !step.is_volterra() && c > self.co.p => {
                march::march_forward(&self.kernel, &self.co, &steps, start, end, ctx, Some(g))
            }
            SegmentBoundary::Right(g) if !step.is_volterra() && c < self.co.p => {
                march::march_anchored(&self.kernel, &self.co, &steps, start, end, ctx, g)
            }
            _ => {
                return Err(IdeError::InvalidSegment {
                    start,
                    end,
                    reason: "boundary side must be right for c < p, left for c > p, free for c = p",
                })
            }
        };
        let mut full = Vec::with_capacity(end + 1);
        full.extend_from_slice(&context[..start]);
        full.extend_from_slice(&values);
        let l = self.operator(&full, c);
        let max_residual =
            if end - start >= 2 { l[start + 1..end].iter().fold(0.0f64, |m, r| m.max(r.abs())) } else { 0.0 };
        Ok(SegmentSolution { start, values, max_residual })
    }

    /// Value of following a stationary rate profile `rate_of_cell(i)` (the
    /// rate used on `[x_i, x_{i+1}]`) with all rates below `p`, pinned to
    /// `c̄/q` at `x_max`.
    pub(crate) fn solve_profile_below_p(&self, rates: &[f64], cell_rate: &dyn Fn(usize) -> usize) -> Vec<f64> {
        let steps: Vec<Step> = rates.iter().map(|&c| self.step(c)).collect();
        let lookup = |i: usize| &steps[cell_rate(i)];
        march::march_anchored(
            &self.kernel,
            &self.co,
            &lookup,
            0,
            self.grid.n,
            Context::empty(&self.kernel),
            self.model.value_bound(),
        )
    }

    /// Forward march of rate `c` from node `start` with history `prefix`
    /// (the composite curve on `0..start`) and value `first` at `start`, or
    /// the `c = p` relation when `first` is `None`.
    pub(crate) fn march_from(&self, c: f64, prefix: &[f64], start: usize, first: Option<f64>) -> Vec<f64> {
        let step = self.step(c);
        let steps = |_: usize| &step;
        let ctx = Context::from_values(&self.kernel, prefix, start);
        march::march_forward(&self.kernel, &self.co, &steps, start, self.grid.n, ctx, first)
    }

    /// Particular (`v(0) = 0`) and homogeneous (`v(0) = 1`) solutions of rate
    /// `c` on `0..=end`, each with its convolution.
    pub(crate) fn basis_from_origin(&self, c: f64, end: usize) -> [(Vec<f64>, Vec<f64>); 2] {
        let step = self.step(c);
        let steps = |_: usize| &step;
        let part = march::march_with_convolution(
            &self.kernel,
            &self.co,
            &steps,
            0,
            end,
            Context::empty(&self.kernel),
            1.0,
            0.0,
        );
        let hom = march::march_with_convolution(
            &self.kernel,
            &self.co,
            &steps,
            0,
            end,
            Context::empty(&self.kernel),
            0.0,
            1.0,
        );
        [part, hom]
    }
}

/// Central difference inside, second-order one-sided stencils at the ends.
pub(crate) fn derivative(v: &[f64], h: f64, i: usize) -> f64 {
    let n = v.len();
    if n < 3 {
        return if n == 2 { (v[1] - v[0]) / h } else { 0.0 };
    }
    if i == 0 {
        forward_slope(v, h, 0)
    } else if i + 1 == n {
        backward_slope(v, h, i)
    } else {
        (v[i + 1] - v[i - 1]) / (2.0 * h)
    }
}

fn forward_slope(v: &[f64], h: f64, i: usize) -> f64 {
    if i + 2 < v.len() {
        (-3.0 * v[i] + 4.0 * v[i + 1] - v[i + 2]) / (2.0 * h)
    } else {
        (v[i + 1] - v[i]) / h
    }
}

fn backward_slope(v: &[f64], h: f64, i: usize) -> f64 {
    if i >= 2 {
        (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h)
    } else {
        (v[i] - v[i - 1]) / h
    }
}
