//! Node-by-node marching of `L_c(v) = 0` on the uniform grid.
//!
//! Away from `c = p` the equation reads `v' = κ v + f` with
//! `κ = (q+β)/(p-c)` and `f = -(c + β K)/(p-c)`. Each cell is advanced with an
//! exponential integrator: the linear part is integrated exactly and `f` is
//! interpolated linearly between the cell ends. The convolution is fed the
//! exact mean of that interpolant over the cell rather than the midpoint of
//! its ends. The two agree to second order on smooth stretches, but near the
//! rate `p` the solution has boundary layers of width `|p-c|/(q+β)`, down to
//! a fraction of a cell, where the midpoint is off by up to half the jump.
//! `K` at the new node depends on the new value only through the newest
//! mean, so the step is a scalar linear solve.
//!
//! At `c = p` the derivative drops out and the node value is given directly
//! by `v = (c + β K)/(q+β)`, with ordinary midpoints.

use alloc::vec::Vec;

use super::kernel::{ConvState, Kernel};

/// Growth of the homogeneous track at which a block is closed.
const GROW: f64 = 1e14;
/// Minimum damping of the anchoring error over the accepted part of a block.
const DAMP: f64 = 1e10;
const RESCALE_AT: f64 = 1e150;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Coeffs {
    pub(crate) p: f64,
    pub(crate) q: f64,
    pub(crate) beta: f64,
    pub(crate) h: f64,
    /// Half the first Stieltjes increment, the implicit weight of the new node.
    pub(crate) gamma: f64,
}

#[derive(Debug, Clone, Copy)]
enum StepKind {
    /// `v_1 = ekh v_0 + (e1 - e2) f_0 + e2 f_1` and cell mean
    /// `m0 v_0 + m1 f_0 + m2 (f_1 - f_0)`.
    Ode {
        ekh: f64,
        e1: f64,
        e2: f64,
        m0: f64,
        m1: f64,
        m2: f64,
        inv_pc: f64,
    },
    Volterra,
}

/// Per-rate step coefficients.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Step {
    pub(crate) c: f64,
    kind: StepKind,
}

impl Step {
    pub(crate) fn new(c: f64, co: &Coeffs) -> Self {
        let diff = co.p - c;
        if diff.abs() <= 1e-12 * co.p {
            return Step { c, kind: StepKind::Volterra };
        }
        let kappa = (co.q + co.beta) / diff;
        let z = kappa * co.h;
        let h = co.h;
        let (e1, e2, m1, m2) = if z.abs() < 1e-2 {
            let z2 = z * z;
            (
                h * (1.0 + z / 2.0 + z2 / 6.0 + z * z2 / 24.0),
                h * (0.5 + z / 6.0 + z2 / 24.0 + z * z2 / 120.0),
                h * (0.5 + z / 6.0 + z2 / 24.0 + z * z2 / 120.0),
                h * (1.0 / 6.0 + z / 24.0 + z2 / 120.0 + z * z2 / 720.0),
            )
        } else {
            let em1 = libm::expm1(z);
            let e1 = em1 / kappa;
            (e1, (em1 - z) / (kappa * z), (e1 - h) / z, (e1 - h - z * h / 2.0) / (z * z))
        };
        let m0 = e1 / h;
        Step { c, kind: StepKind::Ode { ekh: libm::exp(z), e1, e2, m0, m1, m2, inv_pc: 1.0 / diff } }
    }

    pub(crate) fn is_volterra(&self) -> bool {
        matches!(self.kind, StepKind::Volterra)
    }

    /// Weight of `v_1` in the mean of the first cell when the slice starts
    /// from `v_0 = 0` at the origin, the exponential-integrator mean with
    /// negligible forcing change: `1/z - 1/(e^z - 1)` above `p`, one half
    /// otherwise.
    pub(crate) fn first_cell_weight(&self, co: &Coeffs) -> f64 {
        match self.kind {
            StepKind::Ode { inv_pc, .. } if inv_pc < 0.0 => {
                let z = (co.q + co.beta) * inv_pc * co.h;
                if z > -1e-3 {
                    0.5 - z / 12.0 + z * z * z / 720.0
                } else {
                    1.0 / z - 1.0 / libm::expm1(z)
                }
            }
            _ => 0.5,
        }
    }
}

/// Convolution history of everything left of the node a track starts at.
#[derive(Debug, Clone)]
pub(crate) struct Context {
    state: ConvState,
    prev: Option<f64>,
}

impl Context {
    pub(crate) fn empty(kernel: &Kernel) -> Self {
        Context { state: ConvState::new(kernel), prev: None }
    }

    /// History made of `values[0..start]`.
    pub(crate) fn from_values(kernel: &Kernel, values: &[f64], start: usize) -> Self {
        if start == 0 {
            return Self::empty(kernel);
        }
        Context { state: ConvState::from_values(kernel, values, start - 1), prev: Some(values[start - 1]) }
    }

    /// Zero history, used by homogeneous tracks starting at `start`.
    fn zero(kernel: &Kernel, start: usize) -> Self {
        Context { state: ConvState::new(kernel), prev: if start > 0 { Some(0.0) } else { None } }
    }

    pub(crate) fn append(&mut self, kernel: &Kernel, v: f64) {
        if let Some(prev) = self.prev {
            self.state.push(kernel, 0.5 * (prev + v));
        }
        self.prev = Some(v);
    }
}

/// A solution being marched: current node value, its convolution and the
/// midpoints pushed so far.
#[derive(Debug, Clone)]
pub(crate) struct Track {
    pub(crate) v: f64,
    pub(crate) k: f64,
    state: ConvState,
    src: f64,
}

impl Track {
    /// Starts at a node with a prescribed value.
    pub(crate) fn start(kernel: &Kernel, ctx: Context, v: f64, src: f64) -> Self {
        let Context { mut state, prev } = ctx;
        let k = match prev {
            Some(p) => {
                state.push(kernel, 0.5 * (p + v));
                state.value(kernel)
            }
            None => 0.0,
        };
        Track { v, k, state, src }
    }

    /// Starts at a node whose value follows from the `c = p` relation.
    pub(crate) fn start_volterra(kernel: &Kernel, ctx: Context, c: f64, src: f64, co: &Coeffs) -> Self {
        let v = match ctx.prev {
            Some(p) => {
                let pk = ctx.state.peek(kernel, 0.5 * p);
                (src * c + co.beta * pk) / (co.q + co.beta - co.beta * co.gamma)
            }
            None => src * c / (co.q + co.beta),
        };
        Self::start(kernel, ctx, v, src)
    }

    pub(crate) fn advance(&mut self, kernel: &Kernel, step: &Step, co: &Coeffs) {
        let load = self.src * step.c;
        let df0 = 2.0 * co.gamma;
        let (next, mean) = match step.kind {
            StepKind::Ode { ekh, e1, e2, m0, m1, m2, inv_pc } => {
                // `K_1 = hist + ΔF_0 M` and `f_1` is linear in `K_1`, so the
                // mean `M` solves a scalar equation.
                let hist = self.state.peek(kernel, 0.0);
                let f0 = -(load + co.beta * self.k) * inv_pc;
                let free = m0 * self.v + (m1 - m2) * f0 - m2 * (load + co.beta * hist) * inv_pc;
                let mean = free / (1.0 + m2 * co.beta * df0 * inv_pc);
                let f1 = -(load + co.beta * (hist + df0 * mean)) * inv_pc;
                (ekh * self.v + (e1 - e2) * f0 + e2 * f1, mean)
            }
            StepKind::Volterra => {
                let pk = self.state.peek(kernel, 0.5 * self.v);
                let next = (load + co.beta * pk) / (co.q + co.beta - co.beta * co.gamma);
                (next, 0.5 * (self.v + next))
            }
        };
        self.k = self.state.peek(kernel, mean);
        self.state.push(kernel, mean);
        self.v = next;
    }

    fn rescale(&mut self, s: f64) {
        self.v *= s;
        self.k *= s;
        self.state.scale(s);
    }
}

/// Marches forward from `start` to `end` (inclusive) from a known first
/// value, or from the `c = p` relation when `first` is `None`.
pub(crate) fn march_forward<'s>(
    kernel: &Kernel,
    co: &Coeffs,
    steps: &dyn Fn(usize) -> &'s Step,
    start: usize,
    end: usize,
    ctx: Context,
    first: Option<f64>,
) -> Vec<f64> {
    let mut track = match first {
        Some(v) => Track::start(kernel, ctx, v, 1.0),
        None => Track::start_volterra(kernel, ctx, steps(start).c, 1.0, co),
    };
    let mut out = Vec::with_capacity(end - start + 1);
    out.push(track.v);
    for i in start..end {
        track.advance(kernel, steps(i), co);
        out.push(track.v);
    }
    out
}

/// Marches a bounded solution on `[start, end]` for rates below `p`, pinned to
/// `target` at `end` and free at `start`.
///
/// Forward marching amplifies any error along the growing homogeneous mode,
/// so the interval is processed in blocks. Each block marches a particular
/// track `a` (from the current estimate at the block start) and a
/// homogeneous track `b` (value 1, zero history) until `b` has grown by
/// `GROW`, fixes `a + B b` to the target there, and keeps only the nodes
/// where the anchoring error has been damped by at least `DAMP`. The last
/// block is repeated with a corrected start value until `a` itself nearly
/// hits the target.
pub(crate) fn march_anchored<'s>(
    kernel: &Kernel,
    co: &Coeffs,
    steps: &dyn Fn(usize) -> &'s Step,
    start: usize,
    end: usize,
    ctx: Context,
    target: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(end - start + 1);
    let mut ctx = ctx;
    let mut cur = start;
    let mut av = Vec::new();
    let mut bv = Vec::new();
    // Best available estimate of the solution at the block start. Starting
    // the particular track close to the solution keeps it from growing,
    // which avoids cancellation in `a + B b`.
    let mut first = target;
    loop {
        let mut passes = 0;
        let (reached_end, scale) = loop {
            let mut a = Track::start(kernel, ctx.clone(), first, 1.0);
            let mut b = Track::start(kernel, Context::zero(kernel, cur), 1.0, 0.0);
            av.clear();
            bv.clear();
            av.push(a.v);
            bv.push(b.v);
            let mut i = cur;
            while i < end && b.v < GROW {
                let st = steps(i);
                a.advance(kernel, st, co);
                b.advance(kernel, st, co);
                av.push(a.v);
                bv.push(b.v);
                i += 1;
            }
            let last = bv.len() - 1;
            let scale = (target - av[last]) / bv[last];
            let drift = (target - av[last]).abs();
            if i == end && passes < 3 && bv[last] > 1e3 && drift > 1e-9 * (1.0 + target.abs()) {
                first += scale;
                passes += 1;
                continue;
            }
            break (i == end, scale);
        };
        if reached_end {
            out.extend(av.iter().zip(&bv).map(|(a, b)| a + scale * b));
            if let Some(v) = out.last_mut() {
                *v = target;
            }
            return out;
        }
        let limit = bv[bv.len() - 1] / DAMP;
        let keep = bv.iter().rposition(|&b| b <= limit).unwrap_or(0).max(1);
        for j in 0..keep {
            let v = av[j] + scale * bv[j];
            out.push(v);
            ctx.append(kernel, v);
        }
        first = av[keep] + scale * bv[keep];
        cur += keep;
    }
}

/// Ratios `w_i / w_{i+1}` for the homogeneous solution with `w(start) = 1`
/// and zero history, for `i` in `start..end`.
pub(crate) fn homogeneous_ratios<'s>(
    kernel: &Kernel,
    co: &Coeffs,
    steps: &dyn Fn(usize) -> &'s Step,
    start: usize,
    end: usize,
) -> Vec<f64> {
    let mut w = Track::start(kernel, Context::zero(kernel, start), 1.0, 0.0);
    let mut out = Vec::with_capacity(end - start);
    for i in start..end {
        let old = w.v;
        w.advance(kernel, steps(i), co);
        out.push(old / w.v);
        if w.v.abs() > RESCALE_AT {
            w.rescale(1.0 / RESCALE_AT);
        }
    }
    out
}

/// Plain forward march that also records the convolution at each node. Only
/// used where the growing mode is mild.
#[allow(clippy::too_many_arguments)]
pub(crate) fn march_with_convolution<'s>(
    kernel: &Kernel,
    co: &Coeffs,
    steps: &dyn Fn(usize) -> &'s Step,
    start: usize,
    end: usize,
    ctx: Context,
    src: f64,
    first: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut t = Track::start(kernel, ctx, first, src);
    let mut vals = Vec::with_capacity(end - start + 1);
    let mut ks = Vec::with_capacity(end - start + 1);
    vals.push(t.v);
    ks.push(t.k);
    for i in start..end {
        t.advance(kernel, steps(i), co);
        vals.push(t.v);
        ks.push(t.k);
    }
    (vals, ks)
}
