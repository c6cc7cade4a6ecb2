//! One-parameter families of candidate solutions for the obstacle problem.
//!
//! The non-change set is a single interval `U` that ends at a node `d` (the
//! start of the right-unbounded change component). Everything on `U` is
//! generated once, and each candidate `d` is then scored in O(1):
//!
//! * `c < p`: `W_d = u + (obs(d) - u(d)) w / w(d)` with a bounded particular
//!   solution `u` and the growing homogeneous solution `w`, both started at
//!   the left end of `U`;
//! * `c ≥ p`: the curve on `U` does not depend on `d` at all, it is a forward
//!   march from the left end.

use alloc::vec::Vec;

use super::march::{self, Context};
use super::IdeSolver;

#[derive(Debug, Clone)]
pub(crate) enum Family {
    Anchored { start: usize, u: Vec<f64>, ratio: Vec<f64> },
    Forward { start: usize, free: usize, z: Vec<f64> },
}

/// Best right junction of a family and its score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub(crate) d: usize,
    pub(crate) score: f64,
}

impl IdeSolver {
    /// Family for rate `c` against obstacle `obs`. With `split = Some(j)` the
    /// nodes `0..=j` belong to the change set and are taken from `obs`.
    pub(crate) fn family(&self, c: f64, obs: &[f64], split: Option<usize>) -> Family {
        let n = self.grid().intervals();
        let step = self.step(c);
        let steps = |_: usize| &step;
        let (kernel, co) = (&self.kernel, &self.co);
        if step.is_volterra() {
            let start = split.map_or(0, |j| j + 1);
            let ctx = Context::from_values(kernel, obs, start);
            let z = march::march_forward(kernel, co, &steps, start, n, ctx, None);
            Family::Forward { start, free: start, z }
        } else if c > co.p {
            let (start, first, free) = match split {
                None => (0, 0.0, 0),
                Some(j) => (j, obs[j], j + 1),
            };
            let ctx = Context::from_values(kernel, obs, start);
            let z = march::march_forward(kernel, co, &steps, start, n, ctx, Some(first));
            Family::Forward { start, free, z }
        } else {
            let start = split.map_or(0, |j| j + 1);
            let ctx = Context::from_values(kernel, obs, start);
            let u = march::march_anchored(kernel, co, &steps, start, n, ctx, obs[n]);
            let ratio = march::homogeneous_ratios(kernel, co, &steps, start, n);
            Family::Anchored { start, u, ratio }
        }
    }
}

impl Family {
    /// First node of the non-change interval.
    pub(crate) fn free_start(&self) -> usize {
        match self {
            Family::Anchored { start, .. } => *start,
            Family::Forward { free, .. } => *free,
        }
    }

    /// Maximizes `sum_{x in U} (W_d(x) - obs(x))` over `d`, preferring the
    /// smallest `d` among ties.
    pub(crate) fn best(&self, obs: &[f64]) -> Candidate {
        let n = obs.len() - 1;
        let lo = self.free_start();
        let mut best = Candidate { d: lo, score: 0.0 };
        let mut consider = |d: usize, score: f64| {
            if score > best.score + 1e-12 * (1.0 + best.score.abs()) {
                best = Candidate { d, score };
            }
        };
        match self {
            Family::Anchored { start, u, ratio } => {
                let s = *start;
                let mut partial = 0.0;
                let mut r = 0.0;
                for d in s..=n {
                    consider(d, partial + (obs[d] - u[d - s]) * r);
                    if d < n {
                        partial += u[d - s] - obs[d];
                        r = (r + 1.0) * ratio[d - s];
                    }
                }
            }
            Family::Forward { start, free, z } => {
                let mut partial = 0.0;
                for d in *free..=n {
                    consider(d, partial);
                    if d < n {
                        partial += z[d - start] - obs[d];
                    }
                }
            }
        }
        best
    }

    /// Composite curve: the family member on `U = [free_start, d)`, the
    /// obstacle elsewhere.
    pub(crate) fn curve(&self, obs: &[f64], d: usize) -> Vec<f64> {
        let mut out = obs.to_vec();
        match self {
            Family::Anchored { start, u, ratio } => {
                let s = *start;
                if d > s {
                    let amp = obs[d] - u[d - s];
                    let mut r = 1.0;
                    for x in (s..d).rev() {
                        r *= ratio[x - s];
                        out[x] = u[x - s] + amp * r;
                    }
                }
            }
            Family::Forward { start, free, z } => {
                out[*free..d].copy_from_slice(&z[*free - start..d - start]);
            }
        }
        out
    }
}
