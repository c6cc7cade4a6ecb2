//! Stieltjes increments of the claim law and a streaming convolution state.
//!
//! With `mid_k = (v_k + v_{k+1}) / 2` and `ΔF_j = F((j+1)h) - F(jh)`, the
//! convolution at node `i` is approximated by
//!
//! ```text
//! K_i = sum_{j=0}^{i-1} mid_{i-1-j} ΔF_j
//! ```
//!
//! For exponential and Erlang(2) claims the increments are geometric (or
//! geometric times linear) in `j`, so `K_i` can be updated in O(1) per node.
//! Tabulated laws fall back to a direct sum over the table support.

use alloc::vec::Vec;

use crate::model::ClaimDistribution;

#[derive(Debug, Clone, Copy)]
pub(crate) enum KernelKind {
    Exp { rho: f64, df0: f64 },
    Erlang { rho: f64, a0: f64, a1: f64 },
    Table,
}

#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    pub(crate) kind: KernelKind,
    /// `ΔF_j` for `j < len`; zero beyond the stored range.
    pub(crate) df: Vec<f64>,
}

impl Kernel {
    pub(crate) fn new(dist: &ClaimDistribution, h: f64, intervals: usize) -> Self {
        let taps = match dist {
            ClaimDistribution::Tabulated(t) => {
                let support = libm::ceil(t.support_end() / h) as usize + 1;
                support.min(intervals).max(1)
            }
            _ => intervals.max(1),
        };
        let df: Vec<f64> = (0..taps)
            .map(|j| {
                let lo = j as f64 * h;
                (dist.survival(lo) - dist.survival(lo + h)).max(0.0)
            })
            .collect();
        let kind = match dist {
            ClaimDistribution::Exponential { rate } => {
                KernelKind::Exp { rho: libm::exp(-rate * h), df0: -libm::expm1(-rate * h) }
            }
            ClaimDistribution::Erlang2 => {
                let rho = libm::exp(-h);
                KernelKind::Erlang { rho, a0: -libm::expm1(-h) - h * rho, a1: h * (-libm::expm1(-h)) }
            }
            ClaimDistribution::Tabulated(_) => KernelKind::Table,
        };
        Kernel { kind, df }
    }

    /// Weight of the newest midpoint, `ΔF_0`.
    pub(crate) fn head(&self) -> f64 {
        self.df[0]
    }

    /// Direct evaluation of `K_i` from a full value slice.
    pub(crate) fn direct(&self, values: &[f64], i: usize) -> f64 {
        self.direct_weighted(values, i, 0.5)
    }

    /// As [`Kernel::direct`], with the first cell averaged as
    /// `(1-w0) v_0 + w0 v_1`.
    pub(crate) fn direct_weighted(&self, values: &[f64], i: usize, w0: f64) -> f64 {
        let taps = i.min(self.df.len());
        let mut acc = 0.0;
        for j in 0..taps {
            let k = i - 1 - j;
            let mid = if k == 0 { (1.0 - w0) * values[0] + w0 * values[1] } else { 0.5 * (values[k] + values[k + 1]) };
            acc += mid * self.df[j];
        }
        acc
    }
}

/// Running sums that reproduce `K_i` after the midpoints `mid_0..mid_{i-1}`
/// have been pushed.
#[derive(Debug, Clone)]
pub(crate) enum ConvState {
    Exp { t0: f64 },
    Erlang { t0: f64, t1: f64 },
    Table { hist: Vec<f64> },
}

impl ConvState {
    pub(crate) fn new(kernel: &Kernel) -> Self {
        match kernel.kind {
            KernelKind::Exp { .. } => ConvState::Exp { t0: 0.0 },
            KernelKind::Erlang { .. } => ConvState::Erlang { t0: 0.0, t1: 0.0 },
            KernelKind::Table => ConvState::Table { hist: Vec::new() },
        }
    }

    pub(crate) fn value(&self, kernel: &Kernel) -> f64 {
        match (self, kernel.kind) {
            (ConvState::Exp { t0 }, KernelKind::Exp { df0, .. }) => df0 * t0,
            (ConvState::Erlang { t0, t1 }, KernelKind::Erlang { a0, a1, .. }) => a0 * t0 + a1 * t1,
            (ConvState::Table { hist }, _) => {
                let n = hist.len().min(kernel.df.len());
                let mut acc = 0.0;
                for j in 0..n {
                    acc += hist[hist.len() - 1 - j] * kernel.df[j];
                }
                acc
            }
            _ => unreachable!("state and kernel kinds always match"),
        }
    }

    /// `K` after a hypothetical push of `mid`, without mutating the state.
    pub(crate) fn peek(&self, kernel: &Kernel, mid: f64) -> f64 {
        match (self, kernel.kind) {
            (ConvState::Exp { t0 }, KernelKind::Exp { rho, df0 }) => df0 * (mid + rho * t0),
            (ConvState::Erlang { t0, t1 }, KernelKind::Erlang { rho, a0, a1 }) => {
                a0 * (mid + rho * t0) + a1 * rho * (t1 + t0)
            }
            (ConvState::Table { hist }, _) => {
                let mut acc = mid * kernel.df[0];
                let n = hist.len().min(kernel.df.len() - 1);
                for j in 0..n {
                    acc += hist[hist.len() - 1 - j] * kernel.df[j + 1];
                }
                acc
            }
            _ => unreachable!("state and kernel kinds always match"),
        }
    }

    pub(crate) fn push(&mut self, kernel: &Kernel, mid: f64) {
        match (self, kernel.kind) {
            (ConvState::Exp { t0 }, KernelKind::Exp { rho, .. }) => *t0 = mid + rho * *t0,
            (ConvState::Erlang { t0, t1 }, KernelKind::Erlang { rho, .. }) => {
                *t1 = rho * (*t1 + *t0);
                *t0 = mid + rho * *t0;
            }
            (ConvState::Table { hist }, _) => hist.push(mid),
            _ => unreachable!("state and kernel kinds always match"),
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        match self {
            ConvState::Exp { t0 } => *t0 *= s,
            ConvState::Erlang { t0, t1 } => {
                *t0 *= s;
                *t1 *= s;
            }
            ConvState::Table { hist } => hist.iter_mut().for_each(|m| *m *= s),
        }
    }

    /// Builds the state holding the midpoints of `values[0..=upto]`, i.e.
    /// `mid_0..mid_{upto-1}`.
    pub(crate) fn from_values(kernel: &Kernel, values: &[f64], upto: usize) -> Self {
        let mut st = ConvState::new(kernel);
        for k in 0..upto {
            st.push(kernel, 0.5 * (values[k] + values[k + 1]));
        }
        st
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CdfTable;

    fn stream(kernel: &Kernel, values: &[f64]) -> Vec<f64> {
        let mut st = ConvState::new(kernel);
        let mut out = alloc::vec![0.0];
        for k in 0..values.len() - 1 {
            let mid = 0.5 * (values[k] + values[k + 1]);
            let peeked = st.peek(kernel, mid);
            st.push(kernel, mid);
            let v = st.value(kernel);
            assert!((peeked - v).abs() <= 1e-12 * (1.0 + v.abs()));
            out.push(v);
        }
        out
    }

    fn check_kind(dist: ClaimDistribution) {
        let h = 0.01;
        let kernel = Kernel::new(&dist, h, 400);
        let values: Vec<f64> = (0..=400).map(|i| libm::sin(0.03 * i as f64) + 0.01 * i as f64).collect();
        let streamed = stream(&kernel, &values);
        for i in [0usize, 1, 2, 17, 250, 400] {
            let d = kernel.direct(&values, i);
            assert!((streamed[i] - d).abs() < 1e-11, "node {i}: {} vs {d}", streamed[i]);
        }
    }

    #[test]
    fn recursions_match_direct_sums() {
        check_kind(ClaimDistribution::exponential(2.0));
        check_kind(ClaimDistribution::Erlang2);
        let values: Vec<f64> = (0..=300).map(|i| -libm::expm1(-0.05 * i as f64)).collect();
        check_kind(ClaimDistribution::Tabulated(CdfTable::from_uniform(0.1, values).unwrap()));
    }

    #[test]
    fn recursion_increments_match_cdf() {
        let h = 0.02;
        let k = Kernel::new(&ClaimDistribution::Erlang2, h, 50);
        if let KernelKind::Erlang { rho, a0, a1 } = k.kind {
            for j in 0..50 {
                let r = libm::pow(rho, j as f64) * (a0 + j as f64 * a1);
                assert!((r - k.df[j]).abs() < 1e-15);
            }
        } else {
            panic!("wrong kind");
        }
    }
}
