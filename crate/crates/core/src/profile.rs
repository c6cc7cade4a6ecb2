//! Slopes of value curves and detection of points where they are not
//! differentiable.

use alloc::vec::Vec;

use crate::ide::{derivative, ValueCurve};

/// A detected kink: the slope changes by `size` around `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub x: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeProfile {
    pub points: Vec<(f64, f64)>,
    /// Kinks sorted by location.
    pub jumps: Vec<Jump>,
}

impl DerivativeProfile {
    /// The kink with the largest slope change, if any.
    pub fn largest_jump(&self) -> Option<Jump> {
        self.jumps.iter().copied().fold(None, |best: Option<Jump>, j| match best {
            Some(b) if b.size.abs() >= j.size.abs() => Some(b),
            _ => Some(j),
        })
    }
}

/// `D+ v - D- v` at interior nodes `1..n-1` (index `i - 1`).
pub(crate) fn slope_jumps(values: &[f64], h: f64) -> Vec<f64> {
    values.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]) / h).collect()
}

/// Half-width of the neighbourhood a jump is compared against.
const WINDOW: usize = 12;

/// Flags jumps that exceed ten times the median jump of their neighbourhood
/// (the two adjacent jumps excluded, since a kink between nodes spreads over
/// them) and a floor above the rounding noise of a curve whose values reach
/// `scale` on a grid of step `h`.
pub(crate) fn kink_flags(jumps: &[f64], scale: f64, h: f64) -> Vec<bool> {
    let n = jumps.len();
    let largest = jumps.iter().fold(0.0, |m: f64, j| m.max(j.abs()));
    let floor = (1e-9 * largest).max(1e-10 * scale / h).max(f64::MIN_POSITIVE);
    let mut local = Vec::with_capacity(2 * WINDOW);
    (0..n)
        .map(|i| {
            let mag = jumps[i].abs();
            if mag <= floor {
                return false;
            }
            let lo = i.saturating_sub(WINDOW);
            let hi = (i + WINDOW).min(n - 1);
            let around = (lo..=hi).filter(|&j| j + 1 < i || j > i + 1).map(|j| jumps[j].abs());
            if mag <= 10.0 * around.clone().fold(f64::INFINITY, f64::min) {
                return false;
            }
            local.clear();
            local.extend(around);
            if local.is_empty() {
                return true;
            }
            let mid = local.len() / 2;
            let (_, median, _) = local.select_nth_unstable_by(mid, f64::total_cmp);
            mag > 10.0 * *median
        })
        .collect()
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Slope at every node and the kinks, i.e. nodes where the one-sided slopes
/// differ by more than ten times the typical variation nearby. Neighbouring
/// flagged nodes are merged into one kink placed at the largest jump.
pub fn derivative_profile(curve: &ValueCurve) -> DerivativeProfile {
    let grid = curve.grid();
    let h = grid.step();
    let v = curve.values();
    let points = (0..v.len()).map(|i| (grid.x(i), derivative(v, h, i))).collect();
    let jumps = slope_jumps(v, h);
    let flags = kink_flags(&jumps, max_abs(v), h);
    let mut out: Vec<Jump> = Vec::new();
    let mut cluster: Option<(usize, usize)> = None;
    let flush = |c: Option<(usize, usize)>, out: &mut Vec<Jump>| {
        if let Some((a, b)) = c {
            let peak = (a..=b).max_by(|&i, &j| jumps[i].abs().total_cmp(&jumps[j].abs())).unwrap_or(a);
            let size = jumps[a..=b].iter().sum::<f64>();
            out.push(Jump { x: grid.x(peak + 1), size });
        }
    };
    for (k, &flag) in flags.iter().enumerate() {
        if flag {
            cluster = match cluster {
                Some((a, b)) if b + 1 == k => Some((a, k)),
                other => {
                    flush(other, &mut out);
                    Some((k, k))
                }
            };
        }
    }
    flush(cluster, &mut out);
    DerivativeProfile { points, jumps: out }
}
