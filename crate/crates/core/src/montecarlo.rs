//! Event-driven simulation of the controlled surplus under a finite
//! ratcheting strategy.
//!
//! Between claims the surplus moves linearly at `p - c`, so the first entry
//! into the current change set is found in closed form and the rate is raised
//! there. Each constant-rate piece `[t1, t2)` contributes
//! `c (e^{-q t1} - e^{-q t2}) / q`.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::model::{ClaimDistribution, ValidatedModel};
use crate::ratchet::FiniteStrategy;

/// Discounted-tail mass tolerated when the horizon is chosen automatically.
pub const BIAS_TOL: f64 = 1e-6;

/// `T` with `e^{-qT} c̄/q = BIAS_TOL`.
pub fn default_horizon(model: &ValidatedModel) -> f64 {
    libm::log(model.value_bound() / BIAS_TOL) / model.discount()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub paths: usize,
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
    /// When set, discounting stops at this time and the path is instead
    /// killed after a further exponential time of rate `q`, with dividends
    /// weighted by `e^{-q t}` from then on. The estimator stays unbiased and
    /// paths become much shorter when claims are frequent, at the cost of
    /// single-path values no longer being bounded by `c̄/q`.
    pub kill_after: Option<f64>,
}

impl SimConfig {
    pub fn new(model: &ValidatedModel, paths: usize, seed: u64) -> Self {
        SimConfig { paths, horizon: default_horizon(model), seed, antithetic: false, kill_after: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub discounted_dividends: f64,
    /// `None` when the path survived until the horizon (or its killing time).
    pub ruin_time: Option<f64>,
    pub horizon_exceeded: bool,
    pub switch_count: usize,
    pub final_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub horizon_exceeded: usize,
}

/// Uniform variates on `(0, 1)`, optionally mirrored.
struct Uniforms {
    rng: ChaCha8Rng,
    mirror: bool,
}

impl Uniforms {
    fn new(seed: u64, stream: u64, mirror: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Uniforms { rng, mirror }
    }

    fn next(&mut self) -> f64 {
        let u = ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        if self.mirror {
            1.0 - u
        } else {
            u
        }
    }

    fn exp(&mut self, rate: f64) -> f64 {
        -libm::log(self.next()) / rate
    }
}

fn sample_claim(dist: &ClaimDistribution, u: &mut Uniforms) -> f64 {
    match dist {
        ClaimDistribution::Exponential { rate } => u.exp(*rate),
        ClaimDistribution::Erlang2 => u.exp(1.0) + u.exp(1.0),
        ClaimDistribution::Tabulated(_) => {
            let target = u.next();
            let mut hi = dist.tail_point(1e-12).max(1e-12);
            while dist.cdf(hi) < target {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if dist.cdf(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

/// A strategy prepared for repeated simulation.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    strategy: &'a FiniteStrategy,
    model: &'a ValidatedModel,
    /// Change-set bounds per rate index, with `f64::INFINITY` for open ends.
    bounds: Vec<Vec<(f64, f64)>>,
}

impl<'a> Simulator<'a> {
    pub fn new(strategy: &'a FiniteStrategy, model: &'a ValidatedModel) -> Self {
        let bounds = strategy
            .change_sets
            .iter()
            .map(|s| s.bounds().into_iter().map(|(a, b)| (a, b.unwrap_or(f64::INFINITY))).collect())
            .collect();
        Simulator { strategy, model, bounds }
    }

    /// Time until the surplus, drifting at `drift` from `x`, enters the
    /// change set of rate index `k`.
    fn hit_time(&self, k: usize, x: f64, drift: f64) -> Option<(f64, f64)> {
        let set = self.bounds.get(k)?;
        if drift > 0.0 {
            set.iter()
                .filter(|(a, _)| *a > x)
                .map(|(a, _)| ((a - x) / drift, *a))
                .reduce(|p, q| if q.0 < p.0 { q } else { p })
        } else if drift < 0.0 {
            set.iter().filter(|(_, b)| *b < x).map(|(_, b)| ((x - b) / -drift, *b)).reduce(|p, q| {
                if q.0 < p.0 {
                    q
                } else {
                    p
                }
            })
        } else {
            None
        }
    }

    /// One path from `(x0, c0)` on random stream `stream`.
    pub fn path(&self, x0: f64, c0: f64, config: &SimConfig, stream: u64, mirror: bool) -> PathOutcome {
        self.run(x0, c0, config, stream, mirror, &mut |_, _| {})
    }

    /// Like [`Simulator::path`], also recording `(time, rate)` at the start
    /// and after every rate change.
    pub fn path_with_trace(&self, x0: f64, c0: f64, config: &SimConfig, stream: u64) -> (PathOutcome, Vec<(f64, f64)>) {
        let mut trace = Vec::new();
        let out = self.run(x0, c0, config, stream, false, &mut |t, c| trace.push((t, c)));
        (out, trace)
    }

    fn run(
        &self,
        x0: f64,
        c0: f64,
        config: &SimConfig,
        stream: u64,
        mirror: bool,
        on_rate: &mut dyn FnMut(f64, f64),
    ) -> PathOutcome {
        let rates = self.strategy.rates.rates();
        let p = self.model.premium();
        let q = self.model.discount();
        let beta = self.model.intensity();
        let dist = self.model.distribution();
        let mut u = Uniforms::new(config.seed, stream, mirror);

        let mut k = self.strategy.next_index(x0, c0);
        let mut switches = usize::from(rates[k] > c0 + 1e-12 * (1.0 + c0.abs()));
        let mut x = x0;
        let mut t = 0.0;
        let mut total = 0.0;
        on_rate(0.0, rates[k]);
        if x0 < 0.0 {
            return PathOutcome {
                discounted_dividends: 0.0,
                ruin_time: Some(0.0),
                horizon_exceeded: false,
                switch_count: 0,
                final_rate: rates[k],
            };
        }

        // Discounted phase up to `limit`, then (optionally) the killed tail.
        let (limit, killed_tail) = match config.kill_after {
            Some(t0) => (t0.min(config.horizon), true),
            None => (config.horizon, false),
        };
        let mut end = limit;
        let mut weight = 1.0;
        let mut discounting = true;
        let mut next_claim = t + u.exp(beta);
        loop {
            let c = rates[k];
            let drift = p - c;
            let hit = self.hit_time(k, x, drift);
            let t_hit = hit.map_or(f64::INFINITY, |(dt, _)| t + dt);
            let t_ruin = if drift < 0.0 { t + x / -drift } else { f64::INFINITY };
            let t_next = next_claim.min(t_hit).min(t_ruin).min(end);
            total += if discounting {
                c * (libm::exp(-q * t) - libm::exp(-q * t_next)) / q
            } else {
                weight * c * (t_next - t)
            };
            x += drift * (t_next - t);
            t = t_next;
            if t_next == end {
                if discounting && killed_tail {
                    discounting = false;
                    weight = libm::exp(-q * t);
                    end = t + u.exp(q);
                    continue;
                }
                return PathOutcome {
                    discounted_dividends: total,
                    ruin_time: None,
                    horizon_exceeded: discounting,
                    switch_count: switches,
                    final_rate: c,
                };
            }
            if t_next == t_hit && t_hit <= t_ruin && t_hit <= next_claim {
                x = hit.map_or(x, |(_, at)| at);
                k = self.strategy.next_index(x, c);
                switches += 1;
                on_rate(t, rates[k]);
                continue;
            }
            if t_next == t_ruin && t_ruin <= next_claim {
                return PathOutcome {
                    discounted_dividends: total,
                    ruin_time: Some(t),
                    horizon_exceeded: false,
                    switch_count: switches,
                    final_rate: c,
                };
            }
            x -= sample_claim(dist, &mut u);
            next_claim = t + u.exp(beta);
            if x < 0.0 {
                return PathOutcome {
                    discounted_dividends: total,
                    ruin_time: Some(t),
                    horizon_exceeded: false,
                    switch_count: switches,
                    final_rate: c,
                };
            }
            if k + 1 < rates.len() && self.strategy.change_sets[k].contains(x) {
                k = self.strategy.next_index(x, c);
                switches += 1;
                on_rate(t, rates[k]);
            }
        }
    }

    /// Sample mean and standard error over `config.paths` paths. Path `i`
    /// uses stream `i`; with antithetic variates, paths `2m` and `2m+1` share
    /// stream `m` with mirrored uniforms and the pair mean is the sample.
    pub fn estimate(&self, x0: f64, c0: f64, config: &SimConfig) -> Estimate {
        let outcomes: Vec<PathOutcome> = (0..config.paths).map(|i| self.indexed_path(x0, c0, config, i)).collect();
        summarize(&outcomes, config.antithetic)
    }

    /// Path number `i` of an estimate, as used by [`Simulator::estimate`].
    pub fn indexed_path(&self, x0: f64, c0: f64, config: &SimConfig, i: usize) -> PathOutcome {
        if config.antithetic {
            self.path(x0, c0, config, (i / 2) as u64, i % 2 == 1)
        } else {
            self.path(x0, c0, config, i as u64, false)
        }
    }
}

/// Mean and standard error of path outcomes (pair means when antithetic),
/// with compensated summation.
pub fn summarize(outcomes: &[PathOutcome], antithetic: bool) -> Estimate {
    let samples: Vec<f64> = if antithetic {
        outcomes.chunks(2).map(|c| c.iter().map(|o| o.discounted_dividends).sum::<f64>() / c.len() as f64).collect()
    } else {
        outcomes.iter().map(|o| o.discounted_dividends).collect()
    };
    let m = samples.len();
    let mean = neumaier(samples.iter().copied()) / m as f64;
    let std_error = if m > 1 {
        let ss = neumaier(samples.iter().map(|s| (s - mean) * (s - mean)));
        libm::sqrt(ss / (m - 1) as f64 / m as f64)
    } else {
        0.0
    };
    Estimate {
        mean,
        std_error,
        paths: outcomes.len(),
        horizon_exceeded: outcomes.iter().filter(|o| o.horizon_exceeded).count(),
    }
}

fn neumaier(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if libm::fabs(sum) >= libm::fabs(x) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// One path of `strategy` from `(x0, c0)` on random stream `stream`.
pub fn simulate_path(
    strategy: &FiniteStrategy,
    x0: f64,
    c0: f64,
    model: &ValidatedModel,
    config: &SimConfig,
    stream: u64,
) -> PathOutcome {
    Simulator::new(strategy, model).path(x0, c0, config, stream, false)
}

/// Sequential Monte Carlo estimate of the strategy value at `(x0, c0)`.
pub fn estimate_value(
    strategy: &FiniteStrategy,
    x0: f64,
    c0: f64,
    model: &ValidatedModel,
    config: &SimConfig,
) -> Estimate {
    Simulator::new(strategy, model).estimate(x0, c0, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ide::XGrid;
    use crate::model::{validate_model, ModelParams};
    use crate::ratchet::{ChangeSet, NodeInterval, RateGrid};

    fn ex3() -> ValidatedModel {
        let p = ModelParams { premium_rate: 2.3, claim_intensity: 4.0, discount_rate: 0.1, dividend_ceiling: 4.6 };
        validate_model(p, crate::model::ClaimDistribution::exponential(2.0)).unwrap()
    }

    fn premium_hold(model: &ValidatedModel) -> FiniteStrategy {
        let grid = XGrid::new(10.0, 0.01).unwrap();
        let rates = RateGrid::from_rates(alloc::vec![0.0, 2.3, 4.6], 1).unwrap();
        let sets = alloc::vec![
            ChangeSet::new(0, 0.0, grid, alloc::vec![NodeInterval { start: 300, end: 1000 }]),
            ChangeSet::new(1, 2.3, grid, alloc::vec![NodeInterval { start: 400, end: 1000 }]),
        ];
        let _ = model;
        FiniteStrategy { rates, change_sets: sets }
    }

    #[test]
    fn ruin_is_immediate_above_the_premium_at_zero() {
        let m = ex3();
        let s = FiniteStrategy::constant(4.6);
        let out = simulate_path(&s, 0.0, 4.6, &m, &SimConfig::new(&m, 1, 3), 0);
        assert_eq!(out.discounted_dividends, 0.0);
        assert_eq!(out.ruin_time, Some(0.0));
    }

    #[test]
    fn holding_the_premium_at_zero_pays_until_the_first_claim() {
        let m = ex3();
        let s = premium_hold(&m);
        let cfg = SimConfig::new(&m, 20_000, 11);
        let est = estimate_value(&s, 0.0, 2.3, &m, &cfg);
        let exact = 2.3 / 4.1;
        assert!((est.mean - exact).abs() < 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn single_path_estimate_is_that_path() {
        let m = ex3();
        let s = premium_hold(&m);
        let cfg = SimConfig::new(&m, 1, 99);
        let one = simulate_path(&s, 2.0, 0.0, &m, &cfg, 0);
        let est = estimate_value(&s, 2.0, 0.0, &m, &cfg);
        assert_eq!(est.mean, one.discounted_dividends);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn rates_never_decrease_and_outcomes_are_bounded() {
        let m = ex3();
        let s = premium_hold(&m);
        let cfg = SimConfig::new(&m, 1, 5);
        let sim = Simulator::new(&s, &m);
        for stream in 0..200 {
            let (out, trace) = sim.path_with_trace(1.0, 0.0, &cfg, stream);
            assert!(trace.windows(2).all(|w| w[1].1 >= w[0].1));
            assert!(out.discounted_dividends <= m.value_bound() + 1e-12);
            assert!(out.discounted_dividends >= 0.0);
            assert!(out.switch_count <= 3);
        }
    }

    #[test]
    fn paths_are_reproducible() {
        let m = ex3();
        let s = premium_hold(&m);
        let cfg = SimConfig { antithetic: true, ..SimConfig::new(&m, 64, 17) };
        assert_eq!(estimate_value(&s, 1.5, 0.0, &m, &cfg), estimate_value(&s, 1.5, 0.0, &m, &cfg));
    }

    #[test]
    fn constant_piece_discounts_exactly() {
        // No claims can ruin a path that never sees one: with a tiny
        // intensity the outcome is the full annuity up to the horizon.
        let p = ModelParams { premium_rate: 1.0, claim_intensity: 1e-12, discount_rate: 0.1, dividend_ceiling: 0.5 };
        let m = validate_model(p, crate::model::ClaimDistribution::exponential(1.0)).unwrap();
        let s = FiniteStrategy::constant(0.5);
        let cfg = SimConfig::new(&m, 1, 0);
        let out = simulate_path(&s, 1.0, 0.5, &m, &cfg, 0);
        assert!(out.horizon_exceeded);
        assert!((out.discounted_dividends - 5.0).abs() < 5.0 * BIAS_TOL * 1.01);
    }
}
