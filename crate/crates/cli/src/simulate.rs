//! Parallel Monte Carlo on top of the sequential engine in the core crate.

use ratchet_core::montecarlo::{summarize, Estimate, PathOutcome, SimConfig, Simulator};
use ratchet_core::{FiniteStrategy, ValidatedModel};
use rayon::prelude::*;

/// Same estimate as the sequential one, bit for bit: path `i` depends only
/// on the seed and `i`, and outcomes are summed in index order.
pub fn estimate(strategy: &FiniteStrategy, model: &ValidatedModel, x0: f64, c0: f64, config: &SimConfig) -> Estimate {
    let sim = Simulator::new(strategy, model);
    let outcomes: Vec<PathOutcome> =
        (0..config.paths).into_par_iter().map(|i| sim.indexed_path(x0, c0, config, i)).collect();
    summarize(&outcomes, config.antithetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ratchet_core::model::validate_model;
    use ratchet_core::{ClaimDistribution, ModelParams};

    #[test]
    fn matches_the_sequential_estimate() {
        let p = ModelParams { premium_rate: 2.3, claim_intensity: 4.0, discount_rate: 0.1, dividend_ceiling: 1.72 };
        let m = validate_model(p, ClaimDistribution::exponential(2.0)).unwrap();
        let s = FiniteStrategy::constant(1.72);
        let cfg = SimConfig::new(&m, 500, 9);
        let seq = ratchet_core::montecarlo::estimate_value(&s, 3.0, 1.72, &m, &cfg);
        assert_eq!(estimate(&s, &m, 3.0, 1.72, &cfg), seq);
    }
}
