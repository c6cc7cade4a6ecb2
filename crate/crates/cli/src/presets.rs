//! The four reference experiments with their published values.

use ratchet_core::{ClaimDistribution, ModelParams};
use serde::Serialize;

use crate::config::{ClaimBlock, ModelBlock, RunConfig, SimBlock, SolverBlock};

/// A number the experiment should reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "quantity", content = "n")]
pub enum Quantity {
    /// Start of the unbounded component of the lowest change set at `n = 0`.
    OneSwitchThreshold,
    /// Right end of the component at zero of that change set.
    OneSwitchLowerEnd,
    /// Best single threshold without ratcheting.
    NrThreshold,
    /// Right end of the pay-ceiling component at zero of the best band.
    BandLowerEnd,
    /// Start of the unbounded pay-ceiling component of the best band.
    BandThreshold,
    /// `max_x {V^n_max(x,0) - V^n(x,0)}` for the given `n`.
    TableEntry(u32),
    /// Location of the largest derivative jump of `V^n(., 0)`.
    KinkLocation,
    /// 1 when every change set contains the one above it.
    Nested,
    /// 1 when every change set is a single right-unbounded interval.
    SingleIntervals,
}

impl Quantity {
    pub fn label(&self) -> String {
        match self {
            Quantity::OneSwitchThreshold => "one_switch.threshold".into(),
            Quantity::OneSwitchLowerEnd => "one_switch.lower_end".into(),
            Quantity::NrThreshold => "nr.threshold".into(),
            Quantity::BandLowerEnd => "band.lower_end".into(),
            Quantity::BandThreshold => "band.threshold".into(),
            Quantity::TableEntry(n) => format!("table.n{n}"),
            Quantity::KinkLocation => "kink.x".into(),
            Quantity::Nested => "structure.nested".into(),
            Quantity::SingleIntervals => "structure.single_intervals".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Tolerance {
    Absolute(f64),
    Relative(f64),
    Exact,
}

impl Tolerance {
    pub fn accepts(&self, expected: f64, actual: f64) -> bool {
        match *self {
            Tolerance::Absolute(t) => (actual - expected).abs() <= t,
            Tolerance::Relative(t) => (actual - expected).abs() <= t * expected.abs(),
            Tolerance::Exact => actual == expected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub quantity: Quantity,
    pub expected: f64,
    pub tolerance: Tolerance,
}

const fn abs(quantity: Quantity, expected: f64, t: f64) -> Reference {
    Reference { quantity, expected, tolerance: Tolerance::Absolute(t) }
}

const fn rel(quantity: Quantity, expected: f64, t: f64) -> Reference {
    Reference { quantity, expected, tolerance: Tolerance::Relative(t) }
}

const fn holds(quantity: Quantity) -> Reference {
    Reference { quantity, expected: 1.0, tolerance: Tolerance::Exact }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: &'static str,
    pub params: ModelParams,
    pub claims: ClaimDistribution,
    pub x_max: f64,
    pub h: f64,
    pub n: u32,
    /// Surplus and starting rate of each Monte Carlo check.
    pub mc_points: Vec<(f64, f64)>,
    pub mc_paths: usize,
    pub mc_seed: u64,
    pub kill_after: Option<f64>,
    /// Whether to search two-band strategies for the benchmark.
    pub band: bool,
    /// Right end of the plotted surplus range.
    pub plot_limit: f64,
    pub references: Vec<Reference>,
}

pub const NAMES: [&str; 4] = ["example1", "example2", "example3", "example4"];

/// Built-in preset by name.
pub fn preset(name: &str) -> Option<ExperimentPreset> {
    use Quantity::*;
    let ex1 = ModelParams { premium_rate: 2.3, claim_intensity: 4.0, discount_rate: 0.1, dividend_ceiling: 1.72 };
    let table = |vals: [f64; 8]| -> Vec<Reference> {
        vals.iter().enumerate().map(|(n, &v)| rel(TableEntry(n as u32), v, if n <= 3 { 0.2 } else { 0.5 })).collect()
    };
    let p = match name {
        "example1" => ExperimentPreset {
            name: "example1",
            params: ex1,
            claims: ClaimDistribution::exponential(2.0),
            x_max: 150.0,
            h: 0.005,
            n: 8,
            mc_points: vec![(0.5, 0.0), (2.0, 0.0), (5.0, 0.0)],
            mc_paths: 100_000,
            mc_seed: 1,
            kill_after: None,
            band: false,
            plot_limit: 10.0,
            references: [
                vec![abs(OneSwitchThreshold, 2.00, 0.05), abs(NrThreshold, 1.57, 0.05), holds(Nested)],
                table([8.05e-3, 2.73e-3, 4.96e-4, 1.17e-4, 2.79e-4, 6.72e-6, 1.62e-6, 3.23e-7]),
            ]
            .concat(),
        },
        "example2" => ExperimentPreset {
            name: "example2",
            params: ModelParams {
                premium_rate: 100.0,
                claim_intensity: 450.0,
                discount_rate: 0.1,
                dividend_ceiling: 8.0,
            },
            claims: ClaimDistribution::exponential(5.0),
            x_max: 100.0,
            h: 0.005,
            n: 8,
            mc_points: vec![(2.0, 0.0), (10.0, 0.0), (20.0, 0.0)],
            mc_paths: 100_000,
            mc_seed: 2,
            kill_after: Some(5.0),
            band: false,
            plot_limit: 40.0,
            references: vec![
                abs(OneSwitchThreshold, 18.79, 0.30),
                abs(NrThreshold, 9.26, 0.15),
                rel(TableEntry(0), 7.80e-1, 0.2),
            ],
        },
        "example3" => ExperimentPreset {
            name: "example3",
            params: ModelParams { dividend_ceiling: 4.6, ..ex1 },
            claims: ClaimDistribution::exponential(2.0),
            x_max: 400.0,
            h: 0.005,
            n: 8,
            mc_points: vec![(0.5, 0.0), (3.0, 0.0), (5.0, 0.0), (0.0, 2.3)],
            mc_paths: 100_000,
            mc_seed: 3,
            kill_after: None,
            band: false,
            plot_limit: 10.0,
            references: vec![
                abs(OneSwitchThreshold, 3.40, 0.10),
                abs(NrThreshold, 1.76, 0.05),
                rel(TableEntry(0), 2.89e-1, 0.2),
                holds(Nested),
                holds(SingleIntervals),
            ],
        },
        "example4" => ExperimentPreset {
            name: "example4",
            params: ModelParams {
                premium_rate: 21.4,
                claim_intensity: 10.0,
                discount_rate: 0.1,
                dividend_ceiling: 16.5,
            },
            claims: ClaimDistribution::Erlang2,
            x_max: 1100.0,
            h: 0.005,
            n: 8,
            mc_points: vec![(0.05, 0.0), (5.0, 0.0), (15.0, 0.0)],
            mc_paths: 100_000,
            mc_seed: 4,
            kill_after: None,
            band: true,
            plot_limit: 25.0,
            references: vec![
                abs(BandLowerEnd, 0.22, 0.05),
                abs(BandThreshold, 12.05, 0.05),
                abs(OneSwitchLowerEnd, 0.10, 0.05),
                abs(OneSwitchThreshold, 13.13, 0.30),
                abs(KinkLocation, 0.076, 0.01),
                rel(TableEntry(0), 5.65e-2, 0.2),
            ],
        },
        _ => return None,
    };
    Some(p)
}

impl ExperimentPreset {
    /// The preset as a run configuration, e.g. for the `solve` family of
    /// commands.
    pub fn to_config(&self) -> RunConfig {
        let claim_distribution = match &self.claims {
            ClaimDistribution::Exponential { rate } => ClaimBlock::Exponential { rate: *rate },
            ClaimDistribution::Erlang2 => ClaimBlock::Erlang2,
            ClaimDistribution::Tabulated(_) => unreachable!("presets use parametric claims"),
        };
        RunConfig {
            model: ModelBlock {
                premium_rate: self.params.premium_rate,
                claim_intensity: self.params.claim_intensity,
                discount_rate: self.params.discount_rate,
                dividend_ceiling: self.params.dividend_ceiling,
                claim_distribution,
            },
            solver: SolverBlock { x_max: Some(self.x_max), h: Some(self.h), residual_tol: None, n: self.n },
            sim: SimBlock {
                paths: self.mc_paths,
                seed: self.mc_seed,
                horizon: None,
                kill_after: self.kill_after,
                antithetic: false,
            },
        }
    }
}
