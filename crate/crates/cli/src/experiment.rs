//! Preset runner: both recursions, the convergence table, the benchmark
//! without ratcheting, the derivative profile and Monte Carlo spot checks,
//! scored against the preset's reference values.

use std::path::Path;
use std::time::{Duration, Instant};

use log::info;
use ratchet_core::ide::IdeSolver;
use ratchet_core::montecarlo::SimConfig;
use ratchet_core::profile::{derivative_profile, DerivativeProfile};
use ratchet_core::ratchet::{
    backward_recursion_with, build_rate_grid, extract_free_boundary, table_from_slices, ConvergenceTable,
    ObstacleTolerances, Recursion,
};
use ratchet_core::unconstrained::{optimize_band_nr, optimize_threshold_nr, BandSolution, ThresholdSolution};
use ratchet_core::{ValidatedModel, ValueCurve, XGrid};
use serde::Serialize;

use crate::error::CliError;
use crate::formats::{self, EstimateRecord};
use crate::presets::{ExperimentPreset, Quantity, Tolerance};
use crate::svg;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceCheck {
    pub name: String,
    pub expected: f64,
    pub tolerance: Tolerance,
    /// `None` when the run did not produce the quantity at all.
    pub actual: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCheck {
    #[serde(flatten)]
    pub estimate: EstimateRecord,
    /// Solver value at the same state, when the starting rate is on the grid.
    pub solver: Option<f64>,
    /// `(mean - solver) / stderr`.
    pub z: Option<f64>,
    /// Wall time of the simulation, kept out of the report so that reports
    /// stay reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub levels: usize,
    pub two_component: usize,
    pub worst_residual: f64,
    pub worst_gap: f64,
}

impl LevelSummary {
    fn of(rec: &Recursion) -> Self {
        LevelSummary {
            levels: rec.levels.len(),
            two_component: rec.levels.iter().filter(|l| l.phase == 2).count(),
            worst_residual: rec.levels.iter().map(|l| l.residual).fold(f64::NEG_INFINITY, f64::max),
            worst_gap: rec.levels.iter().map(|l| l.obstacle_gap).fold(0.0, f64::max),
        }
    }
}

type Bounds = Vec<(f64, Option<f64>)>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub preset: String,
    pub premium_rate: f64,
    pub claim_intensity: f64,
    pub discount_rate: f64,
    pub dividend_ceiling: f64,
    pub x_max: f64,
    pub h: f64,
    pub n: u32,
    /// Components of the lowest change set with a single switch.
    pub one_switch: Bounds,
    pub one_switch_levels: LevelSummary,
    pub refined_levels: LevelSummary,
    pub nr_threshold: f64,
    /// Pay-ceiling set of the best band strategy, when searched.
    pub band_pay_ceiling: Option<Bounds>,
    pub table: Vec<(u32, f64)>,
    pub kink: Option<f64>,
    pub nested: bool,
    pub single_intervals: bool,
    pub monte_carlo: Vec<McCheck>,
    pub checks: Vec<ReferenceCheck>,
}

impl ExperimentReport {
    pub fn misses(&self) -> Vec<ReferenceCheck> {
        self.checks.iter().filter(|c| !c.pass).cloned().collect()
    }
}

/// Everything an experiment computed.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub preset: ExperimentPreset,
    pub model: ValidatedModel,
    pub grid: XGrid,
    pub one_switch: Recursion,
    pub refined: Recursion,
    pub table: ConvergenceTable,
    pub nr: ThresholdSolution,
    pub band: Option<BandSolution>,
    pub profile: DerivativeProfile,
    pub report: ExperimentReport,
}

impl ExperimentRun {
    /// Value curve of the benchmark without ratcheting.
    pub fn nr_curve(&self) -> &ValueCurve {
        self.band.as_ref().map_or(&self.nr.curve, |b| &b.curve)
    }

    /// `Err(ReferenceMiss)` when any reference value was missed.
    pub fn check(&self) -> Result<(), CliError> {
        let misses = self.report.misses();
        if misses.is_empty() {
            Ok(())
        } else {
            Err(CliError::ReferenceMiss(misses))
        }
    }
}

/// Solves levels `0..=n` and keeps the full recursions at `0` and `n`.
pub fn refinement_ladder(
    solver: &IdeSolver,
    tol: &ObstacleTolerances,
    n: u32,
) -> Result<(Recursion, Recursion, ConvergenceTable), CliError> {
    let model = solver.model();
    let mut bottom = Vec::with_capacity(n as usize + 1);
    let mut first = None;
    let mut last = None;
    for level in 0..=n {
        let rec = backward_recursion_with(solver, &build_rate_grid(level, model), tol)?;
        info!("level n={level}: {} rates solved", rec.surface.rates.len());
        bottom.push(rec.surface.curve(0).clone());
        if level == 0 {
            first = Some(rec.clone());
        }
        if level == n {
            last = Some(rec);
        }
    }
    let table = table_from_slices(bottom);
    Ok((first.expect("level zero solved"), last.expect("top level solved"), table))
}

pub fn run_experiment(preset: &ExperimentPreset) -> Result<ExperimentRun, CliError> {
    let resolved = preset.to_config().resolve(Path::new("."))?;
    let (model, grid) = (resolved.model, resolved.grid);
    let solver = IdeSolver::new(&model, grid);
    let (one_switch, refined, table) = refinement_ladder(&solver, &resolved.tolerances, preset.n)?;
    let nr = optimize_threshold_nr(&solver)?;
    info!("threshold benchmark at {}", nr.threshold);
    let band = if preset.band { Some(optimize_band_nr(&solver)?) } else { None };
    let profile = derivative_profile(refined.surface.curve(0));

    let mut monte_carlo = Vec::new();
    for &(x0, c0) in &preset.mc_points {
        let mc = mc_check(&refined, &model, x0, c0, &resolved.sim);
        info!("monte carlo at ({x0}, {c0}): {} +- {}", mc.estimate.mean, mc.estimate.stderr);
        monte_carlo.push(mc);
    }

    let sets = &refined.strategy.change_sets;
    let nested = sets.windows(2).all(|w| w[1].is_subset_of(&w[0]));
    let single_intervals = sets.iter().all(|s| s.is_single_threshold());
    let lowest = &one_switch.strategy.change_sets[0];
    let band_bounds = band.as_ref().map(|b| b.spec.pay_ceiling.clone());
    let kink = profile.largest_jump().map(|j| j.x);

    let actual = |q: Quantity| -> Option<f64> {
        match q {
            Quantity::OneSwitchThreshold => lowest.threshold(),
            Quantity::OneSwitchLowerEnd => {
                lowest.bounds().into_iter().find(|&(a, b)| a == 0.0 && b.is_some()).and_then(|(_, b)| b)
            }
            Quantity::NrThreshold => Some(nr.threshold),
            Quantity::BandLowerEnd => band.as_ref().and_then(|b| b.spec.lower_band()),
            Quantity::BandThreshold => band.as_ref().map(|b| b.spec.upper_threshold()),
            Quantity::TableEntry(n) => table.rows.iter().find(|r| r.0 == n).map(|r| r.1),
            Quantity::KinkLocation => kink,
            Quantity::Nested => Some(f64::from(u8::from(nested))),
            Quantity::SingleIntervals => Some(f64::from(u8::from(single_intervals))),
        }
    };
    let checks = preset
        .references
        .iter()
        .map(|r| {
            let a = actual(r.quantity);
            ReferenceCheck {
                name: r.quantity.label(),
                expected: r.expected,
                tolerance: r.tolerance,
                actual: a,
                pass: a.is_some_and(|a| r.tolerance.accepts(r.expected, a)),
            }
        })
        .collect();

    let report = ExperimentReport {
        preset: preset.name.to_string(),
        premium_rate: preset.params.premium_rate,
        claim_intensity: preset.params.claim_intensity,
        discount_rate: preset.params.discount_rate,
        dividend_ceiling: preset.params.dividend_ceiling,
        x_max: grid.x_max(),
        h: grid.step(),
        n: preset.n,
        one_switch: lowest.bounds(),
        one_switch_levels: LevelSummary::of(&one_switch),
        refined_levels: LevelSummary::of(&refined),
        nr_threshold: nr.threshold,
        band_pay_ceiling: band_bounds,
        table: table.rows.clone(),
        kink,
        nested,
        single_intervals,
        monte_carlo,
        checks,
    };
    Ok(ExperimentRun { preset: preset.clone(), model, grid, one_switch, refined, table, nr, band, profile, report })
}

/// Monte Carlo estimate of the refined strategy at `(x0, c0)` next to the
/// solver value there.
pub fn mc_check(rec: &Recursion, model: &ValidatedModel, x0: f64, c0: f64, sim: &SimConfig) -> McCheck {
    let start = Instant::now();
    let est = crate::simulate::estimate(&rec.strategy, model, x0, c0, sim);
    let elapsed = start.elapsed();
    let solver = rec.surface.at_rate(c0).map(|c| c.eval(x0));
    let z = solver.map(|v| (est.mean - v) / est.std_error);
    McCheck { estimate: EstimateRecord::new(x0, c0, &est, sim), solver, z, elapsed }
}

/// Stride that leaves at most `samples` points below `x_limit`.
pub fn stride_for(grid: &XGrid, x_limit: f64, samples: usize) -> usize {
    let nodes = grid.node(x_limit.min(grid.x_max()));
    nodes.div_ceil(samples).max(1)
}

/// Writes report and data files of a finished run into `dir`.
pub fn write_experiment(run: &ExperimentRun, dir: &Path) -> Result<(), CliError> {
    let limit = run.preset.plot_limit;
    let stride = stride_for(&run.grid, limit, 500);
    let put = |name: &str, text: String| formats::write_atomic(&dir.join(name), text.as_bytes());
    put("report.json", formats::to_json(&run.report))?;
    put("surface.csv", formats::surface_csv(&run.refined.surface, stride, Some(limit)))?;
    put("region.csv", formats::region_csv(&run.refined.strategy))?;
    let fb = extract_free_boundary(&run.refined.strategy, &run.grid);
    put("boundary.csv", formats::boundary_csv(&fb, stride, Some(limit)))?;
    put("table.csv", formats::table_csv(&run.table))?;
    let (vr, v0, vnr) = (run.refined.surface.curve(0), run.one_switch.surface.curve(0), run.nr_curve());
    put("compare.csv", formats::compare_csv(vr, v0, vnr, stride, Some(limit)))?;
    put("region.svg", svg::region_plot(&format!("{}: change region", run.preset.name), &run.refined.strategy, limit))?;
    put("curves.svg", difference_plot(run.preset.name, vr, v0, vnr, stride, limit))?;
    Ok(())
}

pub fn difference_plot(
    title: &str,
    vr: &ValueCurve,
    v0: &ValueCurve,
    vnr: &ValueCurve,
    stride: usize,
    limit: f64,
) -> String {
    let nodes = formats::sample_nodes(vr, stride, Some(limit));
    let g = *vr.grid();
    let series = |f: &dyn Fn(usize) -> f64| nodes.iter().map(|&i| (g.x(i), f(i))).collect::<Vec<_>>();
    let (a, b, c) = (vr.values(), v0.values(), vnr.values());
    svg::line_plot(
        &format!("{title}: value differences at rate zero"),
        "surplus x",
        "difference",
        &[("ratchet - one switch", series(&|i| a[i] - b[i])), ("unconstrained - ratchet", series(&|i| c[i] - a[i]))],
    )
}
