//! Finite ratcheting: rate grids, the backward obstacle recursion, change
//! regions and free boundaries.
//!
//! With rates `c_0 < … < c_M = c̄`, the top slice `V(·,c_M)` pays the ceiling
//! forever. Each lower slice solves
//!
//! ```text
//! max{ L_{c_k}(v), V(·,c_{k+1}) - v } = 0
//! ```
//!
//! by searching over change sets of the form `[d,∞)` and, when that family
//! fails verification, `[0,d1] ∪ [d2,∞)`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::ide::{Family, IdeError, IdeSolver, ValueCurve, XGrid};
use crate::model::ValidatedModel;
use crate::search;

/// Increasing dividend rates ending at the ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct RateGrid {
    rates: Vec<f64>,
    level: u32,
}

impl RateGrid {
    /// Arbitrary strictly increasing rates; the last one is the ceiling.
    pub fn from_rates(rates: Vec<f64>, level: u32) -> Result<Self, RatchetError> {
        if rates.is_empty() || rates.windows(2).any(|w| w[1] <= w[0]) || rates[0] < 0.0 {
            return Err(RatchetError::InvalidRateGrid);
        }
        Ok(RateGrid { rates, level })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn ceiling(&self) -> f64 {
        self.rates[self.rates.len() - 1]
    }

    /// Index of a rate present in the grid (within a relative `1e-12`).
    pub fn index_of(&self, c: f64) -> Option<usize> {
        self.rates.iter().position(|r| (r - c).abs() <= 1e-12 * (1.0 + c.abs()))
    }
}

/// `{k c̄ / 2^n : k = 0..=2^n}`, with the premium rate added when the
/// ceiling exceeds it and `n >= 1`. Level 0 is the one-switch problem
/// `{0, c̄}` and never contains `p`. A grid point within rounding of `p` is
/// replaced by `p` itself.
pub fn build_rate_grid(n: u32, model: &ValidatedModel) -> RateGrid {
    let c_bar = model.ceiling();
    let p = model.premium();
    let m = 1usize << n;
    let mut rates: Vec<f64> = (0..=m).map(|k| k as f64 * c_bar / m as f64).collect();
    if c_bar > p && n > 0 {
        match rates.iter().position(|r| (r - p).abs() <= 1e-12 * p) {
            Some(i) => rates[i] = p,
            None => {
                let at = rates.iter().position(|&r| r > p).unwrap_or(rates.len());
                rates.insert(at, p);
            }
        }
    }
    RateGrid { rates, level: n }
}

/// Closed node interval `[start, end]`; `end` at the last node means the
/// interval is unbounded on the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeInterval {
    pub start: usize,
    pub end: usize,
}

/// The set of surplus levels where rate `c_k` is abandoned for `c_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeSet {
    pub index: usize,
    pub rate: f64,
    grid: XGrid,
    intervals: Vec<NodeInterval>,
}

impl ChangeSet {
    pub fn new(index: usize, rate: f64, grid: XGrid, mut intervals: Vec<NodeInterval>) -> Self {
        intervals.sort_by_key(|iv| iv.start);
        let mut merged: Vec<NodeInterval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.start <= last.end + 1 => last.end = last.end.max(iv.end),
                _ => merged.push(iv),
            }
        }
        ChangeSet { index, rate, grid, intervals: merged }
    }

    pub fn intervals(&self) -> &[NodeInterval] {
        &self.intervals
    }

    pub fn grid(&self) -> &XGrid {
        &self.grid
    }

    /// Intervals in surplus units; `None` marks an unbounded right end.
    pub fn bounds(&self) -> Vec<(f64, Option<f64>)> {
        let last = self.grid.intervals();
        self.intervals
            .iter()
            .map(|iv| (self.grid.x(iv.start), if iv.end >= last { None } else { Some(self.grid.x(iv.end)) }))
            .collect()
    }

    pub fn contains_node(&self, i: usize) -> bool {
        self.intervals.iter().any(|iv| iv.start <= i && i <= iv.end)
    }

    /// Membership of an arbitrary surplus level, with the grid intervals read
    /// as closed real intervals.
    pub fn contains(&self, x: f64) -> bool {
        let tol = 1e-9 * self.grid.step();
        let last = self.grid.intervals();
        self.intervals
            .iter()
            .any(|iv| x >= self.grid.x(iv.start) - tol && (iv.end >= last || x <= self.grid.x(iv.end) + tol))
    }

    /// Start of the right-unbounded component.
    pub fn threshold(&self) -> Option<f64> {
        self.bounds().iter().find(|(_, b)| b.is_none()).map(|(a, _)| *a)
    }

    /// Last node of a bounded component starting at zero.
    pub fn lower_split(&self) -> Option<usize> {
        let n = self.grid.intervals();
        self.intervals.iter().find(|iv| iv.start == 0 && iv.end < n).map(|iv| iv.end)
    }

    pub fn is_single_threshold(&self) -> bool {
        self.intervals.len() == 1 && self.threshold().is_some()
    }

    /// `self ⊆ other` on the grid.
    pub fn is_subset_of(&self, other: &ChangeSet) -> bool {
        self.intervals.iter().all(|iv| other.intervals.iter().any(|o| o.start <= iv.start && iv.end <= o.end))
    }
}

/// One value curve per rate of a [`RateGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub rates: RateGrid,
    pub curves: Vec<ValueCurve>,
}

impl ValueSurface {
    pub fn curve(&self, k: usize) -> &ValueCurve {
        &self.curves[k]
    }

    /// Slice at a rate present in the grid.
    pub fn at_rate(&self, c: f64) -> Option<&ValueCurve> {
        self.rates.index_of(c).map(|k| &self.curves[k])
    }
}

/// A rate grid and the change set of every rate below the ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteStrategy {
    pub rates: RateGrid,
    pub change_sets: Vec<ChangeSet>,
}

impl FiniteStrategy {
    /// Index `min{k : c_k ≥ c, x ∉ D_k}`, or the ceiling index when none.
    pub fn next_index(&self, x: f64, c: f64) -> usize {
        let rates = self.rates.rates();
        let last = rates.len() - 1;
        let tol = 1e-12 * (1.0 + c.abs());
        (0..last).find(|&k| rates[k] >= c - tol && !self.change_sets[k].contains(x)).unwrap_or(last)
    }

    /// The strategy with a single rate, the ceiling.
    pub fn constant(c_bar: f64) -> Self {
        FiniteStrategy { rates: RateGrid { rates: alloc::vec![c_bar], level: 0 }, change_sets: Vec::new() }
    }
}

/// Rate the stationary strategy pays at state `(x, c)`.
pub fn next_rate(strategy: &FiniteStrategy, x: f64, c: f64) -> f64 {
    strategy.rates.rates()[strategy.next_index(x, c)]
}

/// Tolerances of the obstacle search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleTolerances {
    /// Largest dip of the candidate below the obstacle accepted in the
    /// single-threshold family.
    pub switch_tol: f64,
    /// Largest supersolution residual accepted by verification.
    pub verify_tol: f64,
    /// Slack for calling two slices equal.
    pub equality_tol: f64,
}

impl ObstacleTolerances {
    pub fn for_model(model: &ValidatedModel) -> Self {
        let scale = model.value_bound();
        ObstacleTolerances { switch_tol: 1e-6 * scale, verify_tol: 1e-3 * scale, equality_tol: 1e-8 * scale }
    }
}

/// Outcome of one obstacle level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSolution {
    pub curve: ValueCurve,
    pub change_set: ChangeSet,
    /// 1 for the single-threshold family, 2 for the two-component one.
    pub phase: u8,
    /// Largest `obstacle - v` on the non-change set.
    pub obstacle_gap: f64,
    /// Largest supersolution residual away from junctions.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
struct Choice {
    split: Option<usize>,
    d: usize,
    score: f64,
}

/// Solves the obstacle problem for rate index `k` against the slice above.
pub fn solve_obstacle_level(
    solver: &IdeSolver,
    k: usize,
    c: f64,
    obstacle: &ValueCurve,
    tol: &ObstacleTolerances,
) -> Result<LevelSolution, RatchetError> {
    solve_level(solver, k, c, obstacle, tol, None)
}

/// Like [`solve_obstacle_level`], with the lower split of a neighbouring
/// level as a starting point for the two-component search.
fn solve_level(
    solver: &IdeSolver,
    k: usize,
    c: f64,
    obstacle: &ValueCurve,
    tol: &ObstacleTolerances,
    hint: Option<usize>,
) -> Result<LevelSolution, RatchetError> {
    let grid = *solver.grid();
    if obstacle.grid() != &grid {
        return Err(RatchetError::ObstacleInvalid { index: k, reason: "obstacle lives on another grid" });
    }
    let obs = obstacle.values();
    let n = grid.intervals();

    let fam = solver.family(c, obs, None);
    let cand = fam.best(obs);
    let first = Choice { split: None, d: cand.d, score: cand.score };
    let (curve, gap, residual) = evaluate(solver, c, obs, &fam, first);
    if gap <= tol.switch_tol && residual <= tol.switch_tol {
        return Ok(finish(k, c, grid, curve, first, 1, gap, residual));
    }

    // Two components: [0, j] ∪ [d, ∞). The single threshold says nothing
    // about where j sits (it is 0 when switching everywhere scores best), so
    // the whole grid is searched. A positive residual can be discretization
    // error as well as a missing component, so the two families compete on
    // score.
    let hi = n - 1;
    let mut cache: BTreeMap<usize, Choice> = BTreeMap::new();
    let mut score_of = |j: usize| -> f64 {
        if let Some(ch) = cache.get(&j) {
            return ch.score;
        }
        let fam = solver.family(c, obs, Some(j));
        let cand = fam.best(obs);
        let ch = Choice { split: Some(j), d: cand.d, score: cand.score };
        cache.insert(j, ch);
        ch.score
    };
    let (mut j, mut best) = match hint {
        Some(h) => search::climb_max(0, hi, h, &mut score_of),
        None => search::bracketed_max(0, hi, ((hi + 1) / 32).max(1), &mut score_of),
    };
    for cand in j.saturating_sub(2)..=(j + 2).min(hi) {
        let s = score_of(cand);
        if s > best || (s == best && cand < j) {
            best = s;
            j = cand;
        }
    }
    let second = cache[&j];
    let phase1_ok = gap <= tol.verify_tol && residual <= tol.verify_tol;
    if second.score <= first.score + tol.equality_tol && phase1_ok {
        return Ok(finish(k, c, grid, curve, first, 1, gap, residual));
    }
    let fam2 = solver.family(c, obs, Some(j));
    let (curve2, gap2, residual2) = evaluate(solver, c, obs, &fam2, second);
    if gap2 <= tol.verify_tol && residual2 <= tol.verify_tol {
        return Ok(finish(k, c, grid, curve2, second, 2, gap2, residual2));
    }
    if phase1_ok {
        return Ok(finish(k, c, grid, curve, first, 1, gap, residual));
    }
    Err(RatchetError::VerificationFailed { index: k, rate: c, residual: residual2.min(residual), gap: gap2.min(gap) })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    k: usize,
    c: f64,
    grid: XGrid,
    values: Vec<f64>,
    ch: Choice,
    phase: u8,
    gap: f64,
    residual: f64,
) -> LevelSolution {
    let n = grid.intervals();
    let mut intervals = alloc::vec![NodeInterval { start: ch.d, end: n }];
    if let Some(j) = ch.split {
        // Above the premium every slice vanishes at zero surplus (immediate
        // ruin), so a lone node there carries no decision.
        if j > 0 || values[0] != 0.0 {
            intervals.push(NodeInterval { start: 0, end: j });
        }
    }
    LevelSolution {
        curve: ValueCurve::new(grid, values).expect("family curves are finite"),
        change_set: ChangeSet::new(k, c, grid, intervals),
        phase,
        obstacle_gap: gap,
        residual,
    }
}

/// Composite curve, obstacle gap on the non-change set, and supersolution
/// residual away from the junctions.
fn evaluate(solver: &IdeSolver, c: f64, obs: &[f64], fam: &Family, ch: Choice) -> (Vec<f64>, f64, f64) {
    let values = fam.curve(obs, ch.d);
    let lo = fam.free_start();
    let gap = (lo..ch.d).map(|i| obs[i] - values[i]).fold(0.0, f64::max);
    let mut junctions = alloc::vec![ch.d];
    if let Some(j) = ch.split {
        junctions.push(j);
        junctions.push(j + 1);
    }
    let l = solver.supersolution_operator(&values, c);
    let residual = l
        .iter()
        .enumerate()
        .filter(|(i, _)| junctions.iter().all(|&jn| i.abs_diff(jn) > 2))
        .filter_map(|(_, r)| *r)
        .fold(f64::NEG_INFINITY, f64::max);
    (values, gap, residual)
}

/// Diagnostics of one level of the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelReport {
    pub index: usize,
    pub rate: f64,
    pub phase: u8,
    pub obstacle_gap: f64,
    pub residual: f64,
}

/// Result of [`backward_recursion`].
#[derive(Debug, Clone, PartialEq)]
pub struct Recursion {
    pub surface: ValueSurface,
    pub strategy: FiniteStrategy,
    pub levels: Vec<LevelReport>,
}

/// Computes every slice from the ceiling downwards.
pub fn backward_recursion(solver: &IdeSolver, rates: &RateGrid) -> Result<Recursion, RatchetError> {
    backward_recursion_with(solver, rates, &ObstacleTolerances::for_model(solver.model()))
}

pub fn backward_recursion_with(
    solver: &IdeSolver,
    rates: &RateGrid,
    tol: &ObstacleTolerances,
) -> Result<Recursion, RatchetError> {
    let m = rates.len() - 1;
    let top = solver.solve_top_level()?;
    let mut curves: Vec<Option<ValueCurve>> = alloc::vec![None; m + 1];
    let mut sets: Vec<Option<ChangeSet>> = alloc::vec![None; m];
    let mut levels = Vec::with_capacity(m);
    let mut hint = None;
    curves[m] = Some(top);
    for k in (0..m).rev() {
        let c = rates.rates()[k];
        let above = curves[k + 1].as_ref().expect("filled from the top");
        let level = solve_level(solver, k, c, above, tol, hint)?;
        hint = level.change_set.lower_split().or(hint);
        levels.push(LevelReport {
            index: k,
            rate: c,
            phase: level.phase,
            obstacle_gap: level.obstacle_gap,
            residual: level.residual,
        });
        curves[k] = Some(level.curve);
        sets[k] = Some(level.change_set);
    }
    levels.reverse();
    let curves: Vec<ValueCurve> = curves.into_iter().map(|c| c.expect("every level solved")).collect();
    let change_sets: Vec<ChangeSet> = sets.into_iter().map(|s| s.expect("every level solved")).collect();
    Ok(Recursion {
        surface: ValueSurface { rates: rates.clone(), curves },
        strategy: FiniteStrategy { rates: rates.clone(), change_sets },
        levels,
    })
}

/// `max_x {V^{n_max}(x,0) - V^n(x,0)}` for `n < n_max`, with the slices at
/// rate zero of every level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<(u32, f64)>,
    pub bottom_slices: Vec<ValueCurve>,
}

pub fn convergence_table(solver: &IdeSolver, n_max: u32) -> Result<ConvergenceTable, RatchetError> {
    let mut bottom = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let rec = backward_recursion(solver, &build_rate_grid(n, solver.model()))?;
        bottom.push(rec.surface.curves.into_iter().next().expect("rate zero slice"));
    }
    Ok(table_from_slices(bottom))
}

/// Builds the table from the rate-zero slices of levels `0..=n_max`.
pub fn table_from_slices(bottom: Vec<ValueCurve>) -> ConvergenceTable {
    let finest = bottom.last().expect("at least one level").values().to_vec();
    let rows = bottom[..bottom.len() - 1]
        .iter()
        .enumerate()
        .map(|(n, curve)| {
            let diff = finest.iter().zip(curve.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
            (n as u32, diff)
        })
        .collect();
    ConvergenceTable { rows, bottom_slices: bottom }
}

/// Free boundary of a strategy sampled on its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundary {
    pub x: Vec<f64>,
    /// Rate paid from `(x, 0)`; for two-sided regions this is the lower
    /// curve `C₂*`.
    pub c_star: Vec<f64>,
    /// Upper curve `C₁*` when some change set has more than one component.
    pub c1_star: Option<Vec<f64>>,
}

/// `C*(x)` is the rate the strategy moves to from `(x, 0)`. When change sets
/// have several components the upper curve `C₁*(x)` is the smallest rate
/// above `C*(x)` whose change set contains `x` again (the ceiling if none).
pub fn extract_free_boundary(strategy: &FiniteStrategy, grid: &XGrid) -> FreeBoundary {
    let rates = strategy.rates.rates();
    let x: Vec<f64> = (0..grid.len()).map(|i| grid.x(i)).collect();
    let lower: Vec<usize> = (0..grid.len()).map(|i| strategy.next_index(grid.x(i), 0.0)).collect();
    let c_star = lower.iter().map(|&k| rates[k]).collect();
    let two_sided = strategy.change_sets.iter().any(|s| s.intervals().len() > 1);
    let c1_star = two_sided.then(|| {
        (0..grid.len())
            .map(|i| {
                let k0 = lower[i];
                (k0 + 1..strategy.change_sets.len())
                    .find(|&k| strategy.change_sets[k].contains_node(i))
                    .map_or(strategy.rates.ceiling(), |k| rates[k])
            })
            .collect()
    });
    FreeBoundary { x, c_star, c1_star }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RatchetError {
    InvalidRateGrid,
    Ide(IdeError),
    ObstacleInvalid { index: usize, reason: &'static str },
    VerificationFailed { index: usize, rate: f64, residual: f64, gap: f64 },
}

impl From<IdeError> for RatchetError {
    fn from(e: IdeError) -> Self {
        RatchetError::Ide(e)
    }
}

impl fmt::Display for RatchetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatchetError::InvalidRateGrid => write!(f, "rates must be non-negative and strictly increasing"),
            RatchetError::Ide(e) => write!(f, "{e}"),
            RatchetError::ObstacleInvalid { index, reason } => write!(f, "obstacle of level {index} invalid: {reason}"),
            RatchetError::VerificationFailed { index, rate, residual, gap } => write!(
                f,
                "level {index} (rate {rate}) failed verification: residual {residual:e}, obstacle gap {gap:e}"
            ),
        }
    }
}

impl core::error::Error for RatchetError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            RatchetError::Ide(e) => Some(e),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_model, ClaimDistribution, ModelParams};

    fn model(c_bar: f64) -> ValidatedModel {
        let p = ModelParams { premium_rate: 2.3, claim_intensity: 4.0, discount_rate: 0.1, dividend_ceiling: c_bar };
        validate_model(p, ClaimDistribution::exponential(2.0)).unwrap()
    }

    #[test]
    fn rate_grids() {
        assert_eq!(build_rate_grid(0, &model(1.72)).rates(), &[0.0, 1.72]);
        let g2 = build_rate_grid(2, &model(1.72));
        let expected = [0.0, 0.43, 0.86, 1.29, 1.72];
        assert!(g2.rates().iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(build_rate_grid(1, &model(4.6)).rates(), &[0.0, 2.3, 4.6]);
        assert_eq!(build_rate_grid(0, &model(4.6)).rates(), &[0.0, 4.6]);
        let g3 = build_rate_grid(2, &model(3.0));
        assert_eq!(g3.rates(), &[0.0, 0.75, 1.5, 2.25, 2.3, 3.0]);
    }

    #[test]
    fn change_sets_merge_and_answer_membership() {
        let grid = XGrid::new(10.0, 0.1).unwrap();
        let set = ChangeSet::new(
            0,
            0.0,
            grid,
            alloc::vec![
                NodeInterval { start: 50, end: 100 },
                NodeInterval { start: 0, end: 2 },
                NodeInterval { start: 3, end: 4 }
            ],
        );
        assert_eq!(set.intervals(), &[NodeInterval { start: 0, end: 4 }, NodeInterval { start: 50, end: 100 }]);
        assert!(set.contains(0.4));
        assert!(!set.contains(0.45));
        assert!(set.contains(5.0));
        assert!(set.contains(1e6));
        assert_eq!(set.threshold(), Some(5.0));
        assert!(!set.is_single_threshold());
    }

    #[test]
    fn next_rate_follows_the_change_sets() {
        let grid = XGrid::new(10.0, 0.1).unwrap();
        let rates = RateGrid::from_rates(alloc::vec![0.0, 1.0, 2.0], 1).unwrap();
        let sets = alloc::vec![
            ChangeSet::new(0, 0.0, grid, alloc::vec![NodeInterval { start: 20, end: 100 }]),
            ChangeSet::new(1, 1.0, grid, alloc::vec![NodeInterval { start: 30, end: 100 }]),
        ];
        let s = FiniteStrategy { rates, change_sets: sets };
        assert_eq!(next_rate(&s, 0.0, 0.0), 0.0);
        assert_eq!(next_rate(&s, 2.5, 0.0), 1.0);
        assert_eq!(next_rate(&s, 5.0, 0.0), 2.0);
        assert_eq!(next_rate(&s, 0.0, 1.0), 1.0);
        assert_eq!(next_rate(&s, 0.0, 1.5), 2.0);
        let fb = extract_free_boundary(&s, &grid);
        assert_eq!(fb.c_star[0], 0.0);
        assert_eq!(fb.c_star[25], 1.0);
        assert_eq!(fb.c_star[100], 2.0);
        assert!(fb.c1_star.is_none());
    }

    #[test]
    fn single_rate_boundary_is_the_ceiling() {
        let grid = XGrid::new(1.0, 0.1).unwrap();
        let fb = extract_free_boundary(&FiniteStrategy::constant(1.72), &grid);
        assert!(fb.c_star.iter().all(|&c| c == 1.72));
    }
}
