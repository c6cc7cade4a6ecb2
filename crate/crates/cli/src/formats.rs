//! CSV and JSON artifacts. Numbers are written with 12 significant digits,
//! '.' as decimal separator and `inf` for unbounded interval ends.

use std::fs;
use std::io::Write;
use std::path::Path;

use ratchet_core::montecarlo::{Estimate, SimConfig};
use ratchet_core::ratchet::{ConvergenceTable, FreeBoundary};
use ratchet_core::{FiniteStrategy, ValueCurve, ValueSurface};
use serde::Serialize;

use crate::error::CliError;

/// Rounds to 12 significant digits and prints the shortest decimal that
/// reads back to the rounded value.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("own formatting parses");
    format!("{rounded}")
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut builder = tempfile::Builder::new();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    let mut tmp = builder.tempfile_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Node indices `0, stride, 2 stride, ...` up to `x_limit`, always ending on
/// the last node in range.
pub fn sample_nodes(curve: &ValueCurve, stride: usize, x_limit: Option<f64>) -> Vec<usize> {
    let g = curve.grid();
    let last = x_limit.map_or(g.intervals(), |x| g.node(x.min(g.x_max())));
    let mut idx: Vec<usize> = (0..=last).step_by(stride.max(1)).collect();
    if idx.last() != Some(&last) {
        idx.push(last);
    }
    idx
}

/// `x,c,value`, one row per sampled node and rate.
pub fn surface_csv(surface: &ValueSurface, stride: usize, x_limit: Option<f64>) -> String {
    let nodes = sample_nodes(surface.curve(0), stride, x_limit);
    let grid = *surface.curve(0).grid();
    let rows = surface.rates.rates().iter().zip(&surface.curves).flat_map(|(&c, curve)| {
        let v = curve.values();
        nodes.iter().map(move |&i| vec![num(grid.x(i)), num(c), num(v[i])])
    });
    csv_text(&["x", "c", "value"], rows)
}

/// `c,interval_start,interval_end`, one row per component of every change
/// set.
pub fn region_csv(strategy: &FiniteStrategy) -> String {
    let rows = strategy.change_sets.iter().flat_map(|set| {
        set.bounds().into_iter().map(move |(a, b)| vec![num(set.rate), num(a), num(b.unwrap_or(f64::INFINITY))])
    });
    csv_text(&["c", "interval_start", "interval_end"], rows)
}

/// `x,c_star` or, for two-sided regions, `x,c_star,c2_star` where `c2_star`
/// is the next rate above `c_star` whose change set holds `x` again.
pub fn boundary_csv(fb: &FreeBoundary, stride: usize, x_limit: Option<f64>) -> String {
    let last = fb.x.iter().rposition(|&x| x_limit.is_none_or(|l| x <= l + 1e-12)).unwrap_or(0);
    let mut idx: Vec<usize> = (0..=last).step_by(stride.max(1)).collect();
    if idx.last() != Some(&last) {
        idx.push(last);
    }
    match &fb.c1_star {
        Some(upper) => csv_text(
            &["x", "c_star", "c2_star"],
            idx.into_iter().map(|i| vec![num(fb.x[i]), num(fb.c_star[i]), num(upper[i])]),
        ),
        None => csv_text(&["x", "c_star"], idx.into_iter().map(|i| vec![num(fb.x[i]), num(fb.c_star[i])])),
    }
}

pub fn table_csv(table: &ConvergenceTable) -> String {
    csv_text(&["n", "max_diff"], table.rows.iter().map(|&(n, d)| vec![n.to_string(), num(d)]))
}

/// Side-by-side curves on a shared grid plus the two differences that make
/// them distinguishable in a plot.
pub fn compare_csv(
    ratchet: &ValueCurve,
    one_switch: &ValueCurve,
    nr: &ValueCurve,
    stride: usize,
    x_limit: Option<f64>,
) -> String {
    let (a, b, c) = (ratchet.values(), one_switch.values(), nr.values());
    let grid = *ratchet.grid();
    let rows = sample_nodes(ratchet, stride, x_limit)
        .into_iter()
        .map(|i| vec![num(grid.x(i)), num(a[i]), num(b[i]), num(c[i]), num(a[i] - b[i]), num(c[i] - a[i])]);
    csv_text(&["x", "v_ratchet", "v_oneswitch", "v_nr", "ratchet_minus_oneswitch", "nr_minus_ratchet"], rows)
}

/// Monte Carlo estimate as emitted by `simulate` and inside reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub x0: f64,
    pub c0: f64,
    pub paths: usize,
    pub mean: f64,
    pub stderr: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl EstimateRecord {
    pub fn new(x0: f64, c0: f64, est: &Estimate, config: &SimConfig) -> Self {
        EstimateRecord {
            x0,
            c0,
            paths: est.paths,
            mean: est.mean,
            stderr: est.std_error,
            horizon: config.horizon,
            seed: config.seed,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ratchet_core::XGrid;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.0 / 3.0), "0.333333333333");
        assert_eq!(num(17.2), "17.2");
        assert_eq!(num(2.0e-7 / 3.0), "0.0000000666666666667");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(-0.5), "-0.5");
    }

    #[test]
    fn sampling_keeps_the_last_node() {
        let curve = ValueCurve::from_fn(XGrid::new(1.0, 0.1).unwrap(), |x| x);
        assert_eq!(sample_nodes(&curve, 4, None), vec![0, 4, 8, 10]);
        assert_eq!(sample_nodes(&curve, 1, Some(0.3)), vec![0, 1, 2, 3]);
    }

    #[test]
    fn csv_uses_plain_newlines() {
        let text = csv_text(&["a", "b"], std::iter::once(vec!["1".into(), "2".into()]));
        assert_eq!(text, "a,b\n1,2\n");
    }

    #[test]
    fn atomic_write_replaces_the_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
