//! JSON run configuration.
//!
//! ```json
//! {
//!   "model": {
//!     "premium_rate": 2.3, "claim_intensity": 4.0,
//!     "discount_rate": 0.1, "dividend_ceiling": 1.72,
//!     "claim_distribution": { "kind": "exponential", "rate": 2.0 }
//!   },
//!   "solver": { "x_max": 150.0, "h": 0.005, "n": 8 },
//!   "sim": { "paths": 100000, "seed": 7 }
//! }
//! ```
//!
//! Unknown keys are errors everywhere. `solver` and `sim` may be omitted.

use std::fs;
use std::path::{Path, PathBuf};

use ratchet_core::model::{validate_model, CdfTable, ModelError};
use ratchet_core::montecarlo::SimConfig;
use ratchet_core::ratchet::ObstacleTolerances;
use ratchet_core::{ClaimDistribution, ModelParams, ValidatedModel, XGrid};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub sim: SimBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub premium_rate: f64,
    pub claim_intensity: f64,
    pub discount_rate: f64,
    pub dividend_ceiling: f64,
    pub claim_distribution: ClaimBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClaimBlock {
    Exponential {
        rate: f64,
    },
    Erlang2,
    /// Two-column CSV `x,F`, relative paths resolved against the config file.
    Tabulated {
        table_path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Acceptance bound on the supersolution residual of every level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    /// Refinement level; the rate grid has `2^n + 1` points.
    #[serde(default = "default_level")]
    pub n: u32,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock { x_max: None, h: None, residual_tol: None, n: default_level() }
    }
}

fn default_level() -> u32 {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kill_after: Option<f64>,
    #[serde(default)]
    pub antithetic: bool,
}

impl Default for SimBlock {
    fn default() -> Self {
        SimBlock { paths: default_paths(), seed: 0, horizon: None, kill_after: None, antithetic: false }
    }
}

fn default_paths() -> usize {
    100_000
}

/// Everything a command needs, checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: ValidatedModel,
    pub grid: XGrid,
    pub tolerances: ObstacleTolerances,
    pub n: u32,
    pub sim: SimConfig,
}

/// Reads `path`, applies `key=value` overrides and deserializes.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::validation("", format!("malformed JSON: {e}")))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    from_value(value)
}

pub fn from_value(value: Value) -> Result<RunConfig, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let key = e.path().to_string();
        CliError::validation(if key == "." { String::new() } else { key }, e.into_inner().to_string())
    })
}

/// `a.b.c=v` sets a nested entry. `v` is read as JSON when it parses and as a
/// string otherwise, so `sim.seed=7` is a number and `kind=erlang2` a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| CliError::validation(spec, "override must look like key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| CliError::validation(parts[..i].join("."), "not an object"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::validation(key, "empty key"))
}

impl RunConfig {
    /// Validates the model, loads tables and fills grid and horizon
    /// defaults. `base` is the directory relative table paths start from.
    pub fn resolve(&self, base: &Path) -> Result<Resolved, CliError> {
        let m = &self.model;
        let dist = match &m.claim_distribution {
            ClaimBlock::Exponential { rate } => ClaimDistribution::exponential(*rate),
            ClaimBlock::Erlang2 => ClaimDistribution::Erlang2,
            ClaimBlock::Tabulated { table_path } => ClaimDistribution::Tabulated(load_table(&base.join(table_path))?),
        };
        let params = ModelParams {
            premium_rate: m.premium_rate,
            claim_intensity: m.claim_intensity,
            discount_rate: m.discount_rate,
            dividend_ceiling: m.dividend_ceiling,
        };
        let model = validate_model(params, dist).map_err(model_error)?;

        let s = &self.solver;
        let x_max = match s.x_max {
            Some(x) => positive("solver.x_max", x)?,
            None => default_x_max(&model),
        };
        let h = match s.h {
            Some(h) => positive("solver.h", h)?,
            None => (x_max / 1000.0).min(model.distribution().mean() / 40.0),
        };
        let grid = XGrid::new(x_max, h).map_err(|e| CliError::validation("solver.h", e.to_string()))?;
        let mut tolerances = ObstacleTolerances::for_model(&model);
        if let Some(t) = s.residual_tol {
            tolerances.verify_tol = positive("solver.residual_tol", t)?;
        }
        if s.n > 16 {
            return Err(CliError::validation("solver.n", "refinement levels above 16 are not supported"));
        }

        let b = &self.sim;
        if b.paths == 0 {
            return Err(CliError::validation("sim.paths", "at least one path is needed"));
        }
        let mut sim = SimConfig::new(&model, b.paths, b.seed);
        if let Some(t) = b.horizon {
            sim.horizon = positive("sim.horizon", t)?;
        }
        if let Some(t) = b.kill_after {
            sim.kill_after = Some(positive("sim.kill_after", t)?);
        }
        sim.antithetic = b.antithetic;
        Ok(Resolved { model, grid, tolerances, n: s.n, sim })
    }
}

/// Far enough for the claim tail to be negligible and for the top slice to
/// have settled at `c̄/q` (twenty decay lengths).
pub fn default_x_max(model: &ValidatedModel) -> f64 {
    let tail = model.distribution().tail_point(ratchet_core::ide::TAIL_TOLERANCE);
    let settle = 20.0 / model.far_field_decay(model.ceiling());
    tail.max(settle).ceil()
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::validation(key, format!("must be positive and finite, got {v}")))
    }
}

fn model_error(e: ModelError) -> CliError {
    match &e {
        ModelError::NegativeParameter { name, .. } => CliError::validation(format!("model.{name}"), e.to_string()),
        ModelError::SafetyLoadingViolated { .. } => CliError::validation("model.premium_rate", e.to_string()),
        ModelError::InvalidDistribution(_) => CliError::validation("model.claim_distribution", e.to_string()),
    }
}

/// Two-column CSV of `x, F(x)`. A header row is skipped when its first
/// field is not a number.
pub fn load_table(path: &Path) -> Result<CdfTable, CliError> {
    const KEY: &str = "model.claim_distribution.table_path";
    let bad = |msg: String| CliError::validation(KEY, format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut pairs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != 2 {
            return Err(bad(format!("line {} has {} fields, expected 2", line + 1, record.len())));
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => pairs.push((v[0], v[1])),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(bad(format!("line {}: {e}", line + 1))),
        }
    }
    CdfTable::from_pairs(&pairs).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ex1() -> Value {
        json!({
            "model": {
                "premium_rate": 2.3, "claim_intensity": 4.0, "discount_rate": 0.1,
                "dividend_ceiling": 1.72,
                "claim_distribution": {"kind": "exponential", "rate": 2.0}
            },
            "solver": {"x_max": 150.0, "h": 0.005}
        })
    }

    #[test]
    fn parses_and_resolves() {
        let cfg = from_value(ex1()).unwrap();
        assert_eq!(cfg.solver.n, 8);
        assert_eq!(cfg.sim.paths, 100_000);
        let r = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(r.grid.intervals(), 30_000);
        assert!((r.model.value_bound() - 17.2).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_are_named() {
        let mut v = ex1();
        v["solver"]["tolerance"] = json!(1.0);
        match from_value(v).unwrap_err() {
            CliError::Validation { key, message } => {
                assert_eq!(key, "solver.tolerance");
                assert!(message.contains("tolerance"), "{message}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn negative_discount_names_the_key() {
        let mut v = ex1();
        v["model"]["discount_rate"] = json!(-0.1);
        let err = from_value(v).unwrap().resolve(Path::new(".")).unwrap_err();
        assert!(matches!(&err, CliError::Validation { key, .. } if key == "model.discount_rate"), "{err:?}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overrides_are_type_checked() {
        let mut v = ex1();
        apply_override(&mut v, "solver.n=3").unwrap();
        apply_override(&mut v, "sim.seed=11").unwrap();
        let cfg = from_value(v.clone()).unwrap();
        assert_eq!((cfg.solver.n, cfg.sim.seed), (3, 11));

        apply_override(&mut v, "solver.h=fine").unwrap();
        let err = from_value(v).unwrap_err();
        assert!(matches!(&err, CliError::Validation { key, .. } if key == "solver.h"), "{err:?}");
    }

    #[test]
    fn claim_kind_can_be_switched() {
        let mut v = ex1();
        v["model"]["claim_distribution"] = json!({"kind": "erlang2"});
        v["model"]["premium_rate"] = json!(21.4);
        v["model"]["claim_intensity"] = json!(10.0);
        let r = from_value(v).unwrap().resolve(Path::new(".")).unwrap();
        assert_eq!(r.model.distribution(), &ClaimDistribution::Erlang2);
    }

    #[test]
    fn default_domain_covers_the_far_field() {
        let mut v = ex1();
        v["solver"] = json!({});
        let r = from_value(v).unwrap().resolve(Path::new(".")).unwrap();
        // Decay rate 0.0671 for this model.
        assert!((r.grid.x_max() - 298.0).abs() < 1.0, "{}", r.grid.x_max());
        assert!(r.grid.step() <= 0.0125 + 1e-12);
    }

    #[test]
    fn tables_load_with_or_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cdf.csv");
        let mut text = String::from("x,F\n");
        for i in 0..=400 {
            let x = i as f64 * 0.05;
            text.push_str(&format!("{x},{}\n", 1.0 - (-x).exp() * (1.0 + x)));
        }
        fs::write(&path, text).unwrap();
        let t = load_table(&path).unwrap();
        assert!((ClaimDistribution::Tabulated(t).mean() - 2.0).abs() < 1e-2);

        fs::write(&path, "0,0\n1,0.5,9\n").unwrap();
        assert!(matches!(load_table(&path), Err(CliError::Validation { .. })));
    }
}
