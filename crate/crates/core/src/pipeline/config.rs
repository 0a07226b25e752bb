//! `key = value` configuration with per-key overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! errors, so a typo never silently falls back to a default.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boost::BoostConfig;
use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::synth::SynthConfig;
use crate::tabular::CsvSchema;
use crate::transport::{BatchCombine, BatchOptions, CouplingOptions};

/// Every recognised key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("input", "", "labeled training CSV"),
    ("test_input", "", "labeled test CSV for evaluate (and map_source=test)"),
    ("forecast_input", "", "CSV to forecast; outcome column optional"),
    ("out_dir", "out", "directory for artifacts and outputs"),
    ("output", "", "synth output CSV; defaults to <out_dir>/synth.csv"),
    ("forecast_output", "", "forecast output CSV; defaults to <out_dir>/forecast.csv"),
    ("features", "", "comma-separated covariates; empty means all other columns"),
    ("group_column", "group", "group column name"),
    ("outcome_column", "y", "outcome column name"),
    ("counterfactual_column", "y_star", "counterfactual outcome column, read when present"),
    ("baseline_value", "baseline", "group value of the baseline group"),
    ("comparison_value", "comparison", "group value of the comparison group"),
    ("seed", "0", "seed for splitting, boosting and transport"),
    ("train_fraction", "0.5", "share of baseline rows used for training; the rest calibrate"),
    ("n_trees", "200", "boosting iterations"),
    ("learning_rate", "0.02", "boosting shrinkage"),
    ("max_depth", "3", "tree interaction depth"),
    ("subsample", "0.5", "row fraction per boosting iteration"),
    ("cost_ratio", "8", "cost of a false negative relative to a false positive"),
    ("min_leaf_weight", "10", "minimum total case weight per leaf"),
    ("n_batches", "10", "transport batches"),
    ("batch_size", "200", "points per side in each transport batch"),
    ("batch_combine", "average_maps", "average_maps or pool_pairs"),
    ("memory_budget", "25000000", "largest coupling, in entries, solved at once"),
    ("standardize", "false", "scale coordinates by pooled SD before matching"),
    ("forest_trees", "200", "trees per coordinate in the smoothed map"),
    ("forest_min_leaf", "2", "minimum leaf size of the smoothed map"),
    ("map_source", "train", "comparison covariates the map is fit on: train or test"),
    ("transport", "true", "route comparison rows through the map when forecasting"),
    ("alpha", "0.05", "conformal miscoverage level"),
    ("histogram_bins", "20", "bins of the marginal overlap diagnostics"),
    ("n_per_group", "4000", "synth: records per group"),
    ("shift", "-3,3,1.5,1.5", "synth: comparison location shift per covariate"),
    ("observation_bias", "0.5", "synth: extra log-odds of an observed comparison positive"),
    ("synth_seed", "2024", "synth: generator seed"),
    ("format", "text", "report: text or csv"),
];

pub fn is_known_key(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

/// Parses `key = value` lines. Later lines win.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected key = value", i + 1))
        })?;
        let k = k.trim();
        if !is_known_key(k) {
            return Err(Error::InvalidConfig(format!("line {}: unknown key '{k}'", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// A commented config file listing every key at its default.
pub fn default_config_text() -> String {
    let mut s = String::new();
    for (k, v, doc) in KEYS {
        let _ = writeln!(s, "# {doc}\n{k} = {v}");
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub test_input: Option<PathBuf>,
    pub forecast_input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub output: Option<PathBuf>,
    pub forecast_output: Option<PathBuf>,
    pub schema: CsvSchema,
    pub seed: u64,
    pub train_fraction: f64,
    pub boost: BoostConfig,
    pub batch: BatchOptions,
    pub map_from_test: bool,
    pub transport: bool,
    pub alpha: f64,
    pub histogram_bins: usize,
    pub synth: SynthConfig,
    pub report_csv: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::from_map(&BTreeMap::new()).expect("defaults are valid")
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl PipelineConfig {
    /// Builds a config from explicit values; absent keys take defaults.
    pub fn from_map(values: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = values.keys().find(|k| !is_known_key(k)) {
            return Err(Error::InvalidConfig(format!("unknown key '{k}'")));
        }
        let get = |key: &str| -> &str {
            values.get(key).map(String::as_str).unwrap_or_else(|| {
                KEYS.iter()
                    .find(|(k, _, _)| *k == key)
                    .map(|(_, d, _)| *d)
                    .expect("key is listed")
            })
        };
        let seed: u64 = parse("seed", get("seed"))?;
        let schema = CsvSchema {
            feature_names: list(get("features")),
            group_column: get("group_column").to_string(),
            outcome_column: get("outcome_column").to_string(),
            require_outcome_column: true,
            counterfactual_column: get("counterfactual_column").to_string(),
            baseline_value: get("baseline_value").to_string(),
            comparison_value: get("comparison_value").to_string(),
        };
        let boost = BoostConfig {
            n_trees: parse("n_trees", get("n_trees"))?,
            learning_rate: parse("learning_rate", get("learning_rate"))?,
            max_depth: parse("max_depth", get("max_depth"))?,
            subsample: parse("subsample", get("subsample"))?,
            cost_ratio: parse("cost_ratio", get("cost_ratio"))?,
            min_leaf_weight: parse("min_leaf_weight", get("min_leaf_weight"))?,
            seed,
        };
        let combine = match get("batch_combine") {
            "average_maps" => BatchCombine::AverageMaps,
            "pool_pairs" => BatchCombine::PoolPairs,
            v => {
                return Err(Error::InvalidConfig(format!(
                    "batch_combine: expected average_maps or pool_pairs, got '{v}'"
                )))
            }
        };
        let batch = BatchOptions {
            n_batches: parse("n_batches", get("n_batches"))?,
            batch_size: parse("batch_size", get("batch_size"))?,
            combine,
            coupling: CouplingOptions {
                memory_budget: parse("memory_budget", get("memory_budget"))?,
                standardize: parse_bool("standardize", get("standardize"))?,
            },
            forest: ForestConfig {
                n_trees: parse("forest_trees", get("forest_trees"))?,
                min_leaf_size: parse("forest_min_leaf", get("forest_min_leaf"))?,
                max_features: None,
                seed,
            },
        };
        let map_from_test = match get("map_source") {
            "train" => false,
            "test" => true,
            v => {
                return Err(Error::InvalidConfig(format!(
                    "map_source: expected train or test, got '{v}'"
                )))
            }
        };
        let shift = list(get("shift"))
            .iter()
            .map(|v| parse::<f64>("shift", v))
            .collect::<Result<Vec<_>>>()?;
        let defaults = SynthConfig::default();
        let d = shift.len();
        let synth = SynthConfig {
            n_per_group: parse("n_per_group", get("n_per_group"))?,
            d,
            shift,
            outcome_coefficients: if d == defaults.d {
                defaults.outcome_coefficients
            } else {
                (0..d)
                    .map(|k| defaults.outcome_coefficients[k % defaults.d])
                    .collect()
            },
            intercept: defaults.intercept,
            observation_bias: parse("observation_bias", get("observation_bias"))?,
            seed: parse("synth_seed", get("synth_seed"))?,
        };
        let report_csv = match get("format") {
            "text" => false,
            "csv" => true,
            v => {
                return Err(Error::InvalidConfig(format!(
                    "format: expected text or csv, got '{v}'"
                )))
            }
        };
        let cfg = Self {
            input: path(get("input")),
            test_input: path(get("test_input")),
            forecast_input: path(get("forecast_input")),
            out_dir: PathBuf::from(get("out_dir")),
            output: path(get("output")),
            forecast_output: path(get("forecast_output")),
            schema,
            seed,
            train_fraction: parse("train_fraction", get("train_fraction"))?,
            boost,
            batch,
            map_from_test,
            transport: parse_bool("transport", get("transport"))?,
            alpha: parse("alpha", get("alpha"))?,
            histogram_bins: parse("histogram_bins", get("histogram_bins"))?,
            synth,
            report_csv,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (if given) and applies `overrides` on top.
    pub fn load(
        path: Option<&Path>,
        overrides: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut values = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_kv(&text)?
            }
            None => BTreeMap::new(),
        };
        values.extend(overrides);
        Self::from_map(&values)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.histogram_bins == 0 {
            return Err(Error::InvalidConfig("histogram_bins must be positive".into()));
        }
        self.boost.validate()
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.artifact("manifest.json")
    }

    pub fn model_path(&self) -> PathBuf {
        self.artifact("model.json")
    }

    pub fn map_path(&self) -> PathBuf {
        self.artifact("map.json")
    }

    pub fn calibration_path(&self) -> PathBuf {
        self.artifact("calibration.json")
    }

    pub fn report_path(&self) -> PathBuf {
        self.artifact("report.json")
    }

    /// Schema for inputs whose outcome column may be absent.
    pub fn unlabeled_schema(&self) -> CsvSchema {
        CsvSchema {
            require_outcome_column: false,
            ..self.schema.clone()
        }
    }
}
