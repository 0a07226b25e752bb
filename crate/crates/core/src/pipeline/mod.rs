//! End-to-end commands over persisted, hash-chained artifacts.
//!
//! `fit` splits the baseline group of the training file into a training
//! and a calibration part and trains the classifier on the first.
//! `transport` learns a map from comparison covariates to the baseline
//! training covariates. `calibrate` computes the conformal threshold on the
//! calibration part. `forecast` and `evaluate` score new data: baseline rows
//! go straight to the model, comparison rows pass through the map first.

pub mod artifacts;
pub mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boost::{self, ProbModel};
use crate::conformal::{self, ConformalCalibration, PredictionSet, SetProportions};
use crate::error::{Error, Result};
use crate::fairness::{
    confusion_table, counterfactual_classification_error, GroupMetrics, ParityReport,
};
use crate::par;
use crate::synth;
use crate::tabular::{self, CsvSchema, Dataset, Group, Label, Record, SplitSpec};
use crate::transport::{self, TransportMap};

use artifacts::{load_artifact, save_artifact, sha256_hex, write_atomic, Artifact};
pub use config::PipelineConfig;

/// Printed at the top of every evaluation report.
pub const FAIRNESS_NOTE: &str = "Internal fairness only: error rates compare forecasts with observed test outcomes. \
External fairness, with respect to outcomes under equal treatment, cannot be evaluated from test data.";

/// Which training rows went where; shared by every later stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub input_hash: String,
    pub seed: u64,
    pub train_fraction: f64,
    pub features: Vec<String>,
    /// Row indices into the training file, baseline group only.
    pub train_rows: Vec<usize>,
    pub calibration_rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapPayload {
    pub features: Vec<String>,
    pub map: TransportMap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub transport: bool,
    pub alpha: f64,
    pub gamma_hat: f64,
    pub parity: ParityReport,
}

impl EvaluationReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("{FAIRNESS_NOTE}\n\n");
        let _ = writeln!(
            s,
            "Comparison rows transported: {}; alpha = {}; threshold = {:.6}\n",
            if self.transport { "yes" } else { "no" },
            self.alpha,
            self.gamma_hat
        );
        s.push_str(&self.parity.to_text());
        s
    }

    pub fn to_csv(&self) -> String {
        self.parity.to_csv()
    }
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("{key} is not set")))
}

/// Reads a CSV, returning the dataset and the hash of the file bytes.
fn read_hashed(path: &Path, schema: &CsvSchema, seed: u64) -> Result<(Dataset, String)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut data = tabular::read_csv(bytes.as_slice(), schema)?;
    data.seed = seed;
    Ok((data, sha256_hex(&bytes)))
}

fn schema_for(cfg: &PipelineConfig, features: &[String], labeled: bool) -> CsvSchema {
    CsvSchema {
        feature_names: features.to_vec(),
        require_outcome_column: labeled,
        ..cfg.schema.clone()
    }
}

fn indices_of(data: &Dataset, group: Group) -> Vec<usize> {
    (0..data.len())
        .filter(|&i| data.records[i].group == group)
        .collect()
}

pub fn cmd_synth(cfg: &PipelineConfig) -> Result<String> {
    let data = synth::generate(&cfg.synth)?;
    let path = cfg.output.clone().unwrap_or_else(|| cfg.artifact("synth.csv"));
    tabular::save_csv(&data, &path, &cfg.schema)?;
    Ok(format!(
        "wrote {} rows ({} per group) to {}",
        data.len(),
        cfg.synth.n_per_group,
        path.display()
    ))
}

/// Baseline rows split into training and calibration parts.
pub fn baseline_split(data: &Dataset, train_fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let base = indices_of(data, Group::Baseline);
    if base.is_empty() {
        return Err(Error::EmptyBaseline);
    }
    let spec = SplitSpec::new(
        [("train", train_fraction), ("calibration", 1.0 - train_fraction)],
        false,
    )?;
    let parts = tabular::split_indices(&data.subset(&base), &spec)?;
    let lift = |idx: &[usize]| idx.iter().map(|&i| base[i]).collect::<Vec<_>>();
    Ok((lift(&parts[0].1), lift(&parts[1].1)))
}

pub fn cmd_fit(cfg: &PipelineConfig) -> Result<String> {
    let input = required(&cfg.input, "input")?;
    let (data, input_hash) = read_hashed(input, &cfg.schema, cfg.seed)?;
    data.labels()?;
    let (train_rows, calibration_rows) = baseline_split(&data, cfg.train_fraction)?;
    let manifest = SplitManifest {
        input_hash: input_hash.clone(),
        seed: cfg.seed,
        train_fraction: cfg.train_fraction,
        features: data.feature_names.clone(),
        train_rows,
        calibration_rows,
    };
    let mh = save_artifact(
        cfg.manifest_path(),
        "manifest",
        BTreeMap::from([("input".to_string(), input_hash)]),
        &manifest,
    )?;
    let model = boost::train(&data.subset(&manifest.train_rows), &cfg.boost)?;
    save_artifact(
        cfg.model_path(),
        "model",
        BTreeMap::from([("manifest".to_string(), mh)]),
        &model,
    )?;
    Ok(format!(
        "trained {} trees on {} baseline rows; {} rows held for calibration; artifacts in {}",
        model.trees.len(),
        manifest.train_rows.len(),
        manifest.calibration_rows.len(),
        cfg.out_dir.display()
    ))
}

struct Chain {
    manifest: SplitManifest,
    manifest_hash: String,
}

fn load_chain(cfg: &PipelineConfig) -> Result<Chain> {
    let (m, manifest_hash): (Artifact<SplitManifest>, _) =
        load_artifact(cfg.manifest_path(), "manifest", "fit")?;
    Ok(Chain {
        manifest: m.payload,
        manifest_hash,
    })
}

impl Chain {
    /// The training file, checked against the hash the split was made from.
    fn training_data(&self, cfg: &PipelineConfig) -> Result<Dataset> {
        let input = required(&cfg.input, "input")?;
        let schema = schema_for(cfg, &self.manifest.features, true);
        let (data, h) = read_hashed(input, &schema, cfg.seed)?;
        if h != self.manifest.input_hash {
            return Err(Error::ArtifactMismatch(format!(
                "{} differs from the file the split manifest was built from; rerun fit",
                input.display()
            )));
        }
        Ok(data)
    }

    fn model(&self, cfg: &PipelineConfig) -> Result<(ProbModel, String)> {
        let (a, h): (Artifact<ProbModel>, _) = load_artifact(cfg.model_path(), "model", "fit")?;
        a.require_input("manifest", &self.manifest_hash)?;
        Ok((a.payload, h))
    }

    fn map(&self, cfg: &PipelineConfig) -> Result<(TransportMap, String)> {
        let (a, h): (Artifact<MapPayload>, _) =
            load_artifact(cfg.map_path(), "map", "transport")?;
        a.require_input("manifest", &self.manifest_hash)?;
        if a.payload.features != self.manifest.features {
            return Err(Error::ArtifactMismatch(
                "map features differ from the split manifest".into(),
            ));
        }
        Ok((a.payload.map, h))
    }

    fn calibration(&self, cfg: &PipelineConfig, model_hash: &str) -> Result<(ConformalCalibration, String)> {
        let (a, h): (Artifact<ConformalCalibration>, _) =
            load_artifact(cfg.calibration_path(), "calibration", "calibrate")?;
        a.require_input("manifest", &self.manifest_hash)?;
        a.require_input("model", model_hash)?;
        Ok((a.payload, h))
    }
}

pub fn cmd_transport(cfg: &PipelineConfig) -> Result<String> {
    let chain = load_chain(cfg)?;
    let data = chain.training_data(cfg)?;
    let dest = data.subset(&chain.manifest.train_rows).covariates();
    let (source_data, source_hash) = if cfg.map_from_test {
        let test = required(&cfg.test_input, "test_input")?;
        let schema = schema_for(cfg, &chain.manifest.features, false);
        let (d, h) = read_hashed(test, &schema, cfg.seed)?;
        (tabular::filter_group(&d, Group::Comparison), h)
    } else {
        (
            tabular::filter_group(&data, Group::Comparison),
            chain.manifest.input_hash.clone(),
        )
    };
    if source_data.is_empty() {
        return Err(Error::InvalidConfig("no comparison rows to transport".into()));
    }
    let source = source_data.covariates();
    let map = transport::batched_fit_map(&source, &dest, &cfg.batch, cfg.seed)?;
    let moved = transport::apply_map_all(&map, &source)?;

    let payload = MapPayload {
        features: chain.manifest.features.clone(),
        map,
    };
    save_artifact(
        cfg.map_path(),
        "map",
        BTreeMap::from([
            ("manifest".to_string(), chain.manifest_hash.clone()),
            ("source".to_string(), source_hash),
        ]),
        &payload,
    )?;

    // The exported covariates are the unsmoothed batch projections; the
    // smoothed map is what forecasting applies to unseen rows.
    let projected = transport::batched_barycentric(
        &source,
        &dest,
        cfg.batch.batch_size,
        &cfg.batch.coupling,
        cfg.seed,
    )?;
    let mut transported = source_data.clone();
    for (r, x) in transported.records.iter_mut().zip(&projected) {
        r.covariates = x.clone();
    }
    tabular::save_csv(&transported, cfg.artifact("transported.csv"), &cfg.schema)?;

    let mut summary = String::from("feature,overlap_before,overlap_transported,overlap_smoothed\n");
    for (k, name) in chain.manifest.features.iter().enumerate() {
        let base_col: Vec<f64> = dest.iter().map(|x| x[k]).collect();
        let bins = cfg.histogram_bins;
        let before = transport::histogram_overlap(&source_data.column(k), &base_col, bins)?;
        let mut after = transport::histogram_overlap(&transported.column(k), &base_col, bins)?;
        let smoothed_col: Vec<f64> = moved.iter().map(|x| x[k]).collect();
        let smoothed = transport::histogram_overlap(&smoothed_col, &base_col, bins)?;
        after.feature = name.clone();
        write_atomic(cfg.artifact(&format!("overlap_{name}.csv")), after.to_csv().as_bytes())?;
        let _ = writeln!(
            summary,
            "{name},{:.4},{:.4},{:.4}",
            before.overlap, after.overlap, smoothed.overlap
        );
    }
    Ok(summary)
}

pub fn cmd_calibrate(cfg: &PipelineConfig) -> Result<String> {
    let chain = load_chain(cfg)?;
    let data = chain.training_data(cfg)?;
    let (model, model_hash) = chain.model(cfg)?;
    let cal = data.subset(&chain.manifest.calibration_rows);
    let calibration = conformal::calibrate(&model, &cal, cfg.alpha)?;
    save_artifact(
        cfg.calibration_path(),
        "calibration",
        BTreeMap::from([
            ("manifest".to_string(), chain.manifest_hash.clone()),
            ("model".to_string(), model_hash),
        ]),
        &calibration,
    )?;
    Ok(format!(
        "alpha={} gamma_hat={} n_calibration={}",
        calibration.alpha,
        calibration.gamma_hat,
        calibration.scores.len()
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub group: Group,
    pub point_prediction: Label,
    pub set: PredictionSet,
    pub p1: f64,
}

/// Everything needed to score a row.
pub struct Forecaster {
    pub model: ProbModel,
    pub calibration: ConformalCalibration,
    /// Applied to comparison rows when present.
    pub map: Option<TransportMap>,
    pub features: Vec<String>,
    hashes: BTreeMap<String, String>,
}

impl Forecaster {
    /// Loads and cross-checks the artifact chain. The map is only loaded
    /// when `with_map` is set.
    pub fn load(cfg: &PipelineConfig, with_map: bool) -> Result<Self> {
        let chain = load_chain(cfg)?;
        let (model, mh) = chain.model(cfg)?;
        let (calibration, ch) = chain.calibration(cfg, &mh)?;
        let mut hashes = BTreeMap::from([
            ("model".to_string(), mh),
            ("calibration".to_string(), ch),
        ]);
        let map = if with_map {
            let (m, h) = chain.map(cfg)?;
            hashes.insert("map".to_string(), h);
            Some(m)
        } else {
            None
        };
        Ok(Self {
            model,
            calibration,
            map,
            features: chain.manifest.features,
            hashes,
        })
    }

    pub fn forecast(&self, x: &[f64], group: Group) -> Result<Forecast> {
        let moved;
        let x = match (&self.map, group) {
            (Some(map), Group::Comparison) => {
                moved = map.apply(x)?;
                &moved[..]
            }
            _ => x,
        };
        let (_, p1) = self.model.predict_proba(x)?;
        Ok(Forecast {
            group,
            point_prediction: self.model.predict_label(x)?,
            set: conformal::set_from_p1(p1, self.calibration.gamma_hat),
            p1,
        })
    }

    pub fn forecast_all(&self, data: &Dataset) -> Result<Vec<Forecast>> {
        if data.n_features() != self.model.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.model.n_features,
                got: data.n_features(),
            });
        }
        par::map_slice(&data.records, |r: &Record| self.forecast(&r.covariates, r.group))
            .into_iter()
            .collect()
    }
}

fn needs_map(cfg: &PipelineConfig, data: &Dataset) -> bool {
    cfg.transport && data.count_group(Group::Comparison) > 0
}

fn set_label(set: &PredictionSet) -> String {
    set.kind().label().to_string()
}

pub fn forecasts_to_csv(forecasts: &[Forecast], schema: &CsvSchema) -> String {
    let mut s = String::from("row_id,group,point_prediction,set_members,p1\n");
    for (i, f) in forecasts.iter().enumerate() {
        let group = match f.group {
            Group::Baseline => &schema.baseline_value,
            Group::Comparison => &schema.comparison_value,
        };
        let _ = writeln!(
            s,
            "{i},{group},{},\"{}\",{}",
            f.point_prediction,
            set_label(&f.set),
            f.p1
        );
    }
    s
}

fn group_proportions(forecasts: &[Forecast], group: Group) -> Option<SetProportions> {
    SetProportions::from_sets(forecasts.iter().filter(|f| f.group == group).map(|f| &f.set)).ok()
}

pub fn cmd_forecast(cfg: &PipelineConfig) -> Result<String> {
    let input = required(&cfg.forecast_input, "forecast_input")?;
    let chain = load_chain(cfg)?;
    let schema = schema_for(cfg, &chain.manifest.features, false);
    let (data, _) = read_hashed(input, &schema, cfg.seed)?;
    let forecaster = Forecaster::load(cfg, needs_map(cfg, &data))?;
    let forecasts = forecaster.forecast_all(&data)?;
    let path = cfg
        .forecast_output
        .clone()
        .unwrap_or_else(|| cfg.artifact("forecast.csv"));
    write_atomic(&path, forecasts_to_csv(&forecasts, &cfg.schema).as_bytes())?;
    let mut s = format!("wrote {} forecasts to {}\n", forecasts.len(), path.display());
    for g in Group::ALL {
        if let Some(p) = group_proportions(&forecasts, g) {
            let a = p.as_array();
            let _ = writeln!(
                s,
                "{g}: {{}} {:.3}, {{0}} {:.3}, {{1}} {:.3}, {{0,1}} {:.3}",
                a[0], a[1], a[2], a[3]
            );
        }
    }
    Ok(s)
}

fn group_metrics(data: &Dataset, forecasts: &[Forecast], group: Group) -> Result<GroupMetrics> {
    let idx = indices_of(data, group);
    if idx.is_empty() {
        return Err(match group {
            Group::Baseline => Error::EmptyBaseline,
            Group::Comparison => Error::InvalidConfig("test data has no comparison rows".into()),
        });
    }
    let sub = data.subset(&idx);
    let preds: Vec<Label> = idx.iter().map(|&i| forecasts[i].point_prediction).collect();
    let confusion = confusion_table(&sub.labels()?, &preds)?;
    let set_proportions = SetProportions::from_sets(idx.iter().map(|&i| &forecasts[i].set))?;
    let counterfactual_errors = sub.has_counterfactuals().then(|| {
        let ystar: Vec<Option<Label>> = sub.records.iter().map(|r| r.counterfactual_outcome).collect();
        [0u8, 1].map(|l| counterfactual_classification_error(&preds, &ystar, l).ok())
    });
    Ok(GroupMetrics {
        group,
        n: idx.len(),
        confusion,
        set_proportions,
        counterfactual_errors,
    })
}

/// Scores labeled test data through the full pipeline.
pub fn evaluate(cfg: &PipelineConfig) -> Result<(EvaluationReport, BTreeMap<String, String>)> {
    let test = required(&cfg.test_input, "test_input")?;
    let chain = load_chain(cfg)?;
    let schema = schema_for(cfg, &chain.manifest.features, true);
    let (data, test_hash) = read_hashed(test, &schema, cfg.seed)?;
    data.labels()?;
    let forecaster = Forecaster::load(cfg, needs_map(cfg, &data))?;
    let forecasts = forecaster.forecast_all(&data)?;
    let parity = ParityReport::new(
        group_metrics(&data, &forecasts, Group::Baseline)?,
        group_metrics(&data, &forecasts, Group::Comparison)?,
    )?;
    let mut inputs = forecaster.hashes.clone();
    inputs.insert("test".to_string(), test_hash);
    Ok((
        EvaluationReport {
            transport: forecaster.map.is_some(),
            alpha: forecaster.calibration.alpha,
            gamma_hat: forecaster.calibration.gamma_hat,
            parity,
        },
        inputs,
    ))
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<String> {
    let (report, inputs) = evaluate(cfg)?;
    save_artifact(cfg.report_path(), "report", inputs, &report)?;
    write_atomic(cfg.artifact("report.csv"), report.to_csv().as_bytes())?;
    let text = report.to_text();
    write_atomic(cfg.artifact("report.txt"), text.as_bytes())?;
    Ok(text)
}

pub fn cmd_report(cfg: &PipelineConfig) -> Result<String> {
    let (a, _): (Artifact<EvaluationReport>, _) =
        load_artifact(cfg.report_path(), "report", "evaluate")?;
    Ok(if cfg.report_csv {
        a.payload.to_csv()
    } else {
        a.payload.to_text()
    })
}
