//! Confusion tables, parity measures and the joint-transport comparison.
//!
//! Classification error conditions on the actual outcome (a row of the
//! table); forecasting error conditions on the forecast (a column). Rates
//! over an empty row or column are errors, never zero.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::boost::ProbModel;
use crate::conformal::SetProportions;
use crate::error::{Error, Result};
use crate::par;
use crate::tabular::{Dataset, Group, Label};
use crate::transport::{batched_barycentric, CouplingOptions};

/// Counts indexed `[actual][predicted]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub counts: [[u64; 2]; 2],
}

fn check_labels(labels: &[Label]) -> Result<()> {
    match labels.iter().find(|&&l| l > 1) {
        Some(&l) => Err(Error::InvalidLabel(l)),
        None => Ok(()),
    }
}

pub fn confusion_table(actuals: &[Label], predictions: &[Label]) -> Result<ConfusionTable> {
    if actuals.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: actuals.len(),
            right: predictions.len(),
        });
    }
    if actuals.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_labels(actuals)?;
    check_labels(predictions)?;
    let mut t = ConfusionTable::default();
    for (&a, &p) in actuals.iter().zip(predictions) {
        t.counts[a as usize][p as usize] += 1;
    }
    Ok(t)
}

impl ConfusionTable {
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, actual: Label) -> u64 {
        self.counts[actual as usize].iter().sum()
    }

    pub fn col_total(&self, predicted: Label) -> u64 {
        self.counts[0][predicted as usize] + self.counts[1][predicted as usize]
    }

    /// Actual 0, predicted 1.
    pub fn false_positives(&self) -> u64 {
        self.counts[0][1]
    }

    /// Actual 1, predicted 0.
    pub fn false_negatives(&self) -> u64 {
        self.counts[1][0]
    }

    pub fn classification_error(&self, for_class: Label) -> Result<f64> {
        check_labels(&[for_class])?;
        let total = self.row_total(for_class);
        if total == 0 {
            return Err(Error::EmptyMargin {
                axis: "row",
                label: for_class,
            });
        }
        let wrong = self.counts[for_class as usize][1 - for_class as usize];
        Ok(wrong as f64 / total as f64)
    }

    pub fn forecasting_error(&self, for_prediction: Label) -> Result<f64> {
        check_labels(&[for_prediction])?;
        let total = self.col_total(for_prediction);
        if total == 0 {
            return Err(Error::EmptyMargin {
                axis: "column",
                label: for_prediction,
            });
        }
        let wrong = self.counts[1 - for_prediction as usize][for_prediction as usize];
        Ok(wrong as f64 / total as f64)
    }

    /// False positives per false negative; `None` without false negatives.
    pub fn empirical_cost_ratio(&self) -> Option<f64> {
        let fneg = self.false_negatives();
        (fneg > 0).then(|| self.false_positives() as f64 / fneg as f64)
    }

    pub fn base_rate(&self) -> f64 {
        self.row_total(1) as f64 / self.total() as f64
    }

    pub fn predicted_positive_rate(&self) -> f64 {
        self.col_total(1) as f64 / self.total() as f64
    }

    /// Layout of a printed confusion table: rows are actual outcomes,
    /// columns forecasts, error rates on the margins.
    pub fn render_text(&self, title: &str) -> String {
        let fmt = |r: Result<f64>| r.map_or_else(|_| "n/a".to_string(), |v| format!("{v:.3}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{title} ({:.0}% predicted 1, {:.1}% actually 1)",
            100.0 * self.predicted_positive_rate(),
            100.0 * self.base_rate()
        );
        let _ = writeln!(
            s,
            "{:<18}{:>14}{:>14}{:>22}",
            "Actual outcome", "Predicted 0", "Predicted 1", "Classification error"
        );
        for a in 0..2u8 {
            let _ = writeln!(
                s,
                "{:<18}{:>14}{:>14}{:>22}",
                format!("Actual {a}"),
                self.counts[a as usize][0],
                self.counts[a as usize][1],
                fmt(self.classification_error(a))
            );
        }
        let _ = writeln!(
            s,
            "{:<18}{:>14}{:>14}",
            "Forecasting error",
            fmt(self.forecasting_error(0)),
            fmt(self.forecasting_error(1))
        );
        if let Some(r) = self.empirical_cost_ratio() {
            let _ = writeln!(s, "Empirical cost ratio (FP/FN): {r:.2}");
        }
        s
    }
}

pub fn classification_error(table: &ConfusionTable, for_class: Label) -> Result<f64> {
    table.classification_error(for_class)
}

pub fn forecasting_error(table: &ConfusionTable, for_prediction: Label) -> Result<f64> {
    table.forecasting_error(for_prediction)
}

fn check_simplex(v: &[f64]) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "not a proportion vector: {v:?}"
        )));
    }
    Ok(())
}

/// Total-variation distance between two set-proportion vectors.
pub fn prediction_parity_gap(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    check_simplex(a)?;
    check_simplex(b)?;
    Ok(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Classification error against counterfactual outcomes `Y*`. Only
/// computable on simulated data.
pub fn counterfactual_classification_error(
    predictions: &[Label],
    counterfactual_outcomes: &[Option<Label>],
    for_class: Label,
) -> Result<f64> {
    let ystar = counterfactual_outcomes
        .iter()
        .map(|y| y.ok_or(Error::CounterfactualUnavailable))
        .collect::<Result<Vec<_>>>()?;
    confusion_table(&ystar, predictions)?.classification_error(for_class)
}

/// Argmax forecasts of `model` over a dataset.
pub fn predict_labels(model: &ProbModel, data: &Dataset) -> Result<Vec<Label>> {
    par::map_slice(&data.records, |r| model.predict_label(&r.covariates))
        .into_iter()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointTransportOptions {
    /// Largest batch per side for each exact coupling.
    pub max_batch: usize,
    pub coupling: CouplingOptions,
    pub seed: u64,
}

impl Default for JointTransportOptions {
    fn default() -> Self {
        Self {
            max_batch: 1000,
            coupling: CouplingOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointTransportResult {
    pub baseline: ConfusionTable,
    pub transported: ConfusionTable,
}

impl JointTransportResult {
    pub fn base_rate_gap(&self) -> f64 {
        (self.baseline.base_rate() - self.transported.base_rate()).abs()
    }

    /// Largest absolute difference among the four error rates; `None` when
    /// either table has an empty margin.
    pub fn max_error_gap(&self) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for l in 0..2u8 {
            let a = self.baseline.classification_error(l).ok()?;
            let b = self.transported.classification_error(l).ok()?;
            worst = worst.max((a - b).abs());
            let a = self.baseline.forecasting_error(l).ok()?;
            let b = self.transported.forecasting_error(l).ok()?;
            worst = worst.max((a - b).abs());
        }
        Some(worst)
    }
}

fn with_outcome(data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let labels = data.labels()?;
    Ok(data
        .records
        .iter()
        .zip(labels)
        .map(|(r, y)| {
            let mut v = r.covariates.clone();
            v.push(y as f64);
            v
        })
        .collect())
}

/// Transports the comparison group's joint `(x, y)` distribution onto the
/// baseline group's with the outcome as an extra coordinate, rounds the
/// transported outcome at 0.5, and tabulates both groups through `model`.
pub fn joint_transport_confusion(
    baseline_test: &Dataset,
    comparison_test: &Dataset,
    model: &ProbModel,
    options: &JointTransportOptions,
) -> Result<JointTransportResult> {
    let base_pred = predict_labels(model, baseline_test)?;
    let baseline = confusion_table(&baseline_test.labels()?, &base_pred)?;

    let src = with_outcome(comparison_test)?;
    let dst = with_outcome(baseline_test)?;
    let moved = batched_barycentric(&src, &dst, options.max_batch, &options.coupling, options.seed)?;
    let d = comparison_test.n_features();
    let (actual, pred): (Vec<Label>, Vec<Label>) = par::map_slice(&moved, |v| {
        let y = u8::from(v[d] >= 0.5);
        model.predict_label(&v[..d]).map(|p| (y, p))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .unzip();
    let transported = confusion_table(&actual, &pred)?;
    Ok(JointTransportResult {
        baseline,
        transported,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: Group,
    pub n: usize,
    pub confusion: ConfusionTable,
    pub set_proportions: SetProportions,
    /// Counterfactual classification errors for classes 0 and 1.
    pub counterfactual_errors: Option<[Option<f64>; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityGaps {
    pub prediction_parity: f64,
    /// Absolute gaps per class; `None` where a rate is undefined.
    pub classification_error: [Option<f64>; 2],
    pub forecasting_error: [Option<f64>; 2],
    pub cost_ratio: Option<f64>,
    pub counterfactual_classification_error: Option<[Option<f64>; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityReport {
    pub baseline: GroupMetrics,
    pub comparison: GroupMetrics,
    pub gaps: ParityGaps,
}

fn abs_gap(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some((a? - b?).abs())
}

impl ParityReport {
    /// Gaps are reported per family, never combined into a single score.
    pub fn new(baseline: GroupMetrics, comparison: GroupMetrics) -> Result<Self> {
        let pp = prediction_parity_gap(
            &baseline.set_proportions.as_array(),
            &comparison.set_proportions.as_array(),
        )?;
        let ce = |l: Label| {
            abs_gap(
                baseline.confusion.classification_error(l).ok(),
                comparison.confusion.classification_error(l).ok(),
            )
        };
        let fe = |l: Label| {
            abs_gap(
                baseline.confusion.forecasting_error(l).ok(),
                comparison.confusion.forecasting_error(l).ok(),
            )
        };
        let cf = match (&baseline.counterfactual_errors, &comparison.counterfactual_errors) {
            (Some(a), Some(b)) => Some([abs_gap(a[0], b[0]), abs_gap(a[1], b[1])]),
            _ => None,
        };
        let gaps = ParityGaps {
            prediction_parity: pp,
            classification_error: [ce(0), ce(1)],
            forecasting_error: [fe(0), fe(1)],
            cost_ratio: abs_gap(
                baseline.confusion.empirical_cost_ratio(),
                comparison.confusion.empirical_cost_ratio(),
            ),
            counterfactual_classification_error: cf,
        };
        Ok(Self {
            baseline,
            comparison,
            gaps,
        })
    }

    /// CSV blocks separated by blank lines: confusion counts, set
    /// proportions, gaps, and counterfactual errors when available.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let groups = [&self.baseline, &self.comparison];
        let mut s = String::from("group,actual,predicted_0,predicted_1\n");
        for g in groups {
            for a in 0..2 {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    g.group, a, g.confusion.counts[a][0], g.confusion.counts[a][1]
                );
            }
        }
        s.push_str("\ngroup,empty,zero,one,both\n");
        for g in groups {
            let p = g.set_proportions;
            let _ = writeln!(s, "{},{},{},{},{}", g.group, p.empty, p.zero, p.one, p.both);
        }
        s.push_str("\nmeasure,gap\n");
        let gp = &self.gaps;
        let _ = writeln!(s, "prediction_parity,{}", gp.prediction_parity);
        for l in 0..2 {
            let _ = writeln!(s, "classification_error_{l},{}", opt(gp.classification_error[l]));
        }
        for l in 0..2 {
            let _ = writeln!(s, "forecasting_error_{l},{}", opt(gp.forecasting_error[l]));
        }
        let _ = writeln!(s, "cost_ratio,{}", opt(gp.cost_ratio));
        if let Some(cf) = gp.counterfactual_classification_error {
            for (l, v) in cf.iter().enumerate() {
                let _ = writeln!(s, "counterfactual_classification_error_{l},{}", opt(*v));
            }
            s.push_str("\ngroup,counterfactual_error_0,counterfactual_error_1\n");
            for g in groups {
                if let Some(e) = g.counterfactual_errors {
                    let _ = writeln!(s, "{},{},{}", g.group, opt(e[0]), opt(e[1]));
                }
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
        let mut s = String::new();
        for g in [&self.baseline, &self.comparison] {
            s.push_str(&g.confusion.render_text(&format!("Test confusion table, {} group (n = {})", g.group, g.n)));
            s.push('\n');
        }
        let _ = writeln!(s, "{:<8}{:>12}{:>12}", "Set", "baseline", "comparison");
        let (a, b) = (
            self.baseline.set_proportions.as_array(),
            self.comparison.set_proportions.as_array(),
        );
        for (k, kind) in crate::conformal::SetKind::ALL.iter().enumerate() {
            let _ = writeln!(s, "{:<8}{:>12.3}{:>12.3}", kind.label(), a[k], b[k]);
        }
        s.push('\n');
        let gp = &self.gaps;
        let _ = writeln!(s, "Prediction parity gap (TV): {:.3}", gp.prediction_parity);
        let _ = writeln!(
            s,
            "Classification error gaps: class 0 {}, class 1 {}",
            opt(gp.classification_error[0]),
            opt(gp.classification_error[1])
        );
        let _ = writeln!(
            s,
            "Forecasting error gaps: forecast 0 {}, forecast 1 {}",
            opt(gp.forecasting_error[0]),
            opt(gp.forecasting_error[1])
        );
        let _ = writeln!(s, "Cost ratio gap: {}", opt(gp.cost_ratio));
        match gp.counterfactual_classification_error {
            Some(cf) => {
                let _ = writeln!(
                    s,
                    "Counterfactual classification error gaps: class 0 {}, class 1 {}",
                    opt(cf[0]),
                    opt(cf[1])
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "Counterfactual errors: not computable; outcomes under equal treatment are not observed in these data."
                );
            }
        }
        s
    }
}
