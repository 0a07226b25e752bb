//! Split conformal prediction sets for binary outcomes.
//!
//! The nonconformity score of a candidate label is `1 - p(y|x)`, i.e.
//! `|y - p(1|x)|`. The threshold is the `ceil((n + 1)(1 - alpha))`-th
//! smallest calibration score, clamped to the largest score.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::boost::ProbModel;
use crate::error::{Error, Result};
use crate::par;
use crate::tabular::{Dataset, Label};

fn check_label(y: Label) -> Result<()> {
    if y > 1 {
        Err(Error::InvalidLabel(y))
    } else {
        Ok(())
    }
}

/// Score of label `y` given `p(1|x)`.
pub fn score_from_p1(p1: f64, y: Label) -> Result<f64> {
    check_label(y)?;
    Ok((y as f64 - p1).abs())
}

pub fn score(model: &ProbModel, x: &[f64], y: Label) -> Result<f64> {
    check_label(y)?;
    let (_, p1) = model.predict_proba(x)?;
    score_from_p1(p1, y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalCalibration {
    /// Calibration scores, ascending.
    pub scores: Vec<f64>,
    pub alpha: f64,
    pub gamma_hat: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// 1-based rank of the threshold among `n` sorted scores.
pub fn quantile_rank(n: usize, alpha: f64) -> usize {
    let exact = (n as f64 + 1.0) * (1.0 - alpha);
    // Guard against products like 4.000000000000001.
    let rank = (exact - 1e-9).ceil().max(1.0) as usize;
    rank.min(n)
}

impl ConformalCalibration {
    pub fn from_scores(mut scores: Vec<f64>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if scores.is_empty() {
            return Err(Error::EmptyCalibration);
        }
        scores.sort_by(f64::total_cmp);
        let gamma_hat = scores[quantile_rank(scores.len(), alpha) - 1];
        Ok(Self {
            scores,
            alpha,
            gamma_hat,
        })
    }

    /// Same scores at a different miscoverage level.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::from_scores(self.scores.clone(), alpha)
    }
}

pub fn calibrate(
    model: &ProbModel,
    calibration: &Dataset,
    alpha: f64,
) -> Result<ConformalCalibration> {
    check_alpha(alpha)?;
    if calibration.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let labels = calibration.labels()?;
    let scores = par::map_range(calibration.len(), |i| {
        score(model, &calibration.records[i].covariates, labels[i])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    ConformalCalibration::from_scores(scores, alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetKind {
    Empty,
    Zero,
    One,
    Both,
}

impl SetKind {
    pub const ALL: [SetKind; 4] = [SetKind::Empty, SetKind::Zero, SetKind::One, SetKind::Both];

    pub fn label(self) -> &'static str {
        match self {
            SetKind::Empty => "{}",
            SetKind::Zero => "{0}",
            SetKind::One => "{1}",
            SetKind::Both => "{0,1}",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub contains_zero: bool,
    pub contains_one: bool,
    pub threshold_used: f64,
}

impl PredictionSet {
    pub fn members(&self) -> Vec<Label> {
        let mut m = Vec::with_capacity(2);
        if self.contains_zero {
            m.push(0);
        }
        if self.contains_one {
            m.push(1);
        }
        m
    }

    pub fn contains(&self, y: Label) -> bool {
        match y {
            0 => self.contains_zero,
            1 => self.contains_one,
            _ => false,
        }
    }

    pub fn is_subset_of(&self, other: &PredictionSet) -> bool {
        (!self.contains_zero || other.contains_zero) && (!self.contains_one || other.contains_one)
    }

    pub fn kind(&self) -> SetKind {
        match (self.contains_zero, self.contains_one) {
            (false, false) => SetKind::Empty,
            (true, false) => SetKind::Zero,
            (false, true) => SetKind::One,
            (true, true) => SetKind::Both,
        }
    }
}

/// `{y : s(x, y) <= gamma}`; the threshold is inclusive.
pub fn set_from_p1(p1: f64, gamma_hat: f64) -> PredictionSet {
    PredictionSet {
        contains_zero: p1 <= gamma_hat,
        contains_one: 1.0 - p1 <= gamma_hat,
        threshold_used: gamma_hat,
    }
}

pub fn predict_set(
    calibration: &ConformalCalibration,
    model: &ProbModel,
    x: &[f64],
) -> Result<PredictionSet> {
    let (_, p1) = model.predict_proba(x)?;
    Ok(set_from_p1(p1, calibration.gamma_hat))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SetProportions {
    pub empty: f64,
    pub zero: f64,
    pub one: f64,
    pub both: f64,
}

impl SetProportions {
    pub fn from_sets<'a>(sets: impl IntoIterator<Item = &'a PredictionSet>) -> Result<Self> {
        let mut counts = [0usize; 4];
        for s in sets {
            counts[s.kind() as usize] += 1;
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyDataset);
        }
        let f = |c: usize| c as f64 / total as f64;
        Ok(Self {
            empty: f(counts[0]),
            zero: f(counts[1]),
            one: f(counts[2]),
            both: f(counts[3]),
        })
    }

    /// In the order `{}`, `{0}`, `{1}`, `{0,1}`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.empty, self.zero, self.one, self.both]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            empty: v[0],
            zero: v[1],
            one: v[2],
            both: v[3],
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("set,proportion\n");
        for (k, v) in SetKind::ALL.iter().zip(self.as_array()) {
            let _ = writeln!(s, "\"{}\",{}", k.label(), v);
        }
        s
    }
}

pub fn set_proportions(
    calibration: &ConformalCalibration,
    model: &ProbModel,
    unlabeled: &Dataset,
) -> Result<SetProportions> {
    if unlabeled.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sets = par::map_slice(&unlabeled.records, |r| {
        predict_set(calibration, model, &r.covariates)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    SetProportions::from_sets(&sets)
}
