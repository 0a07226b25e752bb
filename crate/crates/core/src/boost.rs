//! Cost-weighted stochastic gradient boosting on binomial deviance.
//!
//! Each iteration fits a least-squares regression tree to the negative
//! gradient `y - p` on a row subsample, then sets each leaf to one Newton
//! step `sum(w * (y - p)) / sum(w * p * (1 - p))` over all training rows
//! that reach it. Case weights encode the
//! cost ratio: outcome-1 rows weigh `cost_ratio`, outcome-0 rows weigh 1.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{Dataset, Label};
use crate::tree::{grow, to_columns, Columns, GrowParams, RegressionTree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    /// Interaction depth of each tree.
    pub max_depth: usize,
    pub subsample: f64,
    /// Cost of a false negative relative to a false positive.
    pub cost_ratio: f64,
    /// Minimum total case weight per leaf.
    pub min_leaf_weight: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            learning_rate: 0.02,
            max_depth: 3,
            subsample: 0.5,
            cost_ratio: 8.0,
            min_leaf_weight: 10.0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if !(self.cost_ratio > 0.0 && self.cost_ratio.is_finite()) {
            return bad("cost_ratio must be positive");
        }
        if !(self.min_leaf_weight > 0.0) {
            return bad("min_leaf_weight must be positive");
        }
        Ok(())
    }
}

/// `cost_ratio` for records with outcome 1, 1 for outcome 0.
pub fn derive_case_weights(dataset: &Dataset, cost_ratio: f64) -> Result<Vec<f64>> {
    if !(cost_ratio > 0.0 && cost_ratio.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "cost_ratio must be positive, got {cost_ratio}"
        )));
    }
    Ok(dataset
        .labels()?
        .into_iter()
        .map(|y| if y == 1 { cost_ratio } else { 1.0 })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbModel {
    pub trees: Vec<RegressionTree>,
    /// Log-odds of the weighted base rate.
    pub base_score: f64,
    pub n_features: usize,
    pub config: BoostConfig,
}

fn sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn train(dataset: &Dataset, config: &BoostConfig) -> Result<ProbModel> {
    config.validate()?;
    let p = dataset.n_features();
    if p == 0 {
        return Err(Error::InvalidConfig("no covariates".into()));
    }
    let labels = dataset.labels()?;
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(Error::SingleClass);
    }
    let weights = derive_case_weights(dataset, config.cost_ratio)?;
    let rows = dataset.covariates();
    let cols = to_columns(&rows, p);
    let columns = Columns { cols: &cols };
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let n = y.len();

    let w_total: f64 = weights.iter().sum();
    let w_pos: f64 = weights.iter().zip(&y).map(|(w, y)| w * y).sum();
    let rate = w_pos / w_total;
    let base_score = (rate / (1.0 - rate)).ln();

    let mut raw = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_sample = ((config.subsample * n as f64).round() as usize).clamp(1, n);
    let params = GrowParams {
        max_depth: config.max_depth,
        min_leaf_weight: config.min_leaf_weight,
        max_features: None,
    };

    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        for i in 0..n {
            let prob = sigmoid(raw[i]);
            grad[i] = y[i] - prob;
            hess[i] = prob * (1.0 - prob);
        }
        let sampled: Vec<usize> = if n_sample < n {
            let mut s = sample(&mut rng, n, n_sample).into_vec();
            s.sort_unstable();
            s
        } else {
            (0..n).collect()
        };
        let newton = |rows: &[usize]| {
            let num: f64 = rows.iter().map(|&i| weights[i] * grad[i]).sum();
            let den: f64 = rows.iter().map(|&i| weights[i] * hess[i]).sum();
            num / den.max(1e-12)
        };
        let mut tree = grow(
            &columns, &grad, &weights, sampled, params, &newton, &mut rng,
        );
        if n_sample < n {
            // Structure from the subsample, leaf values from every row.
            tree.refit_leaves(&rows, newton);
        }
        for (i, row) in rows.iter().enumerate() {
            raw[i] += config.learning_rate * tree.predict(row);
        }
        trees.push(tree);
    }
    Ok(ProbModel {
        trees,
        base_score,
        n_features: p,
        config: config.clone(),
    })
}

impl ProbModel {
    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Additive log-odds score after all trees.
    pub fn raw_score(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let lr = self.config.learning_rate;
        Ok(self
            .trees
            .iter()
            .fold(self.base_score, |acc, t| acc + lr * t.predict(x)))
    }

    /// `(p(0|x), p(1|x))`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<(f64, f64)> {
        let p1 = sigmoid(self.raw_score(x)?);
        Ok((1.0 - p1, p1))
    }

    /// Argmax label; an exact tie goes to 0.
    pub fn predict_label(&self, x: &[f64]) -> Result<Label> {
        let (p0, p1) = self.predict_proba(x)?;
        Ok(u8::from(p1 > p0))
    }

    /// Model made of the first `k` trees.
    pub fn truncated(&self, k: usize) -> ProbModel {
        let mut m = self.clone();
        m.trees.truncate(k.max(1));
        m.config.n_trees = m.trees.len();
        m
    }

    /// Weighted mean binomial deviance on `holdout` after each iteration.
    pub fn staged_deviance(&self, holdout: &Dataset) -> Result<Vec<f64>> {
        let weights = derive_case_weights(holdout, self.config.cost_ratio)?;
        let labels = holdout.labels()?;
        let w_total: f64 = weights.iter().sum();
        if holdout.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let lr = self.config.learning_rate;
        let mut trace = vec![0.0; self.trees.len()];
        for ((r, &y), &w) in holdout.records.iter().zip(&labels).zip(&weights) {
            self.check_dim(&r.covariates)?;
            let mut f = self.base_score;
            for (t, tree) in self.trees.iter().enumerate() {
                f += lr * tree.predict(&r.covariates);
                let dev = if y == 1 { softplus(-f) } else { softplus(f) };
                trace[t] += 2.0 * w * dev;
            }
        }
        Ok(trace.into_iter().map(|d| d / w_total).collect())
    }
}

pub const PLATEAU_TOLERANCE: f64 = 1e-4;
pub const PLATEAU_PATIENCE: usize = 25;

/// Smallest iteration count `k` (1-based) such that the deviance improves by
/// less than `tolerance` over the next `patience` iterations. Returns the
/// trace length when no plateau is found.
pub fn plateau_iteration(trace: &[f64], tolerance: f64, patience: usize) -> usize {
    let n = trace.len();
    (1..=n)
        .find(|&k| k + patience <= n && trace[k - 1] - trace[k - 1 + patience] < tolerance)
        .unwrap_or(n)
        .max(1)
}

/// Iteration count at which holdout deviance stops improving.
pub fn select_iterations(model: &ProbModel, holdout: &Dataset) -> Result<usize> {
    let trace = model.staged_deviance(holdout)?;
    Ok(plateau_iteration(&trace, PLATEAU_TOLERANCE, PLATEAU_PATIENCE).min(model.trees.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Group, Record};
    use proptest::prelude::*;
    use rand::Rng;

    fn dataset(rows: Vec<(Vec<f64>, u8)>) -> Dataset {
        let p = rows[0].0.len();
        let records = rows
            .into_iter()
            .map(|(x, y)| Record::new(x, Group::Baseline, Some(y)))
            .collect();
        Dataset::new((0..p).map(|k| format!("x{k}")).collect(), records, 0).unwrap()
    }

    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        dataset(
            (0..n)
                .map(|_| {
                    let a: f64 = rng.random();
                    let b: f64 = rng.random();
                    (vec![a, b], u8::from(a + b > 1.0))
                })
                .collect(),
        )
    }

    fn noisy(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        dataset(
            (0..n)
                .map(|_| {
                    let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 4.0).collect();
                    let p = sigmoid(x[0] - 0.5 * x[1] - 1.5);
                    (x, u8::from(rng.random::<f64>() < p))
                })
                .collect(),
        )
    }

    #[test]
    fn case_weights() {
        let ds = dataset(vec![(vec![0.0], 1), (vec![1.0], 0), (vec![2.0], 0)]);
        assert_eq!(derive_case_weights(&ds, 8.0).unwrap(), vec![8.0, 1.0, 1.0]);
        assert_eq!(derive_case_weights(&ds, 1.0).unwrap(), vec![1.0; 3]);
        assert!(derive_case_weights(&ds, 0.0).is_err());
        let mut unlabeled = ds.clone();
        unlabeled.records[1].outcome = None;
        assert!(matches!(
            derive_case_weights(&unlabeled, 8.0),
            Err(Error::Unlabeled { row: 1 })
        ));
    }

    #[test]
    fn separable_toy_is_learned() {
        let ds = separable(200, 11);
        let cfg = BoostConfig {
            n_trees: 100,
            cost_ratio: 1.0,
            subsample: 1.0,
            min_leaf_weight: 2.0,
            ..BoostConfig::default()
        };
        let model = train(&ds, &cfg).unwrap();
        let correct = ds
            .records
            .iter()
            .filter(|r| model.predict_label(&r.covariates).unwrap() == r.outcome.unwrap())
            .count();
        assert!(correct as f64 / 200.0 >= 0.95, "accuracy {correct}/200");
    }

    #[test]
    fn constant_covariates_give_weighted_base_rate() {
        let rows: Vec<(Vec<f64>, u8)> = (0..50).map(|i| (vec![3.0, 3.0], u8::from(i % 5 == 0))).collect();
        let ds = dataset(rows);
        let cfg = BoostConfig {
            n_trees: 20,
            ..BoostConfig::default()
        };
        let model = train(&ds, &cfg).unwrap();
        // 10 positives weighted 8 against 40 negatives.
        let expected = 80.0 / 120.0;
        for x in [[3.0, 3.0], [0.0, -5.0], [100.0, 7.0]] {
            let (_, p1) = model.predict_proba(&x).unwrap();
            assert!((p1 - expected).abs() < 1e-6, "{p1}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = noisy(300, 5);
        let cfg = BoostConfig {
            n_trees: 40,
            seed: 9,
            ..BoostConfig::default()
        };
        let a = train(&ds, &cfg).unwrap();
        let b = train(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        let other = train(&ds, &BoostConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.trees, other.trees);
    }

    #[test]
    fn rejects_bad_inputs() {
        let one_class = dataset((0..20).map(|i| (vec![i as f64], 0)).collect());
        assert!(matches!(
            train(&one_class, &BoostConfig::default()),
            Err(Error::SingleClass)
        ));
        let records = vec![
            Record::new(vec![], Group::Baseline, Some(0)),
            Record::new(vec![], Group::Baseline, Some(1)),
        ];
        let no_features = Dataset::new(vec![], records, 0).unwrap();
        assert!(train(&no_features, &BoostConfig::default()).is_err());
        let bad = BoostConfig {
            learning_rate: 0.0,
            ..BoostConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let model = train(&noisy(100, 1), &BoostConfig { n_trees: 5, ..BoostConfig::default() }).unwrap();
        assert!(matches!(
            model.predict_proba(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn monotone_univariate_fit() {
        // Ten x values with positive rates rising in exact counts.
        let mut rows = Vec::new();
        for k in 0..10 {
            for j in 0..60 {
                rows.push((vec![k as f64], u8::from(j < 5 * (k + 1))));
            }
        }
        let ds = dataset(rows);
        let cfg = BoostConfig {
            n_trees: 200,
            subsample: 1.0,
            cost_ratio: 1.0,
            ..BoostConfig::default()
        };
        let model = train(&ds, &cfg).unwrap();
        let fitted: Vec<f64> = (0..10)
            .map(|k| model.predict_proba(&[k as f64]).unwrap().1)
            .collect();
        for w in fitted.windows(2) {
            assert!(w[1] >= w[0], "{fitted:?}");
        }
    }

    #[test]
    fn weighting_equals_replication() {
        let ds = noisy(150, 3);
        let mut replicated = ds.clone();
        replicated.records = ds
            .records
            .iter()
            .flat_map(|r| {
                let copies = if r.outcome == Some(1) { 8 } else { 1 };
                std::iter::repeat_n(r.clone(), copies)
            })
            .collect();
        let cfg = BoostConfig {
            n_trees: 60,
            subsample: 1.0,
            cost_ratio: 8.0,
            ..BoostConfig::default()
        };
        let weighted = train(&ds, &cfg).unwrap();
        let unweighted = train(&replicated, &BoostConfig { cost_ratio: 1.0, ..cfg }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..500 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 5.0 - 0.5).collect();
            let a = weighted.predict_proba(&x).unwrap().1;
            let b = unweighted.predict_proba(&x).unwrap().1;
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn tie_goes_to_zero() {
        let model = ProbModel {
            trees: vec![],
            base_score: 0.0,
            n_features: 1,
            config: BoostConfig::default(),
        };
        assert_eq!(model.predict_proba(&[1.0]).unwrap(), (0.5, 0.5));
        assert_eq!(model.predict_label(&[1.0]).unwrap(), 0);
    }

    #[test]
    fn plateau_rules() {
        let decreasing: Vec<f64> = (0..100).map(|i| 1.0 - 0.001 * i as f64).collect();
        assert_eq!(plateau_iteration(&decreasing, 1e-4, 25), 100);

        let flat_from_40: Vec<f64> = (1..=200)
            .map(|k| if k <= 40 { 1.0 - 0.01 * k as f64 } else { 0.6 })
            .collect();
        let k = plateau_iteration(&flat_from_40, 1e-4, 25);
        assert!(k <= 65, "{k}");
        assert!(k >= 40, "{k}");

        assert_eq!(plateau_iteration(&[0.7], 1e-4, 25), 1);
    }

    #[test]
    fn select_iterations_stays_in_range() {
        let train_set = noisy(400, 21);
        let holdout = noisy(400, 22);
        let model = train(&train_set, &BoostConfig { n_trees: 120, ..BoostConfig::default() }).unwrap();
        let k = select_iterations(&model, &holdout).unwrap();
        assert!((1..=120).contains(&k));
        let one = model.truncated(1);
        assert_eq!(select_iterations(&one, &holdout).unwrap(), 1);
    }

    #[test]
    fn probability_simplex_on_many_inputs() {
        let model = train(&noisy(300, 2), &BoostConfig { n_trees: 30, ..BoostConfig::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 20.0 - 10.0).collect();
            let (p0, p1) = model.predict_proba(&x).unwrap();
            assert!((0.0..=1.0).contains(&p0) && (0.0..=1.0).contains(&p1));
            assert!((p0 + p1 - 1.0).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn sigmoid_stays_in_unit_interval(f in -800.0f64..800.0) {
            let p = sigmoid(f);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(softplus(f).is_finite());
        }
    }
}
