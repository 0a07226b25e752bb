//! Bootstrap regression forest used to smooth transport maps.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::tree::{grow, to_columns, Columns, GrowParams, RegressionTree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_leaf_size: usize,
    /// Features tried per split; `None` tries all of them.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            min_leaf_size: 2,
            max_features: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    pub trees: Vec<RegressionTree>,
    pub n_features: usize,
}

/// Seed for tree `t`; trees are independent of how they are scheduled.
fn tree_seed(seed: u64, t: usize) -> u64 {
    seed ^ (t as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl RegressionForest {
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &ForestConfig) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if config.n_trees == 0 || config.min_leaf_size == 0 {
            return Err(Error::InvalidConfig(
                "forest needs positive n_trees and min_leaf_size".into(),
            ));
        }
        let d = x[0].len();
        if let Some(r) = x.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        let cols = to_columns(x, d);
        let n = x.len();
        let max_features = config.max_features.unwrap_or(d).clamp(1, d.max(1));
        let params = GrowParams {
            max_depth: usize::MAX,
            min_leaf_weight: config.min_leaf_size as f64,
            max_features: Some(max_features),
        };
        let trees = par::map_range(config.n_trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(config.seed, t));
            // Bootstrap counts act as case weights.
            let mut counts = vec![0.0; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1.0;
            }
            let rows: Vec<usize> = (0..n).filter(|&i| counts[i] > 0.0).collect();
            let mean = |rows: &[usize]| {
                let w: f64 = rows.iter().map(|&i| counts[i]).sum();
                rows.iter().map(|&i| counts[i] * y[i]).sum::<f64>() / w
            };
            grow(
                &Columns { cols: &cols },
                y,
                &counts,
                rows,
                params,
                &mean,
                &mut rng,
            )
        });
        Ok(Self {
            trees,
            n_features: d,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![(i % 25) as f64, (i / 25) as f64])
            .collect()
    }

    #[test]
    fn fits_a_smooth_function() {
        let x = grid(500);
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 0.5 * r[1]).collect();
        let forest = RegressionForest::fit(&x, &y, &ForestConfig::default()).unwrap();
        let mae: f64 = x
            .iter()
            .zip(&y)
            .map(|(r, t)| (forest.predict(r).unwrap() - t).abs())
            .sum::<f64>()
            / 500.0;
        assert!(mae < 1.5, "mae {mae}");
    }

    #[test]
    fn constant_response() {
        let x = grid(60);
        let y = vec![4.25; 60];
        let forest = RegressionForest::fit(&x, &y, &ForestConfig::default()).unwrap();
        assert_eq!(forest.predict(&[-100.0, 1e6]).unwrap(), 4.25);
    }

    #[test]
    fn extrapolates_flat_within_response_range() {
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..100).map(|i| i as f64 * 0.5).collect();
        let forest = RegressionForest::fit(&x, &y, &ForestConfig::default()).unwrap();
        let hi = forest.predict(&[1e4]).unwrap();
        let lo = forest.predict(&[-1e4]).unwrap();
        assert!(hi <= 49.5 && hi > 40.0, "{hi}");
        assert!((0.0..5.0).contains(&lo), "{lo}");
    }

    #[test]
    fn deterministic_given_seed() {
        let x = grid(100);
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[1]).collect();
        let cfg = ForestConfig {
            n_trees: 20,
            seed: 3,
            ..ForestConfig::default()
        };
        assert_eq!(
            RegressionForest::fit(&x, &y, &cfg).unwrap(),
            RegressionForest::fit(&x, &y, &cfg).unwrap()
        );
    }
}
