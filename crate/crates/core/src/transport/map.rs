use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coupling::{barycentric_project, solve_coupling, CouplingOptions};
use crate::error::{Error, Result};
use crate::forest::{ForestConfig, RegressionForest};
use crate::par;

/// Fewest pairs a smoothed map is fit on.
pub const MIN_SMOOTHING_PAIRS: usize = 20;

/// Smoothed transport map fit on one set of `(x, yhat)` pairs: one forest
/// per output coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedMap {
    pub per_coordinate_regressors: Vec<RegressionForest>,
    pub training_pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl SmoothedMap {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.per_coordinate_regressors
            .iter()
            .map(|f| f.predict(x))
            .collect()
    }
}

/// Estimated transport map. With several batches the output is the mean
/// of the per-batch maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportMap {
    pub batches: Vec<SmoothedMap>,
    pub n_features: usize,
}

impl TransportMap {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        apply_map(self, x)
    }

    /// Training pairs of every batch, in batch order.
    pub fn training_pairs(&self) -> impl Iterator<Item = &(Vec<f64>, Vec<f64>)> {
        self.batches.iter().flat_map(|b| b.training_pairs.iter())
    }
}

pub fn apply_map(map: &TransportMap, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != map.n_features {
        return Err(Error::DimensionMismatch {
            expected: map.n_features,
            got: x.len(),
        });
    }
    let mut out = vec![0.0; map.n_features];
    for b in &map.batches {
        for (o, v) in out.iter_mut().zip(b.apply(x)?) {
            *o += v;
        }
    }
    let k = map.batches.len() as f64;
    Ok(out.into_iter().map(|v| v / k).collect())
}

/// Applies `map` to many points, in parallel when available.
pub fn apply_map_all(map: &TransportMap, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    par::map_slice(xs, |x| apply_map(map, x)).into_iter().collect()
}

fn coordinate_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

fn fit_batch(pairs: Vec<(Vec<f64>, Vec<f64>)>, forest: &ForestConfig) -> Result<SmoothedMap> {
    if pairs.len() < MIN_SMOOTHING_PAIRS {
        return Err(Error::TooFewPairs {
            got: pairs.len(),
            min: MIN_SMOOTHING_PAIRS,
        });
    }
    let d_in = pairs[0].0.len();
    let d_out = pairs[0].1.len();
    if let Some((x, y)) = pairs.iter().find(|(x, y)| x.len() != d_in || y.len() != d_out) {
        return Err(Error::DimensionMismatch {
            expected: d_in,
            got: x.len().max(y.len()),
        });
    }
    let xs: Vec<Vec<f64>> = pairs.iter().map(|p| p.0.clone()).collect();
    let per_coordinate_regressors = (0..d_out)
        .map(|k| {
            let y: Vec<f64> = pairs.iter().map(|p| p.1[k]).collect();
            let cfg = ForestConfig {
                seed: coordinate_seed(forest.seed, k),
                ..forest.clone()
            };
            RegressionForest::fit(&xs, &y, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SmoothedMap {
        per_coordinate_regressors,
        training_pairs: pairs,
    })
}

/// Regresses each coordinate of `yhat` on `x` with a regression forest.
pub fn fit_smoothed_map(pairs: Vec<(Vec<f64>, Vec<f64>)>, seed: u64) -> Result<TransportMap> {
    fit_smoothed_map_with(
        pairs,
        &ForestConfig {
            seed,
            ..ForestConfig::default()
        },
    )
}

pub fn fit_smoothed_map_with(
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
    forest: &ForestConfig,
) -> Result<TransportMap> {
    let batch = fit_batch(pairs, forest)?;
    let n_features = batch.training_pairs[0].0.len();
    Ok(TransportMap {
        batches: vec![batch],
        n_features,
    })
}

/// How per-batch transport estimates are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchCombine {
    /// Average the outputs of per-batch smoothed maps.
    #[default]
    AverageMaps,
    /// Pool the per-batch `(x, yhat)` pairs and fit one smoothed map.
    PoolPairs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchOptions {
    pub n_batches: usize,
    pub batch_size: usize,
    pub combine: BatchCombine,
    pub coupling: CouplingOptions,
    pub forest: ForestConfig,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            n_batches: 10,
            batch_size: 200,
            combine: BatchCombine::AverageMaps,
            coupling: CouplingOptions::default(),
            forest: ForestConfig::default(),
        }
    }
}

fn batch_seed(seed: u64, b: usize) -> u64 {
    seed.wrapping_add(b as u64)
}

/// Random disjoint batches `(source indices, dest indices)` per batch.
pub fn batch_assignment(
    n_source: usize,
    n_dest: usize,
    n_batches: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if n_batches == 0 || batch_size == 0 {
        return Err(Error::InvalidConfig(
            "n_batches and batch_size must be positive".into(),
        ));
    }
    let needed = n_batches * batch_size;
    let available = n_source.min(n_dest);
    if available < needed {
        return Err(Error::InsufficientRecords { needed, available });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut src: Vec<usize> = (0..n_source).collect();
    let mut dst: Vec<usize> = (0..n_dest).collect();
    src.shuffle(&mut rng);
    dst.shuffle(&mut rng);
    Ok((0..n_batches)
        .map(|b| {
            let r = b * batch_size..(b + 1) * batch_size;
            (src[r.clone()].to_vec(), dst[r].to_vec())
        })
        .collect())
}

/// Transport map estimated on `n_batches` random batches of `batch_size`
/// points per side.
pub fn batched_fit_map(
    source: &[Vec<f64>],
    dest: &[Vec<f64>],
    options: &BatchOptions,
    seed: u64,
) -> Result<TransportMap> {
    let entries = options.batch_size.saturating_mul(options.batch_size);
    if entries > options.coupling.memory_budget {
        return Err(Error::BudgetExceeded {
            entries,
            budget: options.coupling.memory_budget,
        });
    }
    let batches = batch_assignment(
        source.len(),
        dest.len(),
        options.n_batches,
        options.batch_size,
        seed,
    )?;
    let pairs = par::try_map_range(batches.len(), |b| {
        let (si, di) = &batches[b];
        let s: Vec<Vec<f64>> = si.iter().map(|&i| source[i].clone()).collect();
        let d: Vec<Vec<f64>> = di.iter().map(|&j| dest[j].clone()).collect();
        let coupling = solve_coupling(&s, &d, &options.coupling)?;
        Ok::<_, Error>(barycentric_project(&coupling))
    })?;

    let n_features = source[0].len();
    match options.combine {
        BatchCombine::AverageMaps => {
            let maps = pairs
                .into_iter()
                .enumerate()
                .map(|(b, p)| {
                    let forest = ForestConfig {
                        seed: batch_seed(seed, b),
                        ..options.forest.clone()
                    };
                    fit_batch(p, &forest)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TransportMap {
                batches: maps,
                n_features,
            })
        }
        BatchCombine::PoolPairs => {
            let pooled = pairs.into_iter().flatten().collect();
            let forest = ForestConfig {
                seed,
                ..options.forest.clone()
            };
            fit_smoothed_map_with(pooled, &forest)
        }
    }
}

/// Unsmoothed transport of every source point: both sides are split into
/// the same number of random batches of at most `max_batch` points, each
/// batch pair is solved exactly and projected. Output is in source order.
pub fn batched_barycentric(
    source: &[Vec<f64>],
    dest: &[Vec<f64>],
    max_batch: usize,
    options: &CouplingOptions,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if source.is_empty() || dest.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let max_batch = max_batch.max(1);
    let n_batches = source.len().max(dest.len()).div_ceil(max_batch);
    if n_batches > source.len().min(dest.len()) {
        return Err(Error::InsufficientRecords {
            needed: n_batches,
            available: source.len().min(dest.len()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut src: Vec<usize> = (0..source.len()).collect();
    let mut dst: Vec<usize> = (0..dest.len()).collect();
    src.shuffle(&mut rng);
    dst.shuffle(&mut rng);
    let chunk = |idx: &[usize], b: usize| -> Vec<usize> {
        let len = idx.len();
        idx[b * len / n_batches..(b + 1) * len / n_batches].to_vec()
    };
    let results = par::try_map_range(n_batches, |b| {
        let si = chunk(&src, b);
        let di = chunk(&dst, b);
        let s: Vec<Vec<f64>> = si.iter().map(|&i| source[i].clone()).collect();
        let d: Vec<Vec<f64>> = di.iter().map(|&j| dest[j].clone()).collect();
        let coupling = solve_coupling(&s, &d, options)?;
        let projected: Vec<Vec<f64>> = barycentric_project(&coupling)
            .into_iter()
            .map(|p| p.1)
            .collect();
        Ok::<_, Error>((si, projected))
    })?;
    let mut out = vec![Vec::new(); source.len()];
    for (si, projected) in results {
        for (i, y) in si.into_iter().zip(projected) {
            out[i] = y;
        }
    }
    Ok(out)
}
