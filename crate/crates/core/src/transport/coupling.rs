use serde::{Deserialize, Serialize};

use super::network_simplex::{solve_transportation, SimplexError};
use crate::error::{Error, Result};

/// Default cap on `m * n` coupling entries.
pub const DEFAULT_MEMORY_BUDGET: usize = 25_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingOptions {
    pub memory_budget: usize,
    /// Scale each coordinate by its pooled standard deviation before
    /// computing distances. Off by default.
    pub standardize: bool,
}

impl Default for CouplingOptions {
    fn default() -> Self {
        Self {
            memory_budget: DEFAULT_MEMORY_BUDGET,
            standardize: false,
        }
    }
}

/// Optimal plan between two uniform empirical measures.
///
/// `entries` holds the support of the plan (at most `m + n - 1` cells for a
/// basic solution); every other cell is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCoupling {
    pub m: usize,
    pub n: usize,
    /// `(i, j, mass)` with mass > 0.
    pub entries: Vec<(usize, usize, f64)>,
    pub source_points: Vec<Vec<f64>>,
    pub dest_points: Vec<Vec<f64>>,
    /// `sum ||x_i - y_j||^2 * gamma_ij`, the squared 2-Wasserstein distance.
    pub objective: f64,
}

impl DiscreteCoupling {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .iter()
            .find(|&&(a, b, _)| a == i && b == j)
            .map_or(0.0, |e| e.2)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut g = vec![vec![0.0; self.n]; self.m];
        for &(i, j, v) in &self.entries {
            g[i][j] += v;
        }
        g
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.m];
        for &(i, _, v) in &self.entries {
            s[i] += v;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for &(_, j, v) in &self.entries {
            s[j] += v;
        }
        s
    }

    /// Largest deviation of any marginal from `1/m` or `1/n`.
    pub fn marginal_error(&self) -> f64 {
        let rm = 1.0 / self.m as f64;
        let cn = 1.0 / self.n as f64;
        let r = self.row_sums().into_iter().map(|s| (s - rm).abs());
        let c = self.col_sums().into_iter().map(|s| (s - cn).abs());
        r.chain(c).fold(0.0, f64::max)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points(points: &[Vec<f64>], d: usize) -> Result<()> {
    match points.iter().find(|p| p.len() != d) {
        Some(p) => Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        }),
        None => Ok(()),
    }
}

/// Per-coordinate pooled standard deviations (1 for constant coordinates).
fn pooled_scales(source: &[Vec<f64>], dest: &[Vec<f64>], d: usize) -> Vec<f64> {
    let all: Vec<&Vec<f64>> = source.iter().chain(dest).collect();
    let n = all.len() as f64;
    (0..d)
        .map(|k| {
            let mean = all.iter().map(|p| p[k]).sum::<f64>() / n;
            let var = all.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect()
}

/// Exact solution of the Kantorovich problem with uniform marginals `1/m`
/// and `1/n` under squared Euclidean cost.
pub fn solve_coupling(
    source: &[Vec<f64>],
    dest: &[Vec<f64>],
    options: &CouplingOptions,
) -> Result<DiscreteCoupling> {
    let (m, n) = (source.len(), dest.len());
    if m == 0 || n == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = source[0].len();
    check_points(source, d)?;
    check_points(dest, d)?;
    let entries = m.saturating_mul(n);
    if entries > options.memory_budget {
        return Err(Error::BudgetExceeded {
            entries,
            budget: options.memory_budget,
        });
    }

    let scales = if options.standardize {
        pooled_scales(source, dest, d)
    } else {
        vec![1.0; d]
    };
    let mut cost = Vec::with_capacity(entries);
    for x in source {
        for y in dest {
            cost.push(
                x.iter()
                    .zip(y)
                    .zip(&scales)
                    .map(|((a, b), s)| ((a - b) / s).powi(2))
                    .sum(),
            );
        }
    }

    // Integer masses: each source ships n units, each sink receives m.
    let supply = vec![n as i64; m];
    let demand = vec![m as i64; n];
    let sol = solve_transportation(&supply, &demand, &cost).map_err(|e| match e {
        SimplexError::Unbalanced { .. } | SimplexError::Unbounded | SimplexError::Infeasible => {
            Error::InvalidConfig(format!("transport solver failed: {e:?}"))
        }
    })?;

    let total = (m * n) as f64;
    let entries: Vec<(usize, usize, f64)> = sol
        .flows
        .iter()
        .map(|&(i, j, f)| (i, j, f as f64 / total))
        .collect();
    // Objective on the raw covariates, whatever scaling drove the plan.
    let objective = sol
        .flows
        .iter()
        .map(|&(i, j, f)| f as f64 * squared_distance(&source[i], &dest[j]))
        .sum::<f64>()
        / total;

    Ok(DiscreteCoupling {
        m,
        n,
        entries,
        source_points: source.to_vec(),
        dest_points: dest.to_vec(),
        objective,
    })
}

/// Maps each source point to the coupling-weighted mean of the destination
/// points it sends mass to. Returns `(x_i, yhat_i)` in source order.
///
/// Weights are the solver's integer flows, so a source point matched to a
/// single destination maps to that point exactly.
pub fn barycentric_project(coupling: &DiscreteCoupling) -> Vec<(Vec<f64>, Vec<f64>)> {
    let total = (coupling.m * coupling.n) as f64;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); coupling.m];
    for &(i, j, g) in &coupling.entries {
        rows[i].push((j, (g * total).round()));
    }
    coupling
        .source_points
        .iter()
        .zip(rows)
        .map(|(x, row)| {
            let yhat = match row.as_slice() {
                [(j, _)] => coupling.dest_points[*j].clone(),
                _ => {
                    let w: f64 = row.iter().map(|e| e.1).sum();
                    let mut acc = vec![0.0; coupling.dest_points[0].len()];
                    for &(j, f) in &row {
                        for (a, y) in acc.iter_mut().zip(&coupling.dest_points[j]) {
                            *a += f * y;
                        }
                    }
                    acc.into_iter().map(|s| s / w).collect()
                }
            };
            (x.clone(), yhat)
        })
        .collect()
}
