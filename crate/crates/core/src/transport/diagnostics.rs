//! Marginal histogram comparisons between two samples.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count_a: usize,
    pub count_b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalHistogram {
    pub feature: String,
    pub bins: Vec<HistogramBin>,
    /// Sum over bins of the smaller of the two bin proportions, in [0, 1].
    pub overlap: f64,
}

impl MarginalHistogram {
    /// `bin_left,bin_right,count_a,count_b` rows followed by an
    /// `overlap,<value>,,` footer.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,count_a,count_b\n");
        for b in &self.bins {
            let _ = writeln!(s, "{},{},{},{}", b.left, b.right, b.count_a, b.count_b);
        }
        let _ = writeln!(s, "overlap,{},,", self.overlap);
        s
    }
}

/// Shared equal-width bins over the pooled range of `a` and `b`.
pub fn histogram_overlap(a: &[f64], b: &[f64], n_bins: usize) -> Result<MarginalHistogram> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n_bins == 0 {
        return Err(Error::InvalidConfig("n_bins must be positive".into()));
    }
    let (mut lo, mut hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / n_bins as f64;
    let bin_of = |v: f64| (((v - lo) / width) as usize).min(n_bins - 1);
    let mut ca = vec![0usize; n_bins];
    let mut cb = vec![0usize; n_bins];
    for &v in a {
        ca[bin_of(v)] += 1;
    }
    for &v in b {
        cb[bin_of(v)] += 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let overlap = ca
        .iter()
        .zip(&cb)
        .map(|(&x, &y)| (x as f64 / na).min(y as f64 / nb))
        .sum::<f64>()
        .min(1.0);
    let bins = (0..n_bins)
        .map(|k| HistogramBin {
            left: lo + k as f64 * width,
            right: if k + 1 == n_bins {
                hi
            } else {
                lo + (k + 1) as f64 * width
            },
            count_a: ca[k],
            count_b: cb[k],
        })
        .collect();
    Ok(MarginalHistogram {
        feature: String::new(),
        bins,
        overlap,
    })
}

pub fn diagnose_marginals(
    a: &Dataset,
    b: &Dataset,
    feature: &str,
    n_bins: usize,
) -> Result<MarginalHistogram> {
    let ka = a.feature_index(feature)?;
    let kb = b.feature_index(feature)?;
    let mut h = histogram_overlap(&a.column(ka), &b.column(kb), n_bins)?;
    h.feature = feature.to_string();
    Ok(h)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
