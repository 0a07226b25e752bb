//! Records, datasets, CSV ingestion and seeded splitting.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary outcome label, 0 or 1.
pub type Label = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Baseline,
    Comparison,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Baseline, Group::Comparison];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Baseline => "baseline",
            Group::Comparison => "comparison",
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub covariates: Vec<f64>,
    pub group: Group,
    pub outcome: Option<Label>,
    /// Outcome under equal treatment; only known for simulated data.
    pub counterfactual_outcome: Option<Label>,
}

impl Record {
    pub fn new(covariates: Vec<f64>, group: Group, outcome: Option<Label>) -> Self {
        Self {
            covariates,
            group,
            outcome,
            counterfactual_outcome: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub feature_names: Vec<String>,
    /// Seed for every randomized split of this dataset.
    pub seed: u64,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, records: Vec<Record>, seed: u64) -> Result<Self> {
        let p = feature_names.len();
        for r in &records {
            if r.covariates.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.covariates.len(),
                });
            }
            for label in [r.outcome, r.counterfactual_outcome].into_iter().flatten() {
                if label > 1 {
                    return Err(Error::InvalidLabel(label));
                }
            }
        }
        Ok(Self {
            records,
            feature_names,
            seed,
        })
    }

    pub fn empty_like(&self) -> Self {
        Self {
            records: Vec::new(),
            feature_names: self.feature_names.clone(),
            seed: self.seed,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn covariates(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.covariates.clone()).collect()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.covariates[k]).collect()
    }

    /// Observed outcomes; errors on the first unlabeled record.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.records
            .iter()
            .enumerate()
            .map(|(row, r)| r.outcome.ok_or(Error::Unlabeled { row }))
            .collect()
    }

    pub fn is_labeled(&self) -> bool {
        self.records.iter().all(|r| r.outcome.is_some())
    }

    pub fn has_counterfactuals(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.counterfactual_outcome.is_some())
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            seed: self.seed,
        }
    }

    pub fn count_group(&self, group: Group) -> usize {
        self.records.iter().filter(|r| r.group == group).count()
    }

    /// Fraction of labeled records with outcome 1.
    pub fn base_rate(&self) -> Result<f64> {
        let labels = self.labels()?;
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(labels.iter().filter(|&&y| y == 1).count() as f64 / labels.len() as f64)
    }
}

/// Records of `dataset` belonging to `group`, in their original order.
pub fn filter_group(dataset: &Dataset, group: Group) -> Dataset {
    Dataset {
        records: dataset
            .records
            .iter()
            .filter(|r| r.group == group)
            .cloned()
            .collect(),
        feature_names: dataset.feature_names.clone(),
        seed: dataset.seed,
    }
}

/// Column bindings for CSV input and output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Covariate columns, in order. Empty means every column that is not
    /// bound to something else.
    pub feature_names: Vec<String>,
    pub group_column: String,
    pub outcome_column: String,
    /// When false an absent outcome column yields unlabeled records.
    pub require_outcome_column: bool,
    /// Read if present in the header, never required.
    pub counterfactual_column: String,
    pub baseline_value: String,
    pub comparison_value: String,
}

/// Columns that are never inferred as covariates.
const RESERVED_COLUMNS: &[&str] = &["row_id"];

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            feature_names: Vec::new(),
            group_column: "group".into(),
            outcome_column: "y".into(),
            require_outcome_column: true,
            counterfactual_column: "y_star".into(),
            baseline_value: Group::Baseline.as_str().into(),
            comparison_value: Group::Comparison.as_str().into(),
        }
    }
}

impl CsvSchema {
    pub fn with_features<S: Into<String>>(features: impl IntoIterator<Item = S>) -> Self {
        Self {
            feature_names: features.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    fn group_label(&self, group: Group) -> &str {
        match group {
            Group::Baseline => &self.baseline_value,
            Group::Comparison => &self.comparison_value,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::MalformedRow {
            row: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let find = |name: &str| header.iter().position(|h| h == name);

    let group_col = find(&schema.group_column)
        .ok_or_else(|| Error::MissingColumn(schema.group_column.clone()))?;
    let outcome_col = find(&schema.outcome_column);
    if outcome_col.is_none() && schema.require_outcome_column {
        return Err(Error::MissingColumn(schema.outcome_column.clone()));
    }
    let cf_col = find(&schema.counterfactual_column);

    let feature_names: Vec<String> = if schema.feature_names.is_empty() {
        header
            .iter()
            .enumerate()
            .filter(|(i, h)| {
                *i != group_col
                    && Some(*i) != outcome_col
                    && Some(*i) != cf_col
                    && *h != &schema.outcome_column
                    && !RESERVED_COLUMNS.contains(&h.as_str())
            })
            .map(|(_, h)| h.clone())
            .collect()
    } else {
        schema.feature_names.clone()
    };
    let feature_cols = feature_names
        .iter()
        .map(|f| find(f).ok_or_else(|| Error::MissingColumn(f.clone())))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        // Header is line 1.
        let line = k + 2;
        let row = row.map_err(|e| Error::MalformedRow {
            row: line,
            message: e.to_string(),
        })?;
        let mut covariates = Vec::with_capacity(feature_cols.len());
        for (&c, name) in feature_cols.iter().zip(&feature_names) {
            let cell = row.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                return Err(Error::MissingCovariate {
                    column: name.clone(),
                    row: line,
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                column: name.clone(),
                row: line,
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    column: name.clone(),
                    row: line,
                });
            }
            covariates.push(v);
        }
        let g = row.get(group_col).unwrap_or("").trim();
        let group = if g == schema.baseline_value {
            Group::Baseline
        } else if g == schema.comparison_value {
            Group::Comparison
        } else {
            return Err(Error::UnknownGroup {
                value: g.to_string(),
                row: line,
            });
        };
        let outcome = match outcome_col {
            Some(c) => parse_label(row.get(c).unwrap_or(""), &schema.outcome_column, line)?,
            None => None,
        };
        let counterfactual_outcome = match cf_col {
            Some(c) => parse_label(row.get(c).unwrap_or(""), &schema.counterfactual_column, line)?,
            None => None,
        };
        records.push(Record {
            covariates,
            group,
            outcome,
            counterfactual_outcome,
        });
    }
    Dataset::new(feature_names, records, 0)
}

fn parse_label(cell: &str, column: &str, row: usize) -> Result<Option<Label>> {
    match cell.trim() {
        "" => Ok(None),
        "0" => Ok(Some(0)),
        "1" => Ok(Some(1)),
        other => Err(Error::InvalidOutcome {
            value: other.to_string(),
            column: column.to_string(),
            row,
        }),
    }
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>, schema: &CsvSchema) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf, schema)?;
    crate::pipeline::artifacts::write_atomic(path, &buf)
}

/// Writes the standard schema: covariates, group, outcome, and `y_star` when
/// any record carries a counterfactual label. Covariates use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W, schema: &CsvSchema) -> Result<()> {
    let with_cf = dataset
        .records
        .iter()
        .any(|r| r.counterfactual_outcome.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push(&schema.group_column);
    header.push(&schema.outcome_column);
    if with_cf {
        header.push(&schema.counterfactual_column);
    }
    let csv_err = |e: csv::Error| Error::MalformedRow {
        row: 0,
        message: e.to_string(),
    };
    w.write_record(&header).map_err(csv_err)?;
    let label = |l: Option<Label>| l.map(|v| v.to_string()).unwrap_or_default();
    for r in &dataset.records {
        let mut fields: Vec<String> = r.covariates.iter().map(|v| v.to_string()).collect();
        fields.push(schema.group_label(r.group).to_string());
        fields.push(label(r.outcome));
        if with_cf {
            fields.push(label(r.counterfactual_outcome));
        }
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: Vec<(String, f64)>,
    pub stratify_by_group: bool,
}

impl SplitSpec {
    pub fn new<S: Into<String>>(
        fractions: impl IntoIterator<Item = (S, f64)>,
        stratify_by_group: bool,
    ) -> Result<Self> {
        let spec = Self {
            fractions: fractions.into_iter().map(|(n, f)| (n.into(), f)).collect(),
            stratify_by_group,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::InvalidSplit("no parts".into()));
        }
        if let Some((name, f)) = self.fractions.iter().find(|(_, f)| !(*f >= 0.0)) {
            return Err(Error::InvalidSplit(format!("fraction for '{name}' is {f}")));
        }
        let total: f64 = self.fractions.iter().map(|(_, f)| f).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSplit(format!("fractions sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Named parts of a split, in the order the spec listed them.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub parts: Vec<(String, Dataset)>,
}

impl Partition {
    pub fn get(&self, name: &str) -> Option<&Dataset> {
        self.parts.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }
}

/// Part sizes by largest remainder; ties go to the earlier part.
fn allocate(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(n.saturating_sub(assigned)) {
        sizes[k] += 1;
    }
    sizes
}

/// Record indices of each part. Each part lists its indices in file order.
pub fn split_indices(dataset: &Dataset, spec: &SplitSpec) -> Result<Vec<(String, Vec<usize>)>> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let fractions: Vec<f64> = spec.fractions.iter().map(|(_, f)| *f).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(dataset.seed);
    let pools: Vec<Vec<usize>> = if spec.stratify_by_group {
        Group::ALL
            .iter()
            .map(|&g| {
                (0..dataset.len())
                    .filter(|&i| dataset.records[i].group == g)
                    .collect()
            })
            .collect()
    } else {
        vec![(0..dataset.len()).collect()]
    };

    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); fractions.len()];
    for mut pool in pools {
        pool.shuffle(&mut rng);
        let sizes = allocate(pool.len(), &fractions);
        let mut start = 0;
        for (part, size) in parts.iter_mut().zip(sizes) {
            part.extend_from_slice(&pool[start..start + size]);
            start += size;
        }
    }
    Ok(spec
        .fractions
        .iter()
        .zip(parts)
        .map(|((name, _), mut idx)| {
            idx.sort_unstable();
            (name.clone(), idx)
        })
        .collect())
}

pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Partition> {
    let parts = split_indices(dataset, spec)?
        .into_iter()
        .map(|(name, idx)| (name, dataset.subset(&idx)))
        .collect();
    Ok(Partition { parts })
}
