//! Tabular dataset loading, protected-group derivation, splitting and
//! feature masking.
//!
//! Numeric columns are standardized to zero mean and unit (population)
//! variance, categorical columns are one-hot encoded as `column=level`
//! features. Group membership is always evaluated on the raw cell values,
//! before any transformation.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Features, binary labels and protected-group memberships of `n` examples.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<u8>,
    groups: Array2<u8>,
    feature_names: Vec<String>,
    group_names: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset, checking every construction invariant: binary labels
    /// with both classes present, and every group with at least one member and
    /// one non-member.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<u8>,
        groups: Array2<u8>,
        feature_names: Vec<String>,
        group_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Self::from_parts(features, labels, groups, feature_names, group_names)?;
        if !ds.labels.contains(&0) || !ds.labels.contains(&1) {
            return Err(Error::SingleClassLabels);
        }
        for k in 0..ds.group_count() {
            ds.check_group(k, true)?;
        }
        Ok(ds)
    }

    /// Shape and value checks only; groups may be empty or full.
    fn from_parts(
        features: Array2<f64>,
        labels: Vec<u8>,
        groups: Array2<u8>,
        feature_names: Vec<String>,
        group_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidConfig("dataset has no rows".into()));
        }
        if features.ncols() == 0 {
            return Err(Error::InvalidConfig("dataset has no feature columns".into()));
        }
        if groups.ncols() == 0 {
            return Err(Error::InvalidConfig("dataset has no protected groups".into()));
        }
        for (expected, actual) in [
            (n, features.nrows()),
            (n, groups.nrows()),
            (features.ncols(), feature_names.len()),
            (groups.ncols(), group_names.len()),
        ] {
            if expected != actual {
                return Err(Error::DimensionMismatch { expected, actual });
            }
        }
        if let Some(row) = labels.iter().position(|&y| y > 1) {
            return Err(Error::NonBinaryLabel {
                column: "label".into(),
                value: labels[row].to_string(),
                row,
            });
        }
        if groups.iter().any(|&g| g > 1) {
            return Err(Error::InvalidConfig("group memberships must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            labels,
            groups,
            feature_names,
            group_names,
        })
    }

    fn check_group(&self, k: usize, require_non_member: bool) -> Result<()> {
        let members = self.groups.column(k).iter().filter(|&&g| g == 1).count();
        let group = self.group_names[k].clone();
        if members == 0 {
            return Err(Error::DegenerateGroup {
                group,
                missing: "members",
            });
        }
        if require_non_member && members == self.len() {
            return Err(Error::DegenerateGroup {
                group,
                missing: "non-members",
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.ncols()
    }

    pub fn group_count(&self) -> usize {
        self.groups.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn groups(&self) -> &Array2<u8> {
        &self.groups
    }

    /// Membership vector of example `i` over all groups.
    pub fn membership(&self, i: usize) -> Vec<u8> {
        self.groups.row(i).to_vec()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    /// Rows at `indices`, in the given order. Group validity is not rechecked.
    pub fn select_rows(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: self.groups.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
            group_names: self.group_names.clone(),
        }
    }

    /// Same examples with the labels replaced.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<LabeledDataset> {
        Self::from_parts(
            self.features.clone(),
            labels,
            self.groups.clone(),
            self.feature_names.clone(),
            self.group_names.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdDirection {
    /// value < cutoff
    Below,
    /// value >= cutoff
    AtOrAbove,
}

/// How membership of a protected group is derived from one raw CSV column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GroupRule {
    CategoricalEquals {
        column: String,
        value: String,
    },
    NumericThreshold {
        column: String,
        cutoff: f64,
        direction: ThresholdDirection,
    },
    /// Equal-frequency bins over the column's values. Bins are
    /// lower-inclusive and upper-exclusive (the last bin is unbounded above),
    /// so tied values always land in the same bin.
    QuantileBin {
        column: String,
        num_bins: usize,
        bin_index: usize,
    },
}

impl GroupRule {
    pub fn column(&self) -> &str {
        match self {
            GroupRule::CategoricalEquals { column, .. }
            | GroupRule::NumericThreshold { column, .. }
            | GroupRule::QuantileBin { column, .. } => column,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    #[serde(flatten)]
    pub rule: GroupRule,
}

impl GroupSpec {
    pub fn validate(&self) -> Result<()> {
        if let GroupRule::QuantileBin {
            num_bins,
            bin_index,
            ..
        } = self.rule
        {
            if num_bins < 2 || bin_index >= num_bins {
                return Err(Error::InvalidGroupSpec {
                    name: self.name.clone(),
                    reason: format!(
                        "quantile bin requires 2 <= num_bins and bin_index < num_bins \
                         (got num_bins={num_bins}, bin_index={bin_index})"
                    ),
                });
            }
        }
        Ok(())
    }

    /// Membership of every row, given the raw cells of the rule's column.
    pub fn membership(&self, cells: &[&str]) -> Result<Vec<u8>> {
        self.validate()?;
        let column = self.rule.column();
        match &self.rule {
            GroupRule::CategoricalEquals { value, .. } => Ok(cells
                .iter()
                .map(|c| u8::from(c.trim() == value.trim()))
                .collect()),
            GroupRule::NumericThreshold {
                cutoff, direction, ..
            } => {
                let values = parse_numeric(column, cells)?;
                Ok(values
                    .iter()
                    .map(|&v| {
                        u8::from(match direction {
                            ThresholdDirection::Below => v < *cutoff,
                            ThresholdDirection::AtOrAbove => v >= *cutoff,
                        })
                    })
                    .collect())
            }
            GroupRule::QuantileBin {
                num_bins,
                bin_index,
                ..
            } => {
                let values = parse_numeric(column, cells)?;
                let edges = quantile_edges(&values, *num_bins);
                Ok(values
                    .iter()
                    .map(|&v| {
                        let bin = edges.iter().filter(|&&e| v >= e).count();
                        u8::from(bin == *bin_index)
                    })
                    .collect())
            }
        }
    }
}

/// Lower edges of bins `1..num_bins`: the sorted value at rank `j * n / num_bins`.
fn quantile_edges(values: &[f64], num_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    (1..num_bins)
        .map(|j| sorted[(j * n / num_bins).min(n - 1)])
        .collect()
}

fn parse_numeric(column: &str, cells: &[&str]) -> Result<Vec<f64>> {
    cells
        .iter()
        .enumerate()
        .map(|(row, c)| {
            c.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::UnparseableCell {
                    column: column.to_string(),
                    value: c.to_string(),
                    row,
                })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

/// Loads a comma-delimited CSV with a header row.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    group_specs: &[GroupSpec],
    drop_columns: &[String],
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, label_column, group_specs, drop_columns)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: Read>(
    reader: R,
    label_column: &str,
    group_specs: &[GroupSpec],
    drop_columns: &[String],
) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut records = Vec::new();
    for record in rdr.records() {
        records.push(record?);
    }
    let column_index = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let column_cells =
        |idx: usize| -> Vec<&str> { records.iter().map(|r| r.get(idx).unwrap_or("")).collect() };

    let label_idx = column_index(label_column)?;
    let labels = column_cells(label_idx)
        .into_iter()
        .enumerate()
        .map(|(row, c)| match c {
            "0" => Ok(0u8),
            "1" => Ok(1u8),
            other => Err(Error::NonBinaryLabel {
                column: label_column.to_string(),
                value: other.to_string(),
                row,
            }),
        })
        .collect::<Result<Vec<u8>>>()?;
    if records.is_empty() {
        return Err(Error::InvalidConfig("CSV has no data rows".into()));
    }

    let n = records.len();
    let mut groups = Array2::<u8>::zeros((n, group_specs.len()));
    for (k, spec) in group_specs.iter().enumerate() {
        let idx = column_index(spec.rule.column())?;
        let membership = spec.membership(&column_cells(idx))?;
        groups
            .column_mut(k)
            .iter_mut()
            .zip(membership)
            .for_each(|(g, m)| *g = m);
    }

    let mut excluded = BTreeSet::new();
    excluded.insert(label_idx);
    for name in drop_columns {
        excluded.insert(column_index(name)?);
    }

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut feature_names = Vec::new();
    for (idx, name) in header.iter().enumerate() {
        if excluded.contains(&idx) {
            continue;
        }
        let cells = column_cells(idx);
        for (encoded_name, values) in encode_column(name, &cells)? {
            feature_names.push(encoded_name);
            columns.push(values);
        }
    }
    if columns.is_empty() {
        return Err(Error::InvalidConfig("no non-constant feature columns".into()));
    }
    let d = columns.len();
    let features = Array2::from_shape_fn((n, d), |(i, j)| columns[j][i]);

    LabeledDataset::new(
        features,
        labels,
        groups,
        feature_names,
        group_specs.iter().map(|s| s.name.clone()).collect(),
    )
}

/// Standardizes a numeric column or one-hot encodes a categorical one.
/// A column is numeric when more than half of its cells parse as numbers;
/// any remaining unparseable cell is then an error. Constant columns and
/// constant indicator columns are dropped.
fn encode_column(name: &str, cells: &[&str]) -> Result<Vec<(String, Vec<f64>)>> {
    let parsed: Vec<Option<f64>> = cells
        .iter()
        .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect();
    let numeric_count = parsed.iter().filter(|v| v.is_some()).count();
    if 2 * numeric_count > cells.len() {
        let values = parsed
            .iter()
            .enumerate()
            .map(|(row, v)| {
                v.ok_or_else(|| Error::UnparseableCell {
                    column: name.to_string(),
                    value: cells[row].to_string(),
                    row,
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        return Ok(standardize(&values)
            .map(|v| vec![(name.to_string(), v)])
            .unwrap_or_else(|| {
                log::warn!("dropping constant column `{name}`");
                Vec::new()
            }));
    }

    let levels: BTreeSet<&str> = cells.iter().copied().collect();
    if levels.len() < 2 {
        log::warn!("dropping constant column `{name}`");
        return Ok(Vec::new());
    }
    Ok(levels
        .into_iter()
        .map(|level| {
            let values = cells.iter().map(|c| f64::from(u8::from(*c == level))).collect();
            (format!("{name}={level}"), values)
        })
        .collect())
}

fn standardize(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= f64::EPSILON * mean.abs().max(1.0) {
        return None;
    }
    let sd = var.sqrt();
    let mut out: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();
    // recentre once more so rounding in the first pass does not leave a bias
    let residual = out.iter().sum::<f64>() / n;
    out.iter_mut().for_each(|v| *v -= residual);
    Some(out)
}

/// Seeded partition of `0..n` into sorted (train, test) row indices with
/// `round(n * test_fraction)` test rows.
pub fn split_indices(n: usize, cfg: &SplitConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "test_fraction must lie strictly between 0 and 1, got {}",
            cfg.test_fraction
        )));
    }
    let n_test = (n as f64 * cfg.test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidSplit(format!(
            "test_fraction {} on {n} rows leaves an empty split",
            cfg.test_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut test_idx = order[..n_test].to_vec();
    let mut train_idx = order[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((train_idx, test_idx))
}

/// Seeded row-level partition into (train, test). Rows keep their original
/// relative order inside each split. A group may be empty in the test split
/// but not in the train split.
pub fn train_test_split(
    ds: &LabeledDataset,
    cfg: &SplitConfig,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train_idx, test_idx) = split_indices(ds.len(), cfg)?;
    let train = ds.select_rows(&train_idx);
    for k in 0..train.group_count() {
        if train.groups.column(k).iter().all(|&g| g == 0) {
            return Err(Error::InvalidSplit(format!(
                "group `{}` has no train members",
                train.group_names[k]
            )));
        }
    }
    Ok((train, ds.select_rows(&test_idx)))
}

/// Removes feature columns so the classifier cannot see them. A name matches
/// either a feature exactly or every one-hot feature derived from a source
/// column of that name (`name=level`).
pub fn mask_group_features(ds: &LabeledDataset, masked_columns: &[String]) -> Result<LabeledDataset> {
    let mut masked = vec![false; ds.feature_count()];
    for name in masked_columns {
        let prefix = format!("{name}=");
        let mut found = false;
        for (j, feature) in ds.feature_names.iter().enumerate() {
            if feature == name || feature.starts_with(&prefix) {
                masked[j] = true;
                found = true;
            }
        }
        if !found {
            return Err(Error::UnknownFeature(name.clone()));
        }
    }
    let keep: Vec<usize> = (0..ds.feature_count()).filter(|&j| !masked[j]).collect();
    if keep.is_empty() {
        return Err(Error::InvalidConfig("masking removes every feature".into()));
    }
    Ok(LabeledDataset {
        features: ds.features.select(Axis(1), &keep),
        labels: ds.labels.clone(),
        groups: ds.groups.clone(),
        feature_names: keep.iter().map(|&j| ds.feature_names[j].clone()).collect(),
        group_names: ds.group_names.clone(),
    })
}
