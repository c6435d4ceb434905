//! Multi-view data model, CSV ingestion, feature transforms and fold
//! assignment.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, RngStream};

/// `n` samples described by `V` disjoint feature blocks, plus an optional
/// binary outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<DenseMatrix<f64>>,
    outcome: Option<Vec<f64>>,
    view_names: Vec<String>,
    feature_names: Vec<Vec<String>>,
}

impl MultiViewDataset {
    /// Builds a dataset with generated names (`v1`, `v1_f1`, ...).
    pub fn new(views: Vec<DenseMatrix<f64>>, outcome: Option<Vec<f64>>) -> Result<Self> {
        let view_names = (1..=views.len()).map(|v| format!("v{v}")).collect();
        let feature_names = views
            .iter()
            .enumerate()
            .map(|(v, m)| (1..=m.cols()).map(|j| format!("v{}_f{j}", v + 1)).collect())
            .collect();
        Self::with_names(views, outcome, view_names, feature_names)
    }

    pub fn with_names(
        views: Vec<DenseMatrix<f64>>,
        outcome: Option<Vec<f64>>,
        view_names: Vec<String>,
        feature_names: Vec<Vec<String>>,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidArgument("dataset needs at least one view".into()));
        }
        let n = views[0].rows();
        if let Some(v) = views.iter().position(|m| m.rows() != n) {
            return Err(Error::DimensionMismatch(format!(
                "view {v} has {} rows, expected {n}",
                views[v].rows()
            )));
        }
        if view_names.len() != views.len() || feature_names.len() != views.len() {
            return Err(Error::DimensionMismatch("name lists do not match view count".into()));
        }
        for (v, (m, names)) in views.iter().zip(&feature_names).enumerate() {
            if m.cols() != names.len() {
                return Err(Error::DimensionMismatch(format!(
                    "view {v} has {} features but {} names",
                    m.cols(),
                    names.len()
                )));
            }
        }
        if let Some(y) = &outcome {
            if y.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "outcome length {} for {n} samples",
                    y.len()
                )));
            }
            if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::NonBinaryOutcome { row: i + 1, value: y[i].to_string() });
            }
        }
        Ok(Self { views, outcome, view_names, feature_names })
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].rows()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn view(&self, v: usize) -> &DenseMatrix<f64> {
        &self.views[v]
    }

    pub fn views(&self) -> &[DenseMatrix<f64>] {
        &self.views
    }

    pub fn view_sizes(&self) -> Vec<usize> {
        self.views.iter().map(DenseMatrix::cols).collect()
    }

    pub fn n_features(&self) -> usize {
        self.views.iter().map(DenseMatrix::cols).sum()
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    pub fn feature_names(&self) -> &[Vec<String>] {
        &self.feature_names
    }

    pub fn outcome(&self) -> Option<&[f64]> {
        self.outcome.as_deref()
    }

    /// Outcome vector, or [`Error::MissingOutcome`].
    pub fn labels(&self) -> Result<&[f64]> {
        self.outcome.as_deref().ok_or(Error::MissingOutcome)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            views: self.views.iter().map(|m| m.select_rows(idx)).collect(),
            outcome: self.outcome.as_ref().map(|y| idx.iter().map(|&i| y[i]).collect()),
            view_names: self.view_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn without_outcome(&self) -> Self {
        Self { outcome: None, ..self.clone() }
    }

    fn map_entries<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, f64) -> Result<f64>,
    {
        let mut views = Vec::with_capacity(self.views.len());
        for (v, m) in self.views.iter().enumerate() {
            let mut out = m.clone();
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    out.set(i, j, f(v, j, m.get(i, j))?);
                }
            }
            views.push(out);
        }
        Ok(Self { views, ..self.clone() })
    }
}

/// Per-feature centring and scaling, stored per view so it can be replayed on
/// held-out data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<Vec<f64>>,
    pub sds: Vec<Vec<f64>>,
}

impl Standardization {
    pub fn apply(&self, d: &MultiViewDataset) -> Result<MultiViewDataset> {
        self.check(d)?;
        d.map_entries(|v, j, x| Ok((x - self.means[v][j]) / self.sds[v][j]))
    }

    pub fn invert(&self, d: &MultiViewDataset) -> Result<MultiViewDataset> {
        self.check(d)?;
        d.map_entries(|v, j, x| Ok(x * self.sds[v][j] + self.means[v][j]))
    }

    fn check(&self, d: &MultiViewDataset) -> Result<()> {
        let sizes: Vec<usize> = self.means.iter().map(Vec::len).collect();
        if sizes != d.view_sizes() {
            return Err(Error::ViewStructureMismatch(format!(
                "standardization for views {sizes:?}, data has {:?}",
                d.view_sizes()
            )));
        }
        Ok(())
    }
}

/// Column mean and sample standard deviation (divisor `n - 1`).
pub(crate) fn mean_sd(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let ss = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Standardizes every feature to mean 0 and sample sd 1.
pub fn standardize_features(
    d: &MultiViewDataset,
) -> Result<(MultiViewDataset, Standardization)> {
    let mut means = Vec::with_capacity(d.n_views());
    let mut sds = Vec::with_capacity(d.n_views());
    for (v, m) in d.views().iter().enumerate() {
        let mut vm = Vec::with_capacity(m.cols());
        let mut vs = Vec::with_capacity(m.cols());
        for j in 0..m.cols() {
            let (mean, sd) = mean_sd(&m.column(j));
            if !(sd > 1e-12 * (1.0 + mean.abs())) {
                return Err(Error::ZeroVarianceFeature(d.feature_names()[v][j].clone()));
            }
            vm.push(mean);
            vs.push(sd);
        }
        means.push(vm);
        sds.push(vs);
    }
    let stats = Standardization { means, sds };
    Ok((stats.apply(d)?, stats))
}

/// Elementwise base-2 logarithm.
pub fn log2_transform(d: &MultiViewDataset) -> Result<MultiViewDataset> {
    d.map_entries(|v, j, x| {
        if x > 0.0 {
            Ok(x.log2())
        } else {
            Err(Error::NonPositiveEntry { feature: d.feature_names()[v][j].clone(), value: x })
        }
    })
}

/// Partition of `0..n` into `k` folds. Fold indices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    k: usize,
    assignment: Vec<usize>,
}

impl FoldAssignment {
    pub fn from_assignment(k: usize, assignment: Vec<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
        }
        if assignment.iter().any(|&f| f >= k) {
            return Err(Error::InvalidArgument("fold index out of range".into()));
        }
        let out = Self { k, assignment };
        if out.sizes().contains(&0) {
            return Err(Error::InvalidArgument("empty fold".into()));
        }
        Ok(out)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.assignment {
            s[f] += 1;
        }
        s
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] != fold).collect()
    }

    /// Assignment for rows reordered so that new row `i` is old row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { k: self.k, assignment: perm.iter().map(|&i| self.assignment[i]).collect() }
    }
}

/// Random `k`-fold partition of `n` samples. With labels, each class is
/// dealt round-robin so per-fold class counts differ by at most one.
pub fn make_folds(
    n: usize,
    k: usize,
    rng: &mut RngStream,
    stratify_labels: Option<&[f64]>,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::TooManyFolds { n, k });
    }
    let order: Vec<usize> = match stratify_labels {
        None => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            idx
        }
        Some(y) => {
            if y.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} stratification labels for {n} samples",
                    y.len()
                )));
            }
            let mut ones: Vec<usize> = (0..n).filter(|&i| y[i] == 1.0).collect();
            let mut zeros: Vec<usize> = (0..n).filter(|&i| y[i] != 1.0).collect();
            ones.shuffle(rng);
            zeros.shuffle(rng);
            ones.into_iter().chain(zeros).collect()
        }
    };
    let mut labels: Vec<usize> = (0..k).collect();
    labels.shuffle(rng);
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = labels[pos % k];
    }
    Ok(FoldAssignment { k, assignment })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn map_csv_error(path: &Path, e: csv::Error) -> Error {
    if let csv::ErrorKind::UnequalLengths { pos, expected_len, len } = e.kind() {
        return Error::RaggedCsv {
            path: path.to_path_buf(),
            record: pos.as_ref().map_or(0, |p| p.record() as usize),
            found: *len as usize,
            expected: *expected_len as usize,
        };
    }
    Error::Csv(e)
}

/// Reads a `feature,view` map. Returns views in order of first appearance
/// and the view index of each feature.
pub fn read_view_map(path: &Path) -> Result<(Vec<String>, HashMap<String, usize>)> {
    let mut rdr = csv_reader(path)?;
    let mut views: Vec<String> = Vec::new();
    let mut view_index: HashMap<String, usize> = HashMap::new();
    let mut feature_view = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| map_csv_error(path, e))?;
        if rec.len() != 2 {
            return Err(Error::InvalidViewMap(format!(
                "expected 2 columns `feature,view`, found {}",
                rec.len()
            )));
        }
        let (feature, view) = (rec[0].to_string(), rec[1].to_string());
        let next = views.len();
        let v = *view_index.entry(view.clone()).or_insert_with(|| {
            views.push(view);
            next
        });
        if feature_view.insert(feature.clone(), v).is_some() {
            return Err(Error::InvalidViewMap(format!("duplicate feature `{feature}`")));
        }
    }
    if views.is_empty() {
        return Err(Error::InvalidViewMap("view map is empty".into()));
    }
    Ok((views, feature_view))
}

fn parse_number(path: &Path, record: usize, column: &str, s: &str) -> Result<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::ParseNumber {
        path: path.to_path_buf(),
        record,
        column: column.to_string(),
        value: s.to_string(),
    })
}

/// Loads a features CSV and partitions its columns by the view map.
///
/// Views are ordered by first appearance in the map; features within a view
/// keep their file order. Map entries for features absent from the file are
/// ignored, and a view with no features present is dropped.
pub fn load_multiview_csv(
    features_path: &Path,
    viewmap_path: &Path,
    outcome_column: Option<&str>,
) -> Result<MultiViewDataset> {
    let (view_names, feature_view) = read_view_map(viewmap_path)?;
    let mut rdr = csv_reader(features_path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| map_csv_error(features_path, e))?
        .iter()
        .map(str::to_string)
        .collect();

    let outcome_idx = match outcome_column {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidArgument(format!("outcome column `{name}` not found"))
        })?),
        None => None,
    };

    let mut columns_of_view: Vec<Vec<usize>> = vec![Vec::new(); view_names.len()];
    for (c, name) in header.iter().enumerate() {
        if Some(c) == outcome_idx {
            continue;
        }
        let v = feature_view.get(name).ok_or_else(|| Error::UnmappedFeature(name.clone()))?;
        columns_of_view[*v].push(c);
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut outcome = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| map_csv_error(features_path, e))?;
        let mut row = vec![0.0; header.len()];
        for (c, field) in rec.iter().enumerate() {
            if Some(c) == outcome_idx {
                let y = match field {
                    "0" | "0.0" => 0.0,
                    "1" | "1.0" => 1.0,
                    other => {
                        return Err(Error::NonBinaryOutcome { row: r + 1, value: other.into() })
                    }
                };
                outcome.push(y);
            } else {
                row[c] = parse_number(features_path, r + 1, &header[c], field)?;
            }
        }
        rows.push(row);
    }

    let n = rows.len();
    let mut views = Vec::new();
    let mut kept_names = Vec::new();
    let mut feature_names = Vec::new();
    for (v, cols) in columns_of_view.iter().enumerate() {
        if cols.is_empty() {
            continue;
        }
        let mut data = Vec::with_capacity(n * cols.len());
        for row in &rows {
            data.extend(cols.iter().map(|&c| row[c]));
        }
        views.push(DenseMatrix::new(n, cols.len(), data)?);
        kept_names.push(view_names[v].clone());
        feature_names.push(cols.iter().map(|&c| header[c].clone()).collect());
    }
    if views.is_empty() {
        return Err(Error::InvalidArgument("features file has no feature columns".into()));
    }
    MultiViewDataset::with_names(
        views,
        outcome_idx.map(|_| outcome),
        kept_names,
        feature_names,
    )
}

/// Writes `d` as a features CSV (optionally with outcome column) and a
/// matching `feature,view` map.
pub fn write_multiview_csv(
    d: &MultiViewDataset,
    features_path: &Path,
    viewmap_path: &Path,
    outcome_column: Option<&str>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(features_path)?;
    let mut header: Vec<String> = d.feature_names().iter().flatten().cloned().collect();
    let with_outcome = match (outcome_column, d.outcome()) {
        (Some(name), Some(_)) => {
            header.push(name.to_string());
            true
        }
        _ => false,
    };
    w.write_record(&header)?;
    for i in 0..d.n_samples() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        for m in d.views() {
            rec.extend(m.row(i).iter().map(|x| x.to_string()));
        }
        if with_outcome {
            rec.push(format!("{}", d.labels()?[i] as u8));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(viewmap_path)?;
    w.write_record(["feature", "view"])?;
    for (names, view) in d.feature_names().iter().zip(d.view_names()) {
        for f in names {
            w.write_record([f.as_str(), view.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}
