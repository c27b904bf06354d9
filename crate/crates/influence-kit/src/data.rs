//! Dataset representation and file ingestion.
//!
//! Features are stored densely (row per example); labels are integer class
//! ids. Binary datasets are normalized to {-1, +1} at construction so the
//! margin-based losses can assume that convention. Indices 0..n-1 are stable
//! identifiers: every report in this crate refers to positions in the
//! original dataset, and leave-one-out retraining never renumbers them.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1};

use crate::error::{Error, Result};

/// One training or test point: a dense feature vector and an integer label.
/// Binary problems use labels in {-1, +1}; multiclass uses {0..k-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Array1<f64>,
    pub label: i32,
}

impl Example {
    pub fn new(features: Array1<f64>, label: i32) -> Self {
        Example { features, label }
    }

    pub fn view(&self) -> ExampleRef<'_> {
        ExampleRef {
            features: self.features.view(),
            label: self.label,
        }
    }
}

/// Borrowed view of an example; what the loss-family operations take.
#[derive(Debug, Clone, Copy)]
pub struct ExampleRef<'a> {
    pub features: ArrayView1<'a, f64>,
    pub label: i32,
}

impl ExampleRef<'_> {
    pub fn to_owned(&self) -> Example {
        Example {
            features: self.features.to_owned(),
            label: self.label,
        }
    }
}

/// An ordered collection of examples with a declared class count.
///
/// Immutable after construction; the `with_*` helpers return modified
/// copies, which keeps sharing across worker threads trivial.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<i32>,
    k: usize,
}

impl Dataset {
    /// Build a dataset from an n×d feature matrix and n labels.
    ///
    /// `k` is the declared class count. For `k == 2` labels must already be
    /// in {-1, +1}; otherwise they must lie in 0..k. Features must be finite.
    pub fn new(features: Array2<f64>, labels: Vec<i32>, k: usize) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if features.nrows() != labels.len() {
            return Err(Error::Dimension {
                what: "label count",
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if k < 2 {
            return Err(Error::invalid(
                "class count",
                format!("k = {k}, need k >= 2"),
            ));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("feature value {v}"),
            });
        }
        for &label in &labels {
            check_label(label, k)?;
        }
        Ok(Dataset {
            features,
            labels,
            k,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    /// Declared number of classes (2 for binary problems).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn example(&self, idx: usize) -> ExampleRef<'_> {
        ExampleRef {
            features: self.features.row(idx),
            label: self.labels[idx],
        }
    }

    pub fn examples(&self) -> impl Iterator<Item = ExampleRef<'_>> {
        (0..self.n()).map(move |i| self.example(i))
    }

    /// Copy with one example's label replaced.
    pub fn with_label(&self, idx: usize, label: i32) -> Result<Self> {
        check_label(label, self.k)?;
        let mut labels = self.labels.clone();
        labels[idx] = label;
        Ok(Dataset {
            features: self.features.clone(),
            labels,
            k: self.k,
        })
    }

    /// Copy with the labels at `indices` flipped (binary datasets only).
    pub fn with_flipped_labels(&self, indices: &[usize]) -> Result<Self> {
        if self.k != 2 {
            return Err(Error::invalid(
                "label flip",
                format!("only defined for binary datasets, k = {}", self.k),
            ));
        }
        let mut labels = self.labels.clone();
        for &i in indices {
            labels[i] = -labels[i];
        }
        Ok(Dataset {
            features: self.features.clone(),
            labels,
            k: self.k,
        })
    }

    /// In-place mutable access to one feature row. Callers must keep the
    /// values finite; the iterated-perturbation loop uses this to avoid
    /// cloning the matrix on every step.
    pub(crate) fn features_row_mut(&mut self, idx: usize) -> ArrayViewMut1<'_, f64> {
        self.features.row_mut(idx)
    }

    /// Copy with one example's feature row replaced.
    pub fn with_features_row(&self, idx: usize, row: ArrayView1<'_, f64>) -> Result<Self> {
        if row.len() != self.d() {
            return Err(Error::Dimension {
                what: "feature row",
                expected: self.d(),
                got: row.len(),
            });
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("feature value {v}"),
            });
        }
        let mut features = self.features.clone();
        features.row_mut(idx).assign(&row);
        Ok(Dataset {
            features,
            labels: self.labels.clone(),
            k: self.k,
        })
    }
}

fn check_label(label: i32, k: usize) -> Result<()> {
    let ok = if k == 2 {
        label == -1 || label == 1
    } else {
        label >= 0 && (label as usize) < k
    };
    if ok {
        Ok(())
    } else {
        Err(Error::LabelOutOfRange {
            label: label as i64,
            k,
        })
    }
}

/// Normalize raw integer labels and infer the class count.
///
/// Labels drawn from {-1, +1} or {0, 1} are treated as binary and mapped to
/// {-1, +1}; anything else is multiclass with k = max label + 1.
fn normalize_labels(raw: Vec<i64>, declared_k: Option<usize>) -> Result<(Vec<i32>, usize)> {
    let binary_signed = raw.iter().all(|&l| l == -1 || l == 1);
    let binary_01 = raw.iter().all(|&l| l == 0 || l == 1);
    let k = match declared_k {
        Some(k) => k,
        None => {
            if binary_signed || binary_01 {
                2
            } else {
                let max = raw.iter().copied().max().unwrap_or(0);
                if raw.iter().any(|&l| l < 0) {
                    return Err(Error::invalid(
                        "labels",
                        "negative labels are only allowed in the binary {-1,+1} encoding",
                    ));
                }
                (max + 1).max(2) as usize
            }
        }
    };
    let labels = if k == 2 {
        if binary_signed {
            raw.into_iter().map(|l| l as i32).collect()
        } else if binary_01 {
            raw.into_iter()
                .map(|l| if l == 0 { -1 } else { 1 })
                .collect()
        } else {
            let bad = raw
                .iter()
                .find(|&&l| l != -1 && l != 0 && l != 1)
                .copied()
                .unwrap_or(0);
            return Err(Error::LabelOutOfRange { label: bad, k: 2 });
        }
    } else {
        for &l in &raw {
            if l < 0 || l as usize >= k {
                return Err(Error::LabelOutOfRange { label: l, k });
            }
        }
        raw.into_iter().map(|l| l as i32).collect()
    };
    Ok((labels, k))
}

/// Parse a CSV file with a `label,f0,...,f{d-1}` header. Class count is
/// inferred from the labels (see [`parse_csv_with_k`] to declare it).
pub fn parse_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_csv_with_k(path, None)
}

/// Parse a CSV file, validating labels against a declared class count.
pub fn parse_csv_with_k(path: impl AsRef<Path>, k: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_csv_str(&text, &path.display().to_string(), k)
}

fn parse_csv_str(text: &str, origin: &str, declared_k: Option<usize>) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::parse(origin, 1, "empty file"))?;
    if !header.trim_start().starts_with("label") {
        return Err(Error::parse(origin, 1, "header must begin with \"label\""));
    }
    let d = header.split(',').count() - 1;
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for (line_idx, line) in lines {
        let line_no = line_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label_field = fields.next().unwrap_or("").trim();
        let label: i64 = label_field
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("bad label {label_field:?}")))?;
        let mut count = 0usize;
        for field in fields {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(origin, line_no, format!("bad feature value {field:?}"))
            })?;
            rows.push(v);
            count += 1;
        }
        if count != d {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected {d} feature columns, found {count}"),
            ));
        }
        raw_labels.push(label);
    }
    if raw_labels.is_empty() {
        return Err(Error::parse(origin, 1, "no data rows"));
    }
    let n = raw_labels.len();
    let (labels, k) = normalize_labels(raw_labels, declared_k)?;
    let features = Array2::from_shape_vec((n, d), rows).expect("row count checked per line");
    Dataset::new(features, labels, k)
}

/// Write a dataset as CSV with the standard header. Values are printed in
/// the shortest form that parses back to the identical f64.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("label");
    for j in 0..data.d() {
        write!(out, ",f{j}").unwrap();
    }
    out.push('\n');
    for i in 0..data.n() {
        write!(out, "{}", data.labels()[i]).unwrap();
        for v in data.features().row(i) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parse the svmlight/libsvm text format: `label idx:val ...` with 1-based,
/// strictly increasing indices per line. Unspecified features are zero and
/// the dimension is the largest index seen anywhere in the file.
pub fn parse_svmlight(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_svmlight_str(&text, &path.display().to_string())
}

fn parse_svmlight_str(text: &str, origin: &str) -> Result<Dataset> {
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut sparse_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut d = 0usize;
    for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: i64 = label_tok
            .trim_start_matches('+')
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("bad label {label_tok:?}")))?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut last_idx = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| {
                Error::parse(origin, line_no, format!("expected idx:val, found {tok:?}"))
            })?;
            let idx: usize = idx_s.parse().map_err(|_| {
                Error::parse(origin, line_no, format!("bad feature index {idx_s:?}"))
            })?;
            if idx == 0 {
                return Err(Error::parse(origin, line_no, "feature indices are 1-based"));
            }
            if idx <= last_idx {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!(
                        "feature indices must be strictly increasing (saw {idx} after {last_idx})"
                    ),
                ));
            }
            let val: f64 = val_s.parse().map_err(|_| {
                Error::parse(origin, line_no, format!("bad feature value {val_s:?}"))
            })?;
            last_idx = idx;
            d = d.max(idx);
            row.push((idx - 1, val));
        }
        raw_labels.push(label);
        sparse_rows.push(row);
    }
    if raw_labels.is_empty() {
        return Err(Error::parse(origin, 1, "empty file"));
    }
    let n = raw_labels.len();
    let mut features = Array2::<f64>::zeros((n, d));
    for (i, row) in sparse_rows.iter().enumerate() {
        for &(j, v) in row {
            features[[i, j]] = v;
        }
    }
    let (labels, k) = normalize_labels(raw_labels, None)?;
    Dataset::new(features, labels, k)
}

/// Write a dataset in svmlight format. Zero entries are skipped, except the
/// final column, which is always emitted so a round-trip preserves d.
pub fn write_svmlight(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let d = data.d();
    let features = data.features();
    for i in 0..data.n() {
        write!(out, "{}", data.labels()[i]).unwrap();
        let row = features.row(i);
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 || j == d - 1 {
                write!(out, " {}:{}", j + 1, v).unwrap();
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}
