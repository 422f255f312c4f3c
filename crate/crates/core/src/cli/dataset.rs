//! Datasets: CSV ingestion, seeded synthetic generators, normalization.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Written as the first line of generated CSVs and read back into `source`.
const SOURCE_PREFIX: &str = "# source: ";

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Option<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub source: String,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Option<Vec<f64>>, source: impl Into<String>) -> Result<Self> {
        let d = features.first().map_or(0, Vec::len);
        let ds = Dataset {
            feature_names: (0..d).map(|j| format!("f{j}")).collect(),
            features,
            labels,
            source: source.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Schema("dataset has no rows".into()));
        }
        if self.feature_names.is_empty() {
            return Err(Error::Schema("dataset has no feature columns".into()));
        }
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != self.dim() {
                return Err(Error::Dimension(format!(
                    "row {} has {} features, expected {}",
                    i + 1,
                    row.len(),
                    self.dim()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Argument(format!("row {} has non-finite features", i + 1)));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.len() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    self.len()
                )));
            }
            if labels.iter().any(|v| !v.is_finite()) {
                return Err(Error::Argument("labels must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn require_labels(&self) -> Result<&[f64]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Schema(format!("dataset '{}' has no label column", self.source)))
    }
}

/// Reads a headed CSV. `label_column` defaults to `"label"` when that column exists.
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (source, body) = match text.strip_prefix(SOURCE_PREFIX) {
        Some(rest) => {
            let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
            (line.trim_end_matches('\r').to_string(), body)
        }
        None => (path.display().to_string(), text.as_str()),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: unreadable header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("label column '{name}' not found")))?,
        ),
        None => header.iter().position(|h| h == "label"),
    };

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let mut feats = Vec::with_capacity(header.len());
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: header[c].clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            if Some(c) == label_idx {
                labels.push(value);
            } else {
                feats.push(value);
            }
        }
        features.push(feats);
    }
    let feature_names = header
        .iter()
        .enumerate()
        .filter(|(c, _)| Some(*c) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let ds = Dataset {
        features,
        labels: label_idx.map(|_| labels),
        feature_names,
        source,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes features then an optional `label` column. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(SOURCE_PREFIX);
    out.push_str(&ds.source.replace('\n', " "));
    out.push('\n');
    let mut header = ds.feature_names.clone();
    if ds.labels.is_some() {
        header.push("label".into());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in ds.features.iter().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(labels) = &ds.labels {
            cells.push(labels[i].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Blobs,
    Circles,
    HiddenRotation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticParams {
    /// Blobs: centers at `±separation/2` on every axis.
    pub separation: f64,
    /// Standard deviation of Gaussian noise (blobs, circles).
    pub noise: f64,
    /// Hidden rotation offset `θ*`.
    pub theta_star: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            separation: 3.0,
            noise: 0.5,
            theta_star: 1.0,
        }
    }
}

/// Seeded two-class datasets. Labels are `+1` for the first `⌈m/2⌉` rows of
/// blobs and circles; hidden-rotation labels are `sign(cos(x − θ*))`.
pub fn gen_synthetic(kind: SyntheticKind, m: usize, seed: u64, params: &SyntheticParams) -> Result<Dataset> {
    if m < 2 {
        return Err(Error::Argument(format!("synthetic datasets need m >= 2, got {m}")));
    }
    if !(params.noise >= 0.0 && params.noise.is_finite()) {
        return Err(Error::Argument("noise must be a finite value >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, params.noise).expect("finite non-negative std");
    let positives = m - m / 2;
    let class = |i: usize| if i < positives { 1.0 } else { -1.0 };
    let (features, labels, source) = match kind {
        SyntheticKind::Blobs => {
            let half = params.separation / 2.0;
            let features = (0..m)
                .map(|i| {
                    let center = half * class(i);
                    (0..2).map(|_| center + normal.sample(&mut rng)).collect()
                })
                .collect();
            (
                features,
                (0..m).map(class).collect::<Vec<_>>(),
                format!(
                    "blobs m={m} seed={seed} separation={} noise={}",
                    params.separation, params.noise
                ),
            )
        }
        SyntheticKind::Circles => {
            let features = (0..m)
                .map(|i| {
                    let radius = if class(i) > 0.0 { 1.0 } else { 0.5 };
                    let t = rng.gen_range(0.0..2.0 * PI);
                    vec![
                        radius * t.cos() + normal.sample(&mut rng),
                        radius * t.sin() + normal.sample(&mut rng),
                    ]
                })
                .collect();
            (
                features,
                (0..m).map(class).collect(),
                format!("circles m={m} seed={seed} noise={}", params.noise),
            )
        }
        SyntheticKind::HiddenRotation => {
            let xs: Vec<f64> = (0..m).map(|_| rng.gen_range(-PI..=PI)).collect();
            let labels = xs
                .iter()
                .map(|x| {
                    if (x - params.theta_star).cos() >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            (
                xs.into_iter().map(|x| vec![x]).collect(),
                labels,
                format!("hidden_rotation m={m} seed={seed} theta_star={}", params.theta_star),
            )
        }
    };
    Dataset::new(features, Some(labels), source)
}

/// Scales every row to unit Euclidean norm.
pub fn normalize_unit_sphere(ds: &Dataset) -> Result<Dataset> {
    let features = ds
        .features
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Normalization(format!("row {} is the zero vector", i + 1)));
            }
            Ok(row.iter().map(|v| v / norm).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(Dataset { features, ..ds.clone() })
}
