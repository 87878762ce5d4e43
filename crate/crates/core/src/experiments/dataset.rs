use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Feature matrix (row-major, z-scored) with class indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Original label strings, indexed by class.
    pub classes: Vec<String>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Per-column z-score (population variance). Constant columns become 0.
    pub fn standardize(&mut self) {
        let n = self.n_rows() as f64;
        for k in 0..self.n_features() {
            let mean = self.features.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = self
                .features
                .iter()
                .map(|r| (r[k] - mean).powi(2))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            for r in &mut self.features {
                r[k] = if sd > 0.0 { (r[k] - mean) / sd } else { 0.0 };
            }
        }
    }
}

fn is_missing(s: &str) -> bool {
    let t = s.trim();
    t.is_empty()
        || t.eq_ignore_ascii_case("na")
        || t.eq_ignore_ascii_case("nan")
        || t.eq_ignore_ascii_case("null")
}

/// Reads a headered CSV. Every column except `label_column` is a numeric
/// feature. Labels are mapped to class indices in sorted order. Row numbers
/// in errors are 1-based file lines (the header is line 1).
pub fn load_csv_dataset(path: &Path, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            Error::Dataset(format!(
                "no label column '{label_column}' in header {header:?}"
            ))
        })?;
    if header.len() < 2 {
        return Err(Error::Dataset("need at least one feature column".into()));
    }
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut raw_features = Vec::new();
    let mut raw_labels = Vec::new();
    let mut missing: Vec<(u64, Vec<String>)> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = r as u64 + 2;
        if rec.len() != header.len() {
            return Err(Error::Dataset(format!(
                "line {line}: expected {} fields, found {}",
                header.len(),
                rec.len()
            )));
        }
        let empty: Vec<String> = rec
            .iter()
            .enumerate()
            .filter(|(_, v)| is_missing(v))
            .map(|(k, _)| header[k].clone())
            .collect();
        if !empty.is_empty() {
            missing.push((line, empty));
            continue;
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (k, v) in rec.iter().enumerate() {
            if k == label_idx {
                continue;
            }
            let x: f64 = v.trim().parse().map_err(|_| {
                Error::Dataset(format!(
                    "line {line}, column '{}': non-numeric value '{v}'",
                    header[k]
                ))
            })?;
            if !x.is_finite() {
                return Err(Error::Dataset(format!(
                    "line {line}, column '{}': non-finite value '{v}'",
                    header[k]
                )));
            }
            row.push(x);
        }
        raw_features.push(row);
        raw_labels.push(rec[label_idx].trim().to_string());
    }
    if !missing.is_empty() {
        let shown: Vec<String> = missing
            .iter()
            .take(20)
            .map(|(l, cols)| format!("line {l} ({})", cols.join(", ")))
            .collect();
        return Err(Error::Dataset(format!(
            "{} row(s) with missing values: {}{}",
            missing.len(),
            shown.join("; "),
            if missing.len() > 20 { "; ..." } else { "" }
        )));
    }
    if raw_features.is_empty() {
        return Err(Error::Dataset("no data rows".into()));
    }
    let mut class_ids: BTreeMap<String, usize> =
        raw_labels.iter().map(|l| (l.clone(), 0)).collect();
    for (k, v) in class_ids.values_mut().enumerate() {
        *v = k;
    }
    let labels = raw_labels.iter().map(|l| class_ids[l]).collect();
    let mut ds = Dataset {
        feature_names,
        features: raw_features,
        labels,
        classes: class_ids.into_keys().collect(),
    };
    ds.standardize();
    Ok(ds)
}

/// Two seeded Gaussian blobs in `dim` dimensions, means at `+-sep/2` along
/// the all-ones direction, labels alternating. Already standardized.
pub fn synthetic_blobs(n: usize, dim: usize, sep: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = sep / 2.0 / (dim as f64).sqrt();
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        let y = r % 2;
        let s = if y == 1 { shift } else { -shift };
        features.push(
            (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal) + s)
                .collect(),
        );
        labels.push(y);
    }
    let mut ds = Dataset {
        feature_names: (0..dim).map(|k| format!("x{k}")).collect(),
        features,
        labels,
        classes: vec!["0".into(), "1".into()],
    };
    ds.standardize();
    ds
}
