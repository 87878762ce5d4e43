//! Desk-scale reproductions: scalar MAE tables, vector error curves and a
//! quantized DP-SGD run.

pub mod dataset;
pub mod scalar;
pub mod sgd;
pub mod vector;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::io;

pub use dataset::{load_csv_dataset, synthetic_blobs, Dataset};
pub use scalar::{table1, table2, GaussianConfig, ScalarConfig, ScalarRow};
pub use sgd::{
    dp_sgd, dpsgd_experiment, sgd_quantizers, DpSgdConfig, GradientQuantizer, SgdConfig, SgdRow,
    SgdRun, SgdSummary,
};
pub use vector::{
    sample_ball, sample_cube, vector_experiment, vector_mechanisms, Norm, VectorConfig, VectorRow,
};

/// Written next to every result file.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub experiment: &'a str,
    pub seed: u64,
    pub config: &'a C,
    pub crate_version: &'static str,
    pub outputs: Vec<String>,
}

/// Writes `rows` to `<dir>/<name>.csv` and a manifest to
/// `<dir>/<name>.manifest.json`. The manifest goes first.
pub fn write_results<R: Serialize, C: Serialize>(
    dir: &Path,
    name: &str,
    seed: u64,
    config: &C,
    rows: &[R],
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{name}.csv"));
    let manifest = Manifest {
        experiment: name,
        seed,
        config,
        crate_version: env!("CARGO_PKG_VERSION"),
        outputs: vec![format!("{name}.csv")],
    };
    io::write_json(&dir.join(format!("{name}.manifest.json")), &manifest)?;
    io::atomic_write(&csv_path, &rows_to_csv(rows)?)?;
    Ok(csv_path)
}

pub fn rows_to_csv<R: Serialize>(rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
}

/// Mean, sample standard deviation and 95% normal interval half-width.
pub fn summarize(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    (mean, sd, 1.96 * sd / n.sqrt())
}
