//! Optional TOML configuration. Every key mirrors a command-line flag;
//! flags win over the file, the file wins over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub optimize: OptimizeFile,
    #[serde(default)]
    pub eval: EvalFile,
    #[serde(default)]
    pub experiment: ExperimentFile,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeFile {
    pub eps: Option<f64>,
    pub m: Option<usize>,
    pub c: Option<f64>,
    pub input: Option<String>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub samples: Option<usize>,
    pub constraints: Option<String>,
    pub mode: Option<String>,
    pub family: Option<String>,
    pub deltas: Option<Vec<f64>>,
    pub bin_fractions: Option<Vec<f64>>,
    pub reduced_points: Option<usize>,
    pub selection: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalFile {
    pub input: Option<String>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub trials: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub trials: Option<usize>,
    pub eps: Option<Vec<f64>>,
    pub dataset: Option<PathBuf>,
    pub label_column: Option<String>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub clip: Option<f64>,
    pub repeats: Option<usize>,
    pub dim: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// `flag`, else `file`, else `default`.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
