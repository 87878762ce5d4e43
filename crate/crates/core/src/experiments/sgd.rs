use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::Mechanism;

use super::dataset::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-coordinate gradient clip threshold.
    pub clip: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            epochs: 10,
            learning_rate: 0.5,
            clip: 0.1,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "batch size and epochs must be at least 1".into(),
            ));
        }
        if !(self.clip > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config(
                "clip and learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// What happens to each clipped per-example gradient coordinate.
#[derive(Clone, Debug)]
pub enum GradientQuantizer {
    /// Clipping only (non-private baseline).
    ClipOnly,
    /// Test hook: a mechanism that returns its input unchanged.
    Identity,
    /// `g -> clip / c * M(g c / clip)`.
    Mechanism(Mechanism),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdRow {
    pub mechanism: String,
    pub step: usize,
    pub epoch: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgdRun {
    /// Training accuracy after each step.
    pub trace: Vec<f64>,
    pub epoch_of_step: Vec<usize>,
}

impl SgdRun {
    pub fn final_accuracy(&self) -> f64 {
        *self.trace.last().unwrap_or(&0.0)
    }

    /// Average training accuracy over the steps of the last epoch.
    pub fn last_epoch_accuracy(&self) -> f64 {
        let Some(&last) = self.epoch_of_step.last() else {
            return 0.0;
        };
        let v: Vec<f64> = self
            .trace
            .iter()
            .zip(&self.epoch_of_step)
            .filter(|(_, &e)| e == last)
            .map(|(a, _)| *a)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn rows(&self, name: &str) -> Vec<SgdRow> {
        self.trace
            .iter()
            .zip(&self.epoch_of_step)
            .enumerate()
            .map(|(k, (&a, &e))| SgdRow {
                mechanism: name.into(),
                step: k + 1,
                epoch: e,
                accuracy: a,
            })
            .collect()
    }
}

struct Softmax {
    k: usize,
    d: usize,
    // k rows of d weights plus a bias.
    w: Vec<f64>,
}

impl Softmax {
    fn new(k: usize, d: usize) -> Self {
        Self {
            k,
            d,
            w: vec![0.0; k * (d + 1)],
        }
    }

    fn probs(&self, x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = (0..self.k)
            .map(|c| {
                let row = &self.w[c * (self.d + 1)..(c + 1) * (self.d + 1)];
                row[..self.d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + row[self.d]
            })
            .collect();
        let mx = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - mx).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    fn predict(&self, x: &[f64]) -> usize {
        let p = self.probs(x);
        (0..self.k).fold(0, |b, c| if p[c] > p[b] { c } else { b })
    }

    fn accuracy(&self, ds: &Dataset) -> f64 {
        let hits = ds
            .features
            .iter()
            .zip(&ds.labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / ds.n_rows() as f64
    }

    fn gradient(&self, x: &[f64], y: usize, out: &mut [f64]) {
        let p = self.probs(x);
        for c in 0..self.k {
            let r = p[c] - if c == y { 1.0 } else { 0.0 };
            let base = c * (self.d + 1);
            for (o, xv) in out[base..base + self.d].iter_mut().zip(x) {
                *o = r * xv;
            }
            out[base + self.d] = r;
        }
    }
}

/// Minibatch SGD for softmax regression. Each per-example gradient is
/// clipped coordinate-wise to `[-clip, clip]`, passed through `quantizer`,
/// and averaged over the batch. Batch order and quantization noise use
/// separate streams of the configured seed, so runs that differ only in
/// the quantizer see the same batches.
pub fn dp_sgd(ds: &Dataset, cfg: &SgdConfig, quantizer: &GradientQuantizer) -> Result<SgdRun> {
    cfg.validate()?;
    if ds.n_rows() == 0 {
        return Err(Error::Dataset("empty dataset".into()));
    }
    let mut model = Softmax::new(ds.n_classes().max(2), ds.n_features());
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(1);
    let n_params = model.w.len();
    let mut g = vec![0.0; n_params];
    let mut acc = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..ds.n_rows()).collect();
    let mut trace = Vec::new();
    let mut epoch_of_step = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        for batch in order.chunks(cfg.batch_size) {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for &r in batch {
                model.gradient(&ds.features[r], ds.labels[r], &mut g);
                for (a, &v) in acc.iter_mut().zip(&g) {
                    let clipped = v.clamp(-cfg.clip, cfg.clip);
                    *a += match quantizer {
                        GradientQuantizer::ClipOnly | GradientQuantizer::Identity => clipped,
                        GradientQuantizer::Mechanism(m) => {
                            let c = m.layout().c();
                            m.sample(clipped * c / cfg.clip, &mut noise_rng)? * cfg.clip / c
                        }
                    };
                }
            }
            let scale = cfg.learning_rate / batch.len() as f64;
            for (w, a) in model.w.iter_mut().zip(&acc) {
                *w -= scale * a;
            }
            trace.push(model.accuracy(ds));
            epoch_of_step.push(epoch);
        }
    }
    Ok(SgdRun {
        trace,
        epoch_of_step,
    })
}

/// Published RQM configuration for the DP-SGD run: (bins, q).
pub const PUBLISHED_SGD_RQM: ([f64; 4], f64) = ([-2.7, -0.9, 0.9, 2.7], 0.22);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpSgdConfig {
    pub sgd: SgdConfig,
    /// Per-step privacy target of the quantizers.
    pub eps: f64,
    /// Independent runs (seeds `sgd.seed..sgd.seed + repeats`) averaged per
    /// step.
    pub repeats: usize,
}

impl Default for DpSgdConfig {
    fn default() -> Self {
        Self {
            sgd: SgdConfig::default(),
            eps: 1.0,
            repeats: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdSummary {
    pub mechanism: String,
    pub bins: String,
    pub repeats: usize,
    /// Mean over repeats of the average accuracy during the last epoch.
    pub final_accuracy: f64,
    pub final_accuracy_std: f64,
}

/// Quantizers compared in the DP-SGD run: the clip-only baseline, the
/// optimized mechanism (layout picked by exact MSE over the default grid)
/// and the published RQM configuration.
pub fn sgd_quantizers(eps: f64) -> Result<Vec<(String, GradientQuantizer)>> {
    use crate::lp::{ConstraintFamily, LpMode};
    use crate::optimizer::{optm_outer, HyperGrid, Problem, Selection};
    let mut grid = HyperGrid::default_for(1.0, 4, ConstraintFamily::Full, LpMode::Symmetric);
    grid.selection = Selection::ExactMse;
    let optm = optm_outer(&Problem::uniform(1.0, 4, eps), &grid)?.mechanism;
    let (bins, q) = PUBLISHED_SGD_RQM;
    let rqm = crate::mechanisms::rqm(4, 1.0, bins[3] - 1.0, q)?;
    Ok(vec![
        ("clip_only".into(), GradientQuantizer::ClipOnly),
        ("optm".into(), GradientQuantizer::Mechanism(optm)),
        ("rqm".into(), GradientQuantizer::Mechanism(rqm)),
    ])
}

/// Runs every quantizer `repeats` times and returns the per-step mean
/// trace and a summary per quantizer.
pub fn dpsgd_experiment(
    ds: &Dataset,
    cfg: &DpSgdConfig,
    quantizers: &[(String, GradientQuantizer)],
) -> Result<(Vec<SgdRow>, Vec<SgdSummary>)> {
    use rayon::prelude::*;
    if cfg.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (name, quant) in quantizers {
        let runs: Vec<SgdRun> = (0..cfg.repeats as u64)
            .into_par_iter()
            .map(|r| {
                dp_sgd(
                    ds,
                    &SgdConfig {
                        seed: cfg.sgd.seed.wrapping_add(r),
                        ..cfg.sgd.clone()
                    },
                    quant,
                )
            })
            .collect::<Result<_>>()?;
        let steps = runs[0].trace.len();
        let mean_trace: Vec<f64> = (0..steps)
            .map(|k| runs.iter().map(|r| r.trace[k]).sum::<f64>() / runs.len() as f64)
            .collect();
        let mean_run = SgdRun {
            trace: mean_trace,
            epoch_of_step: runs[0].epoch_of_step.clone(),
        };
        rows.extend(mean_run.rows(name));
        let finals: Vec<f64> = runs.iter().map(|r| r.last_epoch_accuracy()).collect();
        let (mean, std, _) = super::summarize(&finals);
        let bins = match quant {
            GradientQuantizer::Mechanism(m) => crate::optimizer::format_bins(m.layout().bins()),
            _ => String::new(),
        };
        summaries.push(SgdSummary {
            mechanism: name.clone(),
            bins,
            repeats: cfg.repeats,
            final_accuracy: mean,
            final_accuracy_std: std,
        });
    }
    Ok((rows, summaries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::dataset::synthetic_blobs;

    #[test]
    fn blobs_are_learnable() {
        let ds = synthetic_blobs(400, 5, 4.0, 3);
        let run = dp_sgd(
            &ds,
            &SgdConfig {
                epochs: 3,
                ..Default::default()
            },
            &GradientQuantizer::ClipOnly,
        )
        .unwrap();
        assert!(run.final_accuracy() > 0.9, "{}", run.final_accuracy());
    }

    #[test]
    fn identity_matches_baseline() {
        let ds = synthetic_blobs(100, 3, 3.0, 1);
        let cfg = SgdConfig {
            epochs: 2,
            ..Default::default()
        };
        let a = dp_sgd(&ds, &cfg, &GradientQuantizer::ClipOnly).unwrap();
        let b = dp_sgd(&ds, &cfg, &GradientQuantizer::Identity).unwrap();
        assert_eq!(a, b);
    }
}
