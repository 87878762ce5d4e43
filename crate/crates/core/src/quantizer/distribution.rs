use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use super::layout::BinLayout;
use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InputKind {
    Uniform,
    TruncatedGaussian {
        mu: f64,
        sigma: f64,
    },
    /// Per-interval masses, uniform within each interval.
    IntervalMasses,
}

/// Law of the input on `[-c, c]`, together with its interval masses
/// `Pr(B_j <= X < B_{j+1})` for the layout it was built against.
#[derive(Clone, Debug, PartialEq)]
pub struct InputDistribution {
    kind: InputKind,
    c: f64,
    bins: Vec<f64>,
    masses: Vec<f64>,
    normal: Option<(Normal, f64, f64)>,
}

impl InputDistribution {
    pub fn uniform(layout: &BinLayout) -> Self {
        let c = layout.c();
        let mut masses = vec![0.0; layout.m() - 1];
        for (j, lo, hi) in layout.domain_intervals() {
            masses[j - 1] = (hi - lo) / (2.0 * c);
        }
        Self {
            kind: InputKind::Uniform,
            c,
            bins: layout.bins().to_vec(),
            masses,
            normal: None,
        }
    }

    /// Gaussian `N(mu, sigma^2)` conditioned on `[-c, c]`.
    pub fn truncated_gaussian(layout: &BinLayout, mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0 && mu.is_finite()) {
            return Err(Error::Domain(format!(
                "truncated Gaussian needs finite mu and sigma > 0, got {mu}, {sigma}"
            )));
        }
        let c = layout.c();
        let normal = Normal::new(mu, sigma).map_err(|e| Error::Domain(e.to_string()))?;
        let (f_lo, f_hi) = (normal.cdf(-c), normal.cdf(c));
        let z = f_hi - f_lo;
        if !(z > 1e-300) {
            return Err(Error::Domain(format!(
                "N({mu}, {sigma}^2) puts no mass on [-{c}, {c}]"
            )));
        }
        let mut masses = vec![0.0; layout.m() - 1];
        for (j, lo, hi) in layout.domain_intervals() {
            masses[j - 1] = (normal.cdf(hi) - normal.cdf(lo)) / z;
        }
        Ok(Self {
            kind: InputKind::TruncatedGaussian { mu, sigma },
            c,
            bins: layout.bins().to_vec(),
            masses,
            normal: Some((normal, f_lo, z)),
        })
    }

    /// Explicit interval masses, one per interval `j = 1..m-1`.
    pub fn from_masses(layout: &BinLayout, masses: Vec<f64>) -> Result<Self> {
        if masses.len() != layout.m() - 1 {
            return Err(Error::Domain(format!(
                "expected {} interval masses, got {}",
                layout.m() - 1,
                masses.len()
            )));
        }
        if masses.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain("interval masses must be nonnegative".into()));
        }
        let active: Vec<usize> = layout.domain_intervals().iter().map(|d| d.0).collect();
        for (idx, p) in masses.iter().enumerate() {
            if *p > 0.0 && !active.contains(&(idx + 1)) {
                return Err(Error::Domain(format!(
                    "interval {} lies outside [-c, c] but has mass {p}",
                    idx + 1
                )));
            }
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("interval masses sum to {total}")));
        }
        Ok(Self {
            kind: InputKind::IntervalMasses,
            c: layout.c(),
            bins: layout.bins().to_vec(),
            masses,
            normal: None,
        })
    }

    /// Empirical interval masses from samples in `[-c, c]`.
    pub fn from_samples(layout: &BinLayout, samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("no samples".into()));
        }
        let mut counts = vec![0usize; layout.m() - 1];
        for &x in samples {
            counts[layout.interval_index(x)? - 1] += 1;
        }
        let n = samples.len() as f64;
        Self::from_masses(layout, counts.into_iter().map(|k| k as f64 / n).collect())
    }

    pub fn kind(&self) -> InputKind {
        self.kind
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn check_aligned(&self, layout: &BinLayout) -> Result<()> {
        if self.bins != layout.bins() || self.c != layout.c() {
            return Err(Error::Domain(
                "input distribution was built for a different bin layout".into(),
            ));
        }
        Ok(())
    }

    /// Density at `x` (zero outside `[-c, c]`).
    pub fn density(&self, x: f64) -> f64 {
        if !(-self.c..=self.c).contains(&x) {
            return 0.0;
        }
        match self.kind {
            InputKind::Uniform => 0.5 / self.c,
            InputKind::TruncatedGaussian { mu, sigma } => {
                let z = self.normal.as_ref().map(|n| n.2).unwrap_or(1.0);
                let u = (x - mu) / sigma;
                (-0.5 * u * u).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt() * z)
            }
            InputKind::IntervalMasses => {
                let j = self
                    .bins
                    .partition_point(|&b| b <= x)
                    .clamp(1, self.bins.len() - 1);
                let lo = self.bins[j - 1].max(-self.c);
                let hi = self.bins[j].min(self.c);
                self.masses[j - 1] / (hi - lo)
            }
        }
    }

    /// Draws one input value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let c = self.c;
        match (&self.kind, &self.normal) {
            (InputKind::TruncatedGaussian { .. }, Some((normal, f_lo, z))) => {
                let u: f64 = rng.random();
                normal.inverse_cdf(f_lo + u * z).clamp(-c, c)
            }
            (InputKind::IntervalMasses, _) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = self.masses.iter().rposition(|p| *p > 0.0).unwrap_or(0);
                for (idx, p) in self.masses.iter().enumerate() {
                    acc += p;
                    if *p > 0.0 && u < acc {
                        pick = idx;
                        break;
                    }
                }
                let lo = self.bins[pick].max(-c);
                let hi = self.bins[pick + 1].min(c);
                lo + (hi - lo) * rng.random::<f64>()
            }
            _ => -c + 2.0 * c * rng.random::<f64>(),
        }
    }
}
