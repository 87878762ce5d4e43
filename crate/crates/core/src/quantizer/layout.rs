use crate::error::{Error, Result};

/// Largest number of bins a layout may carry.
pub const MAX_BINS: usize = 64;

const ENDPOINT_TOL: f64 = 1e-12;

/// The quantization grid: clip radius `c`, range extension `delta` and the
/// ordered output values `B_1 < ... < B_m` with `B_1 = -c - delta` and
/// `B_m = c + delta`.
///
/// Bin and interval indices exposed by this type are 1-based, matching the
/// usual notation: bin `k` is `B_k`, interval `j` is `[B_j, B_{j+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinLayout {
    c: f64,
    delta: f64,
    bins: Vec<f64>,
}

impl BinLayout {
    pub fn new(c: f64, delta: f64, bins: Vec<f64>) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidLayout(format!(
                "clip radius must be positive, got {c}"
            )));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidLayout(format!(
                "range extension must be nonnegative, got {delta}"
            )));
        }
        let m = bins.len();
        if m < 2 {
            return Err(Error::InvalidLayout(format!(
                "need at least 2 bins, got {m}"
            )));
        }
        if m > MAX_BINS {
            return Err(Error::InvalidLayout(format!(
                "at most {MAX_BINS} bins supported, got {m}"
            )));
        }
        if bins.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidLayout("bin values must be finite".into()));
        }
        if let Some(w) = bins.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLayout(format!(
                "bins must be strictly increasing (B_{} = {} >= B_{} = {})",
                w + 1,
                bins[w],
                w + 2,
                bins[w + 1]
            )));
        }
        let edge = c + delta;
        let tol = ENDPOINT_TOL * edge.max(1.0);
        if (bins[0] + edge).abs() > tol || (bins[m - 1] - edge).abs() > tol {
            return Err(Error::InvalidLayout(format!(
                "outer bins must be -/+(c + delta) = -/+{edge}, got {} and {}",
                bins[0],
                bins[m - 1]
            )));
        }
        Ok(Self { c, delta, bins })
    }

    /// Builds a layout from its bin values, reading `delta` off the outer bin.
    pub fn from_bins(c: f64, bins: Vec<f64>) -> Result<Self> {
        let last = *bins
            .last()
            .ok_or_else(|| Error::InvalidLayout("empty bin list".into()))?;
        Self::new(c, last - c, bins)
    }

    /// Symmetric layout from the positive inner bin values (ascending, all
    /// strictly between 0 and `c + delta`). An odd `m` places a bin at 0.
    pub fn symmetric(c: f64, delta: f64, positive_inner: &[f64], with_zero: bool) -> Result<Self> {
        let edge = c + delta;
        let mut bins: Vec<f64> = Vec::with_capacity(2 * positive_inner.len() + 3);
        bins.push(-edge);
        bins.extend(positive_inner.iter().rev().map(|b| -b));
        if with_zero {
            bins.push(0.0);
        }
        bins.extend(positive_inner.iter().copied());
        bins.push(edge);
        Self::new(c, delta, bins)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn m(&self) -> usize {
        self.bins.len()
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    /// `B_k` for 1-based `k`.
    #[inline]
    pub fn bin(&self, k: usize) -> f64 {
        self.bins[k - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        (-self.c..=self.c).contains(&x)
    }

    /// True when `B_i = -B_{m+1-i}` for every bin.
    pub fn is_symmetric(&self) -> bool {
        let tol = ENDPOINT_TOL * (self.c + self.delta).max(1.0);
        let m = self.m();
        (0..m).all(|i| (self.bins[i] + self.bins[m - 1 - i]).abs() <= tol)
    }

    pub fn bin_in_range(&self, k: usize) -> bool {
        self.contains(self.bin(k))
    }

    /// Index `s` of the smallest bin inside `[-c, c]`, if any.
    pub fn first_in_range(&self) -> Option<usize> {
        (1..=self.m()).find(|&k| self.bin_in_range(k))
    }

    /// Index `t` of the largest bin inside `[-c, c]`, if any.
    pub fn last_in_range(&self) -> Option<usize> {
        (1..=self.m()).rev().find(|&k| self.bin_in_range(k))
    }

    /// Returns the `j` with `B_j <= x < B_{j+1}`. The top endpoint `x = c`
    /// with `delta = 0` is folded into the last interval.
    pub fn interval_index(&self, x: f64) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::Domain(format!(
                "x = {x} outside [-{c}, {c}]",
                c = self.c
            )));
        }
        let j = self.bins.partition_point(|&b| b <= x);
        Ok(j.clamp(1, self.m() - 1))
    }

    /// Intervals `[B_j, B_{j+1}) ∩ [-c, c]` of positive length, as
    /// `(j, lo, hi)`.
    pub fn domain_intervals(&self) -> Vec<(usize, f64, f64)> {
        (1..self.m())
            .filter_map(|j| {
                let lo = self.bin(j).max(-self.c);
                let hi = self.bin(j + 1).min(self.c);
                (hi > lo).then_some((j, lo, hi))
            })
            .collect()
    }

    /// Interval indices that some `x` in `[-c, c]` falls into.
    pub fn active_rows(&self) -> std::ops::RangeInclusive<usize> {
        let lo = self.interval_index(-self.c).unwrap_or(1);
        let hi = self.interval_index(self.c).unwrap_or(self.m() - 1);
        lo..=hi
    }
}
