use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layout::BinLayout;
use super::selection::{SelectionDistribution, SelectionTable};
use crate::error::{Error, Result};

/// Which one-sided limit of the output distribution to take at a bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A randomized quantizer: a bin layout plus the selection distribution that
/// picks the two bins to dither between.
#[derive(Clone, Debug, PartialEq)]
pub struct Mechanism {
    layout: BinLayout,
    selection: SelectionDistribution,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Mechanism {
    pub fn new(layout: BinLayout, selection: SelectionDistribution) -> Result<Self> {
        if layout.m() != selection.m() {
            return Err(Error::InvalidSelection(format!(
                "selection tables serve m = {} but the layout has {} bins",
                selection.m(),
                layout.m()
            )));
        }
        Ok(Self {
            layout,
            selection,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn layout(&self) -> &BinLayout {
        &self.layout
    }

    pub fn selection(&self) -> &SelectionDistribution {
        &self.selection
    }

    pub fn m(&self) -> usize {
        self.layout.m()
    }

    /// Output distribution obtained by evaluating the affine formula of
    /// interval `j` at `x`. For `x` inside `[B_j, B_{j+1})` this is the true
    /// distribution; at `x = B_{j+1}` it is the left limit there.
    pub fn interval_distribution(&self, j: usize, x: f64) -> Vec<f64> {
        let m = self.m();
        let b = self.layout.bins();
        let sel = &self.selection;
        let mut p = vec![0.0; m];
        for i in 1..=j {
            let ql = sel.pick_left(j, i);
            if ql == 0.0 {
                continue;
            }
            let bi = b[i - 1];
            let s: f64 = (j + 1..=m)
                .map(|r| sel.pick_right(j, r) * (b[r - 1] - x) / (b[r - 1] - bi))
                .sum();
            p[i - 1] = ql * s;
        }
        for i in j + 1..=m {
            let qr = sel.pick_right(j, i);
            if qr == 0.0 {
                continue;
            }
            let bi = b[i - 1];
            let s: f64 = (1..=j)
                .map(|l| sel.pick_left(j, l) * (x - b[l - 1]) / (bi - b[l - 1]))
                .sum();
            p[i - 1] = qr * s;
        }
        p
    }

    /// `Pr{M(x) = B_i}` for every `i`.
    pub fn output_distribution(&self, x: f64) -> Result<Vec<f64>> {
        let j = self.layout.interval_index(x)?;
        Ok(self.interval_distribution(j, x))
    }

    /// One-sided limit of the output distribution at bin `B_k`. The left
    /// limit needs `-c < B_k <= c`, the right limit `-c <= B_k <= c`.
    pub fn output_limit(&self, k: usize, side: Side) -> Result<Vec<f64>> {
        if k == 0 || k > self.m() {
            return Err(Error::Domain(format!(
                "bin index {k} out of 1..={}",
                self.m()
            )));
        }
        let bk = self.layout.bin(k);
        let c = self.layout.c();
        match side {
            Side::Right => self.output_distribution(bk),
            Side::Left => {
                if !(bk > -c && bk <= c) || k == 1 {
                    return Err(Error::Domain(format!(
                        "no left limit inside [-c, c] at B_{k} = {bk}"
                    )));
                }
                Ok(self.interval_distribution(k - 1, bk))
            }
        }
    }

    /// Conditional mean `E[M(x)]`.
    pub fn conditional_mean(&self, x: f64) -> Result<f64> {
        let p = self.output_distribution(x)?;
        Ok(p.iter()
            .zip(self.layout.bins())
            .map(|(pi, bi)| pi * bi)
            .sum())
    }

    /// Draws the output bin index (1-based).
    pub fn sample_index<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<usize> {
        let j = self.layout.interval_index(x)?;
        let m = self.m();
        let l = draw_index(rng, 1..=j, |l| self.selection.pick_left(j, l));
        let r = draw_index(rng, j + 1..=m, |r| self.selection.pick_right(j, r));
        let (bl, br) = (self.layout.bin(l), self.layout.bin(r));
        let lower = rng.random::<f64>() * (br - bl) < br - x;
        Ok(if lower { l } else { r })
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<f64> {
        Ok(self.layout.bin(self.sample_index(x, rng)?))
    }

    pub fn to_document(&self) -> MechanismDocument {
        MechanismDocument {
            c: self.layout.c(),
            delta: self.layout.delta(),
            bins: self.layout.bins().to_vec(),
            left_table: self.selection.left().rows(),
            right_table: (!self.selection.is_symmetric()).then(|| self.selection.right().rows()),
            symmetric_mode: self.selection.is_symmetric(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_document(doc: MechanismDocument) -> Result<Self> {
        let layout = BinLayout::new(doc.c, doc.delta, doc.bins)?;
        let left = SelectionTable::from_rows(&doc.left_table)?;
        let selection = match (doc.symmetric_mode, doc.right_table) {
            (true, None) => SelectionDistribution::symmetric(left),
            (true, Some(right)) => {
                if right != doc.left_table {
                    return Err(Error::InvalidSelection(
                        "symmetric_mode is set but right_table differs from left_table".into(),
                    ));
                }
                SelectionDistribution::symmetric(left)
            }
            (false, Some(right)) => {
                SelectionDistribution::asymmetric(left, SelectionTable::from_rows(&right)?)?
            }
            (false, None) => {
                return Err(Error::InvalidSelection(
                    "symmetric_mode is false but right_table is missing".into(),
                ))
            }
        };
        let mut mech = Self::new(layout, selection)?;
        mech.metadata = doc.metadata;
        Ok(mech)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        crate::io::atomic_write(path, s.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk form of a mechanism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismDocument {
    pub c: f64,
    pub delta: f64,
    pub bins: Vec<f64>,
    pub left_table: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_table: Option<Vec<Vec<f64>>>,
    pub symmetric_mode: bool,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

fn draw_index<R: Rng + ?Sized>(
    rng: &mut R,
    range: std::ops::RangeInclusive<usize>,
    prob: impl Fn(usize) -> f64,
) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = *range.start();
    for k in range {
        let p = prob(k);
        if p > 0.0 {
            last_positive = k;
            acc += p;
            if u < acc {
                return k;
            }
        }
    }
    last_positive
}

/// Randomized rounding between two values: returns `bl` with probability
/// `(br - x) / (br - bl)` and `br` otherwise. Requires `bl <= x < br`.
pub fn dither<R: Rng + ?Sized>(bl: f64, br: f64, x: f64, rng: &mut R) -> Result<f64> {
    if !(bl < br) {
        return Err(Error::Contract(format!(
            "dither needs bl < br, got {bl} and {br}"
        )));
    }
    if !(bl <= x && x < br) {
        return Err(Error::Contract(format!(
            "dither needs bl <= x < br, got x = {x} with [{bl}, {br})"
        )));
    }
    let lower = rng.random::<f64>() * (br - bl) < br - x;
    Ok(if lower { bl } else { br })
}
