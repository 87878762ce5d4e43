//! The two reference constructions: RQM (geometric selection on a uniform
//! grid) and ERM (exponential-weights selection), with their closed-form
//! privacy and error bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantizer::{BinLayout, Mechanism, SelectionDistribution, SelectionTable};

/// Evenly spaced bins `B_i = -c - delta + (i-1)(2c + 2 delta)/(m-1)`.
pub fn uniform_bins(m: usize, c: f64, delta: f64) -> Result<BinLayout> {
    if m < 2 {
        return Err(Error::InvalidLayout(format!("need m >= 2, got {m}")));
    }
    let edge = c + delta;
    let step = 2.0 * edge / (m - 1) as f64;
    let mut bins: Vec<f64> = (0..m).map(|i| -edge + i as f64 * step).collect();
    bins[m - 1] = edge;
    BinLayout::new(c, delta, bins)
}

/// True when the layout is evenly spaced to within `1e-9`.
pub fn is_uniform_layout(layout: &BinLayout) -> bool {
    let m = layout.m();
    let edge = layout.c() + layout.delta();
    let step = 2.0 * edge / (m - 1) as f64;
    layout
        .bins()
        .iter()
        .enumerate()
        .all(|(i, b)| (b - (-edge + i as f64 * step)).abs() <= 1e-9)
}

/// Geometric selection: `q_j(1) = (1-q)^{j-1}` and `q_j(i) = q(1-q)^{j-i}`.
pub fn rqm_selection(m: usize, q: f64) -> Result<SelectionDistribution> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "RQM keep probability must be in (0, 1), got {q}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidLayout(format!("need m >= 2, got {m}")));
    }
    let table = SelectionTable::from_fn(m, |j, i| {
        if i == 1 {
            (1.0 - q).powi(j as i32 - 1)
        } else {
            q * (1.0 - q).powi((j - i) as i32)
        }
    })?;
    Ok(SelectionDistribution::symmetric(table))
}

/// Exponential-weights selection
/// `q_j(i) ∝ exp(gamma (B_i - B_j) / (2 (B_j - B_1)))`, with `q_1(1) = 1`.
pub fn erm_selection(layout: &BinLayout, gamma: f64) -> Result<SelectionDistribution> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::Domain(format!(
            "ERM temperature must be finite and nonnegative, got {gamma}"
        )));
    }
    let m = layout.m();
    let b = layout.bins();
    let mut probs: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
    for j in 1..m {
        if j == 1 {
            probs.push(vec![1.0]);
            continue;
        }
        let scale = gamma / (2.0 * (b[j - 1] - b[0]));
        let w: Vec<f64> = (1..=j)
            .map(|i| (scale * (b[i - 1] - b[j - 1])).exp())
            .collect();
        let total: f64 = w.iter().sum();
        probs.push(w.into_iter().map(|x| x / total).collect());
    }
    Ok(SelectionDistribution::symmetric(SelectionTable::from_rows(
        &probs,
    )?))
}

pub fn rqm(m: usize, c: f64, delta: f64, q: f64) -> Result<Mechanism> {
    let layout = uniform_bins(m, c, delta)?;
    let sel = rqm_selection(m, q)?;
    Ok(Mechanism::new(layout, sel)?
        .with_metadata("construction", "rqm")
        .with_metadata("q", q))
}

pub fn erm(layout: BinLayout, gamma: f64) -> Result<Mechanism> {
    let sel = erm_selection(&layout, gamma)?;
    Ok(Mechanism::new(layout, sel)?
        .with_metadata("construction", "erm")
        .with_metadata("gamma", gamma))
}

/// A closed-form bound together with whether the assumptions under which it
/// was proved hold for the given arguments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    pub assumptions_hold: bool,
}

/// `gamma + ln(2 m (c + delta) / c)`. Proven for `m >= 4` on uniform bins.
pub fn erm_privacy_bound(m: usize, c: f64, delta: f64, gamma: f64) -> Bound {
    Bound {
        value: gamma + (2.0 * m as f64 * (c + delta) / c).ln(),
        assumptions_hold: m >= 4,
    }
}

/// `(4 / gamma) ln(m) (c + delta) + (2c + 2 delta) / (m - 1)`.
pub fn erm_error_bound(m: usize, c: f64, delta: f64, gamma: f64) -> f64 {
    4.0 / gamma * (m as f64).ln() * (c + delta) + 2.0 * (c + delta) / (m - 1) as f64
}

/// `ln(2 (1-q)^2 (c + delta) / delta) + m ln(1 / (1-q))`.
pub fn rqm_privacy_bound(m: usize, c: f64, delta: f64, q: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(
            "RQM privacy bound diverges at delta = 0".into(),
        ));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "RQM keep probability must be in (0, 1), got {q}"
        )));
    }
    let one_minus = 1.0 - q;
    Ok(
        (2.0 * one_minus * one_minus * (c + delta) / delta).ln()
            + m as f64 * (1.0 / one_minus).ln(),
    )
}
