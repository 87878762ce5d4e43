//! Numerical certification of the privacy loss of a mechanism.
//!
//! `p(x, i)` is affine in `x` on every inter-bin segment, so its extremes
//! over `[-c, c]` are attained (or approached) at segment starts and at
//! left limits at bins. Under column-monotone tables the candidates for
//! bins inside `[-c, c]` collapse to diagonal selection probabilities.

use serde::{Deserialize, Serialize};

use crate::lp::{anchors, Anchor, AnchorKind};
use crate::quantizer::{Mechanism, Side};

/// Slack allowed when comparing an audited loss to its target.
pub const AUDIT_SLACK: f64 = 1e-6;
const MONOTONE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMethod {
    CandidateSets,
    DenseGrid,
}

/// A point (or one-sided limit) where `p(., i)` takes a reported value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: f64,
    /// True when the value is the limit as the input approaches `x` from
    /// below.
    pub left_limit: bool,
    pub prob: f64,
}

impl Witness {
    /// Re-evaluates `p(x, i)` (or its left limit) for bin `i`.
    pub fn evaluate(&self, mech: &Mechanism, i: usize) -> f64 {
        let p = if self.left_limit {
            let k = mech
                .layout()
                .bins()
                .iter()
                .position(|&b| b == self.x)
                .map(|k| k + 1);
            match k {
                Some(k) => mech.output_limit(k, Side::Left).ok(),
                None => None,
            }
        } else {
            mech.output_distribution(self.x).ok()
        };
        p.map(|p| p[i - 1]).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinAudit {
    pub bin: usize,
    pub max: Witness,
    pub min: Witness,
    #[serde(with = "crate::io::float_or_inf")]
    pub log_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    #[serde(with = "crate::io::float_or_inf")]
    pub eps_emp: f64,
    pub worst_bin: usize,
    pub bins: Vec<BinAudit>,
    pub method: AuditMethod,
    pub monotonicity_assumption_held: bool,
}

/// Candidate maxima and minima of `p(., i)` with their witnesses.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSets {
    pub upper: Vec<Witness>,
    pub lower: Vec<Witness>,
}

/// Whether both selection tables satisfy `q_i(i) >= q_j(i)` for `j >= i`.
pub fn monotonicity_holds(mech: &Mechanism) -> bool {
    let sel = mech.selection();
    sel.left().is_column_monotone(MONOTONE_TOL) && sel.right().is_column_monotone(MONOTONE_TOL)
}

fn eval_anchor(mech: &Mechanism, a: &Anchor, i: usize) -> Witness {
    let p = mech.interval_distribution(a.j, a.x);
    Witness {
        x: a.x,
        left_limit: a.kind == AnchorKind::End && a.bin.is_some(),
        prob: p[i - 1],
    }
}

/// Candidate extrema for bin `i`. For bins inside `[-c, c]` the maximum
/// candidates are the diagonal probabilities, which is valid only for
/// column-monotone tables; use [`empirical_epsilon`] for arbitrary
/// mechanisms.
pub fn candidate_sets(mech: &Mechanism, i: usize) -> CandidateSets {
    let layout = mech.layout();
    let m = layout.m();
    let c = layout.c();
    let bi = layout.bin(i);
    let in_range = layout.bin_in_range(i);
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    if in_range {
        if i < m {
            upper.push(Witness {
                x: bi,
                left_limit: false,
                prob: mech.selection().pick_left(i, i),
            });
        }
        if bi > -c && i > 1 {
            upper.push(Witness {
                x: bi,
                left_limit: true,
                prob: mech.selection().pick_right(i - 1, i),
            });
        }
    }
    for a in anchors(layout) {
        let decreasing = i <= a.j;
        let is_max = (a.kind == AnchorKind::Start) == decreasing;
        if is_max {
            if !in_range {
                upper.push(eval_anchor(mech, &a, i));
            }
        } else {
            lower.push(eval_anchor(mech, &a, i));
        }
    }
    CandidateSets { upper, lower }
}

fn extremes(upper: &[Witness], lower: &[Witness]) -> (Witness, Witness) {
    let mut mx = upper[0];
    for w in &upper[1..] {
        if w.prob > mx.prob {
            mx = *w;
        }
    }
    let mut mn = lower[0];
    for w in &lower[1..] {
        if w.prob < mn.prob {
            mn = *w;
        }
    }
    (mx, mn)
}

fn log_ratio(mx: f64, mn: f64) -> f64 {
    if mn <= 0.0 {
        f64::INFINITY
    } else {
        (mx / mn).ln().max(0.0)
    }
}

fn assemble(bins: Vec<BinAudit>, method: AuditMethod, monotone: bool) -> AuditReport {
    let mut worst = 0;
    for (k, b) in bins.iter().enumerate() {
        if b.log_ratio > bins[worst].log_ratio || b.log_ratio.is_nan() {
            worst = k;
        }
    }
    AuditReport {
        eps_emp: bins[worst].log_ratio,
        worst_bin: bins[worst].bin,
        bins,
        method,
        monotonicity_assumption_held: monotone,
    }
}

/// Evaluates `p` on a uniform grid of step `1e-4 * 2c`, at every bin inside
/// `[-c, c]` and at every left limit there.
pub fn dense_grid_audit(mech: &Mechanism) -> AuditReport {
    let layout = mech.layout();
    let m = layout.m();
    let c = layout.c();
    let steps = 10_000usize;
    let mut points: Vec<Witness> = (0..=steps)
        .map(|k| Witness {
            x: (-c + 2.0 * c * k as f64 / steps as f64).min(c),
            left_limit: false,
            prob: 0.0,
        })
        .collect();
    for k in 1..=m {
        let b = layout.bin(k);
        if layout.contains(b) {
            points.push(Witness {
                x: b,
                left_limit: false,
                prob: 0.0,
            });
            if b > -c {
                points.push(Witness {
                    x: b,
                    left_limit: true,
                    prob: 0.0,
                });
            }
        }
    }
    let dists: Vec<Vec<f64>> = points
        .iter()
        .map(|w| {
            if w.left_limit {
                let k = layout.bins().iter().position(|&b| b == w.x).unwrap() + 1;
                mech.interval_distribution(k - 1, w.x)
            } else {
                mech.output_distribution(w.x)
                    .expect("grid point inside [-c, c]")
            }
        })
        .collect();
    let bins = (1..=m)
        .map(|i| {
            let ws: Vec<Witness> = points
                .iter()
                .zip(&dists)
                .map(|(w, p)| Witness {
                    prob: p[i - 1],
                    ..*w
                })
                .collect();
            let (mx, mn) = extremes(&ws, &ws);
            BinAudit {
                bin: i,
                max: mx,
                min: mn,
                log_ratio: log_ratio(mx.prob, mn.prob),
            }
        })
        .collect();
    assemble(bins, AuditMethod::DenseGrid, monotonicity_holds(mech))
}

/// Worst-case privacy loss `max_i ln(sup_x p(x,i) / inf_x p(x,i))`.
pub fn empirical_epsilon(mech: &Mechanism) -> AuditReport {
    if !monotonicity_holds(mech) {
        return dense_grid_audit(mech);
    }
    let bins = (1..=mech.m())
        .map(|i| {
            let cs = candidate_sets(mech, i);
            let (mx, mn) = extremes(&cs.upper, &cs.lower);
            BinAudit {
                bin: i,
                max: mx,
                min: mn,
                log_ratio: log_ratio(mx.prob, mn.prob),
            }
        })
        .collect();
    assemble(bins, AuditMethod::CandidateSets, true)
}

/// Audits the mechanism and reports whether it meets `eps_target` up to
/// [`AUDIT_SLACK`].
pub fn verify_mechanism(mech: &Mechanism, eps_target: f64) -> (bool, AuditReport) {
    let report = empirical_epsilon(mech);
    (report.eps_emp <= eps_target + AUDIT_SLACK, report)
}
