//! Random mechanisms and an independent evaluation of the output law shared
//! by the integration tests.

#![allow(dead_code)]

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use dpq_core::mechanisms;
use dpq_core::quantizer::{BinLayout, Mechanism, SelectionDistribution, SelectionTable};
use rand::Rng;

pub mod bounds;
pub mod candidates;
pub mod soundness;
pub mod vertex;

pub fn random_layout(rng: &mut impl Rng, m: usize, symmetric: bool) -> BinLayout {
    let c = rng.random_range(0.5..2.0);
    let delta = c * rng.random_range(0.05..3.0);
    let edge = c + delta;
    loop {
        let bins: Vec<f64> = if symmetric {
            let half = (m - 2) / 2;
            let mut pos: Vec<f64> = (0..half)
                .map(|_| rng.random_range(0.02..0.98) * edge)
                .collect();
            pos.sort_by(f64::total_cmp);
            let mut b = vec![-edge];
            b.extend(pos.iter().rev().map(|p| -p));
            if m % 2 == 1 {
                b.push(0.0);
            }
            b.extend(pos);
            b.push(edge);
            b
        } else {
            let mut inner: Vec<f64> = (0..m - 2)
                .map(|_| rng.random_range(-0.98..0.98) * edge)
                .collect();
            inner.sort_by(f64::total_cmp);
            let mut b = vec![-edge];
            b.extend(inner);
            b.push(edge);
            b
        };
        if bins.windows(2).all(|w| w[1] - w[0] > 1e-3 * edge) {
            return BinLayout::new(c, delta, bins).unwrap();
        }
    }
}

/// Any table: rows drawn from a flat Dirichlet.
pub fn random_table(rng: &mut impl Rng, m: usize) -> SelectionTable {
    let rows: Vec<Vec<f64>> = (1..m)
        .map(|j| {
            let w: Vec<f64> = (0..j)
                .map(|_| -rng.random_range(1e-9..1.0f64).ln())
                .collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    SelectionTable::from_rows(&rows).unwrap()
}

/// A column-monotone table (`q_i(i) >= q_j(i)` for `j >= i`), drawn from one
/// of several shapes.
pub fn random_monotone_table(rng: &mut impl Rng, layout: &BinLayout) -> SelectionTable {
    let m = layout.m();
    let t = match rng.random_range(0..4) {
        0 => mechanisms::rqm_selection(m, rng.random_range(0.02..0.98))
            .unwrap()
            .left()
            .clone(),
        1 => mechanisms::erm_selection(layout, rng.random_range(0.0..10.0))
            .unwrap()
            .left()
            .clone(),
        2 => {
            // Diagonal at least one half dominates every off-diagonal entry.
            let rows: Vec<Vec<f64>> = (1..m)
                .map(|j| {
                    let d = if j == 1 {
                        1.0
                    } else {
                        rng.random_range(0.5..1.0)
                    };
                    let w: Vec<f64> = (1..j).map(|_| rng.random_range(1e-6..1.0)).collect();
                    let s: f64 = w.iter().sum();
                    let mut row: Vec<f64> = w.into_iter().map(|x| (1.0 - d) * x / s).collect();
                    row.push(d);
                    row
                })
                .collect();
            SelectionTable::from_rows(&rows).unwrap()
        }
        _ => SelectionTable::from_fn(m, |j, _| 1.0 / j as f64).unwrap(),
    };
    assert!(t.is_column_monotone(0.0));
    t
}

pub fn random_mechanism(rng: &mut impl Rng, m: usize, monotone: bool) -> Mechanism {
    let symmetric = rng.random_bool(0.5);
    let layout = random_layout(rng, m, symmetric);
    let table = |rng: &mut _| {
        if monotone {
            random_monotone_table(rng, &layout)
        } else {
            random_table(rng, m)
        }
    };
    let sel = if symmetric && rng.random_bool(0.5) {
        SelectionDistribution::symmetric(table(rng))
    } else {
        let l = table(rng);
        SelectionDistribution::asymmetric(l, table(rng)).unwrap()
    };
    Mechanism::new(layout, sel).unwrap()
}

/// `p(x, .)` from the sampling procedure itself: pick a left and a right bin
/// independently, then dither between them. Uses the affine formula of
/// interval `j`, so `x = B_{j+1}` yields the left limit there.
pub fn output_law(mech: &Mechanism, j: usize, x: f64) -> Vec<f64> {
    let m = mech.m();
    let b = mech.layout().bins();
    let sel = mech.selection();
    let mut p = vec![0.0; m];
    for l in 1..=j {
        for r in j + 1..=m {
            let w = sel.pick_left(j, l) * sel.pick_right(j, r);
            let span = b[r - 1] - b[l - 1];
            p[l - 1] += w * (b[r - 1] - x) / span;
            p[r - 1] += w * (x - b[l - 1]) / span;
        }
    }
    p
}

/// Exact `(max, min)` of `p(., i)` over `[-c, c]` including one-sided
/// limits: the law is affine on every interval, so the endpoints of each
/// clipped interval suffice.
pub fn extremes_by_endpoints(mech: &Mechanism, i: usize) -> (f64, f64) {
    let mut mx = f64::NEG_INFINITY;
    let mut mn = f64::INFINITY;
    for (j, lo, hi) in mech.layout().domain_intervals() {
        for x in [lo, hi] {
            let v = output_law(mech, j, x)[i - 1];
            mx = mx.max(v);
            mn = mn.min(v);
        }
    }
    // A bin sitting exactly at c starts an interval of zero clipped length.
    for &b in mech.layout().bins() {
        if mech.layout().contains(b) {
            let j = mech.layout().interval_index(b).unwrap();
            let v = output_law(mech, j, b)[i - 1];
            mx = mx.max(v);
            mn = mn.min(v);
        }
    }
    (mx, mn)
}
