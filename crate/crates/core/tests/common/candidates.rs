//! Candidate-set extrema against exhaustive endpoint evaluation.

use dpq_core::audit::{candidate_sets, empirical_epsilon, AuditMethod};
use dpq_core::mechanisms;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{extremes_by_endpoints, random_mechanism};

pub const TOL: f64 = 1e-6;

pub fn ln_ratio(mx: f64, mn: f64) -> f64 {
    if mn <= 0.0 {
        f64::INFINITY
    } else {
        (mx / mn).ln().max(0.0)
    }
}

pub fn close(a: f64, b: f64) -> bool {
    (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= TOL
}

/// Disagreements between candidate-set extrema (and the audit built on
/// them) and the endpoint oracle over `n` random monotone mechanisms.
pub fn monotone_mismatches(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for k in 0..n {
        let m = rng.random_range(2..=12);
        let mech = random_mechanism(&mut rng, m, true);
        let report = empirical_epsilon(&mech);
        if report.method != AuditMethod::CandidateSets {
            out.push(format!(
                "mechanism {k}: audit fell back to {:?}",
                report.method
            ));
        }
        let mut eps = 0.0f64;
        for i in 1..=m {
            let (mx, mn) = extremes_by_endpoints(&mech, i);
            let cs = candidate_sets(&mech, i);
            let cmax = cs
                .upper
                .iter()
                .map(|w| w.prob)
                .fold(f64::NEG_INFINITY, f64::max);
            let cmin = cs
                .lower
                .iter()
                .map(|w| w.prob)
                .fold(f64::INFINITY, f64::min);
            if (cmax - mx).abs() > TOL || (cmin - mn).abs() > TOL {
                out.push(format!(
                    "mechanism {k}, bin {i}: candidates ({cmax}, {cmin}) vs endpoints ({mx}, {mn})"
                ));
            }
            if !close(report.bins[i - 1].log_ratio, ln_ratio(mx, mn)) {
                out.push(format!(
                    "mechanism {k}, bin {i}: audited log ratio {}",
                    report.bins[i - 1].log_ratio
                ));
            }
            eps = eps.max(ln_ratio(mx, mn));
        }
        if !close(report.eps_emp, eps) {
            out.push(format!(
                "mechanism {k}: audited {} vs {eps}",
                report.eps_emp
            ));
        }
    }
    out
}

/// ERM with eight bins: the maximum of `p(., 3)` is one of the diagonal
/// entries `q_3(3)` and `q_6(6)` (right table), and these two values are
/// exactly the upper candidates.
pub fn erm_eight_mismatches() -> Vec<String> {
    let mut out = Vec::new();
    for (delta, gamma) in [(1.0, 0.5), (1.0, 3.0), (0.5, 8.0), (1.2, 0.05)] {
        let layout = mechanisms::uniform_bins(8, 1.0, delta).unwrap();
        assert!(layout.bin_in_range(3));
        let mech = mechanisms::erm(layout, gamma).unwrap();
        let sel = mech.selection();
        let q33 = sel.left().get(3, 3);
        let q66 = sel.right().get(6, 6);
        let (mx, _) = extremes_by_endpoints(&mech, 3);
        if (mx - q33.max(q66)).abs() > 1e-12 {
            out.push(format!(
                "delta {delta}, gamma {gamma}: max {mx} vs q3(3) {q33}, q6(6) {q66}"
            ));
        }
        let vals: Vec<f64> = candidate_sets(&mech, 3)
            .upper
            .iter()
            .map(|w| w.prob)
            .collect();
        let exact = vals.len() == 2
            && vals.iter().any(|v| (v - q33).abs() <= 1e-15)
            && vals.iter().any(|v| (v - q66).abs() <= 1e-15);
        if !exact {
            out.push(format!(
                "delta {delta}, gamma {gamma}: upper candidates {vals:?}"
            ));
        }
    }
    out
}
