//! Closed-form ERM and RQM bounds checked against audited losses and exact
//! errors over parameter grids.

use dpq_core::audit::empirical_epsilon;
use dpq_core::mechanisms::{self, erm_error_bound, erm_privacy_bound, rqm_privacy_bound};
use dpq_core::quantizer::{exact_mae, InputDistribution};

pub const CS: [f64; 2] = [0.5, 1.0];
pub const MS: [usize; 6] = [4, 5, 6, 8, 12, 16];
pub const DELTA_FACTORS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 4.0];
pub const GAMMAS: [f64; 7] = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
pub const QS: [f64; 9] = [0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.98];

#[derive(Debug, Default)]
pub struct GridCheck {
    pub checked: usize,
    pub violations: Vec<String>,
}

/// `(m, c, delta, gamma)` over the ERM grid.
pub fn erm_grid() -> Vec<(usize, f64, f64, f64)> {
    let mut out = Vec::new();
    for &c in &CS {
        for &m in &MS {
            for &d in &DELTA_FACTORS {
                for &g in &GAMMAS {
                    out.push((m, c, d * c, g));
                }
            }
        }
    }
    out
}

pub fn erm_error(points: &[(usize, f64, f64, f64)]) -> GridCheck {
    let mut out = GridCheck::default();
    for &(m, c, delta, g) in points {
        let layout = mechanisms::uniform_bins(m, c, delta).unwrap();
        let dist = InputDistribution::uniform(&layout);
        let mae = exact_mae(&mechanisms::erm(layout, g).unwrap(), &dist).unwrap();
        let eb = erm_error_bound(m, c, delta, g);
        out.checked += 1;
        if !(mae <= eb) {
            out.violations.push(format!(
                "m={m} c={c} delta={delta} gamma={g}: mae {mae} > {eb}"
            ));
        }
    }
    out
}

pub fn erm_privacy(points: &[(usize, f64, f64, f64)]) -> GridCheck {
    let mut out = GridCheck::default();
    for &(m, c, delta, g) in points {
        let mech = mechanisms::erm(mechanisms::uniform_bins(m, c, delta).unwrap(), g).unwrap();
        let eps = empirical_epsilon(&mech).eps_emp;
        let pb = erm_privacy_bound(m, c, delta, g).value;
        out.checked += 1;
        if !(eps <= pb) {
            out.violations.push(format!(
                "m={m} c={c} delta={delta} gamma={g}: eps {eps} > {pb}"
            ));
        }
    }
    out
}

pub fn rqm_privacy() -> GridCheck {
    let mut out = GridCheck::default();
    for &c in &CS {
        for &m in &MS {
            for &f in &DELTA_FACTORS {
                let delta = f * c;
                for &q in &QS {
                    let eps = empirical_epsilon(&mechanisms::rqm(m, c, delta, q).unwrap()).eps_emp;
                    let bound = rqm_privacy_bound(m, c, delta, q).unwrap();
                    out.checked += 1;
                    if !(eps <= bound) {
                        out.violations.push(format!(
                            "m={m} c={c} delta={delta} q={q}: eps {eps} > {bound}"
                        ));
                    }
                }
            }
        }
    }
    out
}
