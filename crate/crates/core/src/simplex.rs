//! Dense two-phase primal simplex with Bland's rule.
//!
//! Deterministic by construction: pivots are chosen by lowest eligible index
//! and ratio ties go to the basic variable with the lowest index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation};

pub const PIVOT_TOL: f64 = 1e-10;
pub const FEAS_TOL: f64 = 1e-9;
pub const OPT_TOL: f64 = 1e-9;
/// A basic value this far below zero means the tableau is no longer usable.
const BREAKDOWN_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    /// Objective without the program's constant term.
    pub objective: f64,
    pub iterations: usize,
    /// One multiplier per constraint row (zero unless optimal).
    pub duals: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_point(
        status: LpStatus,
        n: usize,
        rows: usize,
        iterations: usize,
        diagnostic: String,
    ) -> Self {
        Self {
            status,
            values: vec![0.0; n],
            objective: f64::NAN,
            iterations,
            duals: vec![0.0; rows],
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            diagnostic: Some(diagnostic),
        }
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major, `cols + 1` entries per row; the last one is the rhs.
    a: Vec<f64>,
    basis: Vec<usize>,
    cost_row: Vec<f64>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let inv = 1.0 / self.at(pr, pc);
        for v in &mut self.a[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        let pivot_row: Vec<f64> = self.a[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.a[r * w + pc];
            if f != 0.0 {
                for (v, p) in self.a[r * w..(r + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                self.a[r * w + pc] = 0.0;
                // Round-off must not push a basic value below zero.
                let rhs = &mut self.a[r * w + self.cols];
                if *rhs < 0.0 && *rhs > -FEAS_TOL {
                    *rhs = 0.0;
                }
            }
        }
        let f = self.cost_row[pc];
        if f != 0.0 {
            for (v, p) in self.cost_row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.cost_row[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    fn set_costs(&mut self, costs: &[f64]) {
        self.cost_row = costs.to_vec();
        self.cost_row.push(0.0);
        for r in 0..self.rows {
            let cb = costs[self.basis[r]];
            if cb != 0.0 {
                let w = self.cols + 1;
                for (v, t) in self.cost_row.iter_mut().zip(&self.a[r * w..(r + 1) * w]) {
                    *v -= cb * t;
                }
            }
        }
    }

    /// Runs Bland-rule pivots until optimal or unbounded. Returns `false`
    /// when unbounded.
    fn optimize(&mut self, allowed: &[bool], iterations: &mut usize, cap: usize) -> Result<bool> {
        loop {
            let Some(e) = (0..self.cols).find(|&c| allowed[c] && self.cost_row[c] < -OPT_TOL)
            else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, e);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, best)) => {
                            if ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, best))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return Ok(false);
            };
            *iterations += 1;
            if *iterations > cap {
                return Err(Error::IterationLimit(cap));
            }
            self.pivot(pr, e);
            if let Some(r) = (0..self.rows).find(|&r| self.rhs(r) < -BREAKDOWN_TOL) {
                return Err(Error::NumericalFailure(format!(
                    "basic value of row {r} fell to {:e} after {} pivots",
                    self.rhs(r),
                    iterations
                )));
            }
        }
    }
}

/// Solves `min c.x` subject to the program's rows and bounds. Variables must
/// have finite lower bounds.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.n_vars();
    let m_orig = lp.constraints.len();
    if let Some(k) = lp.bounds.iter().position(|(lo, _)| !lo.is_finite()) {
        return Err(Error::Contract(format!(
            "variable {k} needs a finite lower bound"
        )));
    }
    if let Some(k) = lp.bounds.iter().position(|(lo, hi)| hi < lo) {
        return Ok(LpSolution::without_point(
            LpStatus::Infeasible,
            n,
            m_orig,
            0,
            format!("variable {} has empty bounds {:?}", k, lp.bounds[k]),
        ));
    }

    // Shift to x' = x - lo >= 0; finite upper bounds become rows.
    let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| {
            let shift: f64 = c.coeffs.iter().zip(&lo).map(|(a, l)| a * l).sum();
            (c.coeffs.clone(), c.relation, c.rhs - shift)
        })
        .collect();
    for (k, &(l, h)) in lp.bounds.iter().enumerate() {
        if h.is_finite() {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            rows.push((e, Relation::Le, h - l));
        }
    }
    let n_rows = rows.len();
    let mut sign = vec![1.0; n_rows];
    for (r, row) in rows.iter_mut().enumerate() {
        // Equilibrate so every row has unit max coefficient; large
        // exponential factors otherwise swamp the pivot tolerances.
        let big = row.0.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
        if big > 0.0 && big != 1.0 {
            sign[r] = 1.0 / big;
            row.0.iter_mut().for_each(|a| *a /= big);
            row.2 /= big;
        }
        if row.2 < 0.0 {
            sign[r] = -sign[r];
            row.0.iter_mut().for_each(|a| *a = -*a);
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    // Column layout: structural | slack/surplus | artificial.
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n + n_slack + n_art;
    let w = cols + 1;
    let mut a = vec![0.0; n_rows * w];
    let mut basis = vec![0; n_rows];
    let mut unit_col = vec![0; n_rows];
    let mut is_art = vec![false; cols];
    let (mut next_slack, mut next_art) = (n, n + n_slack);
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        a[r * w..r * w + n].copy_from_slice(coeffs);
        a[r * w + cols] = *rhs;
        match rel {
            Relation::Le => {
                a[r * w + next_slack] = 1.0;
                basis[r] = next_slack;
                unit_col[r] = next_slack;
                next_slack += 1;
            }
            Relation::Ge | Relation::Eq => {
                if *rel == Relation::Ge {
                    a[r * w + next_slack] = -1.0;
                    next_slack += 1;
                }
                a[r * w + next_art] = 1.0;
                is_art[next_art] = true;
                basis[r] = next_art;
                unit_col[r] = next_art;
                next_art += 1;
            }
        }
    }
    let mut t = Tableau {
        rows: n_rows,
        cols,
        a,
        basis,
        cost_row: Vec::new(),
    };
    let cap = 10 * (n + n_rows) * (n + n_rows);
    let mut iterations = 0;

    if n_art > 0 {
        let phase1: Vec<f64> = (0..cols)
            .map(|c| if is_art[c] { 1.0 } else { 0.0 })
            .collect();
        t.set_costs(&phase1);
        let all = vec![true; cols];
        t.optimize(&all, &mut iterations, cap)?;
        let infeas = -t.cost_row[cols];
        if infeas > FEAS_TOL {
            return Ok(LpSolution::without_point(
                LpStatus::Infeasible,
                n,
                m_orig,
                iterations,
                format!("phase one ended with infeasibility {infeas:e}"),
            ));
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..n_rows {
            if is_art[t.basis[r]] {
                if let Some(c) = (0..cols).find(|&c| !is_art[c] && t.at(r, c).abs() > PIVOT_TOL) {
                    t.pivot(r, c);
                }
            }
        }
    }

    let mut costs = vec![0.0; cols];
    costs[..n].copy_from_slice(&lp.objective);
    t.set_costs(&costs);
    let allowed: Vec<bool> = is_art.iter().map(|x| !x).collect();
    if !t.optimize(&allowed, &mut iterations, cap)? {
        return Ok(LpSolution::without_point(
            LpStatus::Unbounded,
            n,
            m_orig,
            iterations,
            "objective unbounded below".into(),
        ));
    }

    let mut values = lo.clone();
    for r in 0..n_rows {
        if t.basis[r] < n {
            values[t.basis[r]] += t.rhs(r);
        }
    }
    let duals: Vec<f64> = (0..m_orig)
        .map(|r| {
            let y: f64 = (0..n_rows)
                .map(|k| costs[t.basis[k]] * t.at(k, unit_col[r]))
                .sum();
            sign[r] * y
        })
        .collect();
    let mut sol = LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&values),
        values,
        iterations,
        duals,
        primal_residual: 0.0,
        dual_residual: 0.0,
        diagnostic: None,
    };
    let report = check_solution(lp, &sol);
    sol.primal_residual = report.max_primal;
    sol.dual_residual = report.max_dual.max(report.max_complementarity);
    Ok(sol)
}

/// Independent verification of a claimed optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_primal: f64,
    /// Index of the most violated row; rows past the constraint list refer
    /// to variable bounds, numbered `n_rows + k`.
    pub worst_row: Option<usize>,
    pub max_dual: f64,
    pub max_complementarity: f64,
}

impl ResidualReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_primal <= tol && self.max_dual <= tol && self.max_complementarity <= tol
    }
}

/// Recomputes primal feasibility, dual sign conditions, reduced costs and
/// complementary slackness from the LP data and the claimed solution.
pub fn check_solution(lp: &LinearProgram, sol: &LpSolution) -> ResidualReport {
    let x = &sol.values;
    let n_rows = lp.constraints.len();
    let mut max_primal = 0.0;
    let mut worst_row = None;
    for (r, row) in lp.constraints.iter().enumerate() {
        let v = row.violation(x);
        if v > max_primal {
            max_primal = v;
            worst_row = Some(r);
        }
    }
    for (k, (&(l, h), &v)) in lp.bounds.iter().zip(x).enumerate() {
        let viol = (l - v).max(v - h).max(0.0);
        if viol > max_primal {
            max_primal = viol;
            worst_row = Some(n_rows + k);
        }
    }

    let mut max_dual: f64 = 0.0;
    let mut max_comp: f64 = 0.0;
    if sol.duals.len() == n_rows {
        for (row, &y) in lp.constraints.iter().zip(&sol.duals) {
            let wrong_sign = match row.relation {
                Relation::Le => y.max(0.0),
                Relation::Ge => (-y).max(0.0),
                Relation::Eq => 0.0,
            };
            max_dual = max_dual.max(wrong_sign);
            if row.relation != Relation::Eq {
                max_comp = max_comp.max((y * (row.rhs - row.activity(x))).abs());
            }
        }
        for k in 0..lp.n_vars() {
            let d = lp.objective[k]
                - lp.constraints
                    .iter()
                    .zip(&sol.duals)
                    .map(|(c, y)| y * c.coeffs[k])
                    .sum::<f64>();
            let (l, h) = lp.bounds[k];
            let at_lo = x[k] - l <= FEAS_TOL;
            let at_hi = h - x[k] <= FEAS_TOL;
            let viol = match (at_lo, at_hi) {
                (true, true) => 0.0,
                (true, false) => (-d).max(0.0),
                (false, true) => d.max(0.0),
                (false, false) => d.abs(),
            };
            max_dual = max_dual.max(viol);
        }
    }
    ResidualReport {
        max_primal,
        worst_row,
        max_dual,
        max_complementarity: max_comp,
    }
}
