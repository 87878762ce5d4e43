use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

/// Which selection table a decision variable belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// The single shared table of symmetric mode.
    Shared,
    Left,
    Right,
}

/// Decision variable `q_j(i)` of a given family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarName {
    pub family: Family,
    pub j: usize,
    pub i: usize,
}

impl std::fmt::Display for VarName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.family {
            Family::Shared => "q",
            Family::Left => "ql",
            Family::Right => "qr",
        };
        write!(f, "{tag}_{}({})", self.j, self.i)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
    pub label: String,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimisation LP with dense rows and per-variable bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub var_names: Vec<VarName>,
    pub objective: Vec<f64>,
    /// Constant added to the objective that the solver never sees.
    pub objective_constant: f64,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn new(var_names: Vec<VarName>) -> Self {
        let n = var_names.len();
        Self {
            var_names,
            objective: vec![0.0; n],
            objective_constant: 0.0,
            constraints: Vec::new(),
            bounds: vec![(0.0, 1.0); n],
        }
    }

    /// An LP over anonymous variables `x0..x{n-1}` with `x >= 0`, used by
    /// tests and for solving arbitrary problems.
    pub fn anonymous(n: usize) -> Self {
        let names = (0..n)
            .map(|k| VarName {
                family: Family::Shared,
                j: 0,
                i: k,
            })
            .collect();
        let mut lp = Self::new(names);
        lp.bounds = vec![(0.0, f64::INFINITY); n];
        lp
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn add(
        &mut self,
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
        label: impl Into<String>,
    ) {
        debug_assert_eq!(coeffs.len(), self.n_vars());
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
            label: label.into(),
        });
    }

    /// Intersects the bounds of variable `k` with `[lo, hi]`.
    pub fn tighten_bounds(&mut self, k: usize, lo: f64, hi: f64) {
        let b = &mut self.bounds[k];
        b.0 = b.0.max(lo);
        b.1 = b.1.min(hi);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.objective.len() != n || self.bounds.len() != n {
            return Err(Error::Contract(
                "objective and bounds must have one entry per variable".into(),
            ));
        }
        for (r, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(Error::Contract(format!(
                    "row {r} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::Contract(format!(
                    "row {r} ({}) has non-finite data",
                    row.label
                )));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Contract(
                "objective has non-finite coefficients".into(),
            ));
        }
        Ok(())
    }

    /// Plain-text listing used for debugging and golden files.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "lp vars={} rows={}",
            self.n_vars(),
            self.constraints.len()
        );
        for (k, (name, (lo, hi))) in self.var_names.iter().zip(&self.bounds).enumerate() {
            let _ = writeln!(s, "var x{k} {name} [{lo}, {hi}]");
        }
        let _ = writeln!(
            s,
            "min {} + {}",
            sparse_terms(&self.objective),
            self.objective_constant
        );
        for (r, row) in self.constraints.iter().enumerate() {
            let _ = writeln!(
                s,
                "row {r} {}: {} {} {}",
                row.label,
                sparse_terms(&row.coeffs),
                row.relation.symbol(),
                row.rhs
            );
        }
        s
    }

    /// Export in CPLEX LP text format for cross-checking with external
    /// solvers.
    pub fn to_cplex_lp(&self) -> String {
        let mut s = String::new();
        for (k, name) in self.var_names.iter().enumerate() {
            let _ = writeln!(s, "\\ x{k} = {name}");
        }
        let _ = writeln!(s, "Minimize\n obj: {}", lp_terms(&self.objective));
        let _ = writeln!(s, "Subject To");
        for (r, row) in self.constraints.iter().enumerate() {
            let _ = writeln!(
                s,
                " r{r}: {} {} {}",
                lp_terms(&row.coeffs),
                row.relation.symbol(),
                row.rhs
            );
        }
        let _ = writeln!(s, "Bounds");
        for (k, (lo, hi)) in self.bounds.iter().enumerate() {
            if hi.is_infinite() {
                let _ = writeln!(s, " x{k} >= {lo}");
            } else {
                let _ = writeln!(s, " {lo} <= x{k} <= {hi}");
            }
        }
        s.push_str("End\n");
        s
    }
}

fn sparse_terms(coeffs: &[f64]) -> String {
    let terms: Vec<String> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(k, a)| format!("{a}*x{k}"))
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" ")
    }
}

fn lp_terms(coeffs: &[f64]) -> String {
    let mut s = String::new();
    for (k, a) in coeffs.iter().enumerate().filter(|(_, a)| **a != 0.0) {
        let sign = if *a < 0.0 { "-" } else { "+" };
        let _ = write!(s, "{sign} {} x{k} ", a.abs());
    }
    if s.is_empty() {
        "0 x0".into()
    } else {
        s.trim_end().to_string()
    }
}
