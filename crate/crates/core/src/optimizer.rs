//! Grid search over probability bounds (inner loop) and bin layouts (outer
//! loop) for the LP-designed mechanism, plus hyperparameter searches for
//! the RQM and ERM baselines.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit;
use crate::error::{Error, Result};
use crate::lp::{build_lp, ConstraintFamily, LpBounds, LpMode, LpOptions, ProbBounds};
use crate::mechanisms;
use crate::quantizer::{
    exact_mae, exact_mse, BinLayout, InputDistribution, Mechanism, SelectionTable,
};
use crate::simplex;

/// Objective ties closer than this are broken by exact MAE, then grid order.
pub const TIE_TOL: f64 = 1e-10;

/// Law of the scalar input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputLaw {
    Uniform,
    TruncatedGaussian { mu: f64, sigma: f64 },
}

impl InputLaw {
    pub fn distribution(&self, layout: &BinLayout) -> Result<InputDistribution> {
        match *self {
            InputLaw::Uniform => Ok(InputDistribution::uniform(layout)),
            InputLaw::TruncatedGaussian { mu, sigma } => {
                InputDistribution::truncated_gaussian(layout, mu, sigma)
            }
        }
    }
}

/// What the optimizer is asked to solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub c: f64,
    pub m: usize,
    pub eps: f64,
    pub law: InputLaw,
    /// When present, the LP objective uses interval masses estimated from
    /// these samples instead of the exact masses of `law`. Final MAE is
    /// always computed under `law`.
    pub samples: Option<Vec<f64>>,
}

impl Problem {
    pub fn uniform(c: f64, m: usize, eps: f64) -> Self {
        Self {
            c,
            m,
            eps,
            law: InputLaw::Uniform,
            samples: None,
        }
    }

    fn objective_distribution(&self, layout: &BinLayout) -> Result<InputDistribution> {
        match &self.samples {
            Some(xs) => InputDistribution::from_samples(layout, xs),
            None => self.law.distribution(layout),
        }
    }
}

/// A selection table used as the centre of a bound band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum Reference {
    Uniform,
    Erm(f64),
    Rqm(f64),
}

impl Reference {
    pub fn table(&self, layout: &BinLayout) -> Result<SelectionTable> {
        let m = layout.m();
        Ok(match *self {
            Reference::Uniform => SelectionTable::from_fn(m, |j, _| 1.0 / j as f64)?,
            Reference::Erm(g) => mechanisms::erm_selection(layout, g)?.left().clone(),
            Reference::Rqm(q) => mechanisms::rqm_selection(m, q)?.left().clone(),
        })
    }

    fn label(&self) -> String {
        match self {
            Reference::Uniform => "uniform".into(),
            Reference::Erm(g) => format!("erm({g})"),
            Reference::Rqm(q) => format!("rqm({q})"),
        }
    }
}

/// Bound tables searched for each layout.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundOptions {
    /// Bands of relative width `w` around reference tables, followed by
    /// rounds of asymmetric bands `[q (1 - dl), q (1 + dh)]` around the
    /// incumbent solution until no candidate improves the objective.
    Adaptive {
        references: Vec<Reference>,
        widths: Vec<f64>,
        refine_steps: Vec<f64>,
        max_rounds: usize,
    },
    /// Cross product of scalar values for the three entries the reduced
    /// constraint family reads.
    ReducedScalars { upper: Vec<f64>, lower: Vec<f64> },
    /// A fixed list of bound tables.
    Explicit(Vec<LpBounds>),
}

impl BoundOptions {
    pub fn default_adaptive() -> Self {
        let mut references = vec![Reference::Uniform];
        references.extend([0.5, 1.0, 2.0, 4.0, 8.0].map(Reference::Erm));
        references.extend([0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8].map(Reference::Rqm));
        BoundOptions::Adaptive {
            references,
            widths: vec![0.9, 0.7, 0.5, 0.3, 0.2, 0.1],
            refine_steps: vec![0.0, 0.003, 0.01, 0.03, 0.1, 0.3],
            max_rounds: 200,
        }
    }

    /// Log-spaced scalars on `[1e-4, 0.5]`; the upper-bound list also
    /// includes 1.
    pub fn default_reduced(points: usize) -> Self {
        let lower = log_space(1e-4, 0.5, points);
        let mut upper = lower.clone();
        upper.push(1.0);
        BoundOptions::ReducedScalars { upper, lower }
    }
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Placements of the inner bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum BinOptions {
    /// Symmetric layouts whose outermost inner bin sits at `f c` for each
    /// fraction `f`, with the remaining inner bins evenly spaced.
    SymmetricLattice(Vec<f64>),
    /// Explicit inner bin lists (absolute positions, ascending).
    Explicit(Vec<Vec<f64>>),
}

/// Criterion for choosing among per-layout winners.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    ExactMae,
    /// Second moment of the error; used when the mechanism feeds an
    /// averaging consumer such as SGD.
    ExactMse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperGrid {
    /// Absolute range extensions.
    pub delta_options: Vec<f64>,
    pub bin_options: BinOptions,
    pub bounds: BoundOptions,
    pub family: ConstraintFamily,
    pub mode: LpMode,
    pub selection: Selection,
}

/// Default range extensions as multiples of `c`.
pub const DEFAULT_DELTA_FACTORS: [f64; 11] =
    [0.2, 0.5, 1.0, 1.5, 1.7, 2.0, 2.5, 3.0, 3.5, 4.1, 5.0];

impl HyperGrid {
    /// Symmetric mode: every default range extension with the 10-point
    /// symmetric lattice. General mode with `m = 4`: all ordered pairs of
    /// inner bins on `{-0.8, -0.6, ..., 0.8}·c` with a smaller set of range
    /// extensions; other `m` fall back to the symmetric lattice.
    pub fn default_for(c: f64, m: usize, family: ConstraintFamily, mode: LpMode) -> Self {
        let bounds = match family {
            ConstraintFamily::Full => BoundOptions::default_adaptive(),
            ConstraintFamily::Reduced => BoundOptions::default_reduced(12),
        };
        let symmetric = BinOptions::SymmetricLattice((1..=10).map(|k| k as f64 / 10.0).collect());
        let (delta_factors, bin_options): (Vec<f64>, BinOptions) = match mode {
            LpMode::General if m == 4 => {
                let lattice: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.2 * c).collect();
                let mut pairs = Vec::new();
                for (a, &x) in lattice.iter().enumerate() {
                    for &y in &lattice[a + 1..] {
                        pairs.push(vec![x, y]);
                    }
                }
                (vec![1.0, 1.7, 2.0, 3.0, 4.1], BinOptions::Explicit(pairs))
            }
            _ => (DEFAULT_DELTA_FACTORS.to_vec(), symmetric),
        };
        Self {
            delta_options: delta_factors.iter().map(|f| f * c).collect(),
            bin_options,
            bounds,
            family,
            mode,
            selection: Selection::ExactMae,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_options.is_empty() {
            return Err(Error::Config("no range extension options".into()));
        }
        let empty_bins = match &self.bin_options {
            BinOptions::SymmetricLattice(v) => v.is_empty(),
            BinOptions::Explicit(v) => v.is_empty(),
        };
        if empty_bins {
            return Err(Error::Config("no bin placement options".into()));
        }
        let empty_bounds = match &self.bounds {
            BoundOptions::Adaptive {
                references, widths, ..
            } => references.is_empty() || widths.is_empty(),
            BoundOptions::ReducedScalars { upper, lower } => upper.is_empty() || lower.is_empty(),
            BoundOptions::Explicit(v) => v.is_empty(),
        };
        if empty_bounds {
            return Err(Error::Config("no probability bound options".into()));
        }
        Ok(())
    }

    /// All valid layouts of the grid, in grid order. Placements that do not
    /// give strictly increasing bins are skipped.
    pub fn layouts(&self, c: f64, m: usize) -> Vec<BinLayout> {
        let mut out = Vec::new();
        for &delta in &self.delta_options {
            match &self.bin_options {
                BinOptions::SymmetricLattice(fracs) => {
                    for &f in fracs {
                        if let Ok(l) = symmetric_lattice_layout(c, delta, m, f * c) {
                            out.push(l);
                        }
                    }
                }
                BinOptions::Explicit(inner) => {
                    for bins in inner {
                        if bins.len() + 2 != m {
                            continue;
                        }
                        let mut full = Vec::with_capacity(m);
                        full.push(-c - delta);
                        full.extend(bins);
                        full.push(c + delta);
                        if let Ok(l) = BinLayout::new(c, delta, full) {
                            out.push(l);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Symmetric layout whose largest inner bin is `b`: the `m - 2` inner bins
/// are evenly spaced on `[-b, b]`.
pub fn symmetric_lattice_layout(c: f64, delta: f64, m: usize, b: f64) -> Result<BinLayout> {
    if m < 2 {
        return Err(Error::InvalidLayout(format!("need m >= 2, got {m}")));
    }
    let k = m - 2;
    let mut bins = Vec::with_capacity(m);
    bins.push(-c - delta);
    if k == 1 {
        bins.push(0.0);
    } else {
        for l in 0..k {
            bins.push(-b + 2.0 * b * l as f64 / (k - 1) as f64);
        }
    }
    bins.push(c + delta);
    // Snap the mirrored half exactly so the symmetry check is bit-exact.
    for l in 0..m / 2 {
        bins[m - 1 - l] = -bins[l];
    }
    if m % 2 == 1 {
        bins[m / 2] = 0.0;
    }
    BinLayout::new(c, delta, bins)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub layout_index: usize,
    pub delta: f64,
    pub bins: String,
    pub bounds: String,
    pub feasible: bool,
    pub objective: Option<f64>,
    pub surrogate_mae: Option<f64>,
    pub exact_mae: Option<f64>,
    pub eps_audit: Option<f64>,
    pub lps_solved: usize,
    pub lps_infeasible: usize,
    /// LPs abandoned because the solver broke down numerically.
    pub lps_failed: usize,
}

#[derive(Clone, Debug)]
pub struct OptmResult {
    pub mechanism: Mechanism,
    pub objective: f64,
    pub surrogate_mae: f64,
    pub exact_mae: f64,
    pub eps_audit: f64,
    pub lps_solved: usize,
    pub lps_infeasible: usize,
    pub lps_failed: usize,
    pub leaderboard: Vec<LeaderboardRow>,
}

#[derive(Clone, Debug)]
struct Candidate {
    index: usize,
    label: String,
    objective: f64,
    surrogate_mae: f64,
    exact_mae: f64,
    eps_audit: f64,
    mechanism: Mechanism,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    if a.objective < b.objective - TIE_TOL {
        return true;
    }
    if a.objective > b.objective + TIE_TOL {
        return false;
    }
    if a.exact_mae != b.exact_mae {
        return a.exact_mae < b.exact_mae;
    }
    a.index < b.index
}

fn pick_best(cands: impl IntoIterator<Item = Candidate>) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for c in cands {
        best = match best {
            Some(b) if !better(&c, &b) => Some(b),
            _ => Some(c),
        };
    }
    best
}

enum Outcome {
    Feasible(Candidate),
    Infeasible,
    Failed,
}

impl Outcome {
    fn candidate(self) -> Option<Candidate> {
        match self {
            Outcome::Feasible(c) => Some(c),
            _ => None,
        }
    }
}

struct Evaluator<'a> {
    layout: &'a BinLayout,
    objective_dist: InputDistribution,
    eval_dist: InputDistribution,
    options: LpOptions,
}

impl Evaluator<'_> {
    fn evaluate(&self, index: usize, label: String, bounds: &LpBounds) -> Result<Outcome> {
        Ok(match self.try_evaluate(index, label, bounds) {
            Ok(Some(c)) => Outcome::Feasible(c),
            Ok(None) => Outcome::Infeasible,
            Err(Error::IterationLimit(_) | Error::NumericalFailure(_)) => Outcome::Failed,
            Err(e) => return Err(e),
        })
    }

    fn try_evaluate(
        &self,
        index: usize,
        label: String,
        bounds: &LpBounds,
    ) -> Result<Option<Candidate>> {
        let built = match build_lp(
            self.layout,
            bounds,
            Some(&self.objective_dist),
            self.options,
        ) {
            Ok(b) => b,
            Err(Error::InfeasibleBounds(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let sol = simplex::solve(&built.program)?;
        if !sol.is_optimal() {
            return Ok(None);
        }
        let mechanism = match built.to_mechanism(&sol) {
            Ok(m) => m,
            Err(Error::InvalidSelection(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let (ok, report) = audit::verify_mechanism(&mechanism, self.options.eps);
        if !ok {
            return Ok(None);
        }
        let mae = exact_mae(&mechanism, &self.eval_dist)?;
        Ok(Some(Candidate {
            index,
            label,
            objective: sol.objective,
            surrogate_mae: built.surrogate_mae(sol.objective),
            exact_mae: mae,
            eps_audit: report.eps_emp,
            mechanism,
        }))
    }
}

fn bands(
    left: &SelectionTable,
    right: &SelectionTable,
    down: f64,
    up: f64,
    mode: LpMode,
) -> Result<LpBounds> {
    Ok(match mode {
        LpMode::Symmetric => LpBounds::shared(ProbBounds::band(left, down, up)?),
        LpMode::General => LpBounds::pair(
            ProbBounds::band(left, down, up)?,
            ProbBounds::band(right, down, up)?,
        ),
    })
}

/// Bound-table search for a single layout: every grid point is an LP whose
/// optimum is converted to a mechanism and audited; the feasible point with
/// the smallest objective wins.
pub fn optm_inner(
    layout: &BinLayout,
    problem: &Problem,
    bounds: &BoundOptions,
    family: ConstraintFamily,
    mode: LpMode,
) -> Result<OptmResult> {
    let evaluator = Evaluator {
        layout,
        objective_dist: problem.objective_distribution(layout)?,
        eval_dist: problem.law.distribution(layout)?,
        options: LpOptions::new(problem.eps, family, mode),
    };
    let mut rows: Vec<LeaderboardRow> = Vec::new();
    let mut solved = 0usize;
    let mut infeasible = 0usize;
    let mut failed = 0usize;
    let mut record = |results: &[(usize, String, Outcome)], rows: &mut Vec<LeaderboardRow>| {
        for (_, label, outcome) in results {
            solved += 1;
            let is_failed = matches!(outcome, Outcome::Failed);
            let cand = match outcome {
                Outcome::Feasible(c) => Some(c),
                _ => None,
            };
            if is_failed {
                failed += 1;
            } else if cand.is_none() {
                infeasible += 1;
            }
            rows.push(LeaderboardRow {
                layout_index: 0,
                delta: layout.delta(),
                bins: format_bins(layout.bins()),
                bounds: label.clone(),
                feasible: cand.is_some(),
                objective: cand.as_ref().map(|c| c.objective),
                surrogate_mae: cand.as_ref().map(|c| c.surrogate_mae),
                exact_mae: cand.as_ref().map(|c| c.exact_mae),
                eps_audit: cand.as_ref().map(|c| c.eps_audit),
                lps_solved: 1,
                lps_infeasible: usize::from(cand.is_none() && !is_failed),
                lps_failed: usize::from(is_failed),
            });
        }
    };
    let run =
        |points: Vec<(String, LpBounds)>, offset: usize| -> Result<Vec<(usize, String, Outcome)>> {
            points
                .into_par_iter()
                .enumerate()
                .map(|(k, (label, b))| {
                    Ok((
                        offset + k,
                        label.clone(),
                        evaluator.evaluate(offset + k, label, &b)?,
                    ))
                })
                .collect()
        };

    let best = match bounds {
        BoundOptions::Explicit(list) => {
            let pts = list
                .iter()
                .enumerate()
                .map(|(k, b)| (format!("explicit#{k}"), b.clone()))
                .collect();
            let res = run(pts, 0)?;
            record(&res, &mut rows);
            pick_best(res.into_iter().filter_map(|r| r.2.candidate()))
        }
        BoundOptions::ReducedScalars { upper, lower } => {
            let (s, t) = match (layout.first_in_range(), layout.last_in_range()) {
                (Some(s), Some(t)) => (s, t),
                _ => return Err(Error::NoFeasibleMechanism(problem.eps)),
            };
            let jl = layout.interval_index(-layout.c())?;
            let jc = layout.interval_index(layout.c())?;
            let mut pts = Vec::new();
            for &u in upper {
                for &o1 in lower {
                    for &o2 in lower {
                        let b = ProbBounds::reduced(layout.m(), (jl, u), (t - 1, o1), (jc, o2))?;
                        pts.push((
                            format!("u{}={u};o{}={o1};o{}={o2}", s - 1, t - 1, jc),
                            LpBounds::shared(b),
                        ));
                    }
                }
            }
            let res = run(pts, 0)?;
            record(&res, &mut rows);
            pick_best(res.into_iter().filter_map(|r| r.2.candidate()))
        }
        BoundOptions::Adaptive {
            references,
            widths,
            refine_steps,
            max_rounds,
        } => {
            let tables: Vec<(String, SelectionTable)> = references
                .iter()
                .map(|r| Ok((r.label(), r.table(layout)?)))
                .collect::<Result<_>>()?;
            let mut pts = Vec::new();
            for (a, (ll, lt)) in tables.iter().enumerate() {
                let rights: Vec<usize> = match mode {
                    LpMode::Symmetric => vec![a],
                    LpMode::General => (0..tables.len()).collect(),
                };
                for b in rights {
                    let (rl, rt) = &tables[b];
                    for &w in widths {
                        let label = match mode {
                            LpMode::Symmetric => format!("{ll}+-{w}"),
                            LpMode::General => format!("{ll}|{rl}+-{w}"),
                        };
                        pts.push((label, bands(lt, rt, w, w, mode)?));
                    }
                }
            }
            let mut next = pts.len();
            let res = run(pts, 0)?;
            record(&res, &mut rows);
            let mut incumbent = pick_best(res.into_iter().filter_map(|r| r.2.candidate()));
            for round in 0..*max_rounds {
                let Some(inc) = incumbent.as_ref() else { break };
                let sel = inc.mechanism.selection();
                let (lt, rt) = (sel.left().clone(), sel.right().clone());
                let mut pts = Vec::new();
                for &dl in refine_steps {
                    for &dh in refine_steps {
                        if dl == 0.0 && dh == 0.0 {
                            continue;
                        }
                        pts.push((
                            format!("refine{round}:-{dl}/+{dh}"),
                            bands(&lt, &rt, dl, dh, mode)?,
                        ));
                    }
                }
                let n_pts = pts.len();
                let res = run(pts, next)?;
                next += n_pts;
                record(&res, &mut rows);
                match pick_best(res.into_iter().filter_map(|r| r.2.candidate())) {
                    Some(c) if c.objective < inc.objective - TIE_TOL => incumbent = Some(c),
                    _ => break,
                }
            }
            incumbent
        }
    };
    let best = best.ok_or(Error::NoFeasibleMechanism(problem.eps))?;
    let mechanism = best
        .mechanism
        .with_metadata("bounds", best.label.clone())
        .with_metadata("eps_audit", best.eps_audit);
    Ok(OptmResult {
        mechanism,
        objective: best.objective,
        surrogate_mae: best.surrogate_mae,
        exact_mae: best.exact_mae,
        eps_audit: best.eps_audit,
        lps_solved: solved,
        lps_infeasible: infeasible,
        lps_failed: failed,
        leaderboard: rows,
    })
}

/// Searches every layout of the grid and returns the per-layout winner with
/// the smallest exact MAE (or MSE, per `hyper.selection`); ties go to the
/// earlier layout. The leaderboard has one row per layout.
pub fn optm_outer(problem: &Problem, hyper: &HyperGrid) -> Result<OptmResult> {
    hyper.validate()?;
    let layouts = hyper.layouts(problem.c, problem.m);
    if layouts.is_empty() {
        return Err(Error::Config("the grid produced no valid layouts".into()));
    }
    let results: Vec<(usize, BinLayout, Result<OptmResult>)> = layouts
        .into_par_iter()
        .enumerate()
        .map(|(k, layout)| {
            let r = optm_inner(&layout, problem, &hyper.bounds, hyper.family, hyper.mode);
            (k, layout, r)
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut best: Option<(usize, f64, OptmResult)> = None;
    let (mut solved, mut infeasible, mut failed) = (0, 0, 0);
    for (k, layout, r) in results {
        match r {
            Ok(res) => {
                solved += res.lps_solved;
                infeasible += res.lps_infeasible;
                failed += res.lps_failed;
                rows.push(LeaderboardRow {
                    layout_index: k,
                    delta: layout.delta(),
                    bins: format_bins(layout.bins()),
                    bounds: res
                        .mechanism
                        .metadata
                        .get("bounds")
                        .and_then(|v| v.as_str())
                        .unwrap_or("")
                        .to_string(),
                    feasible: true,
                    objective: Some(res.objective),
                    surrogate_mae: Some(res.surrogate_mae),
                    exact_mae: Some(res.exact_mae),
                    eps_audit: Some(res.eps_audit),
                    lps_solved: res.lps_solved,
                    lps_infeasible: res.lps_infeasible,
                    lps_failed: res.lps_failed,
                });
                let score = match hyper.selection {
                    Selection::ExactMae => res.exact_mae,
                    Selection::ExactMse => exact_mse(
                        &res.mechanism,
                        &problem.law.distribution(res.mechanism.layout())?,
                    )?,
                };
                if best.as_ref().is_none_or(|(_, b, _)| score < *b) {
                    best = Some((k, score, res));
                }
            }
            Err(Error::NoFeasibleMechanism(_)) => {
                rows.push(LeaderboardRow {
                    layout_index: k,
                    delta: layout.delta(),
                    bins: format_bins(layout.bins()),
                    bounds: String::new(),
                    feasible: false,
                    objective: None,
                    surrogate_mae: None,
                    exact_mae: None,
                    eps_audit: None,
                    lps_solved: 0,
                    lps_infeasible: 0,
                    lps_failed: 0,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let (k, _, mut res) = best.ok_or(Error::NoFeasibleMechanism(problem.eps))?;
    res.mechanism = res.mechanism.with_metadata("layout_index", k);
    res.lps_solved = solved;
    res.lps_infeasible = infeasible;
    res.lps_failed = failed;
    res.leaderboard = rows;
    Ok(res)
}

pub fn format_bins(bins: &[f64]) -> String {
    // Rounded to 1e-9 so lattice arithmetic noise does not leak into labels.
    let parts: Vec<String> = bins
        .iter()
        .map(|b| format!("{}", (b * 1e9).round() / 1e9 + 0.0))
        .collect();
    format!("[{}]", parts.join(" "))
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| crate::io::fmt_eps(x)).unwrap_or_default()
}

/// Writes the leaderboard as CSV (atomically).
pub fn write_leaderboard(path: &Path, rows: &[LeaderboardRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "layout_index",
        "delta",
        "bins",
        "bounds",
        "feasible",
        "objective",
        "surrogate_mae",
        "exact_mae",
        "eps_audit",
        "lps_solved",
        "lps_infeasible",
        "lps_failed",
    ])?;
    for r in rows {
        w.write_record([
            r.layout_index.to_string(),
            r.delta.to_string(),
            r.bins.clone(),
            r.bounds.clone(),
            r.feasible.to_string(),
            opt_str(r.objective),
            opt_str(r.surrogate_mae),
            opt_str(r.exact_mae),
            opt_str(r.eps_audit),
            r.lps_solved.to_string(),
            r.lps_infeasible.to_string(),
            r.lps_failed.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    crate::io::atomic_write(path, &bytes)
}

/// Which baseline construction a family search explores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Rqm,
    Erm,
}

/// Hyperparameter grid of a baseline family. RQM is defined on uniform
/// bins only; ERM additionally searches the symmetric inner-bin lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineGrid {
    pub delta_factors: Vec<f64>,
    /// Outermost inner bin as a fraction of `c`; `None` means uniform bins.
    pub bin_fractions: Option<Vec<f64>>,
    /// `q` values for RQM or `gamma` values for ERM.
    pub params: Vec<f64>,
}

impl BaselineGrid {
    pub fn default_for(kind: Baseline) -> Self {
        match kind {
            Baseline::Rqm => Self {
                delta_factors: vec![0.5, 1.0, 1.5, 1.6, 1.7, 2.0, 2.5, 3.0],
                bin_fractions: None,
                params: (1..=99).map(|k| k as f64 * 0.01).collect(),
            },
            Baseline::Erm => Self {
                delta_factors: DEFAULT_DELTA_FACTORS.to_vec(),
                bin_fractions: Some((1..=10).map(|k| k as f64 / 10.0).collect()),
                params: log_space(1e-3, 10.0, 81),
            },
        }
    }

    fn layouts(&self, c: f64, m: usize) -> Result<Vec<BinLayout>> {
        let mut out = Vec::new();
        for &d in &self.delta_factors {
            match &self.bin_fractions {
                None => out.push(mechanisms::uniform_bins(m, c, d * c)?),
                Some(fr) => {
                    for &f in fr {
                        if let Ok(l) = symmetric_lattice_layout(c, d * c, m, f * c) {
                            out.push(l);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub mechanism: Mechanism,
    pub delta: f64,
    pub param: f64,
    pub exact_mae: f64,
    pub eps_audit: f64,
    pub evaluated: usize,
}

/// Smallest-MAE member of a baseline family whose audited loss meets `eps`.
pub fn baseline_search(
    kind: Baseline,
    problem: &Problem,
    grid: &BaselineGrid,
) -> Result<BaselineResult> {
    let layouts = grid.layouts(problem.c, problem.m)?;
    let points: Vec<(&BinLayout, f64)> = layouts
        .iter()
        .flat_map(|l| grid.params.iter().map(move |&p| (l, p)))
        .collect();
    let evaluated = points.len();
    let results: Vec<Option<BaselineResult>> = points
        .par_iter()
        .map(|&(layout, p)| -> Result<Option<BaselineResult>> {
            let mech = match kind {
                Baseline::Rqm => mechanisms::rqm(problem.m, problem.c, layout.delta(), p)?,
                Baseline::Erm => mechanisms::erm(layout.clone(), p)?,
            };
            let (ok, report) = audit::verify_mechanism(&mech, problem.eps);
            if !ok {
                return Ok(None);
            }
            let dist = problem.law.distribution(mech.layout())?;
            let mae = exact_mae(&mech, &dist)?;
            Ok(Some(BaselineResult {
                mechanism: mech,
                delta: layout.delta(),
                param: p,
                exact_mae: mae,
                eps_audit: report.eps_emp,
                evaluated,
            }))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<BaselineResult> = None;
    for r in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| r.exact_mae < b.exact_mae) {
            best = Some(r);
        }
    }
    best.ok_or(Error::NoFeasibleMechanism(problem.eps))
}
