use serde::{Deserialize, Serialize};

use super::bounds::{LpBounds, ProbBounds};
use super::program::{Family, LinearProgram, Relation, VarName};
use crate::error::{Error, Result};
use crate::quantizer::selection::tri_offset;
use crate::quantizer::{
    BinLayout, InputDistribution, InputKind, Mechanism, SelectionDistribution, SelectionTable,
};
use crate::simplex::LpSolution;

/// Which linearised privacy constraint set to emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    /// Pairwise max/min candidate constraints with box bounds on every
    /// used entry; O(m^3) rows.
    Full,
    /// Monotonicity-based set that pins the extrema to four anchor values.
    Reduced,
}

/// One shared selection table (symmetric bins) or independent left and
/// right tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpMode {
    Symmetric,
    General,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpOptions {
    pub eps: f64,
    pub family: ConstraintFamily,
    pub mode: LpMode,
    /// Under the reduced family, also bound every used entry by `o <= q <= u`.
    pub reduced_box_bounds: bool,
}

impl LpOptions {
    pub fn new(eps: f64, family: ConstraintFamily, mode: LpMode) -> Self {
        Self {
            eps,
            family,
            mode,
            reduced_box_bounds: false,
        }
    }
}

/// Maps `(family, j, i)` to LP column indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarMap {
    m: usize,
    general: bool,
}

impl VarMap {
    pub fn new(m: usize, mode: LpMode) -> Self {
        Self {
            m,
            general: mode == LpMode::General,
        }
    }

    pub fn per_family(&self) -> usize {
        SelectionTable::packed_len(self.m)
    }

    pub fn n_vars(&self) -> usize {
        if self.general {
            2 * self.per_family()
        } else {
            self.per_family()
        }
    }

    #[inline]
    pub fn left(&self, j: usize, i: usize) -> usize {
        tri_offset(j, i)
    }

    #[inline]
    pub fn right(&self, j: usize, i: usize) -> usize {
        if self.general {
            self.per_family() + tri_offset(j, i)
        } else {
            tri_offset(j, i)
        }
    }

    pub fn names(&self) -> Vec<VarName> {
        let fams: &[Family] = if self.general {
            &[Family::Left, Family::Right]
        } else {
            &[Family::Shared]
        };
        let mut out = Vec::with_capacity(self.n_vars());
        for &family in fams {
            for j in 1..self.m {
                for i in 1..=j {
                    out.push(VarName { family, j, i });
                }
            }
        }
        out
    }
}

/// Sparse linear expression over LP columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    pub terms: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn var(k: usize) -> Self {
        Self {
            terms: vec![(k, 1.0)],
        }
    }

    pub fn push(&mut self, k: usize, a: f64) {
        if a != 0.0 {
            self.terms.push((k, a));
        }
    }

    pub fn scaled_into(&self, dense: &mut [f64], s: f64) {
        for &(k, a) in &self.terms {
            dense[k] += s * a;
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        self.scaled_into(&mut d, 1.0);
        d
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, a)| a * x[k]).sum()
    }
}

/// `zeta_n = sum_{i <= n} q_n(i) (B_n - B_i)` over the left (or shared)
/// family; the zero form for `n = 1` or `n = m`.
pub fn zeta_form(vars: &VarMap, layout: &BinLayout, n: usize) -> LinearForm {
    let mut f = LinearForm::default();
    if n < layout.m() {
        for i in 1..=n {
            f.push(vars.left(n, i), layout.bin(n) - layout.bin(i));
        }
    }
    f
}

/// Right-family counterpart for interval `j`:
/// `sum_{i = j+1..m} q^r_{m-j}(m-i+1) (B_i - B_{j+1})`.
pub fn zeta_right_form(vars: &VarMap, layout: &BinLayout, j: usize) -> LinearForm {
    let m = layout.m();
    let mut f = LinearForm::default();
    for i in j + 1..=m {
        f.push(
            vars.right(m - j, m - i + 1),
            layout.bin(i) - layout.bin(j + 1),
        );
    }
    f
}

/// Surrogate objective with its dropped constant and the factor that turns
/// `objective + constant` into an upper bound on the MAE.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub form: LinearForm,
    pub constant: f64,
    pub mae_scale: f64,
}

/// Uniform-input objective for symmetric bins: every clipped interval of
/// width `w` contributes `w (zeta_{n-1} + zeta_{m-n+1})` with `n = j + 1`.
pub fn objective_uniform(vars: &VarMap, layout: &BinLayout) -> Objective {
    let m = layout.m();
    let mut form = LinearForm::default();
    let mut constant = 0.0;
    for (j, lo, hi) in layout.domain_intervals() {
        let w = hi - lo;
        for (k, a) in zeta_form(vars, layout, j)
            .terms
            .into_iter()
            .chain(zeta_form(vars, layout, m - j).terms)
        {
            form.push(k, w * a);
        }
        constant += w * (layout.bin(j + 1) - layout.bin(j));
    }
    Objective {
        form: merge(form),
        constant,
        mae_scale: 0.25 / layout.c(),
    }
}

/// Objective for an arbitrary input law: interval `j` contributes
/// `mass_j (zeta^r_{m-j} + zeta^l_j)`.
pub fn objective_general(
    vars: &VarMap,
    layout: &BinLayout,
    dist: &InputDistribution,
) -> Result<Objective> {
    dist.check_aligned(layout)?;
    let mut form = LinearForm::default();
    let mut constant = 0.0;
    for (j, _, _) in layout.domain_intervals() {
        let mass = dist.masses()[j - 1];
        if mass == 0.0 {
            continue;
        }
        for (k, a) in zeta_right_form(vars, layout, j)
            .terms
            .into_iter()
            .chain(zeta_form(vars, layout, j).terms)
        {
            form.push(k, mass * a);
        }
        constant += mass * (layout.bin(j + 1) - layout.bin(j));
    }
    Ok(Objective {
        form: merge(form),
        constant,
        mae_scale: 0.5,
    })
}

fn merge(f: LinearForm) -> LinearForm {
    let mut terms = f.terms;
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (k, a) in terms {
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 += a,
            _ => out.push((k, a)),
        }
    }
    LinearForm { terms: out }
}

/// Where `p(x, i)` is evaluated to bound its extremes over `[-c, c]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnchorKind {
    /// `p(x, i)` at a point where an inter-bin segment starts: `-c` or a bin
    /// strictly inside `(-c, c)`.
    Start,
    /// Left limit at a bin in `(-c, c]`, or the value at `c`.
    End,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anchor {
    pub x: f64,
    /// Interval whose affine formula applies at this anchor.
    pub j: usize,
    pub kind: AnchorKind,
    /// Bin index when the anchor sits at a bin, for labelling.
    pub bin: Option<usize>,
}

impl Anchor {
    fn label(&self) -> String {
        match (self.kind, self.bin) {
            (AnchorKind::Start, Some(k)) => format!("p(B{k})"),
            (AnchorKind::End, Some(k)) => format!("lim(B{k})"),
            (AnchorKind::Start, None) => "p(-c)".into(),
            (AnchorKind::End, None) => "p(c)".into(),
        }
    }
}

/// Every point at which an extreme of some `p(x, i)` can occur when the
/// tables are column monotone.
pub fn anchors(layout: &BinLayout) -> Vec<Anchor> {
    let c = layout.c();
    let m = layout.m();
    let jc_lo = layout.interval_index(-c).expect("-c is in range");
    let jc_hi = layout.interval_index(c).expect("c is in range");
    let mut out = vec![Anchor {
        x: -c,
        j: jc_lo,
        kind: AnchorKind::Start,
        bin: None,
    }];
    for k in 1..=m {
        let b = layout.bin(k);
        if b > -c && b < c {
            out.push(Anchor {
                x: b,
                j: k,
                kind: AnchorKind::Start,
                bin: Some(k),
            });
        }
    }
    for k in 2..=m {
        let b = layout.bin(k);
        if b > -c && b <= c {
            out.push(Anchor {
                x: b,
                j: k - 1,
                kind: AnchorKind::End,
                bin: Some(k),
            });
        }
    }
    if (1..m).any(|k| layout.bin(k) == c) {
        out.push(Anchor {
            x: c,
            j: jc_hi,
            kind: AnchorKind::Start,
            bin: None,
        });
    }
    out.push(Anchor {
        x: c,
        j: jc_hi,
        kind: AnchorKind::End,
        bin: None,
    });
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Upper,
    Lower,
}

/// `p(x, i)` at the anchor with the frozen factor (`q^l_j(i)` when
/// `i <= j`, else `q^r_{m-j}(m+1-i)`) replaced by its upper or lower bound.
fn anchored_form(
    vars: &VarMap,
    layout: &BinLayout,
    bounds: &LpBounds,
    a: &Anchor,
    i: usize,
    side: Side,
) -> LinearForm {
    let m = layout.m();
    let (j, x) = (a.j, a.x);
    let bi = layout.bin(i);
    let mut f = LinearForm::default();
    if i <= j {
        let factor = match side {
            Side::Upper => bounds.left.upper(j, i),
            Side::Lower => bounds.left.lower(j, i),
        };
        for r in j + 1..=m {
            let br = layout.bin(r);
            f.push(vars.right(m - j, m - r + 1), factor * (br - x) / (br - bi));
        }
    } else {
        let factor = match side {
            Side::Upper => bounds.right().upper(m - j, m + 1 - i),
            Side::Lower => bounds.right().lower(m - j, m + 1 - i),
        };
        for l in 1..=j {
            let bl = layout.bin(l);
            f.push(vars.left(j, l), factor * (x - bl) / (bi - bl));
        }
    }
    f
}

/// Upper bound `z(x, i)` on `p(x, i)` at a value anchor.
pub fn z_upper(
    vars: &VarMap,
    layout: &BinLayout,
    bounds: &LpBounds,
    anchor: &Anchor,
    i: usize,
) -> LinearForm {
    anchored_form(vars, layout, bounds, anchor, i, Side::Upper)
}

/// Lower bound `w(x, i)` on `p(x, i)` (or its left limit) at an anchor.
pub fn w_lower(
    vars: &VarMap,
    layout: &BinLayout,
    bounds: &LpBounds,
    anchor: &Anchor,
    i: usize,
) -> LinearForm {
    anchored_form(vars, layout, bounds, anchor, i, Side::Lower)
}

/// Rows of each family that some input in `[-c, c]` reads.
pub fn used_rows(layout: &BinLayout) -> (Vec<usize>, Vec<usize>) {
    let m = layout.m();
    let left: Vec<usize> = layout.active_rows().collect();
    let mut right: Vec<usize> = left.iter().map(|j| m - j).collect();
    right.sort_unstable();
    (left, right)
}

fn add_pair_rows(
    lp: &mut LinearProgram,
    e_eps: f64,
    i: usize,
    maxes: &[(String, LinearForm)],
    mins: &[(String, LinearForm)],
) {
    let n = lp.n_vars();
    for (mx_label, mx) in maxes {
        for (mn_label, mn) in mins {
            let mut row = mx.to_dense(n);
            mn.scaled_into(&mut row, -e_eps);
            lp.add(
                row,
                Relation::Le,
                0.0,
                format!("priv_b{i}_{mx_label}_vs_{mn_label}"),
            );
        }
    }
}

/// Pairwise privacy constraints: for every bin, every candidate maximum of
/// `p(., i)` is at most `e^eps` times every candidate minimum. In symmetric
/// mode only the half that is not implied by mirror symmetry is emitted.
pub fn constraints_full(
    lp: &mut LinearProgram,
    vars: &VarMap,
    layout: &BinLayout,
    bounds: &LpBounds,
    eps: f64,
    mode: LpMode,
) {
    let m = layout.m();
    let c = layout.c();
    let e_eps = eps.exp();
    let anchors = anchors(layout);
    for i in 1..=m {
        let bi = layout.bin(i);
        let in_range = layout.bin_in_range(i);
        if mode == LpMode::Symmetric && bi > c {
            continue;
        }
        let mut maxes: Vec<(String, LinearForm)> = Vec::new();
        let mut mins: Vec<(String, LinearForm)> = Vec::new();
        if in_range {
            if i < m {
                maxes.push((format!("ql{i}({i})"), LinearForm::var(vars.left(i, i))));
            }
            if bi > -c && i > 1 {
                let k = m + 1 - i;
                maxes.push((format!("qr{k}({k})"), LinearForm::var(vars.right(k, k))));
            }
        }
        for a in &anchors {
            // p(., i) decreases across interval j when i <= j and increases
            // otherwise, so segment starts and ends swap roles.
            let decreasing = i <= a.j;
            let is_max = (a.kind == AnchorKind::Start) == decreasing;
            if is_max {
                if !in_range {
                    maxes.push((
                        format!("z_{}", a.label()),
                        z_upper(vars, layout, bounds, a, i),
                    ));
                }
            } else {
                if mode == LpMode::Symmetric && in_range && !decreasing {
                    continue;
                }
                mins.push((
                    format!("w_{}", a.label()),
                    w_lower(vars, layout, bounds, a, i),
                ));
            }
        }
        add_pair_rows(lp, e_eps, i, &maxes, &mins);
    }
}

/// The reduced constraint family for symmetric bins.
pub fn constraints_reduced(
    lp: &mut LinearProgram,
    vars: &VarMap,
    layout: &BinLayout,
    bounds: &LpBounds,
    eps: f64,
) -> Result<()> {
    let m = layout.m();
    let c = layout.c();
    let n = lp.n_vars();
    let (s, t) = match (layout.first_in_range(), layout.last_in_range()) {
        (Some(s), Some(t)) if s >= 2 && t < m => (s, t),
        _ => {
            return Err(Error::Contract(
                "reduced constraints need bins inside [-c, c] and delta > 0".into(),
            ))
        }
    };
    let unit = |k: usize, a: f64, k2: usize, a2: f64| {
        let mut r = vec![0.0; n];
        r[k] += a;
        r[k2] += a2;
        r
    };
    for j in 1..m - 1 {
        for i in 1..=j {
            lp.add(
                unit(vars.left(j + 1, i), 1.0, vars.left(j, i), -1.0),
                Relation::Le,
                0.0,
                format!("col_mono_{j}_{i}"),
            );
        }
    }
    for j in 2..m {
        for i in 1..j {
            lp.add(
                unit(vars.left(j, i), 1.0, vars.left(j, i + 1), -1.0),
                Relation::Le,
                0.0,
                format!("row_mono_{j}_{i}"),
            );
        }
    }
    for i in 1..m - 1 {
        if layout.bin_in_range(i) {
            lp.add(
                unit(vars.left(i + 1, i + 1), 1.0, vars.left(i, i), -1.0),
                Relation::Le,
                0.0,
                format!("diag_mono_{i}"),
            );
        }
    }

    let all = anchors(layout);
    let start_lo = all
        .iter()
        .find(|a| a.kind == AnchorKind::Start && a.x == -c)
        .copied()
        .expect("anchor at -c");
    let end_hi = all
        .iter()
        .find(|a| a.kind == AnchorKind::End && a.x == c && a.bin.is_none())
        .copied()
        .expect("anchor at c");
    let lim_t = all
        .iter()
        .find(|a| a.kind == AnchorKind::End && a.bin == Some(t))
        .copied()
        .expect("limit at B_t");
    let maxes = vec![
        (
            format!("z_p(-c)_b{}", s - 1),
            z_upper(vars, layout, bounds, &start_lo, s - 1),
        ),
        (format!("q{s}({s})"), LinearForm::var(vars.left(s, s))),
    ];
    let mins = vec![
        (
            format!("w_lim(B{t})"),
            w_lower(vars, layout, bounds, &lim_t, 1),
        ),
        (
            "w_p(c)".to_string(),
            w_lower(vars, layout, bounds, &end_hi, 1),
        ),
    ];
    let e_eps = eps.exp();
    for (ml, mx) in &maxes {
        for (nl, mn) in &mins {
            let mut row = mx.to_dense(n);
            mn.scaled_into(&mut row, -e_eps);
            lp.add(row, Relation::Le, 0.0, format!("priv_{ml}_vs_{nl}"));
        }
    }

    for k in s..=t {
        for r in k + 2..=m {
            let col = m - r + 1;
            let (d_hi, d_lo) = (
                layout.bin(r) - layout.bin(k + 1),
                layout.bin(r) - layout.bin(k),
            );
            if m - k + 1 <= m - 1 {
                lp.add(
                    unit(
                        vars.left(m - k, col),
                        1.0 / d_lo,
                        vars.left(m - k + 1, col),
                        -1.0 / d_hi,
                    ),
                    Relation::Le,
                    0.0,
                    format!("ratio_a_{k}_{r}"),
                );
            }
            if m - k >= 2 && m - k - 1 >= col {
                lp.add(
                    unit(
                        vars.left(m - k - 1, col),
                        1.0 / d_lo,
                        vars.left(m - k, col),
                        -1.0 / d_hi,
                    ),
                    Relation::Le,
                    0.0,
                    format!("ratio_b_{k}_{r}"),
                );
            }
        }
    }

    // The frozen factors of the anchor forms must respect their bounds.
    let b = &bounds.left;
    let jl = start_lo.j;
    lp.tighten_bounds(vars.left(jl, s - 1), b.lower(jl, s - 1), b.upper(jl, s - 1));
    for a in [lim_t, end_hi] {
        lp.tighten_bounds(vars.left(a.j, 1), b.lower(a.j, 1), b.upper(a.j, 1));
    }
    Ok(())
}

/// A built program together with what is needed to read its solution back.
#[derive(Clone, Debug)]
pub struct MechanismLp {
    pub program: LinearProgram,
    pub vars: VarMap,
    pub layout: BinLayout,
    pub options: LpOptions,
    /// Multiply `objective + constant` by this to bound the MAE.
    pub mae_scale: f64,
}

impl MechanismLp {
    /// Upper bound on the MAE implied by an LP objective value.
    pub fn surrogate_mae(&self, objective: f64) -> f64 {
        self.mae_scale * (objective + self.program.objective_constant)
    }

    pub fn to_mechanism(&self, sol: &LpSolution) -> Result<Mechanism> {
        if !sol.is_optimal() {
            return Err(Error::Contract(
                "cannot build a mechanism from a non-optimal LP result".into(),
            ));
        }
        let m = self.layout.m();
        let per = self.vars.per_family();
        let left = SelectionTable::from_packed_cleaned(m, sol.values[..per].to_vec())?;
        let selection = if self.vars.general {
            let right = SelectionTable::from_packed_cleaned(m, sol.values[per..].to_vec())?;
            SelectionDistribution::asymmetric(left, right)?
        } else {
            SelectionDistribution::symmetric(left)
        };
        Ok(Mechanism::new(self.layout.clone(), selection)?
            .with_metadata("construction", "optm")
            .with_metadata("eps_target", self.options.eps))
    }
}

/// Assembles objective, privacy constraints, row-sum equalities and bounds.
pub fn build_lp(
    layout: &BinLayout,
    bounds: &LpBounds,
    dist: Option<&InputDistribution>,
    options: LpOptions,
) -> Result<MechanismLp> {
    let m = layout.m();
    if !(options.eps > 0.0 && options.eps.is_finite()) {
        return Err(Error::Contract(format!(
            "eps must be positive and finite, got {}",
            options.eps
        )));
    }
    if !(layout.delta() > 0.0) {
        return Err(Error::Contract(
            "mechanism design needs a positive range extension".into(),
        ));
    }
    if bounds.left.m() != m || bounds.right().m() != m {
        return Err(Error::Contract(
            "bound tables do not match the layout".into(),
        ));
    }
    match options.mode {
        LpMode::Symmetric => {
            if !layout.is_symmetric() {
                return Err(Error::Contract(
                    "symmetric mode needs symmetric bins".into(),
                ));
            }
        }
        LpMode::General => {
            if options.family == ConstraintFamily::Reduced {
                return Err(Error::Contract(
                    "the reduced constraint family is defined for symmetric mode only".into(),
                ));
            }
        }
    }
    let vars = VarMap::new(m, options.mode);
    let (left_rows, right_rows) = used_rows(layout);
    let box_bounds = options.family == ConstraintFamily::Full || options.reduced_box_bounds;
    if box_bounds {
        bounds.left.check_rows(left_rows.iter().copied())?;
        bounds.right().check_rows(right_rows.iter().copied())?;
    }

    let mut lp = LinearProgram::new(vars.names());
    let objective = match (options.mode, dist) {
        (LpMode::Symmetric, None) => objective_uniform(&vars, layout),
        (LpMode::Symmetric, Some(d)) if d.kind() == InputKind::Uniform => {
            d.check_aligned(layout)?;
            objective_uniform(&vars, layout)
        }
        (_, Some(d)) => objective_general(&vars, layout, d)?,
        (LpMode::General, None) => {
            objective_general(&vars, layout, &InputDistribution::uniform(layout))?
        }
    };
    lp.objective = objective.form.to_dense(vars.n_vars());
    lp.objective_constant = objective.constant;

    let n = vars.n_vars();
    let families: Vec<(&str, bool)> = if vars.general {
        vec![("l", false), ("r", true)]
    } else {
        vec![("q", false)]
    };
    for &(tag, right) in &families {
        for j in 1..m {
            let mut row = vec![0.0; n];
            for i in 1..=j {
                row[if right {
                    vars.right(j, i)
                } else {
                    vars.left(j, i)
                }] = 1.0;
            }
            lp.add(row, Relation::Eq, 1.0, format!("sum_{tag}{j}"));
        }
    }

    match options.family {
        ConstraintFamily::Full => {
            constraints_full(&mut lp, &vars, layout, bounds, options.eps, options.mode);
            add_monotone_and_box(&mut lp, &vars, bounds, &left_rows, &right_rows);
        }
        ConstraintFamily::Reduced => {
            constraints_reduced(&mut lp, &vars, layout, bounds, options.eps)?;
            if options.reduced_box_bounds {
                add_monotone_and_box(&mut lp, &vars, bounds, &left_rows, &right_rows);
            }
        }
    }
    Ok(MechanismLp {
        program: lp,
        vars,
        layout: layout.clone(),
        options,
        mae_scale: objective.mae_scale,
    })
}

fn add_monotone_and_box(
    lp: &mut LinearProgram,
    vars: &VarMap,
    bounds: &LpBounds,
    left_rows: &[usize],
    right_rows: &[usize],
) {
    let n = lp.n_vars();
    let emit = |lp: &mut LinearProgram,
                rows: &[usize],
                b: &ProbBounds,
                idx: &dyn Fn(usize, usize) -> usize,
                tag: &str| {
        for &j in rows {
            for i in 1..=j {
                lp.tighten_bounds(idx(j, i), b.lower(j, i), b.upper(j, i));
                if i < j {
                    let mut row = vec![0.0; n];
                    row[idx(j, i)] += 1.0;
                    row[idx(i, i)] -= 1.0;
                    lp.add(row, Relation::Le, 0.0, format!("mono_{tag}{j}_{i}"));
                }
            }
        }
    };
    if vars.general {
        emit(lp, left_rows, &bounds.left, &|j, i| vars.left(j, i), "l");
        emit(
            lp,
            right_rows,
            bounds.right(),
            &|j, i| vars.right(j, i),
            "r",
        );
    } else {
        let mut rows: Vec<usize> = left_rows.iter().chain(right_rows).copied().collect();
        rows.sort_unstable();
        rows.dedup();
        emit(lp, &rows, &bounds.left, &|j, i| vars.left(j, i), "q");
    }
}
