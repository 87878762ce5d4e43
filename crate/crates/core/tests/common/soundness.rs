//! Soundness drivers for the linearised LP: random layouts, bound tables
//! and privacy levels. Each feasible instance is probed at several vertices
//! (random objectives) and at convex combinations of those vertices, and
//! every point is converted to a mechanism and audited.

use dpq_core::audit::{empirical_epsilon, verify_mechanism};
use dpq_core::lp::{
    build_lp, ConstraintFamily, LpBounds, LpMode, LpOptions, MechanismLp, ProbBounds,
};
use dpq_core::optimizer::{symmetric_lattice_layout, Reference};
use dpq_core::quantizer::{
    BinLayout, InputDistribution, Mechanism, SelectionDistribution, SelectionTable,
};
use dpq_core::simplex::{self, LpSolution};
use dpq_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBJECTIVES: usize = 3;
const MIXES: usize = 4;

#[derive(Default, Debug)]
pub struct Tally {
    pub instances: usize,
    pub feasible: usize,
    pub points: usize,
    pub numerical: usize,
    pub violations: Vec<String>,
}

fn random_symmetric_layout(rng: &mut impl Rng, m: usize) -> BinLayout {
    let delta = rng.random_range(0.2..3.0);
    let b = rng.random_range(0.3..1.3f64).min(0.999 * (1.0 + delta));
    symmetric_lattice_layout(1.0, delta, m, b).unwrap()
}

fn random_general_layout(rng: &mut impl Rng, m: usize) -> BinLayout {
    let delta = rng.random_range(0.2..3.0);
    let edge = 1.0 + delta;
    loop {
        let mut inner: Vec<f64> = (0..m - 2)
            .map(|_| {
                rng.random_range(-1.2..1.2f64)
                    .clamp(-0.99 * edge, 0.99 * edge)
            })
            .collect();
        inner.sort_by(f64::total_cmp);
        if inner.windows(2).all(|w| w[1] - w[0] > 1e-3) {
            let mut bins = vec![-edge];
            bins.extend(inner);
            bins.push(edge);
            if let Ok(l) = BinLayout::new(1.0, delta, bins) {
                return l;
            }
        }
    }
}

fn random_reference(rng: &mut impl Rng) -> Reference {
    match rng.random_range(0..3) {
        0 => Reference::Uniform,
        1 => Reference::Erm(rng.random_range(0.3..8.0)),
        _ => Reference::Rqm(rng.random_range(0.02..0.9)),
    }
}

fn band(rng: &mut impl Rng, layout: &BinLayout) -> ProbBounds {
    let t = random_reference(rng).table(layout).unwrap();
    ProbBounds::band(
        &t,
        rng.random_range(0.05..0.95),
        rng.random_range(0.05..0.95),
    )
    .unwrap()
}

/// A reference mechanism on the layout, narrow bands around its tables and
/// a target a little above its audited loss. Such instances are usually
/// feasible, which keeps the audited sample large.
fn anchored(
    rng: &mut impl Rng,
    layout: &BinLayout,
    general: bool,
) -> Option<(LpBounds, f64, SelectionTable, SelectionTable)> {
    let left = random_reference(rng).table(layout).ok()?;
    let right = if general {
        random_reference(rng).table(layout).ok()?
    } else {
        left.clone()
    };
    let sel = if general {
        SelectionDistribution::asymmetric(left.clone(), right.clone()).ok()?
    } else {
        SelectionDistribution::symmetric(left.clone())
    };
    let eps_ref = empirical_epsilon(&Mechanism::new(layout.clone(), sel).ok()?).eps_emp;
    if !eps_ref.is_finite() {
        return None;
    }
    let eps = eps_ref * rng.random_range(1.02..1.5) + rng.random_range(0.0..0.3);
    if eps > 10.0 {
        return None;
    }
    let w = rng.random_range(0.01..0.3);
    let bounds = if general {
        LpBounds::pair(
            ProbBounds::band(&left, w, w).ok()?,
            ProbBounds::band(&right, w, w).ok()?,
        )
    } else {
        LpBounds::shared(ProbBounds::band(&left, w, w).ok()?)
    };
    Some((bounds, eps, left, right))
}

/// Solves with a few random objectives and returns the optimal vertices.
fn vertices(built: &MechanismLp, rng: &mut impl Rng, tally: &mut Tally) -> Vec<LpSolution> {
    let mut out = Vec::new();
    let mut objectives = vec![built.program.objective.clone()];
    for _ in 0..OBJECTIVES {
        objectives.push(
            (0..built.program.n_vars())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        );
    }
    for obj in objectives {
        let mut lp = built.program.clone();
        lp.objective = obj;
        match simplex::solve(&lp) {
            Ok(sol) if sol.is_optimal() => out.push(sol),
            Ok(_) => return Vec::new(),
            Err(Error::IterationLimit(_) | Error::NumericalFailure(_)) => tally.numerical += 1,
            Err(e) => panic!("solver error: {e}"),
        }
    }
    out
}

fn check_point(built: &MechanismLp, sol: &LpSolution, tag: &str, tally: &mut Tally) {
    tally.points += 1;
    let mech = match built.to_mechanism(sol) {
        Ok(m) => m,
        Err(e) => {
            tally.violations.push(format!(
                "{tag}: LP point is not a selection distribution: {e}"
            ));
            return;
        }
    };
    let (ok, report) = verify_mechanism(&mech, built.options.eps);
    if !ok {
        tally.violations.push(format!(
            "{tag}: eps_emp {} > {} (bins {:?})",
            report.eps_emp,
            built.options.eps,
            built.layout.bins()
        ));
    }
}

fn probe(built: &MechanismLp, rng: &mut impl Rng, tag: &str, tally: &mut Tally) {
    let verts = vertices(built, rng, tally);
    if verts.is_empty() {
        return;
    }
    tally.feasible += 1;
    for (k, v) in verts.iter().enumerate() {
        check_point(built, v, &format!("{tag} vertex {k}"), tally);
    }
    for k in 0..MIXES {
        let w: Vec<f64> = verts.iter().map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let mut mixed = verts[0].clone();
        for (x, vals) in mixed.values.iter_mut().enumerate() {
            *vals = verts
                .iter()
                .zip(&w)
                .map(|(v, wk)| v.values[x] * wk / total)
                .sum();
        }
        check_point(built, &mixed, &format!("{tag} mix {k}"), tally);
    }
}

fn build(layout: &BinLayout, bounds: &LpBounds, opts: LpOptions) -> Option<MechanismLp> {
    match build_lp(
        layout,
        bounds,
        Some(&InputDistribution::uniform(layout)),
        opts,
    ) {
        Ok(b) => Some(b),
        Err(Error::InfeasibleBounds(_)) => None,
        Err(e) => panic!("build failed: {e}"),
    }
}

pub fn report(name: &str, t: &Tally) {
    println!(
        "{name}: {} instances, {} feasible, {} points audited, {} numerical failures, {} violations",
        t.instances,
        t.feasible,
        t.points,
        t.numerical,
        t.violations.len()
    );
    for v in t.violations.iter().take(10) {
        println!("  {v}");
    }
}

/// Symmetric layouts, full constraint family.
pub fn full_symmetric(seed: u64, instances: usize) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for k in 0..instances {
        let m = rng.random_range(3..=8);
        let layout = random_symmetric_layout(&mut rng, m);
        let (bounds, eps) = match (k % 2 == 0)
            .then(|| anchored(&mut rng, &layout, false))
            .flatten()
        {
            Some((b, e, _, _)) => (b, e),
            None => {
                let b = if rng.random_bool(0.2) {
                    ProbBounds::trivial(m)
                } else {
                    band(&mut rng, &layout)
                };
                (LpBounds::shared(b), rng.random_range(0.3..3.0))
            }
        };
        t.instances += 1;
        let opts = LpOptions::new(eps, ConstraintFamily::Full, LpMode::Symmetric);
        if let Some(built) = build(&layout, &bounds, opts) {
            probe(&built, &mut rng, &format!("sym#{k}"), &mut t);
        }
    }
    t
}

/// Arbitrary layouts, full constraint family, separate left and right
/// tables.
pub fn full_general(seed: u64, instances: usize) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    for k in 0..instances {
        let m = rng.random_range(3..=7);
        let layout = random_general_layout(&mut rng, m);
        let (bounds, eps) = match (k % 2 == 0)
            .then(|| anchored(&mut rng, &layout, true))
            .flatten()
        {
            Some((b, e, _, _)) => (b, e),
            None if rng.random_bool(0.2) => (
                LpBounds::shared(ProbBounds::trivial(m)),
                rng.random_range(0.3..3.0),
            ),
            None => (
                LpBounds::pair(band(&mut rng, &layout), band(&mut rng, &layout)),
                rng.random_range(0.3..3.0),
            ),
        };
        t.instances += 1;
        let opts = LpOptions::new(eps, ConstraintFamily::Full, LpMode::General);
        if let Some(built) = build(&layout, &bounds, opts) {
            probe(&built, &mut rng, &format!("gen#{k}"), &mut t);
        }
    }
    t
}

/// Reduced constraint family. It is feasible only in a narrow regime, so
/// even instances take their target and bounds from an audited reference
/// table and odd ones are drawn broadly.
pub fn reduced(seed: u64, instances: usize) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::default();
    let mut k = 0;
    while t.instances < instances {
        k += 1;
        let m = rng.random_range(4..=8);
        let layout = if rng.random_bool(0.5) {
            let delta = rng.random_range(0.3..1.5);
            symmetric_lattice_layout(1.0, delta, m, rng.random_range(0.6..0.97)).unwrap()
        } else {
            random_symmetric_layout(&mut rng, m)
        };
        let (Some(s), Some(t_idx)) = (layout.first_in_range(), layout.last_in_range()) else {
            continue;
        };
        if s < 2 || t_idx >= m {
            continue;
        }
        let jl = layout.interval_index(-1.0).unwrap();
        let jc = layout.interval_index(1.0).unwrap();
        let (eps, u, o1, o2) = match (k % 2 == 0)
            .then(|| anchored(&mut rng, &layout, false))
            .flatten()
        {
            Some((_, eps, table, _)) => {
                let w = rng.random_range(0.01..0.3);
                (
                    eps,
                    (table.get(jl, jl) * (1.0 + w)).min(1.0),
                    table.get(t_idx - 1, 1) * (1.0 - w),
                    table.get(jc, 1) * (1.0 - w),
                )
            }
            None => (
                rng.random_range(0.5..9.0),
                rng.random_range(0.2..1.0),
                10f64.powf(rng.random_range(-4.0..-0.5)),
                10f64.powf(rng.random_range(-4.0..-0.5)),
            ),
        };
        let Ok(bounds) = ProbBounds::reduced(m, (jl, u), (t_idx - 1, o1), (jc, o2)) else {
            continue;
        };
        t.instances += 1;
        let mut opts = LpOptions::new(eps, ConstraintFamily::Reduced, LpMode::Symmetric);
        opts.reduced_box_bounds = rng.random_bool(0.3);
        if let Some(built) = build(&layout, &LpBounds::shared(bounds), opts) {
            probe(&built, &mut rng, &format!("red#{k}"), &mut t);
        }
    }
    t
}
