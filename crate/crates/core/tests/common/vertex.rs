//! Random small LPs and a brute-force vertex enumeration oracle.

use dpq_core::lp::{LinearProgram, Relation};
use dpq_core::simplex::{self, LpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const AGREE_TOL: f64 = 1e-8;
/// Vertex enumeration cost grows as C(rows + n, n); larger draws are redrawn.
const MAX_BASES: f64 = 2.0e5;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// At most 10 variables and 12 rows, the first row caps the sum so every
/// instance is bounded.
pub fn random_lp(rng: &mut impl Rng) -> LinearProgram {
    loop {
        let n = rng.random_range(1..=10);
        let rows = rng.random_range(1..=12);
        if binomial(rows + n, n) > MAX_BASES {
            continue;
        }
        let mut lp = LinearProgram::anonymous(n);
        lp.objective = (0..n)
            .map(|_| (rng.random_range(-5.0..5.0f64) * 4.0).round() / 4.0)
            .collect();
        // Mostly satisfiable rows: rhs is set relative to a random
        // nonnegative point.
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
        lp.add(
            vec![1.0; n],
            Relation::Le,
            rng.random_range(1.0..20.0),
            "cap",
        );
        for r in 1..rows {
            let a: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.25) {
                        0.0
                    } else {
                        rng.random_range(-4.0..4.0)
                    }
                })
                .collect();
            let act: f64 = a.iter().zip(&x0).map(|(a, x)| a * x).sum();
            let shift = if rng.random_bool(0.85) {
                rng.random_range(0.0..2.0)
            } else {
                -rng.random_range(0.5..3.0)
            };
            let (rel, rhs) = match rng.random_range(0..10) {
                0..=4 => (Relation::Le, act + shift),
                5..=8 => (Relation::Ge, act - shift),
                _ => (Relation::Eq, act),
            };
            lp.add(a, rel, rhs, format!("r{r}"));
        }
        return lp;
    }
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

pub fn feasible(lp: &LinearProgram, x: &[f64]) -> bool {
    x.iter().all(|&v| v >= -1e-9)
        && lp
            .constraints
            .iter()
            .all(|c| c.violation(x) <= 1e-9 * (1.0 + c.rhs.abs()))
}

/// Minimum objective over all basic feasible points, or `None` when the
/// feasible set is empty.
pub fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.n_vars();
    // A vertex is the unique solution of n independent tight rows. Rows and
    // nonnegativity bounds are all candidates; equalities need no special
    // treatment because feasibility is checked afterwards.
    let mut tight: Vec<(Vec<f64>, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.rhs))
        .collect();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        tight.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(n);
    combos(tight.len(), n, 0, &mut pick, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&k| tight[k].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&k| tight[k].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(lp, &x) {
                let v = lp.objective_value(&x);
                best = Some(best.map_or(v, |bv: f64| bv.min(v)));
            }
        }
    });
    best
}

fn combos(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in start..n {
        if n - i < k - cur.len() {
            break;
        }
        cur.push(i);
        combos(n, k, i + 1, cur, f);
        cur.pop();
    }
}

#[derive(Debug, Default)]
pub struct OracleSummary {
    pub cases: usize,
    pub optimal: usize,
    pub infeasible: usize,
    pub failures: Vec<String>,
}

pub fn compare_with_oracle(seed: u64, cases: usize) -> OracleSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = OracleSummary {
        cases,
        ..Default::default()
    };
    for case in 0..cases {
        let lp = random_lp(&mut rng);
        let sol = match simplex::solve(&lp) {
            Ok(sol) => sol,
            Err(e) => {
                s.failures.push(format!("case {case}: solver error {e}"));
                continue;
            }
        };
        match (sol.status, vertex_oracle(&lp)) {
            (LpStatus::Optimal, Some(v)) => {
                s.optimal += 1;
                if (sol.objective - v).abs() > AGREE_TOL * (1.0 + v.abs()) {
                    s.failures.push(format!(
                        "case {case}: simplex {} vs vertices {v}",
                        sol.objective
                    ));
                }
                if !feasible(&lp, &sol.values) {
                    s.failures
                        .push(format!("case {case}: simplex point infeasible"));
                }
            }
            (LpStatus::Infeasible, None) => s.infeasible += 1,
            (st, o) => s
                .failures
                .push(format!("case {case}: simplex {st:?} vs oracle {o:?}")),
        }
    }
    s
}

/// Serialized solutions plus raw value bits for `cases` seeded programs.
pub fn solution_bytes(seed: u64, cases: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..cases {
        let lp = random_lp(&mut rng);
        let sol = simplex::solve(&lp).unwrap();
        out.extend(serde_json::to_vec(&sol).unwrap());
        for v in &sol.values {
            out.extend(v.to_bits().to_le_bytes());
        }
    }
    out
}
