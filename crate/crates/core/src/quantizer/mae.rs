use rand::Rng;

use super::distribution::{InputDistribution, InputKind};
use super::mechanism::Mechanism;
use super::quadrature;
use crate::error::Result;

/// `E|M(x) - x|` for a fixed input.
pub fn conditional_mae(mech: &Mechanism, x: f64) -> Result<f64> {
    let p = mech.output_distribution(x)?;
    Ok(p.iter()
        .zip(mech.layout().bins())
        .map(|(pi, b)| pi * (b - x).abs())
        .sum())
}

/// `E(M(x) - x)^2` for a fixed input (the output variance, as `M` is unbiased).
pub fn conditional_mse(mech: &Mechanism, x: f64) -> Result<f64> {
    let p = mech.output_distribution(x)?;
    Ok(p.iter()
        .zip(mech.layout().bins())
        .map(|(pi, b)| pi * (b - x) * (b - x))
        .sum())
}

fn interval_loss(mech: &Mechanism, j: usize, x: f64, squared: bool) -> f64 {
    let p = mech.interval_distribution(j, x);
    p.iter()
        .zip(mech.layout().bins())
        .map(|(pi, b)| {
            if squared {
                pi * (b - x) * (b - x)
            } else {
                pi * (b - x).abs()
            }
        })
        .sum()
}

fn expected_loss(mech: &Mechanism, dist: &InputDistribution, squared: bool) -> Result<f64> {
    dist.check_aligned(mech.layout())?;
    let mut total = 0.0;
    for (j, lo, hi) in mech.layout().domain_intervals() {
        // Inside one interval the loss is a polynomial of degree <= 3 in x,
        // so Simpson is exact whenever the density is constant there.
        total += match dist.kind() {
            InputKind::TruncatedGaussian { .. } => quadrature::integrate(lo, hi, |x| {
                interval_loss(mech, j, x, squared) * dist.density(x)
            }),
            _ => {
                let mass = dist.masses()[j - 1];
                if mass == 0.0 {
                    0.0
                } else {
                    mass * quadrature::simpson(lo, hi, |x| interval_loss(mech, j, x, squared))
                        / (hi - lo)
                }
            }
        };
    }
    Ok(total)
}

/// Mean absolute error `E|M(X) - X|` under the given input law.
pub fn exact_mae(mech: &Mechanism, dist: &InputDistribution) -> Result<f64> {
    expected_loss(mech, dist, false)
}

/// Mean squared error `E(M(X) - X)^2` under the given input law.
pub fn exact_mse(mech: &Mechanism, dist: &InputDistribution) -> Result<f64> {
    expected_loss(mech, dist, true)
}

/// `zeta_j = sum_{i <= j} q^l_j(i) (B_j - B_i)`: expected distance from the
/// left end of interval `j` to the chosen left bin.
pub fn zeta_left(mech: &Mechanism, j: usize) -> f64 {
    let b = mech.layout().bins();
    (1..=j)
        .map(|i| mech.selection().pick_left(j, i) * (b[j - 1] - b[i - 1]))
        .sum()
}

/// Mirror of [`zeta_left`]: expected distance from `B_{j+1}` to the chosen
/// right bin.
pub fn zeta_right(mech: &Mechanism, j: usize) -> f64 {
    let b = mech.layout().bins();
    (j + 1..=mech.m())
        .map(|r| mech.selection().pick_right(j, r) * (b[r - 1] - b[j]))
        .sum()
}

/// Per-interval bound `(zeta_right + (B_{j+1} - B_j) + zeta_left) / 2` on
/// the conditional MAE, averaged over the interval masses.
pub fn mae_upper_bound(mech: &Mechanism, dist: &InputDistribution) -> Result<f64> {
    dist.check_aligned(mech.layout())?;
    let b = mech.layout().bins();
    Ok(mech
        .layout()
        .domain_intervals()
        .iter()
        .map(|&(j, _, _)| {
            0.5 * (zeta_right(mech, j) + (b[j] - b[j - 1]) + zeta_left(mech, j))
                * dist.masses()[j - 1]
        })
        .sum())
}

/// Monte Carlo estimate of the MAE with its standard error.
pub fn monte_carlo_mae<R: Rng + ?Sized>(
    mech: &Mechanism,
    dist: &InputDistribution,
    n: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    dist.check_aligned(mech.layout())?;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let x = dist.sample(rng);
        let e = (mech.sample(x, rng)? - x).abs();
        s += e;
        s2 += e * e;
    }
    let nf = n as f64;
    let mean = s / nf;
    let var = (s2 / nf - mean * mean).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}
