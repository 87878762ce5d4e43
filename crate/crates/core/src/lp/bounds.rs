use crate::error::{Error, Result};
use crate::quantizer::selection::tri_offset;
use crate::quantizer::SelectionTable;

/// Lower and upper bound tables `o_j(i) <= q_j(i) <= u_j(i)` for one
/// selection family.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbBounds {
    m: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ProbBounds {
    pub fn from_fn(m: usize, f: impl Fn(usize, usize) -> (f64, f64)) -> Result<Self> {
        let mut lower = Vec::with_capacity(SelectionTable::packed_len(m));
        let mut upper = Vec::with_capacity(SelectionTable::packed_len(m));
        for j in 1..m {
            for i in 1..=j {
                let (o, u) = f(j, i);
                lower.push(o);
                upper.push(u);
            }
        }
        let b = Self { m, lower, upper };
        b.validate_entries()?;
        Ok(b)
    }

    /// The same scalar bounds for every entry.
    pub fn constant(m: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::from_fn(m, |_, _| (lo, hi))
    }

    /// No information: `0 <= q <= 1`.
    pub fn trivial(m: usize) -> Self {
        Self::constant(m, 0.0, 1.0).expect("unit box is valid")
    }

    /// Relative band `[q (1 - down), min(1, q (1 + up))]` around a reference
    /// table.
    pub fn band(reference: &SelectionTable, down: f64, up: f64) -> Result<Self> {
        Self::from_fn(reference.m(), |j, i| {
            let q = reference.get(j, i);
            (q * (1.0 - down), (q * (1.0 + up)).min(1.0))
        })
    }

    /// Bounds that constrain only the three entries the reduced constraint
    /// family reads: `u_{s-1}(s-1)`, `o_{t-1}(1)` and `o_{jc}(1)` where `jc`
    /// is the interval containing `c`.
    pub fn reduced(
        m: usize,
        anchor_upper: (usize, f64),
        lim_lower: (usize, f64),
        edge_lower: (usize, f64),
    ) -> Result<Self> {
        Self::from_fn(m, |j, i| {
            let mut lo = 0.0;
            let mut hi = 1.0;
            if j == anchor_upper.0 && i == j {
                hi = anchor_upper.1;
            }
            if i == 1 && j == lim_lower.0 {
                lo = lim_lower.1;
            }
            if i == 1 && j == edge_lower.0 {
                lo = lo.max(edge_lower.1);
            }
            (lo, hi)
        })
    }

    fn validate_entries(&self) -> Result<()> {
        for j in 1..self.m {
            for i in 1..=j {
                let (o, u) = (self.lower(j, i), self.upper(j, i));
                if !(o.is_finite() && u.is_finite() && 0.0 <= o && o <= u && u <= 1.0) {
                    return Err(Error::InfeasibleBounds(format!(
                        "entry ({j},{i}) has bounds [{o}, {u}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Rejects rows whose bounds admit no probability vector.
    pub fn check_rows(&self, rows: impl IntoIterator<Item = usize>) -> Result<()> {
        for j in rows {
            let lo: f64 = (1..=j).map(|i| self.lower(j, i)).sum();
            let hi: f64 = (1..=j).map(|i| self.upper(j, i)).sum();
            if lo > 1.0 + 1e-12 {
                return Err(Error::InfeasibleBounds(format!(
                    "row {j}: lower bounds sum to {lo} > 1"
                )));
            }
            if hi < 1.0 - 1e-12 {
                return Err(Error::InfeasibleBounds(format!(
                    "row {j}: upper bounds sum to {hi} < 1"
                )));
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn lower(&self, j: usize, i: usize) -> f64 {
        self.lower[tri_offset(j, i)]
    }

    #[inline]
    pub fn upper(&self, j: usize, i: usize) -> f64 {
        self.upper[tri_offset(j, i)]
    }
}

/// Bounds for both families. Symmetric mode reads only `left`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpBounds {
    pub left: ProbBounds,
    pub right: Option<ProbBounds>,
}

impl LpBounds {
    pub fn shared(b: ProbBounds) -> Self {
        Self {
            left: b,
            right: None,
        }
    }

    pub fn pair(left: ProbBounds, right: ProbBounds) -> Self {
        Self {
            left,
            right: Some(right),
        }
    }

    pub fn right(&self) -> &ProbBounds {
        self.right.as_ref().unwrap_or(&self.left)
    }
}
