use crate::error::{Error, Result};

/// Tolerance on row sums of a selection table.
pub const ROW_SUM_TOL: f64 = 1e-10;

/// Lower-triangular table `q_j(i)` for rows `j = 1..m-1` and columns
/// `i = 1..j`. Indices are 1-based; storage is packed row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionTable {
    m: usize,
    probs: Vec<f64>,
}

#[inline]
pub(crate) fn tri_offset(j: usize, i: usize) -> usize {
    j * (j - 1) / 2 + (i - 1)
}

impl SelectionTable {
    /// Number of packed entries for a table serving `m` bins.
    pub fn packed_len(m: usize) -> usize {
        (m - 1) * m / 2
    }

    /// Validating constructor from explicit rows (row `j` has `j` entries).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len() + 1;
        let mut probs = Vec::with_capacity(Self::packed_len(m));
        for (idx, row) in rows.iter().enumerate() {
            if row.len() != idx + 1 {
                return Err(Error::InvalidSelection(format!(
                    "row {} has {} entries, expected {}",
                    idx + 1,
                    row.len(),
                    idx + 1
                )));
            }
            probs.extend_from_slice(row);
        }
        let t = Self { m, probs };
        t.validate()?;
        Ok(t)
    }

    /// Builds the table from `f(j, i)` and validates it.
    pub fn from_fn(m: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let t = Self::from_fn_unchecked(m, f);
        t.validate()?;
        Ok(t)
    }

    pub(crate) fn from_fn_unchecked(m: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut probs = Vec::with_capacity(Self::packed_len(m));
        for j in 1..m {
            for i in 1..=j {
                probs.push(f(j, i));
            }
        }
        Self { m, probs }
    }

    /// Wraps a packed vector (as produced by an LP solution) and validates it.
    pub fn from_packed(m: usize, probs: Vec<f64>) -> Result<Self> {
        if m < 2 || probs.len() != Self::packed_len(m) {
            return Err(Error::InvalidSelection(format!(
                "packed table of length {} does not fit m = {m}",
                probs.len()
            )));
        }
        let t = Self { m, probs };
        t.validate()?;
        Ok(t)
    }

    /// Clamps tiny negative round-off to zero and renormalises each row.
    /// Used on LP outputs, which satisfy the row constraints only up to the
    /// solver tolerance.
    pub fn from_packed_cleaned(m: usize, mut probs: Vec<f64>) -> Result<Self> {
        if m < 2 || probs.len() != Self::packed_len(m) {
            return Err(Error::InvalidSelection(format!(
                "packed table of length {} does not fit m = {m}",
                probs.len()
            )));
        }
        for j in 1..m {
            let row = &mut probs[tri_offset(j, 1)..=tri_offset(j, j)];
            for p in row.iter_mut() {
                if *p < 0.0 && *p > -1e-7 {
                    *p = 0.0;
                }
            }
            let s: f64 = row.iter().sum();
            if s > 0.0 && (s - 1.0).abs() < 1e-6 {
                row.iter_mut().for_each(|p| *p /= s);
            }
        }
        Self::from_packed(m, probs)
    }

    pub fn validate(&self) -> Result<()> {
        for j in 1..self.m {
            let row = self.row(j);
            if let Some(pos) = row
                .iter()
                .position(|p| !(p.is_finite() && (0.0..=1.0).contains(p)))
            {
                return Err(Error::InvalidSelection(format!(
                    "q_{j}({}) = {} is not a probability",
                    pos + 1,
                    row[pos]
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidSelection(format!("row {j} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `q_j(i)`, 1-based.
    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        debug_assert!(1 <= i && i <= j && j < self.m);
        self.probs[tri_offset(j, i)]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.probs[tri_offset(j, 1)..=tri_offset(j, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (1..self.m).map(|j| self.row(j).to_vec()).collect()
    }

    pub fn packed(&self) -> &[f64] {
        &self.probs
    }

    /// Column monotonicity `q_i(i) >= q_j(i)` for all `j >= i`.
    pub fn is_column_monotone(&self, tol: f64) -> bool {
        (1..self.m).all(|i| (i..self.m).all(|j| self.get(i, i) + tol >= self.get(j, i)))
    }
}

/// Left and right selection tables. In symmetric mode the right table is the
/// left one.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionDistribution {
    left: SelectionTable,
    right: Option<SelectionTable>,
}

impl SelectionDistribution {
    pub fn symmetric(table: SelectionTable) -> Self {
        Self {
            left: table,
            right: None,
        }
    }

    pub fn asymmetric(left: SelectionTable, right: SelectionTable) -> Result<Self> {
        if left.m() != right.m() {
            return Err(Error::InvalidSelection(format!(
                "left table serves m = {} but right table serves m = {}",
                left.m(),
                right.m()
            )));
        }
        Ok(Self {
            left,
            right: Some(right),
        })
    }

    pub fn m(&self) -> usize {
        self.left.m()
    }

    pub fn is_symmetric(&self) -> bool {
        self.right.is_none()
    }

    pub fn left(&self) -> &SelectionTable {
        &self.left
    }

    pub fn right(&self) -> &SelectionTable {
        self.right.as_ref().unwrap_or(&self.left)
    }

    /// `Pr{L_j = l} = q^l_j(l)` for `1 <= l <= j`.
    #[inline]
    pub fn pick_left(&self, j: usize, l: usize) -> f64 {
        self.left.get(j, l)
    }

    /// `Pr{R_j = r} = q^r_{m-j}(m+1-r)` for `j+1 <= r <= m`.
    #[inline]
    pub fn pick_right(&self, j: usize, r: usize) -> f64 {
        let m = self.m();
        self.right().get(m - j, m + 1 - r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_and_indexing() {
        let rows = vec![vec![1.0], vec![0.25, 0.75], vec![0.1, 0.2, 0.7]];
        let t = SelectionTable::from_rows(&rows).unwrap();
        assert_eq!(t.m(), 4);
        assert_eq!(t.get(3, 2), 0.2);
        assert_eq!(t.rows(), rows);
        assert_eq!(t.packed().len(), 6);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(SelectionTable::from_rows(&[vec![0.9]]).is_err());
        assert!(SelectionTable::from_rows(&[vec![1.0], vec![1.2, -0.2]]).is_err());
        assert!(SelectionTable::from_rows(&[vec![1.0], vec![1.0]]).is_err());
        assert!(SelectionTable::from_rows(&[vec![1.0], vec![f64::NAN, 1.0]]).is_err());
    }

    #[test]
    fn right_picks_mirror_left_indices() {
        let t =
            SelectionTable::from_rows(&[vec![1.0], vec![0.3, 0.7], vec![0.1, 0.2, 0.7]]).unwrap();
        let s = SelectionDistribution::symmetric(t);
        // From interval 1 of m = 4 the right table row is m - 1 = 3; r = 4 is
        // the far bin, column 1.
        assert_eq!(s.pick_right(1, 4), 0.1);
        assert_eq!(s.pick_right(1, 2), 0.7);
        assert_eq!(s.pick_right(3, 4), 1.0);
        let total: f64 = (2..=4).map(|r| s.pick_right(1, r)).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn monotonicity_check() {
        let good =
            SelectionTable::from_rows(&[vec![1.0], vec![0.3, 0.7], vec![0.1, 0.2, 0.7]]).unwrap();
        assert!(good.is_column_monotone(0.0));
        let bad =
            SelectionTable::from_rows(&[vec![1.0], vec![0.3, 0.7], vec![0.1, 0.8, 0.1]]).unwrap();
        assert!(!bad.is_column_monotone(0.0));
    }
}
