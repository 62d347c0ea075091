//! Symmetric sparse matrices and the shifted factorizations used by the
//! eigensolvers.

mod ldl;
mod ordering;

pub use ldl::{factorize_shifted, FactorizedOperator, SymbolicLdl};
pub use ordering::nested_dissection;

use crate::error::{Error, Result};

/// Compressed row storage with both triangles stored explicitly.
///
/// Column indices are sorted within each row and never duplicated. Entries
/// may be structurally present but numerically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds a matrix from raw CSR arrays, checking structure and symmetry.
    pub fn from_csr(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = Self::from_csr_unchecked(n, row_ptr, col_idx, values)?;
        let asym = m.symmetry_defect();
        if asym > 1e-13 * m.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter(format!(
                "matrix is not symmetric (defect {asym:e})"
            )));
        }
        Ok(m)
    }

    pub(crate) fn from_csr_unchecked(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n + 1 || col_idx.len() != values.len() || row_ptr[n] != col_idx.len() {
            return Err(Error::InvalidParameter("inconsistent CSR arrays".into()));
        }
        for i in 0..n {
            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&j| j >= n) {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has unsorted, duplicate or out-of-range columns"
                )));
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Sums duplicate triplets; the triplets must describe a symmetric matrix.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j) as u64,
                    bound: n as u64,
                });
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_csr(n, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(pos) => self.values[self.row_ptr[i] + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                defect = defect.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        defect
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    /// `x^T A y` without forming `A y`.
    pub(crate) fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * y[self.col_idx[k]];
            }
            total += x[i] * acc;
        }
        total
    }

    /// Keeps the rows and columns flagged in `keep`, renumbered in order.
    pub fn restrict(&self, keep: &[bool]) -> Result<Self> {
        check_dim(self.n, keep.len())?;
        let mut new_index = vec![usize::MAX; self.n];
        let mut m = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                new_index[i] = m;
                m += 1;
            }
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in (0..self.n).filter(|&i| keep[i]) {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = new_index[self.col_idx[k]];
                if j != usize::MAX {
                    col_idx.push(j);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n: m,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row[self.col_idx[k]] = self.values[k];
            }
        }
        d
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= factor);
        m
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `u^T M v`.
pub fn m_inner(u: &[f64], v: &[f64], m: &SparseSymMatrix) -> Result<f64> {
    check_dim(m.dim(), u.len())?;
    check_dim(m.dim(), v.len())?;
    Ok(m.bilinear(u, v))
}

pub fn m_norm(u: &[f64], m: &SparseSymMatrix) -> Result<f64> {
    Ok(m_inner(u, u, m)?.max(0.0).sqrt())
}

/// `(u^T A u) / (u^T M u)`.
pub fn rayleigh_quotient(a: &SparseSymMatrix, m: &SparseSymMatrix, u: &[f64]) -> Result<f64> {
    check_dim(a.dim(), m.dim())?;
    let denom = m_inner(u, u, m)?;
    if denom == 0.0 || u.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(a.bilinear(u, u) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag12() -> SparseSymMatrix {
        SparseSymMatrix::from_diagonal(&[1.0, 2.0])
    }

    #[test]
    fn inner_products() {
        let id = SparseSymMatrix::identity(2);
        assert_eq!(m_inner(&[0.0, 0.0], &[0.0, 0.0], &id).unwrap(), 0.0);
        assert_eq!(m_inner(&[1.0, 2.0], &[3.0, 4.0], &id).unwrap(), 11.0);
        assert!(matches!(
            m_inner(&[1.0], &[1.0, 2.0], &id),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rayleigh_examples() {
        let a = diag12();
        let m = SparseSymMatrix::identity(2);
        assert_eq!(rayleigh_quotient(&a, &m, &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(rayleigh_quotient(&a, &m, &[1.0, 1.0]).unwrap(), 1.5);
        let u = [0.3, -1.1];
        let su = [0.3 * 7.3, -1.1 * 7.3];
        let r1 = rayleigh_quotient(&a, &m, &u).unwrap();
        let r2 = rayleigh_quotient(&a, &m, &su).unwrap();
        assert!((r1 - r2).abs() <= 1e-14 * r1.abs());
        assert!(matches!(
            rayleigh_quotient(&a, &m, &[0.0, 0.0]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseSymMatrix::from_triplets(
            2,
            &[
                (0, 0, 1.0),
                (0, 0, 1.0),
                (0, 1, 0.5),
                (1, 0, 0.5),
                (1, 1, 3.0),
            ],
        )
        .unwrap();
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.get(0, 0), 2.0);
        assert!(SparseSymMatrix::from_triplets(2, &[(0, 1, 1.0)]).is_err());
    }

    #[test]
    fn restriction_renumbers() {
        let m = SparseSymMatrix::from_triplets(
            3,
            &[
                (0, 0, 1.0),
                (1, 1, 2.0),
                (2, 2, 3.0),
                (0, 2, 4.0),
                (2, 0, 4.0),
            ],
        )
        .unwrap();
        let r = m.restrict(&[true, false, true]).unwrap();
        assert_eq!(r.to_dense(), vec![vec![1.0, 4.0], vec![4.0, 3.0]]);
    }
}
