//! Up-looking sparse `L D L^T` factorization of `A - sigma M`.
//!
//! No pivoting is done: the ordering is fixed by the symbolic analysis, which
//! is shared by every factorization of matrices with the same patterns. The
//! pencils factorized here are symmetric with at most a handful of negative
//! eigenvalues, so the pivot sequence also yields the inertia.

use std::sync::Arc;

use super::{check_dim, nested_dissection, SparseSymMatrix};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Relative pivot size below which a shifted matrix is declared singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-14;

/// Ordering, elimination tree and column counts for a fixed pair of patterns.
#[derive(Debug)]
pub struct SymbolicLdl {
    n: usize,
    perm: Vec<usize>,
    /// Upper triangle of the permuted union pattern, by columns.
    up_ptr: Vec<usize>,
    up_row: Vec<usize>,
    /// Position of every stored entry of `A` (resp. `M`) in the upper
    /// triangle, or `NONE` for entries of the strict lower triangle.
    a_pattern: (Vec<usize>, Vec<usize>),
    a_map: Vec<usize>,
    m_pattern: (Vec<usize>, Vec<usize>),
    m_map: Vec<usize>,
    diag_pos: Vec<usize>,
    etree: Vec<usize>,
    l_ptr: Vec<usize>,
    factor_flops: f64,
}

impl SymbolicLdl {
    pub fn analyze(a: &SparseSymMatrix, m: &SparseSymMatrix) -> Result<Self> {
        check_dim(a.dim(), m.dim())?;
        let n = a.dim();

        // adjacency of the union pattern, without self loops
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for mat in [a, m] {
            for (i, nbrs) in adj.iter_mut().enumerate() {
                for &j in &mat.col_idx()[mat.row_ptr()[i]..mat.row_ptr()[i + 1]] {
                    if j != i {
                        nbrs.push(j);
                    }
                }
            }
        }
        let mut adj_ptr = vec![0];
        let mut adj_flat = Vec::new();
        for nbrs in &mut adj {
            nbrs.sort_unstable();
            nbrs.dedup();
            adj_flat.extend_from_slice(nbrs);
            adj_ptr.push(adj_flat.len());
        }
        let perm = nested_dissection(&adj_ptr, &adj_flat);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // upper triangle (row <= col) of the permuted matrix, diagonal always present
        let mut cols: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
        for (i, nbrs) in adj.iter().enumerate() {
            for &j in nbrs {
                let (ni, nj) = (iperm[i], iperm[j]);
                if ni < nj {
                    cols[nj].push(ni);
                }
            }
        }
        let mut up_ptr = vec![0];
        let mut up_row = Vec::new();
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
            up_row.extend_from_slice(col);
            up_ptr.push(up_row.len());
        }
        let diag_pos: Vec<usize> = (0..n).map(|j| up_ptr[j + 1] - 1).collect();

        let locate = |i: usize, j: usize| -> usize {
            let (ni, nj) = (iperm[i], iperm[j]);
            if ni > nj {
                return NONE;
            }
            let col = &up_row[up_ptr[nj]..up_ptr[nj + 1]];
            up_ptr[nj] + col.binary_search(&ni).expect("entry in union pattern")
        };
        let map_of = |mat: &SparseSymMatrix| -> Vec<usize> {
            let mut map = Vec::with_capacity(mat.nnz());
            for i in 0..n {
                for &j in &mat.col_idx()[mat.row_ptr()[i]..mat.row_ptr()[i + 1]] {
                    map.push(locate(i, j));
                }
            }
            map
        };
        let a_map = map_of(a);
        let m_map = map_of(m);

        // elimination tree and column counts
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &row in &up_row[up_ptr[j]..up_ptr[j + 1]] {
                let mut i = row;
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut l_ptr = Vec::with_capacity(n + 1);
        l_ptr.push(0);
        for &c in &lnz {
            l_ptr.push(l_ptr.last().unwrap() + c);
        }
        let factor_flops = lnz.iter().map(|&c| (c * c + c) as f64).sum();

        Ok(Self {
            n,
            perm,
            up_ptr,
            up_row,
            a_pattern: (a.row_ptr().to_vec(), a.col_idx().to_vec()),
            a_map,
            m_pattern: (m.row_ptr().to_vec(), m.col_idx().to_vec()),
            m_map,
            diag_pos,
            etree,
            l_ptr,
            factor_flops,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Off-diagonal nonzeros of `L`.
    pub fn factor_nnz(&self) -> usize {
        self.l_ptr[self.n]
    }

    /// Multiply-add count of one numeric factorization.
    pub fn factor_flops(&self) -> f64 {
        self.factor_flops
    }

    /// Multiply-add count of one forward/backward solve.
    pub fn solve_flops(&self) -> f64 {
        (2 * self.factor_nnz() + self.n) as f64
    }

    fn matches(&self, a: &SparseSymMatrix, m: &SparseSymMatrix) -> bool {
        a.dim() == self.n
            && m.dim() == self.n
            && a.row_ptr() == self.a_pattern.0.as_slice()
            && a.col_idx() == self.a_pattern.1.as_slice()
            && m.row_ptr() == self.m_pattern.0.as_slice()
            && m.col_idx() == self.m_pattern.1.as_slice()
    }
}

/// Numeric factorization `P (A - sigma M) P^T = L D L^T`.
#[derive(Debug, Clone)]
pub struct FactorizedOperator {
    symbolic: Arc<SymbolicLdl>,
    sigma: f64,
    l_row: Vec<usize>,
    l_val: Vec<f64>,
    d: Vec<f64>,
    negative_pivots: usize,
    min_pivot_ratio: f64,
}

/// Analyzes and factorizes `A - sigma M` in one go.
pub fn factorize_shifted(
    a: &SparseSymMatrix,
    m: &SparseSymMatrix,
    sigma: f64,
) -> Result<FactorizedOperator> {
    let symbolic = Arc::new(SymbolicLdl::analyze(a, m)?);
    FactorizedOperator::new(symbolic, a, m, sigma)
}

impl FactorizedOperator {
    pub fn new(
        symbolic: Arc<SymbolicLdl>,
        a: &SparseSymMatrix,
        m: &SparseSymMatrix,
        sigma: f64,
    ) -> Result<Self> {
        if !symbolic.matches(a, m) {
            return Err(Error::InvalidParameter(
                "matrix patterns differ from the symbolic analysis".into(),
            ));
        }
        let sym = &*symbolic;
        let n = sym.n;

        let mut up_val = vec![0.0; sym.up_row.len()];
        for (&pos, &v) in sym.a_map.iter().zip(a.values()) {
            if pos != NONE {
                up_val[pos] += v;
            }
        }
        if sigma != 0.0 {
            for (&pos, &v) in sym.m_map.iter().zip(m.values()) {
                if pos != NONE {
                    up_val[pos] -= sigma * v;
                }
            }
        }
        let max_diag = sym
            .diag_pos
            .iter()
            .fold(0.0f64, |acc, &p| acc.max(up_val[p].abs()));
        let threshold = SINGULAR_PIVOT_TOL * max_diag;

        let nnz_l = sym.factor_nnz();
        let mut l_row = vec![0usize; nnz_l];
        let mut l_val = vec![0.0; nnz_l];
        let mut d = vec![0.0; n];
        let mut next_in_col: Vec<usize> = sym.l_ptr[..n].to_vec();
        let mut y = vec![0.0; n];
        let mut marked = vec![false; n];
        let mut pattern = Vec::with_capacity(n);
        let mut stack = Vec::with_capacity(n);
        let mut negative_pivots = 0;
        let mut min_pivot = f64::INFINITY;

        for k in 0..n {
            // nonzero pattern of row k of L: reach of the column entries in the etree
            pattern.clear();
            d[k] = 0.0;
            for p in sym.up_ptr[k]..sym.up_ptr[k + 1] {
                let i = sym.up_row[p];
                if i == k {
                    d[k] = up_val[p];
                    continue;
                }
                y[i] = up_val[p];
                if marked[i] {
                    continue;
                }
                let mut node = i;
                stack.clear();
                while node != NONE && node < k && !marked[node] {
                    marked[node] = true;
                    stack.push(node);
                    node = sym.etree[node];
                }
                while let Some(v) = stack.pop() {
                    pattern.push(v);
                }
            }
            // eliminate in topological order (reverse of the collected order)
            for &c in pattern.iter().rev() {
                let yc = y[c];
                let start = sym.l_ptr[c];
                let end = next_in_col[c];
                for q in start..end {
                    y[l_row[q]] -= l_val[q] * yc;
                }
                let lkc = yc / d[c];
                l_row[end] = k;
                l_val[end] = lkc;
                d[k] -= yc * lkc;
                next_in_col[c] += 1;
                y[c] = 0.0;
                marked[c] = false;
            }
            if !(d[k].abs() > threshold) {
                return Err(Error::SingularShift {
                    sigma,
                    pivot: d[k],
                    row: sym.perm[k],
                });
            }
            if d[k] < 0.0 {
                negative_pivots += 1;
            }
            min_pivot = min_pivot.min(d[k].abs());
        }

        Ok(Self {
            symbolic,
            sigma,
            l_row,
            l_val,
            d,
            negative_pivots,
            min_pivot_ratio: if max_diag > 0.0 {
                min_pivot / max_diag
            } else {
                0.0
            },
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn symbolic(&self) -> &Arc<SymbolicLdl> {
        &self.symbolic
    }

    /// Number of negative eigenvalues of `A - sigma M` (Sylvester's law of inertia).
    pub fn negative_pivots(&self) -> usize {
        self.negative_pivots
    }

    /// Smallest `|d_k|` relative to the largest diagonal entry.
    pub fn min_pivot_ratio(&self) -> f64 {
        self.min_pivot_ratio
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.symbolic.n, b.len())?;
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let sym = &*self.symbolic;
        let n = sym.n;
        let mut w: Vec<f64> = sym.perm.iter().map(|&old| x[old]).collect();
        // L w = b, column oriented
        for c in 0..n {
            let wc = w[c];
            if wc != 0.0 {
                for q in sym.l_ptr[c]..sym.l_ptr[c + 1] {
                    w[self.l_row[q]] -= self.l_val[q] * wc;
                }
            }
        }
        for (wi, di) in w.iter_mut().zip(&self.d) {
            *wi /= di;
        }
        // L^T w = z
        for c in (0..n).rev() {
            let mut acc = w[c];
            for q in sym.l_ptr[c]..sym.l_ptr[c + 1] {
                acc -= self.l_val[q] * w[self.l_row[q]];
            }
            w[c] = acc;
        }
        for (new, &old) in sym.perm.iter().enumerate() {
            x[old] = w[new];
        }
    }

    /// Solve followed by `steps` rounds of iterative refinement against the
    /// original pair.
    pub fn solve_refined(
        &self,
        a: &SparseSymMatrix,
        m: &SparseSymMatrix,
        b: &[f64],
        steps: usize,
    ) -> Result<Vec<f64>> {
        let mut x = self.solve(b)?;
        let n = b.len();
        let mut ax = vec![0.0; n];
        let mut mx = vec![0.0; n];
        for _ in 0..steps {
            a.mul_vec_into(&x, &mut ax);
            m.mul_vec_into(&x, &mut mx);
            let mut r: Vec<f64> = (0..n)
                .map(|i| b[i] - (ax[i] - self.sigma * mx[i]))
                .collect();
            self.solve_in_place(&mut r);
            x.iter_mut().zip(&r).for_each(|(xi, ri)| *xi += ri);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_examples() {
        let a = SparseSymMatrix::from_diagonal(&[1.0, 2.0]);
        let m = SparseSymMatrix::identity(2);
        let f = factorize_shifted(&a, &m, 0.0).unwrap();
        assert_eq!(f.solve(&[1.0, 2.0]).unwrap(), vec![1.0, 1.0]);
        let f = factorize_shifted(&a, &m, 1.5).unwrap();
        let x = f.solve(&[1.0, 1.0]).unwrap();
        assert!((x[0] + 2.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert_eq!(f.negative_pivots(), 1);
    }

    #[test]
    fn singular_shift_is_reported() {
        let a = SparseSymMatrix::from_diagonal(&[1.0, 2.0]);
        let m = SparseSymMatrix::identity(2);
        assert!(matches!(
            factorize_shifted(&a, &m, 2.0),
            Err(Error::SingularShift { .. })
        ));
    }

    #[test]
    fn rejects_foreign_patterns() {
        let a = SparseSymMatrix::from_diagonal(&[1.0, 2.0]);
        let m = SparseSymMatrix::identity(2);
        let sym = Arc::new(SymbolicLdl::analyze(&a, &m).unwrap());
        let other = SparseSymMatrix::from_triplets(
            2,
            &[(0, 0, 1.0), (0, 1, 0.1), (1, 0, 0.1), (1, 1, 1.0)],
        )
        .unwrap();
        assert!(FactorizedOperator::new(sym, &other, &m, 0.0).is_err());
    }

    #[test]
    fn tridiagonal_solve() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseSymMatrix::from_triplets(n, &t).unwrap();
        let m = SparseSymMatrix::identity(n);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
        let b = a.mul_vec(&x_true).unwrap();
        let f = factorize_shifted(&a, &m, 0.0).unwrap();
        let x = f.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-11);
        }
        assert_eq!(f.negative_pivots(), 0);
    }
}
