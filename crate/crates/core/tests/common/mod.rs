#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use mlqmc_evp::sparse::SparseSymMatrix;

pub fn dense(a: &SparseSymMatrix) -> DMatrix<f64> {
    let n = a.dim();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for p in a.row_ptr()[i]..a.row_ptr()[i + 1] {
            d[(i, a.col_idx()[p])] = a.values()[p];
        }
    }
    d
}

/// Eigenvalues (ascending) and eigenvectors of `A x = lambda M x` through a
/// Cholesky reduction of `M`.
pub fn generalized_eigen(a: &DMatrix<f64>, m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let l = m.clone().cholesky().expect("M must be SPD").l();
    let l_inv = l.clone().try_inverse().unwrap();
    let c = &l_inv * a * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| l_inv.transpose() * eig.eigenvectors.column(i))
        .collect();
    (values, vectors)
}
