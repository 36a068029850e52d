//! Symmetric eigendecomposition, wrapped so the rest of the crate stays on
//! ndarray types.

use nalgebra::DMatrix;
use ndarray::Array2;

/// Eigenvalues (descending) and matching eigenvectors (as columns) of a
/// symmetric matrix.
pub(crate) fn sym_eigen(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let dm = DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = dm.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[(row, col)] = eig.eigenvectors[(row, k)];
        }
    }
    (eigenvalues, eigenvectors)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub(crate) fn sym_eigen_extremes(m: &Array2<f64>) -> (f64, f64) {
    let (vals, _) = sym_eigen(m);
    (
        *vals.last().expect("nonempty matrix"),
        *vals.first().expect("nonempty matrix"),
    )
}
