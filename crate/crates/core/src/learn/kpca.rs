//! Kernel principal component analysis on a centered Gram matrix.

use ndarray::Array2;

use crate::kernels::GramMatrix;
use crate::linalg::sym_eigen;
use crate::{Error, Result};

/// Eigenvalues below `CLAMP_RELATIVE * lambda_max` are treated as zero.
pub const CLAMP_RELATIVE: f64 = 1e-10;

/// Fitted kernel-PCA model: spectrum of the double-centered Gram matrix plus
/// the centering statistics needed for out-of-sample projection.
#[derive(Debug, Clone)]
pub struct KpcaModel {
    eigenvalues: Vec<f64>,
    eigenvectors: Array2<f64>,
    row_means: Vec<f64>,
    grand_mean: f64,
    clamped: usize,
    n: usize,
}

impl KpcaModel {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Descending eigenvalues of the centered Gram matrix, with numerically
    /// zero ones clamped to exactly zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// How many eigenvalues were clamped to zero.
    pub fn clamped_count(&self) -> usize {
        self.clamped
    }

    /// Number of strictly positive retained components.
    pub fn positive_components(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > 0.0).count()
    }

    /// Cumulative percent variance captured by the top `m` components.
    pub fn cpv(&self, m: usize) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return 100.0;
        }
        let head: f64 = self.eigenvalues.iter().take(m).sum();
        100.0 * head / total
    }

    /// Coordinates of the training points in the top `m` components.
    pub fn training_coordinates(&self, m: usize) -> Result<Array2<f64>> {
        self.check_components(m)?;
        let mut coords = Array2::zeros((self.n, m));
        for j in 0..m {
            let scale = self.eigenvalues[j].sqrt();
            for i in 0..self.n {
                coords[(i, j)] = scale * self.eigenvectors[(i, j)];
            }
        }
        Ok(coords)
    }

    fn check_components(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.positive_components() {
            return Err(Error::InvalidParameter(format!(
                "requested {m} components, have {} positive",
                self.positive_components()
            )));
        }
        Ok(())
    }
}

/// Double-center a Gram matrix and eigendecompose it.
pub fn kpca_fit(g: &GramMatrix) -> Result<KpcaModel> {
    let entries = g.entries();
    let n = entries.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "kernel PCA needs at least two samples".into(),
        ));
    }
    let row_means: Vec<f64> = (0..n).map(|i| entries.row(i).sum() / n as f64).collect();
    let grand_mean = row_means.iter().sum::<f64>() / n as f64;

    let mut centered = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            centered[(i, j)] = entries[(i, j)] - row_means[i] - row_means[j] + grand_mean;
        }
    }
    let (mut eigenvalues, eigenvectors) = sym_eigen(&centered);
    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0);
    if !(lambda_max > 0.0) {
        return Err(Error::NoVariance);
    }
    let clamp = CLAMP_RELATIVE * lambda_max;
    let mut clamped = 0;
    for l in eigenvalues.iter_mut() {
        if *l < clamp {
            if *l != 0.0 {
                clamped += 1;
            }
            *l = 0.0;
        }
    }
    Ok(KpcaModel {
        eigenvalues,
        eigenvectors,
        row_means,
        grand_mean,
        clamped,
        n,
    })
}

/// Project new points given their kernel values against the training set
/// (`k_new` is `n_new x n_train`), onto the top `m` components.
pub fn kpca_project(model: &KpcaModel, k_new: &Array2<f64>, m: usize) -> Result<Array2<f64>> {
    model.check_components(m)?;
    let n = model.n;
    if k_new.ncols() != n {
        return Err(Error::LengthMismatch(k_new.ncols(), n));
    }
    let n_new = k_new.nrows();
    let mut coords = Array2::zeros((n_new, m));
    for r in 0..n_new {
        let new_mean = k_new.row(r).sum() / n as f64;
        for j in 0..m {
            let lambda = model.eigenvalues[j];
            let mut acc = 0.0;
            for l in 0..n {
                let centered =
                    k_new[(r, l)] - new_mean - model.row_means[l] + model.grand_mean;
                acc += centered * model.eigenvectors[(l, j)];
            }
            coords[(r, j)] = acc / lambda.sqrt();
        }
    }
    Ok(coords)
}
