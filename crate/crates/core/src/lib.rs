//! Sliced Wasserstein kernels for probability distributions.
//!
//! Builds up from the closed-form one-dimensional optimal transport problem to
//! a full kernel-methods toolkit for discrete probability densities:
//!
//! - [`density`]: discrete 1D/2D densities on regular grids, CDFs and quantiles
//! - [`transport`]: monotone 1D transport maps, the `W2` distance, and the
//!   template-anchored embedding `psi` with its inverse
//! - [`radon`]: forward Radon transform (sinograms) and filtered back-projection
//! - [`sliced`]: the sliced Wasserstein distance on 2D densities and the
//!   explicit, invertible feature map `phi`
//! - [`kernels`]: SW Gaussian / polynomial kernels, Gram matrices, empirical
//!   positive-definiteness and conditional-negative-definiteness certification
//! - [`learn`]: kernel PCA, kernel k-means, kernel SVM, cross-validation
//! - [`ingest`]: gray-level co-occurrence features and dataset loading
//! - [`io`]: CSV formats for densities, sinograms, feature maps and Gram matrices
//!
//! The embedding `phi` is an isometry: Euclidean distances between embedded
//! densities reproduce the sliced Wasserstein distance, which is what makes the
//! Gaussian kernel `exp(-gamma * SW^2)` positive definite for every `gamma > 0`.

use thiserror::Error;

pub mod density;
pub mod ingest;
pub mod io;
pub mod kernels;
pub mod learn;
mod linalg;
pub mod radon;
pub mod sliced;
pub mod transport;

pub use density::{Cdf1D, DiscreteDensity1D, DiscreteDensity2D, Grid1D};
pub use kernels::{CertOutcome, GramMatrix, KernelSpec};
pub use radon::{AngleSet, SlicedRepresentation};
pub use sliced::{FeatureVector, Template};
pub use transport::TransportMap1D;

/// Error variants shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input grid had no mass anywhere.
    #[error("degenerate density: input has no positive mass")]
    DegenerateDensity,

    /// Input grid contained a negative entry.
    #[error("negative mass at index {0}")]
    NegativeMass(usize),

    /// A density that must be strictly positive contained a non-positive entry.
    #[error("positivity violated at index {0}")]
    PositivityViolated(usize),

    /// Probability argument outside `[0, 1]`.
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    /// Two densities live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Invalid grid parameters.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// t-grid does not cover the rotated support of the image.
    #[error("truncated projection: t-grid spans [{got_lo}, {got_hi}] but support needs [{need_lo}, {need_hi}]")]
    TruncatedProjection {
        got_lo: f64,
        got_hi: f64,
        need_lo: f64,
        need_hi: f64,
    },

    /// A recovered transport map decreases somewhere, so the vector is not a
    /// valid embedding point.
    #[error("not a valid embedding point: recovered map decreases at index {0}")]
    NotMonotone(usize),

    /// Per-angle inversion failure, naming the offending angle.
    #[error("inversion failed at angle index {angle} ({theta} rad): {source}")]
    AngleInversion {
        angle: usize,
        theta: f64,
        #[source]
        source: Box<Error>,
    },

    /// Invalid kernel or algorithm parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Kernel evaluation failed for a specific Gram entry.
    #[error("kernel failed for pair ({i}, {j}): {source}")]
    GramEntry {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    /// Centered Gram matrix has no spectrum to decompose.
    #[error("no variance: centered Gram matrix is numerically zero")]
    NoVariance,

    /// Training set contains fewer than two classes.
    #[error("single-class input: need at least two classes")]
    SingleClass,

    /// A class has too few members for the requested fold count.
    #[error("class {class} has {size} members, fewer than {folds} folds")]
    ClassSmallerThanFolds {
        class: usize,
        size: usize,
        folds: usize,
    },

    /// Decision-axis sampling requires the explicit linear feature-map kernel.
    #[error("explicit axis requires linear kernel")]
    RequiresLinearPhi,

    /// Labels or matrices with inconsistent lengths.
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    /// Image ingestion failure.
    #[error("ingest: {0}")]
    Ingest(String),

    /// File parsing failure.
    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
