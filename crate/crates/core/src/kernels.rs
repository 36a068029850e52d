//! Sliced Wasserstein kernels, Gram matrices, and empirical certification of
//! positive / conditionally negative definiteness.
//!
//! The Gaussian kernel `exp(-gamma * SW^2)` is positive definite for every
//! `gamma > 0` because squared SW is conditionally negative definite; the
//! polynomial kernels are inner products of explicit embeddings. Euclidean
//! kernels on raw density vectors live here too, as the baselines the
//! experiments compare against; they share the Gram and certification
//! machinery.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::density::DiscreteDensity2D;
use crate::linalg::sym_eigen;
use crate::sliced::{pairwise_sw_squared, phi_embed, FeatureVector, Template};
use crate::{Error, Result};

/// Default number of random zero-sum coefficient vectors for CND checks.
pub const DEFAULT_CND_TRIALS: usize = 1000;

/// Relative eigenvalue tolerance for PD certification.
pub const PD_RELATIVE_TOLERANCE: f64 = 1e-8;

/// Kernel family selector with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-gamma * SW^2(a, b))`
    SwGaussian { gamma: f64 },
    /// `(<phi(a), phi(b)> + offset)^degree`
    SwPoly { degree: u32, offset: u8 },
    /// `<phi(a), phi(b)>`
    LinearPhi,
    /// `exp(-gamma * ||a - b||^2)` on raw density vectors
    EuclidRbf { gamma: f64 },
    /// `<a, b>` on raw density vectors
    EuclidLinear,
    /// `(<a, b> + offset)^degree` on raw density vectors
    EuclidPoly { degree: u32, offset: u8 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::SwGaussian { gamma } | KernelSpec::EuclidRbf { gamma } => {
                if !(gamma > 0.0) || !gamma.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "gamma {gamma} must be > 0"
                    )));
                }
            }
            KernelSpec::SwPoly { degree, offset } | KernelSpec::EuclidPoly { degree, offset } => {
                if degree < 1 {
                    return Err(Error::InvalidParameter(format!(
                        "degree {degree} must be >= 1"
                    )));
                }
                if offset > 1 {
                    return Err(Error::InvalidParameter(format!(
                        "offset {offset} must be 0 or 1"
                    )));
                }
            }
            KernelSpec::LinearPhi | KernelSpec::EuclidLinear => {}
        }
        Ok(())
    }

    /// Short kind tag used in file headers and report rows.
    pub fn kind(&self) -> &'static str {
        match self {
            KernelSpec::SwGaussian { .. } => "sw_gaussian",
            KernelSpec::SwPoly { .. } => "sw_poly",
            KernelSpec::LinearPhi => "linear_phi",
            KernelSpec::EuclidRbf { .. } => "euclid_rbf",
            KernelSpec::EuclidLinear => "euclid_linear",
            KernelSpec::EuclidPoly { .. } => "euclid_poly",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            KernelSpec::SwGaussian { gamma } | KernelSpec::EuclidRbf { gamma } => Some(gamma),
            _ => None,
        }
    }

    pub fn degree_offset(&self) -> Option<(u32, u8)> {
        match *self {
            KernelSpec::SwPoly { degree, offset } | KernelSpec::EuclidPoly { degree, offset } => {
                Some((degree, offset))
            }
            _ => None,
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            KernelSpec::SwGaussian { gamma } => write!(f, "sw_gaussian(gamma={gamma})"),
            KernelSpec::SwPoly { degree, offset } => {
                write!(f, "sw_poly(degree={degree},offset={offset})")
            }
            KernelSpec::LinearPhi => write!(f, "linear_phi"),
            KernelSpec::EuclidRbf { gamma } => write!(f, "euclid_rbf(gamma={gamma})"),
            KernelSpec::EuclidLinear => write!(f, "euclid_linear"),
            KernelSpec::EuclidPoly { degree, offset } => {
                write!(f, "euclid_poly(degree={degree},offset={offset})")
            }
        }
    }
}

/// Pairwise statistics every kernel family is an elementwise function of:
/// computed once per dataset, reused across hyperparameter grids and folds.
#[derive(Debug, Clone)]
pub struct KernelPrecompute {
    pub sw_squared: Array2<f64>,
    pub phi_dot: Array2<f64>,
    pub raw_dot: Array2<f64>,
    pub raw_dist_squared: Array2<f64>,
}

impl KernelPrecompute {
    pub fn new(dataset: &[DiscreteDensity2D], template: &Template) -> Result<Self> {
        let n = dataset.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty dataset".into()));
        }
        let sw_squared =
            pairwise_sw_squared(dataset, template.angle_set(), template.t_grid())?;

        let phis: Vec<FeatureVector> = dataset
            .iter()
            .map(|d| phi_embed(d, template))
            .collect::<Result<_>>()?;
        let mut phi_dot = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = phis[i].dot(&phis[j]).map_err(|e| Error::GramEntry {
                    i,
                    j,
                    source: Box::new(e),
                })?;
                phi_dot[(i, j)] = v;
                phi_dot[(j, i)] = v;
            }
        }

        let mut raw_dot = Array2::zeros((n, n));
        let mut raw_dist_squared = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let (mut dot, mut dist) = (0.0, 0.0);
                for (&a, &b) in dataset[i].values().iter().zip(dataset[j].values()) {
                    dot += a * b;
                    dist += (a - b) * (a - b);
                }
                raw_dot[(i, j)] = dot;
                raw_dot[(j, i)] = dot;
                raw_dist_squared[(i, j)] = dist;
                raw_dist_squared[(j, i)] = dist;
            }
        }
        Ok(Self {
            sw_squared,
            phi_dot,
            raw_dot,
            raw_dist_squared,
        })
    }

    pub fn len(&self) -> usize {
        self.sw_squared.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Kernel value for a pair of dataset indices.
    pub fn entry(&self, spec: &KernelSpec, i: usize, j: usize) -> f64 {
        match *spec {
            KernelSpec::SwGaussian { gamma } => (-gamma * self.sw_squared[(i, j)]).exp(),
            KernelSpec::SwPoly { degree, offset } => {
                (self.phi_dot[(i, j)] + offset as f64).powi(degree as i32)
            }
            KernelSpec::LinearPhi => self.phi_dot[(i, j)],
            KernelSpec::EuclidRbf { gamma } => (-gamma * self.raw_dist_squared[(i, j)]).exp(),
            KernelSpec::EuclidLinear => self.raw_dot[(i, j)],
            KernelSpec::EuclidPoly { degree, offset } => {
                (self.raw_dot[(i, j)] + offset as f64).powi(degree as i32)
            }
        }
    }

    /// Full kernel matrix over a subset of indices (rows == cols == subset).
    pub fn kernel_matrix(&self, spec: &KernelSpec, subset: &[usize]) -> Array2<f64> {
        let n = subset.len();
        let mut m = Array2::zeros((n, n));
        for (a, &i) in subset.iter().enumerate() {
            for (b, &j) in subset.iter().enumerate() {
                m[(a, b)] = self.entry(spec, i, j);
            }
        }
        m
    }

    /// Rectangular kernel block: rows over `rows`, columns over `cols`.
    pub fn kernel_block(&self, spec: &KernelSpec, rows: &[usize], cols: &[usize]) -> Array2<f64> {
        let mut m = Array2::zeros((rows.len(), cols.len()));
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                m[(a, b)] = self.entry(spec, i, j);
            }
        }
        m
    }

    /// Median of the off-diagonal squared SW distances; the scale reference
    /// for automatic gamma grids.
    pub fn median_sw_squared(&self) -> f64 {
        median_offdiag(&self.sw_squared)
    }

    /// Median of the off-diagonal squared raw distances.
    pub fn median_raw_dist_squared(&self) -> f64 {
        median_offdiag(&self.raw_dist_squared)
    }
}

fn median_offdiag(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut vals = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            vals.push(m[(i, j)]);
        }
    }
    if vals.is_empty() {
        return 1.0;
    }
    vals.sort_by(f64::total_cmp);
    vals[vals.len() / 2]
}

/// Symmetric kernel matrix with its spectral diagnostics.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    spec: KernelSpec,
    entries: Array2<f64>,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl GramMatrix {
    /// Wrap a symmetric matrix, computing the extreme eigenvalues.
    pub fn new(spec: KernelSpec, entries: Array2<f64>) -> Result<Self> {
        let (n, m) = entries.dim();
        if n != m || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "Gram matrix must be square and nonempty, got {n}x{m}"
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "Gram matrix asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        let (min_eigenvalue, max_eigenvalue) = crate::linalg::sym_eigen_extremes(&entries);
        Ok(Self {
            spec,
            entries,
            min_eigenvalue,
            max_eigenvalue,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    /// Default PD tolerance: `1e-8` relative to the largest eigenvalue.
    pub fn default_tolerance(&self) -> f64 {
        PD_RELATIVE_TOLERANCE * self.max_eigenvalue.abs().max(1.0)
    }
}

/// SW Gaussian kernel between two densities.
pub fn sw_gaussian(
    a: &DiscreteDensity2D,
    b: &DiscreteDensity2D,
    gamma: f64,
    template: &Template,
) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma {gamma} must be > 0")));
    }
    let sw = crate::sliced::sw_distance_on(a, b, template.angle_set(), template.t_grid())?;
    Ok((-gamma * sw * sw).exp())
}

/// SW polynomial kernel `(<phi(a), phi(b)> + offset)^degree`.
pub fn sw_polynomial(
    a: &DiscreteDensity2D,
    b: &DiscreteDensity2D,
    template: &Template,
    degree: u32,
    offset: u8,
) -> Result<f64> {
    KernelSpec::SwPoly { degree, offset }.validate()?;
    let pa = phi_embed(a, template)?;
    let pb = phi_embed(b, template)?;
    Ok((pa.dot(&pb)? + offset as f64).powi(degree as i32))
}

/// Explicit linear kernel `<phi(a), phi(b)>`.
pub fn linear_phi(
    a: &DiscreteDensity2D,
    b: &DiscreteDensity2D,
    template: &Template,
) -> Result<f64> {
    let pa = phi_embed(a, template)?;
    let pb = phi_embed(b, template)?;
    pa.dot(&pb)
}

/// Gram matrix of a dataset under one kernel spec.
pub fn gram(
    dataset: &[DiscreteDensity2D],
    spec: &KernelSpec,
    template: &Template,
) -> Result<GramMatrix> {
    spec.validate()?;
    let pre = KernelPrecompute::new(dataset, template)?;
    gram_from_precomputed(&pre, spec)
}

/// Gram matrix from precomputed pair statistics.
pub fn gram_from_precomputed(pre: &KernelPrecompute, spec: &KernelSpec) -> Result<GramMatrix> {
    spec.validate()?;
    let n = pre.len();
    let all: Vec<usize> = (0..n).collect();
    GramMatrix::new(*spec, pre.kernel_matrix(spec, &all))
}

/// Outcome of an empirical definiteness check.
#[derive(Debug, Clone)]
pub enum CertOutcome {
    Pass,
    /// Offending value plus the witness coefficient vector achieving it.
    Fail { value: f64, witness: Vec<f64> },
}

impl CertOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, CertOutcome::Pass)
    }
}

/// Empirical positive-definiteness check: passes iff the smallest eigenvalue
/// is at least `-tolerance`; on failure the matching eigenvector is the
/// witness coefficient vector.
pub fn certify_pd(g: &GramMatrix, tolerance: f64) -> CertOutcome {
    if g.min_eigenvalue >= -tolerance {
        return CertOutcome::Pass;
    }
    let (vals, vecs) = sym_eigen(&g.entries);
    let last = vals.len() - 1;
    let witness = (0..g.n()).map(|r| vecs[(r, last)]).collect();
    CertOutcome::Fail {
        value: g.min_eigenvalue,
        witness,
    }
}

/// Empirical conditional-negative-definiteness check on a squared-distance
/// matrix: draws `trials` random zero-sum coefficient vectors and passes iff
/// every quadratic form stays at or below `tolerance`.
pub fn certify_cnd(
    dist_squared: &Array2<f64>,
    trials: usize,
    tolerance: f64,
    seed: u64,
) -> Result<CertOutcome> {
    let n = dist_squared.nrows();
    if n != dist_squared.ncols() || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "squared-distance matrix must be square with n >= 2, got {n}x{}",
            dist_squared.ncols()
        )));
    }
    for i in 0..n {
        if dist_squared[(i, i)].abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "diagonal entry {i} is {} (must be 0)",
                dist_squared[(i, i)]
            )));
        }
        for j in (i + 1)..n {
            if (dist_squared[(i, j)] - dist_squared[(j, i)]).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "asymmetric at ({i},{j})"
                )));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<(f64, Vec<f64>)> = None;
    for _ in 0..trials {
        let mut c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = c.iter().sum::<f64>() / n as f64;
        c.iter_mut().for_each(|x| *x -= mean);
        let mut form = 0.0;
        for i in 0..n {
            for j in 0..n {
                form += c[i] * c[j] * dist_squared[(i, j)];
            }
        }
        if form > tolerance && worst.as_ref().is_none_or(|(w, _)| form > *w) {
            worst = Some((form, c));
        }
    }
    Ok(match worst {
        None => CertOutcome::Pass,
        Some((value, witness)) => CertOutcome::Fail { value, witness },
    })
}

/// Squared geodesic distances of `n` equally spaced points on the unit
/// circle. The circle is not flat, so for `n >= 4` these squared distances
/// are not conditionally negative definite: the classical negative control.
pub fn circle_geodesic_squared(n: usize) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    let tau = 2.0 * std::f64::consts::PI;
    for i in 0..n {
        for j in 0..n {
            let diff = (i as f64 - j as f64).abs() * tau / n as f64;
            let geo = diff.min(tau - diff);
            m[(i, j)] = geo * geo;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::normalize_2d;
    use crate::radon::AngleSet;
    use crate::sliced::{make_template, make_template_on, sw_distance_on};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_density(n: usize, rng: &mut ChaCha8Rng) -> DiscreteDensity2D {
        let px = 1.0;
        let extent = n as f64 / 2.0;
        let k = rng.gen_range(1..=4);
        let mut raw = ndarray::Array2::zeros((n, n));
        for _ in 0..k {
            let mx = rng.gen_range(-extent / 2.0..extent / 2.0);
            let my = rng.gen_range(-extent / 2.0..extent / 2.0);
            let s = rng.gen_range(1.5..4.0);
            let w = rng.gen_range(0.2..1.0);
            for i in 0..n {
                for j in 0..n {
                    let x = (j as f64 - (n as f64 - 1.0) / 2.0) * px;
                    let y = (i as f64 - (n as f64 - 1.0) / 2.0) * px;
                    raw[(i, j)] +=
                        w * (-0.5 * ((x - mx).powi(2) + (y - my).powi(2)) / (s * s)).exp();
                }
            }
        }
        normalize_2d(px, &raw, 1e-8).unwrap()
    }

    fn small_setup(count: usize, seed: u64) -> (Vec<DiscreteDensity2D>, Template) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds: Vec<_> = (0..count).map(|_| random_density(32, &mut rng)).collect();
        let tpl = make_template(&ds, &AngleSet::new(16).unwrap(), 64).unwrap();
        (ds, tpl)
    }

    #[test]
    fn gaussian_kernel_of_identical_inputs_is_one() {
        let (ds, tpl) = small_setup(2, 1);
        let k = sw_gaussian(&ds[0], &ds[0], 1.0, &tpl).unwrap();
        assert!((k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_kernel_matches_translate_value() {
        // SW = sqrt(2) for unit-variance Gaussians two apart, so at gamma = 1
        // the kernel is exp(-2).
        let n = 96;
        let px = 12.0 / n as f64;
        let blob = |mx: f64| {
            let mut raw = ndarray::Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    let x = (j as f64 - (n as f64 - 1.0) / 2.0) * px;
                    let y = (i as f64 - (n as f64 - 1.0) / 2.0) * px;
                    raw[(i, j)] = (-0.5 * ((x - mx).powi(2) + y * y)).exp();
                }
            }
            normalize_2d(px, &raw, 1e-9).unwrap()
        };
        let a = blob(0.0);
        let b = blob(2.0);
        let tpl = make_template(&[a.clone(), b.clone()], &AngleSet::new(180).unwrap(), 192)
            .unwrap();
        let k = sw_gaussian(&a, &b, 1.0, &tpl).unwrap();
        let expect = (-2.0f64).exp();
        assert!((k - expect).abs() <= 0.05 * expect, "{k} vs {expect}");
    }

    #[test]
    fn gaussian_kernel_decreases_with_gamma() {
        let (ds, tpl) = small_setup(2, 3);
        let mut last = 1.0;
        for gamma in [1e-3, 1e-2, 1e-1, 1.0] {
            let k = sw_gaussian(&ds[0], &ds[1], gamma, &tpl).unwrap();
            assert!(k > 0.0 && k < last, "gamma {gamma}: {k} vs {last}");
            last = k;
        }
        assert!(sw_gaussian(&ds[0], &ds[1], 0.0, &tpl).is_err());
    }

    #[test]
    fn polynomial_kernel_at_template_is_offset_power() {
        let (ds, tpl) = small_setup(3, 5);
        let t = tpl.density().clone();
        let k = sw_polynomial(&t, &t, &tpl, 1, 0).unwrap();
        assert!(k.abs() < 1e-10, "{k}");
        let _ = ds;
    }

    #[test]
    fn polynomial_degree_one_matches_polarization_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ds: Vec<_> = (0..4).map(|_| random_density(32, &mut rng)).collect();
        // The 1e-3 relative agreement between embedding dots and exact
        // distances needs a fine t-axis.
        let t = crate::radon::aligned_t_grid(32, 32, 1.0, 8).unwrap();
        let tpl = make_template_on(&ds, &AngleSet::new(16).unwrap(), t).unwrap();
        let angles = tpl.angle_set().clone();
        let t_grid = tpl.t_grid();
        for i in 0..ds.len() {
            for j in (i + 1)..ds.len() {
                let k = sw_polynomial(&ds[i], &ds[j], &tpl, 1, 0).unwrap();
                let da = sw_distance_on(&ds[i], tpl.density(), &angles, t_grid).unwrap();
                let db = sw_distance_on(&ds[j], tpl.density(), &angles, t_grid).unwrap();
                let dab = sw_distance_on(&ds[i], &ds[j], &angles, t_grid).unwrap();
                let polar = 0.5 * (da * da + db * db - dab * dab);
                assert!(
                    (k - polar).abs() <= 1e-3 * polar.abs().max(1.0),
                    "({i},{j}): {k} vs {polar}"
                );
            }
        }
    }

    #[test]
    fn gram_single_element() {
        let (ds, tpl) = small_setup(1, 9);
        let g = gram(&ds, &KernelSpec::SwGaussian { gamma: 1.0 }, &tpl).unwrap();
        assert_eq!(g.n(), 1);
        assert!((g.entries()[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_gram_diagonal_one_entries_in_unit_interval() {
        let (ds, tpl) = small_setup(8, 11);
        let g = gram(&ds, &KernelSpec::SwGaussian { gamma: 2.0 }, &tpl).unwrap();
        for i in 0..g.n() {
            assert!((g.entries()[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..g.n() {
                let v = g.entries()[(i, j)];
                assert!(v > 0.0 && v <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn sw_gaussian_gram_is_pd_across_gamma_sweep() {
        let (ds, tpl) = small_setup(20, 13);
        let pre = KernelPrecompute::new(&ds, &tpl).unwrap();
        for gamma in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let g = gram_from_precomputed(&pre, &KernelSpec::SwGaussian { gamma }).unwrap();
            let tol = g.default_tolerance();
            assert!(
                certify_pd(&g, tol).passed(),
                "gamma {gamma}: min eig {}",
                g.min_eigenvalue()
            );
        }
    }

    #[test]
    fn sw_polynomial_gram_is_pd_across_degrees() {
        let (ds, tpl) = small_setup(12, 17);
        let pre = KernelPrecompute::new(&ds, &tpl).unwrap();
        for degree in [1, 2, 3] {
            for offset in [0, 1] {
                let g =
                    gram_from_precomputed(&pre, &KernelSpec::SwPoly { degree, offset }).unwrap();
                let tol = g.default_tolerance();
                assert!(
                    certify_pd(&g, tol).passed(),
                    "degree {degree} offset {offset}: min eig {}",
                    g.min_eigenvalue()
                );
            }
        }
    }

    #[test]
    fn linear_phi_gram_matches_explicit_embedding_dots() {
        let (ds, tpl) = small_setup(6, 19);
        let g = gram(&ds, &KernelSpec::LinearPhi, &tpl).unwrap();
        let phis: Vec<_> = ds.iter().map(|d| phi_embed(d, &tpl).unwrap()).collect();
        for i in 0..ds.len() {
            for j in 0..ds.len() {
                let dot = phis[i].dot(&phis[j]).unwrap();
                assert!((g.entries()[(i, j)] - dot).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn kernel_trick_distance_consistency() {
        let (ds, tpl) = small_setup(5, 21);
        let pre = KernelPrecompute::new(&ds, &tpl).unwrap();
        let phis: Vec<_> = ds.iter().map(|d| phi_embed(d, &tpl).unwrap()).collect();
        for i in 0..ds.len() {
            for j in 0..ds.len() {
                let d2 = phis[i].distance(&phis[j]).unwrap().powi(2);
                let trick = pre.phi_dot[(i, i)] - 2.0 * pre.phi_dot[(i, j)]
                    + pre.phi_dot[(j, j)];
                assert!((d2 - trick).abs() < 1e-10, "({i},{j}): {d2} vs {trick}");
            }
        }
    }

    #[test]
    fn gaussian_kernel_ties_to_embedding_distance() {
        // exp(-gamma SW^2) vs exp(-gamma ||dphi||^2): needs a fine t-axis for
        // the Riemann norm and the exact transport cost to agree this tightly.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let ds: Vec<_> = (0..3).map(|_| random_density(48, &mut rng)).collect();
        let angles = AngleSet::new(8).unwrap();
        let t_grid = crate::radon::aligned_t_grid(48, 48, 1.0, 48).unwrap();
        let tpl = make_template_on(&ds, &angles, t_grid).unwrap();
        let pre = KernelPrecompute::new(&ds, &tpl).unwrap();
        let gamma = 0.05;
        for i in 0..ds.len() {
            for j in 0..ds.len() {
                let k = (-gamma * pre.sw_squared[(i, j)]).exp();
                let d2 = pre.phi_dot[(i, i)] - 2.0 * pre.phi_dot[(i, j)]
                    + pre.phi_dot[(j, j)];
                let tied = (-gamma * d2).exp();
                assert!((k - tied).abs() < 1e-6, "({i},{j}): {k} vs {tied}");
            }
        }
    }

    #[test]
    fn certify_pd_identity_passes_and_indefinite_fails() {
        let id = GramMatrix::new(KernelSpec::EuclidLinear, ndarray::Array2::eye(4)).unwrap();
        assert!(certify_pd(&id, 1e-10).passed());

        let m = ndarray::array![[1.0, 2.0], [2.0, 1.0]];
        let g = GramMatrix::new(KernelSpec::EuclidLinear, m).unwrap();
        match certify_pd(&g, 1e-10) {
            CertOutcome::Fail { value, witness } => {
                assert!((value + 1.0).abs() < 1e-12);
                // The witness achieves the negative quadratic form.
                let mut form = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        form += witness[i] * witness[j] * g.entries()[(i, j)];
                    }
                }
                assert!(form < -0.99);
            }
            CertOutcome::Pass => panic!("indefinite matrix certified PD"),
        }
    }

    #[test]
    fn certify_cnd_zero_matrix_and_euclidean_pass() {
        let zero = Array2::zeros((5, 5));
        assert!(certify_cnd(&zero, 200, 1e-12, 7).unwrap().passed());

        // Squared Euclidean distances of random points are classically CND.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|_| (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let mut d2 = Array2::zeros((10, 10));
        for i in 0..10 {
            for j in 0..10 {
                let dx = pts[i].0 - pts[j].0;
                let dy = pts[i].1 - pts[j].1;
                d2[(i, j)] = dx * dx + dy * dy;
            }
        }
        assert!(certify_cnd(&d2, 1000, 1e-8, 11).unwrap().passed());
    }

    #[test]
    fn circle_geodesic_negative_control_fails_cnd() {
        let d2 = circle_geodesic_squared(4);
        // The alternating vector is the classical witness; the random search
        // finds a positive form as well.
        let c = [1.0, -1.0, 1.0, -1.0];
        let mut form = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                form += c[i] * c[j] * d2[(i, j)];
            }
        }
        assert!(form > 1.0, "analytic witness form {form}");
        match certify_cnd(&d2, 1000, 1e-8, 13).unwrap() {
            CertOutcome::Fail { value, .. } => assert!(value > 0.0),
            CertOutcome::Pass => panic!("negative control passed CND"),
        }
    }
}
