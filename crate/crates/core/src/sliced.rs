//! The sliced Wasserstein distance on 2D densities and the explicit,
//! invertible feature map anchored at a template density.
//!
//! The squared distance is the uniform average, over a deterministic angle
//! grid on `[0, pi)`, of squared 1D transport costs between Radon slices.
//! With that probability normalization the distance between a density and a
//! translate of itself is `|v| / sqrt(2)`, and the feature-space norm,
//! averaged the same way, reproduces the distance.

use ndarray::Array2;

use crate::density::{normalize_2d, DiscreteDensity1D, DiscreteDensity2D, Grid1D, DEFAULT_EPSILON};
use crate::radon::{
    default_t_grid, radon_forward_on, radon_inverse_with_pixel, AngleSet, SlicedRepresentation,
};
use crate::transport::{psi_embed, psi_invert, w2_squared_edges, EdgeCdf};
use crate::{Error, Result};

/// Discretized feature map of a density over the template's `(t, theta)`
/// grid. The template's own feature vector is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    angle_set: AngleSet,
    t_grid: Grid1D,
    /// `L x T`.
    values: Array2<f64>,
}

impl FeatureVector {
    /// Wrap raw feature values, checking dimensions.
    pub fn new(angle_set: AngleSet, t_grid: Grid1D, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (angle_set.len(), t_grid.count) {
            return Err(Error::GridMismatch(format!(
                "feature values {:?} vs {} angles x {} t-samples",
                values.dim(),
                angle_set.len(),
                t_grid.count
            )));
        }
        Ok(Self {
            angle_set,
            t_grid,
            values,
        })
    }

    pub fn angle_set(&self) -> &AngleSet {
        &self.angle_set
    }

    pub fn t_grid(&self) -> Grid1D {
        self.t_grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.values.dim() != other.values.dim()
            || (self.t_grid.spacing - other.t_grid.spacing).abs() > 1e-12 * self.t_grid.spacing
        {
            return Err(Error::GridMismatch(format!(
                "feature vectors {:?} vs {:?}",
                self.values.dim(),
                other.values.dim()
            )));
        }
        Ok(())
    }

    /// Angle-averaged Riemann inner product:
    /// `(1/L) sum_l sum_t u v * t_spacing`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let l = self.angle_set.len() as f64;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| a * b)
            .sum::<f64>()
            * self.t_grid.spacing
            / l)
    }

    /// Angle-averaged Riemann norm.
    pub fn norm(&self) -> f64 {
        let l = self.angle_set.len() as f64;
        (self.values.iter().map(|&v| v * v).sum::<f64>() * self.t_grid.spacing / l).sqrt()
    }

    /// Euclidean distance in the feature space.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let l = self.angle_set.len() as f64;
        Ok((self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            * self.t_grid.spacing
            / l)
            .sqrt())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            angle_set: self.angle_set.clone(),
            t_grid: self.t_grid,
            values: self.values.mapv(|v| v * c),
        }
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            angle_set: self.angle_set.clone(),
            t_grid: self.t_grid,
            values: &self.values + &other.values,
        })
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            angle_set: self.angle_set.clone(),
            t_grid: self.t_grid,
            values: &self.values - &other.values,
        })
    }
}

/// Reference density against which features are measured: typically the
/// dataset mean. Holds its own sliced representation and per-angle slice
/// densities so embeddings of many inputs can reuse them.
#[derive(Debug, Clone)]
pub struct Template {
    density: DiscreteDensity2D,
    sliced: SlicedRepresentation,
    slice_densities: Vec<DiscreteDensity1D>,
}

impl Template {
    fn from_density(
        density: DiscreteDensity2D,
        angles: &AngleSet,
        t_grid: Grid1D,
    ) -> Result<Self> {
        let sliced = radon_forward_on(&density, angles, t_grid)?;
        let slice_densities: Vec<DiscreteDensity1D> = (0..angles.len())
            .map(|l| sliced.slice_density(l))
            .collect::<Result<_>>()?;
        Ok(Self {
            density,
            sliced,
            slice_densities,
        })
    }

    pub fn density(&self) -> &DiscreteDensity2D {
        &self.density
    }

    pub fn sliced(&self) -> &SlicedRepresentation {
        &self.sliced
    }

    pub fn angle_set(&self) -> &AngleSet {
        self.sliced.angle_set()
    }

    pub fn t_grid(&self) -> Grid1D {
        self.sliced.t_grid()
    }

    pub fn slice_density(&self, l: usize) -> &DiscreteDensity1D {
        &self.slice_densities[l]
    }

    /// Zero element of the feature space on this template's grid.
    pub fn zero_feature(&self) -> FeatureVector {
        FeatureVector {
            angle_set: self.angle_set().clone(),
            t_grid: self.t_grid(),
            values: Array2::zeros(self.sliced.slices().dim()),
        }
    }
}

/// Build a template from the pointwise mean of a dataset.
pub fn make_template(
    dataset: &[DiscreteDensity2D],
    angles: &AngleSet,
    t_count: usize,
) -> Result<Template> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty dataset".into()))?;
    let t_grid = default_t_grid(first.rows(), first.cols(), first.pixel_size(), t_count)?;
    make_template_on(dataset, angles, t_grid)
}

/// Build a template on an explicit t-grid.
pub fn make_template_on(
    dataset: &[DiscreteDensity2D],
    angles: &AngleSet,
    t_grid: Grid1D,
) -> Result<Template> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty dataset".into()))?;
    let mut mean = Array2::<f64>::zeros(first.values().dim());
    for d in dataset {
        if !d.same_grid(first) {
            return Err(Error::GridMismatch(
                "dataset grids differ for template mean".into(),
            ));
        }
        mean += d.values();
    }
    mean.mapv_inplace(|v| v / dataset.len() as f64);
    let density = normalize_2d(first.pixel_size(), &mean, DEFAULT_EPSILON)?;
    Template::from_density(density, angles, t_grid)
}

/// Build a template from a single fixed density.
pub fn template_from_density(
    density: &DiscreteDensity2D,
    angles: &AngleSet,
    t_count: usize,
) -> Result<Template> {
    let t_grid = default_t_grid(
        density.rows(),
        density.cols(),
        density.pixel_size(),
        t_count,
    )?;
    Template::from_density(density.clone(), angles, t_grid)
}

/// Per-angle edge CDFs of one density's sliced representation; the
/// preprocessing that makes pairwise distance assembly `O(L * T)` per pair.
#[derive(Debug, Clone)]
pub struct SlicedCdfs {
    edges: Vec<EdgeCdf>,
}

impl SlicedCdfs {
    pub fn new(sliced: &SlicedRepresentation) -> Result<Self> {
        let edges = (0..sliced.angle_set().len())
            .map(|l| Ok(EdgeCdf::new(&sliced.slice_density(l)?)))
            .collect::<Result<_>>()?;
        Ok(Self { edges })
    }

    pub fn angle_count(&self) -> usize {
        self.edges.len()
    }
}

/// Squared sliced Wasserstein distance from precomputed per-angle CDFs.
pub fn sw_squared_precomputed(a: &SlicedCdfs, b: &SlicedCdfs) -> Result<f64> {
    if a.angle_count() != b.angle_count() {
        return Err(Error::GridMismatch(format!(
            "angle counts {} vs {}",
            a.angle_count(),
            b.angle_count()
        )));
    }
    let mut acc = 0.0;
    for (ea, eb) in a.edges.iter().zip(&b.edges) {
        acc += w2_squared_edges(ea, eb);
    }
    Ok(acc / a.angle_count() as f64)
}

/// Sliced Wasserstein distance between two densities on the same pixel grid.
pub fn sw_distance(
    a: &DiscreteDensity2D,
    b: &DiscreteDensity2D,
    angles: &AngleSet,
    t_count: usize,
) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch(format!(
            "{}x{} px {} vs {}x{} px {}",
            a.rows(),
            a.cols(),
            a.pixel_size(),
            b.rows(),
            b.cols(),
            b.pixel_size()
        )));
    }
    let t_grid = default_t_grid(a.rows(), a.cols(), a.pixel_size(), t_count)?;
    sw_distance_on(a, b, angles, t_grid)
}

/// Sliced Wasserstein distance on an explicit t-grid.
pub fn sw_distance_on(
    a: &DiscreteDensity2D,
    b: &DiscreteDensity2D,
    angles: &AngleSet,
    t_grid: Grid1D,
) -> Result<f64> {
    let sa = SlicedCdfs::new(&radon_forward_on(a, angles, t_grid)?)?;
    let sb = SlicedCdfs::new(&radon_forward_on(b, angles, t_grid)?)?;
    sw_squared_precomputed(&sa, &sb).map(f64::sqrt)
}

/// Pairwise squared sliced Wasserstein distances over a dataset, with each
/// density sliced exactly once.
pub fn pairwise_sw_squared(
    dataset: &[DiscreteDensity2D],
    angles: &AngleSet,
    t_grid: Grid1D,
) -> Result<Array2<f64>> {
    let n = dataset.len();
    let first = dataset
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty dataset".into()))?;
    for d in dataset {
        if !d.same_grid(first) {
            return Err(Error::GridMismatch("dataset grids differ".into()));
        }
    }
    let cdfs: Vec<SlicedCdfs> = dataset
        .iter()
        .map(|d| SlicedCdfs::new(&radon_forward_on(d, angles, t_grid)?))
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sw_squared_precomputed(&cdfs[i], &cdfs[j])?;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Embed a density into the template's feature space: row `theta` of the
/// result is `(f_theta(t) - t) * sqrt(template slice at theta)`.
pub fn phi_embed(density: &DiscreteDensity2D, template: &Template) -> Result<FeatureVector> {
    if !density.same_grid(template.density()) {
        return Err(Error::GridMismatch(
            "density grid differs from template".into(),
        ));
    }
    let sliced = radon_forward_on(density, template.angle_set(), template.t_grid())?;
    phi_embed_sliced(&sliced, template)
}

/// Embed an already-sliced density (its slices must share the template grid).
pub fn phi_embed_sliced(
    sliced: &SlicedRepresentation,
    template: &Template,
) -> Result<FeatureVector> {
    let l_count = template.angle_set().len();
    if sliced.angle_set() != template.angle_set() {
        return Err(Error::GridMismatch("angle sets differ".into()));
    }
    let t_grid = template.t_grid();
    let mut values = Array2::zeros((l_count, t_grid.count));
    for l in 0..l_count {
        let slice = sliced.slice_density(l)?;
        let v = psi_embed(&slice, template.slice_density(l))?;
        for (ti, &x) in v.iter().enumerate() {
            values[(l, ti)] = x;
        }
    }
    Ok(FeatureVector {
        angle_set: template.angle_set().clone(),
        t_grid,
        values,
    })
}

/// Invert a feature vector back to a 2D density: per-angle transport
/// inversion recovers the sliced representation, filtered back-projection
/// assembles the density.
pub fn phi_invert(v: &FeatureVector, template: &Template) -> Result<DiscreteDensity2D> {
    let l_count = template.angle_set().len();
    let t_grid = template.t_grid();
    if v.values.dim() != (l_count, t_grid.count) {
        return Err(Error::GridMismatch(format!(
            "feature {:?} vs template {}x{}",
            v.values.dim(),
            l_count,
            t_grid.count
        )));
    }
    let mut slices = Array2::zeros((l_count, t_grid.count));
    for l in 0..l_count {
        let row: Vec<f64> = v.values.row(l).to_vec();
        let rec = psi_invert(&row, template.slice_density(l)).map_err(|e| {
            Error::AngleInversion {
                angle: l,
                theta: template.angle_set().angles()[l],
                source: Box::new(e),
            }
        })?;
        for (ti, &x) in rec.values().iter().enumerate() {
            slices[(l, ti)] = x;
        }
    }
    let sliced = SlicedRepresentation::new(template.angle_set().clone(), t_grid, slices)?;
    radon_inverse_with_pixel(
        &sliced,
        template.density().rows(),
        template.density().cols(),
        Some(template.density().pixel_size()),
    )
}
