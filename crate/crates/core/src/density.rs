//! Discrete probability densities on regular grids.
//!
//! Densities are stored as per-cell density values (mass per unit length or
//! area); Riemann sums with the grid spacing recover total mass, which every
//! constructor pins to 1. Strict positivity, required by all transport
//! machinery downstream, is enforced by blending in a small uniform component
//! before normalizing.

use ndarray::Array2;

use crate::{Error, Result};

/// Relative weight of the uniform component blended in by [`normalize_1d`] /
/// [`normalize_2d`] when no explicit epsilon is given.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Tolerance on the unit-mass invariant.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Pairwise summation; keeps the unit-mass invariant inside `MASS_TOLERANCE`
/// even for large grids.
pub(crate) fn stable_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    stable_sum(&values[..mid]) + stable_sum(&values[mid..])
}

/// A regular one-dimensional grid of sample positions `origin + k * spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub origin: f64,
    pub spacing: f64,
    pub count: usize,
}

impl Grid1D {
    pub fn new(origin: f64, spacing: f64, count: usize) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing {spacing} must be > 0")));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("count {count} must be >= 2")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            origin,
            spacing,
            count,
        })
    }

    /// Grid with `count` cell centers covering `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidGrid(format!("empty interval [{lo}, {hi}]")));
        }
        let spacing = (hi - lo) / count as f64;
        Self::new(lo + spacing / 2.0, spacing, count)
    }

    #[inline]
    pub fn position(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.spacing
    }

    pub fn last_position(&self) -> f64 {
        self.position(self.count - 1)
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|k| self.position(k))
    }
}

/// A strictly positive discrete density on a [`Grid1D`].
///
/// `values[k]` is the density (mass per unit length) at `grid.position(k)`;
/// `sum(values) * spacing == 1` within [`MASS_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDensity1D {
    grid: Grid1D,
    values: Vec<f64>,
}

impl DiscreteDensity1D {
    /// Wrap already-normalized values, checking the invariants.
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::LengthMismatch(values.len(), grid.count));
        }
        for (k, &v) in values.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeMass(k));
            }
        }
        let mass = stable_sum(&values) * grid.spacing;
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidGrid(format!(
                "total mass {mass} deviates from 1 by more than {MASS_TOLERANCE}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mass of cell `k`, i.e. `values[k] * spacing`.
    #[inline]
    pub fn cell_mass(&self, k: usize) -> f64 {
        self.values[k] * self.grid.spacing
    }

    /// True if every entry is strictly positive.
    pub fn strictly_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }
}

/// Normalize a raw nonnegative 1D grid into a density.
///
/// Blends `epsilon` (relative to the raw total mass) of the uniform density
/// into the input before rescaling to unit mass, so the result is strictly
/// positive whenever `epsilon > 0`.
pub fn normalize_1d(grid: Grid1D, raw: &[f64], epsilon: f64) -> Result<DiscreteDensity1D> {
    if raw.len() != grid.count {
        return Err(Error::LengthMismatch(raw.len(), grid.count));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} must be >= 0"
        )));
    }
    for (k, &v) in raw.iter().enumerate() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::NegativeMass(k));
        }
    }
    let total = stable_sum(raw) * grid.spacing;
    if total <= 0.0 {
        return Err(Error::DegenerateDensity);
    }
    let uniform = 1.0 / (grid.count as f64 * grid.spacing);
    let mixed: Vec<f64> = raw
        .iter()
        .map(|&v| v + epsilon * total * uniform)
        .collect();
    let denom = stable_sum(&mixed) * grid.spacing;
    let values: Vec<f64> = mixed.into_iter().map(|v| v / denom).collect();
    DiscreteDensity1D::new(grid, values)
}

/// A strictly positive discrete density on a centered 2D pixel grid.
///
/// Pixel `(i, j)` sits at `x = (j - (cols-1)/2) * pixel_size`,
/// `y = (i - (rows-1)/2) * pixel_size`; `sum(values) * pixel_size^2 == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDensity2D {
    rows: usize,
    cols: usize,
    pixel_size: f64,
    values: Array2<f64>,
}

impl DiscreteDensity2D {
    pub fn new(pixel_size: f64, values: Array2<f64>) -> Result<Self> {
        if !(pixel_size > 0.0) || !pixel_size.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "pixel size {pixel_size} must be > 0"
            )));
        }
        let (rows, cols) = values.dim();
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidGrid(format!(
                "grid {rows}x{cols} must be at least 2x2"
            )));
        }
        for (k, &v) in values.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeMass(k));
            }
        }
        let mass = stable_sum(values.as_slice().expect("standard layout")) * pixel_size * pixel_size;
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidGrid(format!(
                "total mass {mass} deviates from 1 by more than {MASS_TOLERANCE}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            pixel_size,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// x coordinate of column `j` (grid centered at the origin).
    #[inline]
    pub fn x_coord(&self, j: usize) -> f64 {
        (j as f64 - (self.cols as f64 - 1.0) / 2.0) * self.pixel_size
    }

    /// y coordinate of row `i`.
    #[inline]
    pub fn y_coord(&self, i: usize) -> f64 {
        (i as f64 - (self.rows as f64 - 1.0) / 2.0) * self.pixel_size
    }

    /// Same shape, pixel size and dimensions.
    pub fn same_grid(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && (self.pixel_size - other.pixel_size).abs() <= f64::EPSILON * self.pixel_size
    }

    /// L1 distance `sum |a - b| * pixel_area`; both must share a grid.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch(format!(
                "{}x{} px {} vs {}x{} px {}",
                self.rows, self.cols, self.pixel_size, other.rows, other.cols, other.pixel_size
            )));
        }
        let area = self.pixel_size * self.pixel_size;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| (a - b).abs())
            .sum::<f64>()
            * area)
    }
}

/// Normalize a raw nonnegative 2D grid into a density; see [`normalize_1d`].
pub fn normalize_2d(pixel_size: f64, raw: &Array2<f64>, epsilon: f64) -> Result<DiscreteDensity2D> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} must be >= 0"
        )));
    }
    for (k, &v) in raw.iter().enumerate() {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::NegativeMass(k));
        }
    }
    let area = pixel_size * pixel_size;
    let slice = raw
        .as_slice()
        .ok_or_else(|| Error::InvalidGrid("non-contiguous input".into()))?;
    let total = stable_sum(slice) * area;
    if total <= 0.0 {
        return Err(Error::DegenerateDensity);
    }
    let uniform = 1.0 / (raw.len() as f64 * area);
    let mixed = raw.mapv(|v| v + epsilon * total * uniform);
    let denom = stable_sum(mixed.as_slice().expect("standard layout")) * area;
    DiscreteDensity2D::new(pixel_size, mixed.mapv(|v| v / denom))
}

/// Cumulative distribution of a [`DiscreteDensity1D`].
///
/// Inclusive convention: `values[k]` is the mass of cells `0..=k`, so the
/// last value is 1. Since cell `k` covers `[position(k) - spacing/2,
/// position(k) + spacing/2]`, the stored value is the exact cumulative mass
/// at the cell's right edge; evaluation between edges is piecewise linear,
/// starting from zero at the left edge of cell 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf1D {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Cdf1D {
    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear evaluation at an arbitrary position.
    pub fn at(&self, x: f64) -> f64 {
        let g = self.grid;
        let left = g.origin - g.spacing / 2.0;
        let f = (x - left) / g.spacing;
        if f <= 0.0 {
            return 0.0;
        }
        if f >= g.count as f64 {
            return *self.values.last().expect("count >= 2");
        }
        let k = f.floor() as usize;
        let t = f - k as f64;
        let lo = if k == 0 { 0.0 } else { self.values[k - 1] };
        lo + t * (self.values[k] - lo)
    }
}

/// Inclusive cumulative sum of a density. Accumulation is clamped to 1 so
/// float drift cannot push a cumulative value above the total mass.
pub fn cdf(d: &DiscreteDensity1D) -> Cdf1D {
    let spacing = d.grid().spacing;
    let mut acc = 0.0;
    let values: Vec<f64> = d
        .values()
        .iter()
        .map(|&v| {
            acc = (acc + v * spacing).min(1.0);
            acc
        })
        .collect();
    Cdf1D {
        grid: d.grid(),
        values,
    }
}

/// Smallest position whose CDF reaches `p`, refined by linear interpolation
/// between the bracketing cell edges and clamped to the grid's positions.
pub fn quantile(c: &Cdf1D, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidProbability(p));
    }
    let g = c.grid;
    let last = *c.values.last().expect("count >= 2");
    let p = p.min(last);
    let k = c.values.partition_point(|&v| v < p);
    let k = k.min(c.values.len() - 1);
    let hi = c.values[k];
    let lo = if k == 0 { 0.0 } else { c.values[k - 1] };
    // Knot k sits at the right edge of cell k.
    let hi_pos = g.position(k) + g.spacing / 2.0;
    let pos = if hi <= lo {
        hi_pos
    } else {
        hi_pos - g.spacing + (p - lo) / (hi - lo) * g.spacing
    };
    Ok(pos.clamp(g.origin, g.last_position()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn unit_grid(n: usize) -> Grid1D {
        Grid1D::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn normalize_uniform_identity() {
        let g = Grid1D::new(0.0, 0.5, 8).unwrap();
        let d = normalize_1d(g, &[1.0; 8], 0.0).unwrap();
        for &v in d.values() {
            assert!((v - 1.0 / (8.0 * 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_epsilon_blend_matches_arithmetic() {
        // raw = [0,1,0,0] on unit spacing, eps = 0.04: proportional to
        // [0.01, 1.01, 0.01, 0.01], rescaled to unit mass.
        let g = unit_grid(4);
        let d = normalize_1d(g, &[0.0, 1.0, 0.0, 0.0], 0.04).unwrap();
        let expect = [0.01, 1.01, 0.01, 0.01];
        let total: f64 = expect.iter().sum();
        for (v, e) in d.values().iter().zip(expect) {
            assert!((v - e / total).abs() < 1e-14, "{v} vs {e}");
        }
    }

    #[test]
    fn normalize_rejects_all_zero() {
        let g = unit_grid(4);
        assert!(matches!(
            normalize_1d(g, &[0.0; 4], 0.1),
            Err(Error::DegenerateDensity)
        ));
    }

    #[test]
    fn normalize_rejects_negative() {
        let g = unit_grid(4);
        assert!(matches!(
            normalize_1d(g, &[0.5, -0.1, 0.2, 0.1], 0.0),
            Err(Error::NegativeMass(1))
        ));
    }

    #[test]
    fn cdf_point_mass_steps() {
        let g = unit_grid(6);
        let mut raw = [0.0; 6];
        raw[3] = 1.0;
        let d = normalize_1d(g, &raw, 0.0).unwrap();
        let c = cdf(&d);
        for (k, &v) in c.values().iter().enumerate() {
            let expect = if k < 3 { 0.0 } else { 1.0 };
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_uniform_fractions() {
        let n = 10;
        let d = normalize_1d(unit_grid(n), &vec![1.0; n], 0.0).unwrap();
        let c = cdf(&d);
        for (k, &v) in c.values().iter().enumerate() {
            assert!((v - (k + 1) as f64 / n as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn cdf_standard_normal_half_at_zero() {
        let n = 512;
        let g = Grid1D::covering(-6.0, 6.0, n).unwrap();
        let raw: Vec<f64> = g
            .positions()
            .map(|x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
            .collect();
        let d = normalize_1d(g, &raw, 0.0).unwrap();
        let c = cdf(&d);
        assert!((c.at(0.0) - 0.5).abs() < 2e-3);
    }

    #[test]
    fn quantile_median_of_symmetric_density() {
        let g = Grid1D::covering(-3.0, 3.0, 128).unwrap();
        let raw: Vec<f64> = g.positions().map(|x| (-x * x).exp()).collect();
        let d = normalize_1d(g, &raw, 0.0).unwrap();
        let m = quantile(&cdf(&d), 0.5).unwrap();
        assert!(m.abs() <= g.spacing);
    }

    #[test]
    fn quantile_uniform_quarter() {
        let g = Grid1D::covering(0.0, 1.0, 100).unwrap();
        let d = normalize_1d(g, &vec![1.0; 100], 0.0).unwrap();
        let q = quantile(&cdf(&d), 0.25).unwrap();
        assert!((q - 0.25).abs() < 1e-2, "{q}");
    }

    #[test]
    fn quantile_one_is_last_position_or_earlier() {
        let g = unit_grid(5);
        let d = normalize_1d(g, &[1.0, 1.0, 1.0, 0.0, 0.0], 0.0).unwrap();
        // CDF saturates at the right edge of cell 2, earlier than the last
        // grid position.
        let q = quantile(&cdf(&d), 1.0).unwrap();
        assert!((q - (g.position(2) + g.spacing / 2.0)).abs() < 1e-12);
        assert!(q < g.last_position());

        let full = normalize_1d(g, &[1.0; 5], 0.0).unwrap();
        let q = quantile(&cdf(&full), 1.0).unwrap();
        assert!((q - g.last_position()).abs() < 1e-12);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        let d = normalize_1d(unit_grid(4), &[1.0; 4], 0.0).unwrap();
        assert!(quantile(&cdf(&d), -0.1).is_err());
        assert!(quantile(&cdf(&d), 1.1).is_err());
    }

    #[test]
    fn normalize_2d_grid_and_mass() {
        let raw = array![[0.0, 2.0], [1.0, 1.0]];
        let d = normalize_2d(0.5, &raw, 1e-8).unwrap();
        let mass: f64 = d.values().iter().sum::<f64>() * 0.25;
        assert!((mass - 1.0).abs() < 1e-13);
        assert!(d.values().iter().all(|&v| v > 0.0));
        assert_eq!(d.x_coord(0), -0.25);
        assert_eq!(d.y_coord(1), 0.25);
    }

    proptest! {
        #[test]
        fn unit_mass_and_monotone_cdf(raw in proptest::collection::vec(0.0f64..10.0, 8..64), eps in 0.0f64..0.1) {
            let g = Grid1D::new(-1.0, 0.25, raw.len()).unwrap();
            prop_assume!(raw.iter().any(|&v| v > 0.0));
            let d = normalize_1d(g, &raw, eps).unwrap();
            let mass = stable_sum(d.values()) * g.spacing;
            prop_assert!((mass - 1.0).abs() <= MASS_TOLERANCE);
            let c = cdf(&d);
            for w in c.values().windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-15);
            }
            prop_assert!((c.values().last().unwrap() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn quantile_cdf_galois_inversion(raw in proptest::collection::vec(0.01f64..10.0, 8..64)) {
            let g = Grid1D::new(0.0, 0.5, raw.len()).unwrap();
            let d = normalize_1d(g, &raw, 1e-6).unwrap();
            let c = cdf(&d);
            for k in 0..raw.len() {
                let x = g.position(k);
                let q = quantile(&c, c.values()[k]).unwrap();
                // Galois-style bound plus round-trip identity on strictly
                // positive densities.
                prop_assert!(q <= x + g.spacing + 1e-12);
                prop_assert!((q - x).abs() <= g.spacing + 1e-12);
            }
        }
    }
}
