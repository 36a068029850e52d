//! Image ingestion: gray-level co-occurrence densities, labeled dataset
//! loading, and synthetic translate benchmarks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::density::{normalize_2d, DiscreteDensity2D, DEFAULT_EPSILON};
use crate::{Error, Result};

/// Gray-level co-occurrence extraction parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlcmSpec {
    /// Gray quantization levels; the output density is `levels x levels`.
    pub levels: usize,
    /// Pixel offsets accumulated into one matrix.
    pub offsets: Vec<(i32, i32)>,
    /// Count each pair in both orders.
    pub symmetric: bool,
}

impl Default for GlcmSpec {
    fn default() -> Self {
        Self {
            levels: 32,
            offsets: vec![(1, 0), (0, 1), (1, 1), (1, -1)],
            symmetric: true,
        }
    }
}

impl GlcmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "levels {} must be >= 2",
                self.levels
            )));
        }
        if self.offsets.is_empty() || self.offsets.iter().any(|&(dx, dy)| dx == 0 && dy == 0) {
            return Err(Error::InvalidParameter(
                "offsets must be nonempty and nonzero".into(),
            ));
        }
        Ok(())
    }
}

/// Quantize intensities into `levels` uniform bins. The intensity range is
/// auto-detected: values above 1 are treated as `[0, 255]`, otherwise
/// `[0, 1]`.
fn quantize(image: &Array2<f64>, levels: usize) -> Array2<usize> {
    let max = image.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = if max > 1.0 { 255.0 } else { 1.0 };
    image.mapv(|v| {
        let l = (v.max(0.0) / range * levels as f64).floor() as usize;
        l.min(levels - 1)
    })
}

/// Raw co-occurrence counts over all offsets (pre-normalization).
pub fn glcm_counts(image: &Array2<f64>, spec: &GlcmSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let (rows, cols) = image.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::Ingest("empty image".into()));
    }
    for &(dx, dy) in &spec.offsets {
        if dx.unsigned_abs() as usize >= cols || dy.unsigned_abs() as usize >= rows {
            return Err(Error::Ingest(format!(
                "image {rows}x{cols} smaller than offset ({dx},{dy})"
            )));
        }
    }
    let q = quantize(image, spec.levels);
    let mut counts = Array2::zeros((spec.levels, spec.levels));
    for &(dx, dy) in &spec.offsets {
        for i in 0..rows as i32 {
            for j in 0..cols as i32 {
                let (i2, j2) = (i + dy, j + dx);
                if i2 < 0 || i2 >= rows as i32 || j2 < 0 || j2 >= cols as i32 {
                    continue;
                }
                let a = q[(i as usize, j as usize)];
                let b = q[(i2 as usize, j2 as usize)];
                counts[(a, b)] += 1.0;
                if spec.symmetric {
                    counts[(b, a)] += 1.0;
                }
            }
        }
    }
    Ok(counts)
}

/// Normalized co-occurrence density (`levels x levels`, unit pixel size).
pub fn glcm(image: &Array2<f64>, spec: &GlcmSpec, epsilon: f64) -> Result<DiscreteDensity2D> {
    let counts = glcm_counts(image, spec)?;
    normalize_2d(1.0, &counts, epsilon)
}

/// A labeled collection of densities on a shared grid.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub densities: Vec<DiscreteDensity2D>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// Source file per item, when loaded from disk.
    pub sources: Vec<PathBuf>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }
}

/// Record of one ingestion run, written alongside outputs.
#[derive(Debug, Clone, Serialize)]
pub struct IngestManifest {
    pub spec: GlcmSpec,
    pub items: Vec<ManifestItem>,
    pub skipped: Vec<SkippedItem>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestItem {
    pub path: String,
    pub class_name: String,
    pub label: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedItem {
    pub path: String,
    pub reason: String,
}

fn decode_grayscale(path: &Path) -> Result<Array2<f64>> {
    let img = image::open(path)
        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?
        .into_luma8();
    let (w, h) = img.dimensions();
    let mut out = Array2::zeros((h as usize, w as usize));
    for (x, y, p) in img.enumerate_pixels() {
        out[(y as usize, x as usize)] = p.0[0] as f64;
    }
    Ok(out)
}

/// Load a `root/<class_name>/*.{pgm,png}` directory tree into a dataset of
/// co-occurrence densities. Unreadable files are skipped and recorded in
/// the manifest; an empty class is an error. Ordering is lexicographic, so
/// reloading yields a bit-identical dataset.
pub fn load_dataset(root: &Path, spec: &GlcmSpec) -> Result<(LabeledDataset, IngestManifest)> {
    spec.validate()?;
    let mut classes: Vec<PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    classes.sort();
    if classes.is_empty() {
        return Err(Error::Ingest(format!(
            "no class subdirectories under {}",
            root.display()
        )));
    }

    let mut dataset = LabeledDataset {
        densities: Vec::new(),
        labels: Vec::new(),
        class_names: Vec::new(),
        sources: Vec::new(),
    };
    let mut manifest = IngestManifest {
        spec: spec.clone(),
        items: Vec::new(),
        skipped: Vec::new(),
    };

    for (label, class_dir) in classes.iter().enumerate() {
        let class_name = class_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        dataset.class_names.push(class_name.clone());

        let mut files: Vec<PathBuf> = std::fs::read_dir(class_dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.extension()
                    .map(|e| {
                        let e = e.to_string_lossy().to_lowercase();
                        e == "pgm" || e == "png"
                    })
                    .unwrap_or(false)
            })
            .collect();
        files.sort();

        let before = dataset.densities.len();
        for file in files {
            let image = match decode_grayscale(&file) {
                Ok(img) => img,
                Err(e) => {
                    manifest.skipped.push(SkippedItem {
                        path: file.display().to_string(),
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            match glcm(&image, spec, DEFAULT_EPSILON) {
                Ok(d) => {
                    dataset.densities.push(d);
                    dataset.labels.push(label);
                    dataset.sources.push(file.clone());
                    manifest.items.push(ManifestItem {
                        path: file.display().to_string(),
                        class_name: class_name.clone(),
                        label,
                    });
                }
                Err(e) => manifest.skipped.push(SkippedItem {
                    path: file.display().to_string(),
                    reason: e.to_string(),
                }),
            }
        }
        if dataset.densities.len() == before {
            return Err(Error::Ingest(format!(
                "class {class_name} has no decodable images"
            )));
        }
    }
    Ok((dataset, manifest))
}

/// Fraction of mass allowed to wrap around in a circular translation.
const WRAP_TOLERANCE: f64 = 1e-3;

/// Circular integer-pixel translation. Errors if more than a trace of mass
/// would wrap around the grid edges, so in-tolerance results behave like
/// true translations.
pub fn translate_density(
    d: &DiscreteDensity2D,
    dx: i32,
    dy: i32,
) -> Result<DiscreteDensity2D> {
    let (rows, cols) = (d.rows() as i32, d.cols() as i32);
    let values = d.values();
    let area = d.pixel_size() * d.pixel_size();

    // Mass inside the band that wraps.
    let mut wrapped = 0.0;
    if dx != 0 {
        let w = dx.unsigned_abs().min(cols as u32) as usize;
        for i in 0..rows as usize {
            for k in 0..w {
                let j = if dx > 0 { cols as usize - 1 - k } else { k };
                wrapped += values[(i, j)] * area;
            }
        }
    }
    if dy != 0 {
        let h = dy.unsigned_abs().min(rows as u32) as usize;
        for k in 0..h {
            let i = if dy > 0 { rows as usize - 1 - k } else { k };
            for j in 0..cols as usize {
                wrapped += values[(i, j)] * area;
            }
        }
    }
    if wrapped > WRAP_TOLERANCE {
        return Err(Error::Ingest(format!(
            "shift ({dx},{dy}) pushes {wrapped:.3e} mass off-grid (tolerance {WRAP_TOLERANCE:.0e})"
        )));
    }

    let mut out = Array2::zeros(values.dim());
    for i in 0..rows {
        for j in 0..cols {
            let i2 = (i + dy).rem_euclid(rows) as usize;
            let j2 = (j + dx).rem_euclid(cols) as usize;
            out[(i2, j2)] = values[(i as usize, j as usize)];
        }
    }
    DiscreteDensity2D::new(d.pixel_size(), out)
}

/// Build a labeled dataset of translated copies of a base density: one class
/// per shift group, with optional multiplicative noise.
pub fn synth_translates(
    base: &DiscreteDensity2D,
    shift_groups: &[Vec<(i32, i32)>],
    noise: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if shift_groups.is_empty() || shift_groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidParameter(
            "shift groups must be nonempty".into(),
        ));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise {noise} must be >= 0"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dataset = LabeledDataset {
        densities: Vec::new(),
        labels: Vec::new(),
        class_names: Vec::new(),
        sources: Vec::new(),
    };
    for (label, group) in shift_groups.iter().enumerate() {
        dataset.class_names.push(format!("class_{label}"));
        for &(dx, dy) in group {
            let shifted = translate_density(base, dx, dy)?;
            let density = if noise > 0.0 {
                let raw = shifted.values().mapv(|v| {
                    let eta: f64 = rng.gen_range(-1.0..1.0);
                    (v * (1.0 + noise * eta)).max(0.0)
                });
                normalize_2d(base.pixel_size(), &raw, DEFAULT_EPSILON)?
            } else {
                shifted
            };
            dataset.densities.push(density);
            dataset.labels.push(label);
            dataset.sources.push(PathBuf::new());
        }
    }
    Ok(dataset)
}

/// Class histogram of a label vector.
pub fn class_counts(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts
}
