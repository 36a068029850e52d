//! Dataset acquisition for the CLI: density CSV directories, image trees,
//! or the synthetic translate benchmark.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use swkernels::density::{normalize_2d, DiscreteDensity2D};
use swkernels::ingest::{load_dataset, synth_translates, GlcmSpec, IngestManifest};

use crate::config::{DatasetSource, ExperimentConfig};
use crate::CliError;

/// A dataset with per-item provenance, ready for the commands.
pub struct NamedDataset {
    pub densities: Vec<DiscreteDensity2D>,
    pub labels: Option<Vec<usize>>,
    pub class_names: Vec<String>,
    pub names: Vec<String>,
    pub manifest: Option<IngestManifest>,
}

fn load_csv_dir(dir: &Path, epsilon: f64) -> Result<NamedDataset, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("field input: {}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .map(|x| x.eq_ignore_ascii_case("csv"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!(
            "field input: no .csv densities in {}",
            dir.display()
        )));
    }

    let mut densities = Vec::new();
    let mut names = Vec::new();
    let mut first: Option<(PathBuf, DiscreteDensity2D)> = None;
    for path in &files {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::Config(format!("field input: {}: {e}", path.display())))?;
        let (pixel, raw): (f64, Array2<f64>) =
            swkernels::io::read_density_2d(file, &path.display().to_string())
                .map_err(|e| CliError::Config(format!("field input: {e}")))?;
        let d = normalize_2d(pixel, &raw, epsilon)
            .map_err(|e| CliError::Config(format!("field input: {}: {e}", path.display())))?;
        if let Some((first_path, first_density)) = &first {
            if !first_density.same_grid(&d) {
                return Err(CliError::Config(format!(
                    "field input: grid mismatch between {} and {}",
                    first_path.display(),
                    path.display()
                )));
            }
        } else {
            first = Some((path.clone(), d.clone()));
        }
        densities.push(d);
        names.push(
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
    }
    Ok(NamedDataset {
        densities,
        labels: None,
        class_names: Vec::new(),
        names,
        manifest: None,
    })
}

fn load_image_dir(dir: &Path, cfg: &ExperimentConfig) -> Result<NamedDataset, CliError> {
    let spec = GlcmSpec {
        levels: cfg.levels,
        ..GlcmSpec::default()
    };
    let (ds, manifest) =
        load_dataset(dir, &spec).map_err(|e| CliError::Config(format!("field input: {e}")))?;
    let names = ds
        .sources
        .iter()
        .map(|p| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
        .collect();
    Ok(NamedDataset {
        densities: ds.densities,
        labels: Some(ds.labels),
        class_names: ds.class_names,
        names,
        manifest: Some(manifest),
    })
}

/// Gaussian blob on an `n x n` unit-pixel grid.
pub fn gaussian_blob(n: usize, sigma: f64) -> Result<DiscreteDensity2D, CliError> {
    let mut raw = Array2::zeros((n, n));
    let c = (n as f64 - 1.0) / 2.0;
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (j as f64 - c, i as f64 - c);
            raw[(i, j)] = (-0.5 * (x * x + y * y) / (sigma * sigma)).exp();
        }
    }
    normalize_2d(1.0, &raw, 1e-9).map_err(|e| CliError::Config(format!("field synth_rows: {e}")))
}

fn load_synthetic(cfg: &ExperimentConfig) -> Result<NamedDataset, CliError> {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    let seed = cfg
        .seed
        .ok_or_else(|| CliError::Config("field seed: required for synthetic datasets".into()))?;
    let base = gaussian_blob(cfg.synth_rows, cfg.synth_sigma)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = cfg.synth_classes.max(1);
    let mut groups = Vec::with_capacity(k);
    for class in 0..k {
        let cx = ((class as f64 - (k as f64 - 1.0) / 2.0) * cfg.synth_separation as f64)
            .round() as i32;
        let mut shifts = Vec::with_capacity(cfg.synth_per_class);
        for _ in 0..cfg.synth_per_class {
            let dx = cx + rng.gen_range(-cfg.synth_spread..=cfg.synth_spread);
            let dy = rng.gen_range(-cfg.synth_spread..=cfg.synth_spread);
            shifts.push((dx, dy));
        }
        groups.push(shifts);
    }
    let ds = synth_translates(&base, &groups, cfg.synth_noise, seed ^ 0x7ab5)
        .map_err(|e| CliError::Config(format!("field synth_separation: {e}")))?;
    let names = (0..ds.densities.len())
        .map(|i| format!("synth_{i:04}"))
        .collect();
    Ok(NamedDataset {
        densities: ds.densities,
        labels: Some(ds.labels),
        class_names: ds.class_names,
        names,
        manifest: None,
    })
}

/// Load the dataset described by the configuration.
pub fn load(cfg: &ExperimentConfig) -> Result<NamedDataset, CliError> {
    match cfg.source()? {
        DatasetSource::CsvDir(dir) => load_csv_dir(&dir, cfg.epsilon),
        DatasetSource::ImageDir(dir) => load_image_dir(&dir, cfg),
        DatasetSource::Synthetic => load_synthetic(cfg),
    }
}
