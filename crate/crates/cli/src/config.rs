//! Flat key=value experiment configuration with command-line overrides.
//!
//! Every run writes its resolved configuration next to the outputs, so a
//! result directory always records exactly what produced it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

/// How the dataset is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// Directory of 2D density CSV files.
    CsvDir(PathBuf),
    /// Directory tree of class-labeled grayscale images.
    ImageDir(PathBuf),
    /// Synthetic translate benchmark.
    Synthetic,
}

/// Template policy: dataset mean or an explicit density file.
#[derive(Debug, Clone, PartialEq)]
pub enum TemplatePolicy {
    DatasetMean,
    File(PathBuf),
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub input: Option<PathBuf>,
    pub dataset_kind: String,
    pub template: TemplatePolicy,
    pub angles: usize,
    /// 0 means "derive from the grid" (max dimension rounded up to even).
    pub t_count: usize,
    pub levels: usize,
    pub epsilon: f64,
    pub kernels: Vec<String>,
    /// Empty means "auto": powers of ten scaled by the median squared
    /// distance.
    pub gammas: Vec<f64>,
    pub degrees: Vec<u32>,
    pub offsets: Vec<u8>,
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub repeats: usize,
    pub seed: Option<u64>,
    pub k: usize,
    pub restarts: usize,
    pub trials: usize,
    pub gamma: Option<f64>,
    pub features: Option<PathBuf>,
    pub out: PathBuf,
    // Synthetic-benchmark parameters.
    pub synth_rows: usize,
    pub synth_sigma: f64,
    pub synth_classes: usize,
    pub synth_per_class: usize,
    pub synth_spread: i32,
    pub synth_separation: i32,
    pub synth_noise: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            input: None,
            dataset_kind: "auto".into(),
            template: TemplatePolicy::DatasetMean,
            angles: 180,
            t_count: 0,
            levels: 32,
            epsilon: 1e-8,
            kernels: vec![
                "sw_gaussian".into(),
                "sw_poly".into(),
                "euclid_rbf".into(),
                "euclid_linear".into(),
            ],
            gammas: Vec::new(),
            degrees: vec![1, 2, 3],
            offsets: vec![1],
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            folds: 5,
            repeats: 20,
            seed: None,
            k: 2,
            restarts: 10,
            trials: 1000,
            gamma: None,
            features: None,
            out: PathBuf::from("swk_out"),
            synth_rows: 48,
            synth_sigma: 2.5,
            synth_classes: 2,
            synth_per_class: 40,
            synth_spread: 1,
            synth_separation: 10,
            synth_noise: 0.02,
        }
    }
}

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("field {key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_field(key, s.trim()))
        .collect()
}

impl ExperimentConfig {
    /// Parse a flat `key=value` config file (`#` lines are comments).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("field config: {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "field config: {} line {}: expected key=value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Apply one key=value assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "dataset" => match value {
                "auto" | "csv" | "images" | "synthetic" => {
                    self.dataset_kind = value.to_string()
                }
                other => {
                    return Err(CliError::Config(format!(
                        "field dataset: unknown value {other} (auto | csv | images | synthetic)"
                    )))
                }
            },
            "template" => {
                self.template = if value == "dataset_mean" {
                    TemplatePolicy::DatasetMean
                } else if let Some(p) = value.strip_prefix("file:") {
                    TemplatePolicy::File(PathBuf::from(p))
                } else {
                    return Err(CliError::Config(format!(
                        "field template: expected dataset_mean or file:<path>, got {value}"
                    )));
                };
            }
            "angles" => self.angles = parse_field(key, value)?,
            "t_count" => self.t_count = parse_field(key, value)?,
            "levels" => self.levels = parse_field(key, value)?,
            "epsilon" => self.epsilon = parse_field(key, value)?,
            "kernels" => {
                self.kernels = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "gammas" => {
                if value == "auto" {
                    self.gammas = Vec::new();
                } else {
                    self.gammas = parse_list(key, value)?;
                }
            }
            "degrees" => self.degrees = parse_list(key, value)?,
            "offsets" => self.offsets = parse_list(key, value)?,
            "c_grid" => self.c_grid = parse_list(key, value)?,
            "folds" => self.folds = parse_field(key, value)?,
            "repeats" => self.repeats = parse_field(key, value)?,
            "seed" => self.seed = Some(parse_field(key, value)?),
            "k" => self.k = parse_field(key, value)?,
            "restarts" => self.restarts = parse_field(key, value)?,
            "trials" => self.trials = parse_field(key, value)?,
            "gamma" => self.gamma = Some(parse_field(key, value)?),
            "features" => self.features = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "synth_rows" => self.synth_rows = parse_field(key, value)?,
            "synth_sigma" => self.synth_sigma = parse_field(key, value)?,
            "synth_classes" => self.synth_classes = parse_field(key, value)?,
            "synth_per_class" => self.synth_per_class = parse_field(key, value)?,
            "synth_spread" => self.synth_spread = parse_field(key, value)?,
            "synth_separation" => self.synth_separation = parse_field(key, value)?,
            "synth_noise" => self.synth_noise = parse_field(key, value)?,
            other => {
                return Err(CliError::Config(format!("field {other}: unknown key")));
            }
        }
        Ok(())
    }

    /// Resolve the dataset source from `input` and `dataset_kind`. With
    /// `auto`, a directory containing any `.csv` file is treated as a
    /// density directory, otherwise as an image tree.
    pub fn source(&self) -> Result<DatasetSource, CliError> {
        if self.dataset_kind == "synthetic" || (self.dataset_kind == "auto" && self.input.is_none())
        {
            return Ok(DatasetSource::Synthetic);
        }
        let input = self.input.clone().ok_or_else(|| {
            CliError::Config(format!(
                "field input: required for dataset={}",
                self.dataset_kind
            ))
        })?;
        match self.dataset_kind.as_str() {
            "csv" => Ok(DatasetSource::CsvDir(input)),
            "images" => Ok(DatasetSource::ImageDir(input)),
            "auto" => {
                let has_csv = std::fs::read_dir(&input)
                    .map_err(|e| {
                        CliError::Config(format!(
                            "field input: {}: {e}",
                            input.display()
                        ))
                    })?
                    .filter_map(|e| e.ok())
                    .any(|e| {
                        e.path()
                            .extension()
                            .map(|x| x.eq_ignore_ascii_case("csv"))
                            .unwrap_or(false)
                    });
                if has_csv {
                    Ok(DatasetSource::CsvDir(input))
                } else {
                    Ok(DatasetSource::ImageDir(input))
                }
            }
            other => Err(CliError::Config(format!(
                "field dataset: unknown value {other}"
            ))),
        }
    }

    /// Check path existence and cross-field constraints; `randomized` tasks
    /// must carry a seed.
    pub fn validate(&self, randomized: bool) -> Result<(), CliError> {
        match self.source()? {
            DatasetSource::CsvDir(p) | DatasetSource::ImageDir(p) => {
                if !p.is_dir() {
                    return Err(CliError::Config(format!(
                        "field input: {} is not a directory",
                        p.display()
                    )));
                }
            }
            DatasetSource::Synthetic => {
                if self.seed.is_none() {
                    return Err(CliError::Config(
                        "field seed: required for synthetic datasets".into(),
                    ));
                }
                if self.synth_classes < 1 || self.synth_per_class < 1 {
                    return Err(CliError::Config(
                        "field synth_classes/synth_per_class: must be >= 1".into(),
                    ));
                }
            }
        }
        if let TemplatePolicy::File(p) = &self.template {
            if !p.is_file() {
                return Err(CliError::Config(format!(
                    "field template: {} is not a file",
                    p.display()
                )));
            }
        }
        if let Some(f) = &self.features {
            if !f.is_file() {
                return Err(CliError::Config(format!(
                    "field features: {} is not a file",
                    f.display()
                )));
            }
        }
        if randomized && self.seed.is_none() {
            return Err(CliError::Config(
                "field seed: required for randomized tasks".into(),
            ));
        }
        if self.angles == 0 {
            return Err(CliError::Config("field angles: must be >= 1".into()));
        }
        if self.levels < 2 {
            return Err(CliError::Config("field levels: must be >= 2".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(CliError::Config("field epsilon: must be >= 0".into()));
        }
        Ok(())
    }

    /// Canonical key=value rendering, sorted by key.
    pub fn resolved_text(&self, task: &str) -> String {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        map.insert("task", task.to_string());
        match self.source() {
            Ok(DatasetSource::CsvDir(p)) => {
                map.insert("dataset", "csv".into());
                map.insert("input", p.display().to_string());
            }
            Ok(DatasetSource::ImageDir(p)) => {
                map.insert("dataset", "images".into());
                map.insert("input", p.display().to_string());
            }
            _ => {
                map.insert("dataset", "synthetic".into());
            }
        }
        map.insert(
            "template",
            match &self.template {
                TemplatePolicy::DatasetMean => "dataset_mean".into(),
                TemplatePolicy::File(p) => format!("file:{}", p.display()),
            },
        );
        map.insert("angles", self.angles.to_string());
        map.insert("t_count", self.t_count.to_string());
        map.insert("levels", self.levels.to_string());
        map.insert("epsilon", format!("{}", self.epsilon));
        map.insert("kernels", self.kernels.join(","));
        map.insert(
            "gammas",
            if self.gammas.is_empty() {
                "auto".into()
            } else {
                self.gammas
                    .iter()
                    .map(|g| format!("{g}"))
                    .collect::<Vec<_>>()
                    .join(",")
            },
        );
        map.insert(
            "degrees",
            self.degrees
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        map.insert(
            "offsets",
            self.offsets
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        map.insert(
            "c_grid",
            self.c_grid
                .iter()
                .map(|c| format!("{c}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        map.insert("folds", self.folds.to_string());
        map.insert("repeats", self.repeats.to_string());
        if let Some(seed) = self.seed {
            map.insert("seed", seed.to_string());
        }
        map.insert("k", self.k.to_string());
        map.insert("restarts", self.restarts.to_string());
        map.insert("trials", self.trials.to_string());
        if let Some(g) = self.gamma {
            map.insert("gamma", format!("{g}"));
        }
        if let Some(f) = &self.features {
            map.insert("features", f.display().to_string());
        }
        map.insert("out", self.out.display().to_string());
        map.insert("synth_rows", self.synth_rows.to_string());
        map.insert("synth_sigma", format!("{}", self.synth_sigma));
        map.insert("synth_classes", self.synth_classes.to_string());
        map.insert("synth_per_class", self.synth_per_class.to_string());
        map.insert("synth_spread", self.synth_spread.to_string());
        map.insert("synth_separation", self.synth_separation.to_string());
        map.insert("synth_noise", format!("{}", self.synth_noise));

        let mut text = String::new();
        for (k, v) in map {
            let _ = writeln!(text, "{k}={v}");
        }
        text
    }
}
