//! The seven experiment commands. Every command is a pure function of
//! (config, input files): outputs are written with stable ordering and
//! shortest round-trip float formatting, so reruns are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use ndarray::Array2;
use serde::Serialize;

use swkernels::density::{normalize_2d, DiscreteDensity2D};
use swkernels::kernels::{
    certify_cnd, certify_pd, circle_geodesic_squared, gram_from_precomputed, CertOutcome,
    GramMatrix, KernelPrecompute, KernelSpec,
};
use swkernels::learn::{
    auto_gamma_grid, cross_validate, kernel_kmeans, kpca_fit, v_measure, FamilySpec,
};
use swkernels::radon::{default_t_count, AngleSet};
use swkernels::sliced::{
    make_template, phi_embed, phi_invert, template_from_density, Template,
};
use swkernels::transport::wasserstein2_1d_squared;

use crate::config::{ExperimentConfig, TemplatePolicy};
use crate::dataset::{load, NamedDataset};
use crate::CliError;

fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::Runtime)
}

fn prepare_out(cfg: &ExperimentConfig, task: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))
        .map_err(CliError::Runtime)?;
    write_file(&cfg.out.join("resolved_config.txt"), &cfg.resolved_text(task))
}

fn build_template(cfg: &ExperimentConfig, ds: &NamedDataset) -> Result<Template, CliError> {
    let first = ds
        .densities
        .first()
        .ok_or_else(|| CliError::Config("field input: empty dataset".into()))?;
    let t_count = if cfg.t_count == 0 {
        default_t_count(first.rows(), first.cols())
    } else {
        cfg.t_count
    };
    let angles = AngleSet::new(cfg.angles).map_err(runtime)?;
    match &cfg.template {
        TemplatePolicy::DatasetMean => {
            make_template(&ds.densities, &angles, t_count).map_err(runtime)
        }
        TemplatePolicy::File(path) => {
            let file = std::fs::File::open(path).map_err(runtime)?;
            let (pixel, raw) =
                swkernels::io::read_density_2d(file, &path.display().to_string())
                    .map_err(runtime)?;
            let density = normalize_2d(pixel, &raw, cfg.epsilon).map_err(runtime)?;
            if !density.same_grid(first) {
                return Err(CliError::Config(format!(
                    "field template: {} grid differs from dataset",
                    path.display()
                )));
            }
            template_from_density(&density, &angles, t_count).map_err(runtime)
        }
    }
}

fn resolved_gammas(cfg: &ExperimentConfig, median_sq: f64) -> Vec<f64> {
    if cfg.gammas.is_empty() {
        auto_gamma_grid(median_sq)
    } else {
        cfg.gammas.clone()
    }
}

/// Pairwise sliced Wasserstein distance matrix.
pub fn cmd_distance(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate(false)?;
    let ds = load(cfg)?;
    if ds.densities.len() < 2 {
        return Err(CliError::Config(
            "field input: need at least 2 densities".into(),
        ));
    }
    prepare_out(cfg, "distance")?;
    let tpl = build_template(cfg, &ds)?;
    let sw_sq = swkernels::sliced::pairwise_sw_squared(
        &ds.densities,
        tpl.angle_set(),
        tpl.t_grid(),
    )
    .map_err(runtime)?;

    let n = ds.densities.len();
    let mut text = String::new();
    let _ = writeln!(text, "# sw_distance n={n} angles={}", cfg.angles);
    let _ = writeln!(text, "# items: {}", ds.names.join(","));
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| format!("{}", sw_sq[(i, j)].sqrt()))
            .collect();
        let _ = writeln!(text, "{}", row.join(","));
    }
    write_file(&cfg.out.join("sw_distance.csv"), &text)
}

/// Single-parameter kernel specs for the PCA / cluster tasks.
fn point_specs(cfg: &ExperimentConfig, pre: &KernelPrecompute) -> Result<Vec<KernelSpec>, CliError> {
    let mut specs = Vec::new();
    for kind in &cfg.kernels {
        let spec = match kind.as_str() {
            "sw_gaussian" => KernelSpec::SwGaussian {
                gamma: cfg
                    .gamma
                    .unwrap_or_else(|| 1.0 / pre.median_sw_squared().max(f64::MIN_POSITIVE)),
            },
            "sw_poly" => KernelSpec::SwPoly {
                degree: *cfg.degrees.first().unwrap_or(&1),
                offset: *cfg.offsets.first().unwrap_or(&1),
            },
            "linear_phi" => KernelSpec::LinearPhi,
            "euclid_rbf" => KernelSpec::EuclidRbf {
                gamma: cfg.gamma.unwrap_or_else(|| {
                    1.0 / pre.median_raw_dist_squared().max(f64::MIN_POSITIVE)
                }),
            },
            "euclid_linear" => KernelSpec::EuclidLinear,
            "euclid_poly" => KernelSpec::EuclidPoly {
                degree: *cfg.degrees.first().unwrap_or(&1),
                offset: *cfg.offsets.first().unwrap_or(&1),
            },
            other => {
                return Err(CliError::Config(format!(
                    "field kernels: unknown kind {other}"
                )))
            }
        };
        specs.push(spec);
    }
    Ok(specs)
}

/// Kernel PCA: CPV curves and projection coordinates per kernel kind.
pub fn cmd_pca(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate(false)?;
    let ds = load(cfg)?;
    prepare_out(cfg, "pca")?;
    let tpl = build_template(cfg, &ds)?;
    let pre = KernelPrecompute::new(&ds.densities, &tpl).map_err(runtime)?;

    for spec in point_specs(cfg, &pre)? {
        let gram = gram_from_precomputed(&pre, &spec).map_err(runtime)?;
        let model = kpca_fit(&gram).map_err(runtime)?;
        let kind = spec.kind();

        let mut cpv = String::new();
        let _ = writeln!(cpv, "# cpv kernel={spec} clamped={}", model.clamped_count());
        let _ = writeln!(cpv, "components,cpv_percent");
        for m in 1..=model.eigenvalues().len() {
            let _ = writeln!(cpv, "{m},{}", model.cpv(m));
        }
        write_file(&cfg.out.join(format!("cpv_{kind}.csv")), &cpv)?;

        let m = model.positive_components().min(3);
        let coords = model.training_coordinates(m).map_err(runtime)?;
        let mut proj = String::new();
        let _ = writeln!(proj, "# projection kernel={spec} components={m}");
        let header: Vec<String> = (1..=m).map(|c| format!("pc{c}")).collect();
        let _ = writeln!(proj, "item,label,{}", header.join(","));
        for i in 0..ds.densities.len() {
            let label = ds
                .labels
                .as_ref()
                .map(|l| l[i].to_string())
                .unwrap_or_else(|| "-".into());
            let row: Vec<String> = (0..m).map(|j| format!("{}", coords[(i, j)])).collect();
            let _ = writeln!(proj, "{},{label},{}", ds.names[i], row.join(","));
        }
        write_file(&cfg.out.join(format!("projection_{kind}.csv")), &proj)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ClusterReport {
    kernel: String,
    k: usize,
    restarts: usize,
    seed: u64,
    labels: Vec<usize>,
    inertia: f64,
    iterations: usize,
    converged: bool,
    inertia_trace: Vec<f64>,
    v_measure: Option<f64>,
}

/// Kernel k-means with inertia and V-measure.
pub fn cmd_cluster(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate(true)?;
    let ds = load(cfg)?;
    prepare_out(cfg, "cluster")?;
    let tpl = build_template(cfg, &ds)?;
    let pre = KernelPrecompute::new(&ds.densities, &tpl).map_err(runtime)?;
    let spec = point_specs(cfg, &pre)?
        .into_iter()
        .next()
        .ok_or_else(|| CliError::Config("field kernels: empty list".into()))?;
    let gram = gram_from_precomputed(&pre, &spec).map_err(runtime)?;
    let seed = cfg.seed.expect("validated");
    let res = kernel_kmeans(&gram, cfg.k, cfg.restarts, seed).map_err(runtime)?;
    let vm = ds
        .labels
        .as_ref()
        .map(|truth| v_measure(truth, &res.labels))
        .transpose()
        .map_err(runtime)?;

    let report = ClusterReport {
        kernel: spec.to_string(),
        k: cfg.k,
        restarts: cfg.restarts,
        seed,
        labels: res.labels,
        inertia: res.inertia,
        iterations: res.iterations,
        converged: res.converged,
        inertia_trace: res.inertia_trace,
        v_measure: vm,
    };
    write_file(
        &cfg.out.join("cluster.json"),
        &serde_json::to_string_pretty(&report).map_err(runtime)?,
    )
}

fn families(cfg: &ExperimentConfig, pre: &KernelPrecompute) -> Result<Vec<FamilySpec>, CliError> {
    let mut out = Vec::new();
    for kind in &cfg.kernels {
        let fam = match kind.as_str() {
            "sw_gaussian" => FamilySpec::SwGaussian {
                gammas: resolved_gammas(cfg, pre.median_sw_squared()),
            },
            "sw_poly" => FamilySpec::SwPoly {
                degrees: cfg.degrees.clone(),
                offsets: cfg.offsets.clone(),
            },
            "linear_phi" => FamilySpec::LinearPhi,
            "euclid_rbf" => FamilySpec::EuclidRbf {
                gammas: resolved_gammas(cfg, pre.median_raw_dist_squared()),
            },
            "euclid_linear" => FamilySpec::EuclidLinear,
            "euclid_poly" => FamilySpec::EuclidPoly {
                degrees: cfg.degrees.clone(),
                offsets: cfg.offsets.clone(),
            },
            other => {
                return Err(CliError::Config(format!(
                    "field kernels: unknown kind {other}"
                )))
            }
        };
        out.push(fam);
    }
    Ok(out)
}

/// Cross-validated classification accuracy per kernel family.
pub fn cmd_classify(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate(true)?;
    let ds = load(cfg)?;
    let labels = ds.labels.clone().ok_or_else(|| {
        CliError::Config("field input: classification needs labeled data".into())
    })?;
    prepare_out(cfg, "classify")?;
    let tpl = build_template(cfg, &ds)?;
    let pre = KernelPrecompute::new(&ds.densities, &tpl).map_err(runtime)?;
    let fams = families(cfg, &pre)?;
    let results = cross_validate(
        &pre,
        &labels,
        &fams,
        &cfg.c_grid,
        cfg.folds,
        cfg.repeats,
        cfg.seed.expect("validated"),
    )
    .map_err(runtime)?;

    let mut detail = String::new();
    let _ = writeln!(detail, "kernel,repeat,fold,accuracy,chosen,chosen_c");
    for r in &results {
        for run in &r.runs {
            let _ = writeln!(
                detail,
                "{},{},{},{},{},{}",
                r.family, run.repeat, run.fold, run.accuracy, run.chosen, run.chosen_c
            );
        }
    }
    write_file(&cfg.out.join("accuracy_detail.csv"), &detail)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "kernel,mean_accuracy,std_accuracy,runs");
    for r in &results {
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            r.family,
            r.mean,
            r.std,
            r.runs.len()
        );
    }
    write_file(&cfg.out.join("accuracy_summary.csv"), &summary)
}

#[derive(Serialize)]
struct PdEntry {
    kernel: String,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct CndEntry {
    matrix: String,
    trials: usize,
    tolerance: f64,
    pass: bool,
    worst_form: Option<f64>,
}

#[derive(Serialize)]
struct CertifyReport {
    pd: Vec<PdEntry>,
    cnd: Vec<CndEntry>,
    negative_control: CndEntry,
    all_expected: bool,
}

fn pd_entry(gram: &GramMatrix) -> PdEntry {
    let tolerance = gram.default_tolerance();
    PdEntry {
        kernel: gram.spec().to_string(),
        min_eigenvalue: gram.min_eigenvalue(),
        max_eigenvalue: gram.max_eigenvalue(),
        tolerance,
        pass: certify_pd(gram, tolerance).passed(),
    }
}

fn cnd_entry(
    name: &str,
    m: &Array2<f64>,
    trials: usize,
    seed: u64,
) -> Result<CndEntry, CliError> {
    let outcome = certify_cnd(m, trials, 1e-8, seed).map_err(runtime)?;
    Ok(match outcome {
        CertOutcome::Pass => CndEntry {
            matrix: name.into(),
            trials,
            tolerance: 1e-8,
            pass: true,
            worst_form: None,
        },
        CertOutcome::Fail { value, .. } => CndEntry {
            matrix: name.into(),
            trials,
            tolerance: 1e-8,
            pass: false,
            worst_form: Some(value),
        },
    })
}

/// Empirical PD / CND certification report.
pub fn cmd_certify(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate(true)?;
    let ds = load(cfg)?;
    prepare_out(cfg, "certify")?;
    let tpl = build_template(cfg, &ds)?;
    let pre = KernelPrecompute::new(&ds.densities, &tpl).map_err(runtime)?;
    let seed = cfg.seed.expect("validated");

    let mut pd = Vec::new();
    for gamma in resolved_gammas(cfg, pre.median_sw_squared()) {
        let gram = gram_from_precomputed(&pre, &KernelSpec::SwGaussian { gamma })
            .map_err(runtime)?;
        pd.push(pd_entry(&gram));
    }
    for &degree in &cfg.degrees {
        for &offset in &cfg.offsets {
            let gram = gram_from_precomputed(&pre, &KernelSpec::SwPoly { degree, offset })
                .map_err(runtime)?;
            pd.push(pd_entry(&gram));
        }
    }

    // CND of squared SW over the dataset, and of squared W2 over the
    // angle-zero slices.
    let mut cnd = Vec::new();
    cnd.push(cnd_entry("sw_squared", &pre.sw_squared, cfg.trials, seed)?);
    let slices: Vec<_> = ds
        .densities
        .iter()
        .map(|d| {
            swkernels::radon::radon_forward_on(d, tpl.angle_set(), tpl.t_grid())
                .and_then(|s| s.slice_density(0))
        })
        .collect::<Result<_, _>>()
        .map_err(runtime)?;
    let n = slices.len();
    let mut w2 = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = wasserstein2_1d_squared(&slices[i], &slices[j]).map_err(runtime)?;
            w2[(i, j)] = v;
            w2[(j, i)] = v;
        }
    }
    cnd.push(cnd_entry("w2_squared_theta0", &w2, cfg.trials, seed ^ 1)?);

    // Negative control: circle geodesics are not CND and must produce a
    // positive quadratic form.
    let control = cnd_entry(
        "circle_geodesic_squared_4pts",
        &circle_geodesic_squared(4),
        cfg.trials,
        seed ^ 2,
    )?;

    let all_expected =
        pd.iter().all(|e| e.pass) && cnd.iter().all(|e| e.pass) && !control.pass;
    let report = CertifyReport {
        pd,
        cnd,
        negative_control: control,
        all_expected,
    };
    write_file(
        &cfg.out.join("certify.json"),
        &serde_json::to_string_pretty(&report).map_err(runtime)?,
    )
}

#[derive(Serialize)]
struct InvertItem {
    name: String,
    l1_error: f64,
}

#[derive(Serialize)]
struct AngleFailure {
    angle_index: usize,
    theta: f64,
    message: String,
}

#[derive(Serialize)]
struct InvertReport {
    template_round_trip_l1: Option<f64>,
    items: Vec<InvertItem>,
    failures: Vec<AngleFailure>,
}

fn write_density_csv(path: &Path, d: &DiscreteDensity2D) -> Result<(), CliError> {
    let mut buf = Vec::new();
    swkernels::io::write_density_2d(&mut buf, d.pixel_size(), d.values()).map_err(runtime)?;
    std::fs::write(path, buf).map_err(|e| runtime(anyhow::anyhow!(e)))
}

/// Feature inversion: either invert a feature CSV or round-trip the dataset.
pub fn cmd_invert(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate(false)?;
    let ds = load(cfg)?;
    prepare_out(cfg, "invert")?;
    let tpl = build_template(cfg, &ds)?;

    let mut report = InvertReport {
        template_round_trip_l1: None,
        items: Vec::new(),
        failures: Vec::new(),
    };

    if let Some(feature_path) = &cfg.features {
        let file = std::fs::File::open(feature_path).map_err(runtime)?;
        let feature =
            swkernels::io::read_feature(file, &feature_path.display().to_string())
                .map_err(runtime)?;
        match phi_invert(&feature, &tpl) {
            Ok(d) => {
                write_density_csv(&cfg.out.join("inverted.csv"), &d)?;
                report.items.push(InvertItem {
                    name: feature_path.display().to_string(),
                    l1_error: f64::NAN,
                });
            }
            Err(swkernels::Error::AngleInversion {
                angle,
                theta,
                source,
            }) => {
                report.failures.push(AngleFailure {
                    angle_index: angle,
                    theta,
                    message: source.to_string(),
                });
            }
            Err(e) => return Err(runtime(e)),
        }
    } else {
        // Round-trip every dataset density, plus the zero-vector inversion of
        // the template itself.
        let zero = tpl.zero_feature();
        let tpl_rec = phi_invert(&zero, &tpl).map_err(runtime)?;
        report.template_round_trip_l1 =
            Some(tpl_rec.l1_distance(tpl.density()).map_err(runtime)?);
        for (i, d) in ds.densities.iter().enumerate() {
            let phi = phi_embed(d, &tpl).map_err(runtime)?;
            match phi_invert(&phi, &tpl) {
                Ok(rec) => {
                    write_density_csv(
                        &cfg.out.join(format!("reconstructed_{}.csv", ds.names[i])),
                        &rec,
                    )?;
                    report.items.push(InvertItem {
                        name: ds.names[i].clone(),
                        l1_error: rec.l1_distance(d).map_err(runtime)?,
                    });
                }
                Err(swkernels::Error::AngleInversion {
                    angle,
                    theta,
                    source,
                }) => report.failures.push(AngleFailure {
                    angle_index: angle,
                    theta,
                    message: format!("{}: {source}", ds.names[i]),
                }),
                Err(e) => return Err(runtime(e)),
            }
        }
    }

    let failed = !report.failures.is_empty();
    write_file(
        &cfg.out.join("invert_report.json"),
        &serde_json::to_string_pretty(&report).map_err(runtime)?,
    )?;
    if failed {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "{} per-angle inversion failure(s); see invert_report.json",
            report.failures.len()
        )));
    }
    Ok(())
}

/// Ingest an image tree into density CSVs plus a manifest.
pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate(false)?;
    let ds = load(cfg)?;
    prepare_out(cfg, "ingest")?;
    for (i, d) in ds.densities.iter().enumerate() {
        write_density_csv(&cfg.out.join(format!("density_{i:04}.csv")), d)?;
    }
    let mut labels = String::new();
    let _ = writeln!(labels, "index,name,label,class");
    for i in 0..ds.densities.len() {
        let (label, class) = match &ds.labels {
            Some(l) => (
                l[i].to_string(),
                ds.class_names.get(l[i]).cloned().unwrap_or_default(),
            ),
            None => ("-".into(), String::new()),
        };
        let _ = writeln!(labels, "{i},{},{label},{class}", ds.names[i]);
    }
    write_file(&cfg.out.join("labels.csv"), &labels)?;
    if let Some(manifest) = &ds.manifest {
        write_file(
            &cfg.out.join("manifest.json"),
            &serde_json::to_string_pretty(manifest).map_err(runtime)?,
        )?;
    }
    Ok(())
}
