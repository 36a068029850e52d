//! Cross-module learning scenarios: the kernel algorithms driven end to end
//! by sliced-Wasserstein geometry on translate families.

use ndarray::Array2;
use swkernels::density::{normalize_2d, DiscreteDensity2D};
use swkernels::ingest::{synth_translates, translate_density};
use swkernels::kernels::{gram_from_precomputed, KernelPrecompute, KernelSpec};
use swkernels::learn::{
    cross_validate, kernel_kmeans, kpca_fit, svm_decision_axis, svm_predict, svm_train,
    svm_train_gram, v_measure, FamilySpec,
};
use swkernels::radon::AngleSet;
use swkernels::sliced::{make_template, phi_embed};

fn gaussian_blob(n: usize, sigma: f64) -> DiscreteDensity2D {
    let mut raw = Array2::zeros((n, n));
    let c = (n as f64 - 1.0) / 2.0;
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (j as f64 - c, i as f64 - c);
            raw[(i, j)] = (-0.5 * (x * x + y * y) / (sigma * sigma)).exp();
        }
    }
    normalize_2d(1.0, &raw, 1e-9).unwrap()
}

/// 3x3 lattice of translates around the center.
fn translate_lattice(base: &DiscreteDensity2D, step: i32) -> Vec<(f64, f64, DiscreteDensity2D)> {
    let mut out = Vec::new();
    for dy in [-step, 0, step] {
        for dx in [-step, 0, step] {
            out.push((
                dx as f64,
                dy as f64,
                translate_density(base, dx, dy).unwrap(),
            ));
        }
    }
    out
}

#[test]
fn translate_family_kpca_concentrates_in_two_components() {
    let base = gaussian_blob(48, 2.0);
    let lattice = translate_lattice(&base, 4);
    let densities: Vec<_> = lattice.iter().map(|(_, _, d)| d.clone()).collect();
    let tpl = make_template(&densities, &AngleSet::new(32).unwrap(), 128).unwrap();
    let pre = KernelPrecompute::new(&densities, &tpl).unwrap();

    let g_phi = gram_from_precomputed(&pre, &KernelSpec::LinearPhi).unwrap();
    let model = kpca_fit(&g_phi).unwrap();
    assert!(
        model.cpv(2) >= 99.0,
        "linear_phi CPV(2) = {}",
        model.cpv(2)
    );

    // Raw-pixel PCA spreads the same family over many components.
    let g_raw = gram_from_precomputed(&pre, &KernelSpec::EuclidLinear).unwrap();
    let raw_model = kpca_fit(&g_raw).unwrap();
    assert!(
        raw_model.cpv(2) < 99.0,
        "euclid_linear CPV(2) = {}",
        raw_model.cpv(2)
    );
}

#[test]
fn translate_family_projects_to_congruent_lattice() {
    let base = gaussian_blob(48, 2.0);
    let lattice = translate_lattice(&base, 4);
    let densities: Vec<_> = lattice.iter().map(|(_, _, d)| d.clone()).collect();
    let tpl = make_template(&densities, &AngleSet::new(32).unwrap(), 128).unwrap();
    let pre = KernelPrecompute::new(&densities, &tpl).unwrap();
    let model = kpca_fit(&gram_from_precomputed(&pre, &KernelSpec::LinearPhi).unwrap()).unwrap();
    let coords = model.training_coordinates(2).unwrap();

    // Pairwise distances in projection space match |dv|/sqrt(2) up to one
    // global scale.
    let n = lattice.len();
    let mut ratios = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let dv = ((lattice[i].0 - lattice[j].0).powi(2)
                + (lattice[i].1 - lattice[j].1).powi(2))
            .sqrt();
            let dp = ((coords[(i, 0)] - coords[(j, 0)]).powi(2)
                + (coords[(i, 1)] - coords[(j, 1)]).powi(2))
            .sqrt();
            ratios.push(dp / (dv / 2f64.sqrt()));
        }
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    for r in &ratios {
        assert!(
            (r / mean - 1.0).abs() <= 0.02,
            "lattice distortion {} vs mean {mean}",
            r
        );
    }
}

/// Two classes of noisy translates with a 10x separation/spread ratio.
fn two_class_benchmark(
    per_class: usize,
    noise: f64,
    seed: u64,
) -> (Vec<DiscreteDensity2D>, Vec<usize>) {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let base = gaussian_blob(48, 2.5);
    let spread = 1i32; // within-class shift radius
    let separation = 10i32; // 10x the spread
    let mut groups = vec![Vec::new(), Vec::new()];
    for k in 0..2 {
        let cx = if k == 0 { -separation / 2 } else { separation / 2 };
        for _ in 0..per_class {
            let dx = cx + rng.gen_range(-spread..=spread);
            let dy = rng.gen_range(-spread..=spread);
            groups[k].push((dx, dy));
        }
    }
    let ds = synth_translates(&base, &groups, noise, seed ^ 0xabc).unwrap();
    (ds.densities, ds.labels)
}

#[test]
fn sw_gaussian_svm_separates_translate_classes() {
    let (densities, labels) = two_class_benchmark(12, 0.02, 5);
    let tpl = make_template(&densities, &AngleSet::new(24).unwrap(), 96).unwrap();
    let pre = KernelPrecompute::new(&densities, &tpl).unwrap();
    let gammas = swkernels::learn::auto_gamma_grid(pre.median_sw_squared());
    let results = cross_validate(
        &pre,
        &labels,
        &[FamilySpec::SwGaussian { gammas }],
        &[0.1, 1.0, 10.0, 100.0],
        3,
        2,
        11,
    )
    .unwrap();
    assert!(
        results[0].mean >= 0.95,
        "sw_gaussian CV accuracy {}",
        results[0].mean
    );
}

#[test]
fn kernel_kmeans_recovers_noiseless_translate_clusters() {
    let (densities, labels) = two_class_benchmark(10, 0.0, 9);
    let tpl = make_template(&densities, &AngleSet::new(24).unwrap(), 96).unwrap();
    let pre = KernelPrecompute::new(&densities, &tpl).unwrap();
    let gamma = 1.0 / pre.median_sw_squared();
    let g = gram_from_precomputed(&pre, &KernelSpec::SwGaussian { gamma }).unwrap();
    let res = kernel_kmeans(&g, 2, 10, 33).unwrap();
    let v = v_measure(&labels, &res.labels).unwrap();
    assert!((v - 1.0).abs() < 1e-12, "v-measure {v}");
    for w in res.inertia_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-10);
    }
}

#[test]
fn constant_dataset_scores_majority_baseline() {
    let base = gaussian_blob(32, 2.0);
    // 14 vs 6 identical items: no signal at all.
    let groups = vec![vec![(0, 0); 14], vec![(0, 0); 6]];
    let ds = synth_translates(&base, &groups, 0.0, 3).unwrap();
    let tpl = make_template(&ds.densities, &AngleSet::new(8).unwrap(), 64).unwrap();
    let pre = KernelPrecompute::new(&ds.densities, &tpl).unwrap();
    let results = cross_validate(
        &pre,
        &ds.labels,
        &[FamilySpec::SwGaussian {
            gammas: vec![1.0],
        }],
        &[1.0],
        2,
        1,
        17,
    )
    .unwrap();
    let majority = 14.0 / 20.0;
    assert!(
        (results[0].mean - majority).abs() <= 0.1,
        "accuracy {} vs majority {majority}",
        results[0].mean
    );
}

#[test]
fn cross_validation_is_deterministic() {
    let (densities, labels) = two_class_benchmark(8, 0.05, 21);
    let tpl = make_template(&densities, &AngleSet::new(16).unwrap(), 64).unwrap();
    let pre = KernelPrecompute::new(&densities, &tpl).unwrap();
    let families = [FamilySpec::SwGaussian {
        gammas: vec![0.1, 1.0],
    }];
    let a = cross_validate(&pre, &labels, &families, &[1.0, 10.0], 2, 3, 77).unwrap();
    let b = cross_validate(&pre, &labels, &families, &[1.0, 10.0], 2, 3, 77).unwrap();
    assert_eq!(a[0].mean.to_bits(), b[0].mean.to_bits());
    assert_eq!(a[0].std.to_bits(), b[0].std.to_bits());
    for (ra, rb) in a[0].runs.iter().zip(&b[0].runs) {
        assert_eq!(ra.accuracy.to_bits(), rb.accuracy.to_bits());
    }
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&x, &y| v[x].total_cmp(&v[y]));
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (ra[i] - mean) * (rb[i] - mean);
        da += (ra[i] - mean).powi(2);
        db += (rb[i] - mean).powi(2);
    }
    num / (da.sqrt() * db.sqrt())
}

#[test]
fn small_gamma_gaussian_svm_matches_linear_phi_ordering() {
    let (densities, labels) = two_class_benchmark(8, 0.05, 13);
    let tpl = make_template(&densities, &AngleSet::new(16).unwrap(), 64).unwrap();
    let pre = KernelPrecompute::new(&densities, &tpl).unwrap();

    let g_lin = gram_from_precomputed(&pre, &KernelSpec::LinearPhi).unwrap();
    let m_lin = svm_train(g_lin.entries(), &labels, 10.0, 1e-6).unwrap();

    let gamma = 1e-4 / pre.median_sw_squared();
    let g_rbf = gram_from_precomputed(&pre, &KernelSpec::SwGaussian { gamma }).unwrap();
    let m_rbf = svm_train(g_rbf.entries(), &labels, 1e6, 1e-9).unwrap();

    let d_lin: Vec<f64> = (0..densities.len())
        .map(|i| m_lin.binaries[0].decision(&g_lin.entries().row(i).to_vec()))
        .collect();
    let d_rbf: Vec<f64> = (0..densities.len())
        .map(|i| m_rbf.binaries[0].decision(&g_rbf.entries().row(i).to_vec()))
        .collect();
    let rho = spearman(&d_lin, &d_rbf);
    assert!(rho >= 0.99, "spearman {rho}");
}

#[test]
fn decision_axis_walks_between_classes() {
    // Wide blobs and a modest separation keep the whole walk inside the
    // region where the recovered per-angle maps stay monotone.
    let base = gaussian_blob(48, 3.5);
    let groups = vec![
        vec![(-2, 0), (-2, 1), (-3, 0), (-2, -1), (-3, 1), (-3, -1)],
        vec![(2, 0), (2, 1), (3, 0), (2, -1), (3, 1), (3, -1)],
    ];
    let ds = synth_translates(&base, &groups, 0.0, 29).unwrap();
    let (densities, labels) = (ds.densities, ds.labels);
    // A broad unimodal template keeps every point of the walk inside the
    // monotone region (the bimodal dataset mean would not).
    let tpl = swkernels::sliced::template_from_density(
        &gaussian_blob(48, 8.0),
        &AngleSet::new(24).unwrap(),
        96,
    )
    .unwrap();
    let pre = KernelPrecompute::new(&densities, &tpl).unwrap();
    let g = gram_from_precomputed(&pre, &KernelSpec::LinearPhi).unwrap();
    let model = svm_train_gram(&g, &labels, 10.0, 1e-6).unwrap();

    // steps = 1 samples only the mean embedding; mass conservation only.
    let single = svm_decision_axis(&model, &densities, &tpl, 1).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].0, 0.0);
    let mass: f64 = single[0].1.values().iter().sum::<f64>()
        * single[0].1.pixel_size().powi(2);
    assert!((mass - 1.0).abs() < 1e-9);

    // Re-embedded axis samples score monotonically along the walk.
    let axis = svm_decision_axis(&model, &densities, &tpl, 5).unwrap();
    let bin = &model.binaries[0];
    let scores: Vec<f64> = axis
        .iter()
        .map(|(_, d)| {
            let phi = phi_embed(d, &tpl).unwrap();
            let mut row = vec![0.0; densities.len()];
            for (j, other) in densities.iter().enumerate() {
                row[j] = phi.dot(&phi_embed(other, &tpl).unwrap()).unwrap();
            }
            bin.decision(&row)
        })
        .collect();
    let range = scores.last().unwrap() - scores.first().unwrap();
    for w in scores.windows(2) {
        assert!(
            (w[1] - w[0]) * range.signum() >= -0.05 * range.abs(),
            "scores not monotone: {scores:?}"
        );
    }

    // A non-linear-phi model refuses the walk.
    let g_rbf = gram_from_precomputed(
        &pre,
        &KernelSpec::SwGaussian {
            gamma: 1.0 / pre.median_sw_squared(),
        },
    )
    .unwrap();
    let m_rbf = svm_train_gram(&g_rbf, &labels, 10.0, 1e-6).unwrap();
    assert!(matches!(
        svm_decision_axis(&m_rbf, &densities, &tpl, 3),
        Err(swkernels::Error::RequiresLinearPhi)
    ));

    // And predictions from the linear model classify the training set.
    let pred = svm_predict(&model, g.entries());
    assert_eq!(pred, labels);
}
