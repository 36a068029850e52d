//! Stratified cross-validation with per-family inner grid search.
//!
//! The outer loop never sees hyperparameters: for every outer training fold
//! an inner stratified split over that fold alone picks the best
//! `(kernel, C)` candidate, which is then refit on the whole training fold
//! and scored once on the held-out fold.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use crate::kernels::{KernelPrecompute, KernelSpec};
use crate::learn::svm::{svm_predict, svm_train};
use crate::{Error, Result};

/// A kernel family with the hyperparameter grid searched inside each fold.
#[derive(Debug, Clone)]
pub enum FamilySpec {
    SwGaussian { gammas: Vec<f64> },
    SwPoly { degrees: Vec<u32>, offsets: Vec<u8> },
    LinearPhi,
    EuclidRbf { gammas: Vec<f64> },
    EuclidLinear,
    EuclidPoly { degrees: Vec<u32>, offsets: Vec<u8> },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::SwGaussian { .. } => "sw_gaussian",
            FamilySpec::SwPoly { .. } => "sw_poly",
            FamilySpec::LinearPhi => "linear_phi",
            FamilySpec::EuclidRbf { .. } => "euclid_rbf",
            FamilySpec::EuclidLinear => "euclid_linear",
            FamilySpec::EuclidPoly { .. } => "euclid_poly",
        }
    }

    fn candidates(&self) -> Vec<KernelSpec> {
        match self {
            FamilySpec::SwGaussian { gammas } => gammas
                .iter()
                .map(|&gamma| KernelSpec::SwGaussian { gamma })
                .collect(),
            FamilySpec::SwPoly { degrees, offsets } => degrees
                .iter()
                .flat_map(|&degree| {
                    offsets
                        .iter()
                        .map(move |&offset| KernelSpec::SwPoly { degree, offset })
                })
                .collect(),
            FamilySpec::LinearPhi => vec![KernelSpec::LinearPhi],
            FamilySpec::EuclidRbf { gammas } => gammas
                .iter()
                .map(|&gamma| KernelSpec::EuclidRbf { gamma })
                .collect(),
            FamilySpec::EuclidLinear => vec![KernelSpec::EuclidLinear],
            FamilySpec::EuclidPoly { degrees, offsets } => degrees
                .iter()
                .flat_map(|&degree| {
                    offsets
                        .iter()
                        .map(move |&offset| KernelSpec::EuclidPoly { degree, offset })
                })
                .collect(),
        }
    }
}

/// Powers-of-ten gamma grid scaled by the inverse median squared distance.
pub fn auto_gamma_grid(median_sq: f64) -> Vec<f64> {
    let scale = if median_sq > 0.0 { 1.0 / median_sq } else { 1.0 };
    [0.01, 0.1, 1.0, 10.0, 100.0]
        .iter()
        .map(|p| p * scale)
        .collect()
}

/// One scored outer fold.
#[derive(Debug, Clone)]
pub struct CvRun {
    pub repeat: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub chosen: KernelSpec,
    pub chosen_c: f64,
}

/// Accuracy summary for one kernel family.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub family: String,
    pub runs: Vec<CvRun>,
    pub mean: f64,
    pub std: f64,
}

/// Split indices into stratified folds: every fold receives a near-equal
/// share of each class.
pub fn stratified_folds(
    labels: &[usize],
    folds: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "folds {folds} must be >= 2"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    for (&class, members) in &by_class {
        if members.len() < folds {
            return Err(Error::ClassSmallerThanFolds {
                class,
                size: members.len(),
                folds,
            });
        }
    }
    let mut out = vec![Vec::new(); folds];
    for members in by_class.values() {
        let mut shuffled = members.clone();
        shuffled.shuffle(rng);
        for (k, idx) in shuffled.into_iter().enumerate() {
            out[k % folds].push(idx);
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

fn accuracy_of(
    pre: &KernelPrecompute,
    labels: &[usize],
    spec: &KernelSpec,
    c: f64,
    train: &[usize],
    test: &[usize],
) -> Result<f64> {
    let kernel = pre.kernel_matrix(spec, train);
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let model = svm_train(&kernel, &train_labels, c, 1e-4)?;
    // Model indices are positions within `train`, matching the block's
    // column order.
    let rows = pre.kernel_block(spec, test, train);
    let pred = svm_predict(&model, &rows);
    let correct = pred
        .iter()
        .zip(test.iter().map(|&i| labels[i]))
        .filter(|(p, t)| **p == *t)
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Stratified k-fold cross-validation repeated `repeats` times, reporting
/// mean and standard deviation per kernel family.
pub fn cross_validate(
    pre: &KernelPrecompute,
    labels: &[usize],
    families: &[FamilySpec],
    c_grid: &[f64],
    folds: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<CvResult>> {
    if pre.len() != labels.len() {
        return Err(Error::LengthMismatch(pre.len(), labels.len()));
    }
    if c_grid.is_empty() || repeats == 0 {
        return Err(Error::InvalidParameter(
            "need a nonempty C grid and repeats >= 1".into(),
        ));
    }
    let mut results = Vec::with_capacity(families.len());
    for family in families {
        let candidates = family.candidates();
        if candidates.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "family {} has an empty grid",
                family.name()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut runs = Vec::with_capacity(folds * repeats);
        for repeat in 0..repeats {
            let fold_sets = stratified_folds(labels, folds, &mut rng)?;
            for (fold, test) in fold_sets.iter().enumerate() {
                let train: Vec<usize> = fold_sets
                    .iter()
                    .enumerate()
                    .filter(|(f, _)| *f != fold)
                    .flat_map(|(_, v)| v.iter().copied())
                    .collect();

                // Inner selection on the training fold only.
                let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
                let min_class = {
                    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
                    for &l in &train_labels {
                        *counts.entry(l).or_default() += 1;
                    }
                    counts.values().copied().min().unwrap_or(0)
                };
                let inner_folds = 3.min(min_class).max(2);
                let mut best: Option<(f64, KernelSpec, f64)> = None;
                if candidates.len() == 1 && c_grid.len() == 1 {
                    best = Some((0.0, candidates[0], c_grid[0]));
                } else {
                    let mut inner_rng = ChaCha8Rng::seed_from_u64(
                        seed ^ 0x5eed_c0de ^ ((repeat * folds + fold) as u64),
                    );
                    let inner_sets = stratified_folds(&train_labels, inner_folds, &mut inner_rng)?;
                    for spec in &candidates {
                        for &c in c_grid {
                            let mut acc = 0.0;
                            for (ifold, itest_local) in inner_sets.iter().enumerate() {
                                let itrain: Vec<usize> = inner_sets
                                    .iter()
                                    .enumerate()
                                    .filter(|(f, _)| *f != ifold)
                                    .flat_map(|(_, v)| v.iter().map(|&p| train[p]))
                                    .collect();
                                let itest: Vec<usize> =
                                    itest_local.iter().map(|&p| train[p]).collect();
                                acc +=
                                    accuracy_of(pre, labels, spec, c, &itrain, &itest)?;
                            }
                            acc /= inner_sets.len() as f64;
                            let better = best.as_ref().is_none_or(|(b, _, _)| acc > *b);
                            if better {
                                best = Some((acc, *spec, c));
                            }
                        }
                    }
                }
                let (_, spec, c) = best.expect("nonempty candidate grid");
                let accuracy = accuracy_of(pre, labels, &spec, c, &train, test)?;
                runs.push(CvRun {
                    repeat,
                    fold,
                    accuracy,
                    chosen: spec,
                    chosen_c: c,
                });
            }
        }
        let n = runs.len() as f64;
        let mean = runs.iter().map(|r| r.accuracy).sum::<f64>() / n;
        let var = if runs.len() > 1 {
            runs.iter()
                .map(|r| (r.accuracy - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        results.push(CvResult {
            family: family.name().to_string(),
            runs,
            mean,
            std: var.sqrt(),
        });
    }
    Ok(results)
}
