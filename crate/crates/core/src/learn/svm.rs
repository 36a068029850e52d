//! Soft-margin kernel SVM trained by sequential minimal optimization.
//!
//! The binary solver works on the dual problem with the maximal
//! KKT-violating pair as the working set; multiclass problems are split
//! one-vs-one and predicted by majority vote with decision-value tie
//! breaking. When the model was trained with the explicit linear
//! feature-map kernel, the separating direction exists as a concrete vector
//! in the feature space and can be walked and inverted back into densities.

use ndarray::Array2;

use crate::density::DiscreteDensity2D;
use crate::kernels::{GramMatrix, KernelSpec};
use crate::sliced::{phi_embed, phi_invert, FeatureVector, Template};
use crate::{Error, Result};

const QUAD_FLOOR: f64 = 1e-12;

/// One trained binary subproblem over a subset of the training indices.
#[derive(Debug, Clone)]
pub struct BinarySvm {
    /// Positions into the training set this subproblem was built from.
    pub indices: Vec<usize>,
    /// Dual coefficients in `[0, C]`, aligned with `indices`.
    pub alpha: Vec<f64>,
    /// Binary labels (+1 / -1), aligned with `indices`.
    pub labels: Vec<f64>,
    pub bias: f64,
    /// Positions within `indices` with `alpha > 0`.
    pub support: Vec<usize>,
    /// Dual objective after each update; monotone nondecreasing.
    pub objective_trace: Vec<f64>,
    /// Final maximal KKT violation.
    pub kkt_violation: f64,
    pub iterations: usize,
}

impl BinarySvm {
    /// Decision value for a point given its kernel row against the full
    /// training set.
    pub fn decision(&self, kernel_row: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.alpha)
            .zip(&self.labels)
            .map(|((&idx, &a), &y)| a * y * kernel_row[idx])
            .sum::<f64>()
            + self.bias
    }
}

/// One-vs-one multiclass model.
#[derive(Debug, Clone)]
pub struct SvmModel {
    pub classes: Vec<usize>,
    /// Class-index pairs `(a, b)` into `classes`; the binary label +1 means
    /// class `b`.
    pub pairs: Vec<(usize, usize)>,
    pub binaries: Vec<BinarySvm>,
    pub spec: Option<KernelSpec>,
    pub c: f64,
    pub tol: f64,
}

fn smo_binary(
    kernel: &Array2<f64>,
    indices: &[usize],
    labels: &[f64],
    c: f64,
    tol: f64,
) -> BinarySvm {
    let n = indices.len();
    let k = |a: usize, b: usize| kernel[(indices[a], indices[b])];

    let mut alpha = vec![0.0f64; n];
    // gradient of (1/2) a'Qa - e'a at a = 0
    let mut grad = vec![-1.0f64; n];
    let mut objective = 0.0f64;
    let mut trace = vec![objective];
    let max_iter = 10_000.max(200 * n);

    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    while iterations < max_iter {
        // Maximal violating pair.
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = usize::MAX;
        let mut w_val = f64::INFINITY;
        let mut w_idx = usize::MAX;
        for i in 0..n {
            let score = -labels[i] * grad[i];
            let in_up = (labels[i] > 0.0 && alpha[i] < c) || (labels[i] < 0.0 && alpha[i] > 0.0);
            let in_low = (labels[i] > 0.0 && alpha[i] > 0.0) || (labels[i] < 0.0 && alpha[i] < c);
            if in_up && score > m_val {
                m_val = score;
                m_idx = i;
            }
            if in_low && score < w_val {
                w_val = score;
                w_idx = i;
            }
        }
        violation = m_val - w_val;
        if violation <= tol || m_idx == usize::MAX || w_idx == usize::MAX {
            break;
        }
        iterations += 1;

        let (i, j) = (m_idx, w_idx);
        let quad = (k(i, i) + k(j, j) - 2.0 * k(i, j)).max(QUAD_FLOOR);
        let t_star = violation / quad;

        // Feasible step range along alpha_i += y_i t, alpha_j -= y_j t.
        let (i_lo, i_hi) = if labels[i] > 0.0 {
            (-alpha[i], c - alpha[i])
        } else {
            (alpha[i] - c, alpha[i])
        };
        let (j_lo, j_hi) = if labels[j] > 0.0 {
            (alpha[j] - c, alpha[j])
        } else {
            (-alpha[j], c - alpha[j])
        };
        let t = t_star.clamp(i_lo.max(j_lo), i_hi.min(j_hi));
        if t <= 0.0 {
            break;
        }

        let d_i = labels[i] * t;
        let d_j = -labels[j] * t;
        alpha[i] = (alpha[i] + d_i).clamp(0.0, c);
        alpha[j] = (alpha[j] + d_j).clamp(0.0, c);
        for l in 0..n {
            grad[l] += labels[l] * (labels[i] * k(l, i) * d_i + labels[j] * k(l, j) * d_j);
        }
        // Dual objective gain of the exact line step.
        objective += violation * t - 0.5 * quad * t * t;
        trace.push(objective);
    }

    // Bias from the free vectors, falling back to the violation midpoint.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut m_val = f64::NEG_INFINITY;
    let mut w_val = f64::INFINITY;
    for i in 0..n {
        let score = -labels[i] * grad[i];
        if alpha[i] > 0.0 && alpha[i] < c {
            free_sum += score;
            free_count += 1;
        }
        let in_up = (labels[i] > 0.0 && alpha[i] < c) || (labels[i] < 0.0 && alpha[i] > 0.0);
        let in_low = (labels[i] > 0.0 && alpha[i] > 0.0) || (labels[i] < 0.0 && alpha[i] < c);
        if in_up {
            m_val = m_val.max(score);
        }
        if in_low {
            w_val = w_val.min(score);
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (m_val + w_val) / 2.0
    };

    let support = (0..n).filter(|&i| alpha[i] > 0.0).collect();
    BinarySvm {
        indices: indices.to_vec(),
        alpha,
        labels: labels.to_vec(),
        bias,
        support,
        objective_trace: trace,
        kkt_violation: violation.max(0.0),
        iterations,
    }
}

/// Train a one-vs-one kernel SVM on a precomputed kernel matrix.
pub fn svm_train(
    kernel: &Array2<f64>,
    labels: &[usize],
    c: f64,
    tol: f64,
) -> Result<SvmModel> {
    svm_train_spec(kernel, labels, c, tol, None)
}

/// Train from a [`GramMatrix`], remembering which kernel produced it.
pub fn svm_train_gram(g: &GramMatrix, labels: &[usize], c: f64, tol: f64) -> Result<SvmModel> {
    svm_train_spec(g.entries(), labels, c, tol, Some(*g.spec()))
}

fn svm_train_spec(
    kernel: &Array2<f64>,
    labels: &[usize],
    c: f64,
    tol: f64,
    spec: Option<KernelSpec>,
) -> Result<SvmModel> {
    if kernel.nrows() != labels.len() {
        return Err(Error::LengthMismatch(kernel.nrows(), labels.len()));
    }
    if !(c > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need C > 0 and tol > 0, got C={c} tol={tol}"
        )));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }

    let mut pairs = Vec::new();
    let mut binaries = Vec::new();
    for a in 0..classes.len() {
        for b in (a + 1)..classes.len() {
            let (ca, cb) = (classes[a], classes[b]);
            let indices: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == ca || l == cb)
                .map(|(i, _)| i)
                .collect();
            let binary_labels: Vec<f64> = indices
                .iter()
                .map(|&i| if labels[i] == cb { 1.0 } else { -1.0 })
                .collect();
            pairs.push((a, b));
            binaries.push(smo_binary(kernel, &indices, &binary_labels, c, tol));
        }
    }
    Ok(SvmModel {
        classes,
        pairs,
        binaries,
        spec,
        c,
        tol,
    })
}

/// Predict class labels for kernel rows (`n_test x n_train`) by one-vs-one
/// majority vote; ties break on summed decision values, then class id.
pub fn svm_predict(model: &SvmModel, kernel_rows: &Array2<f64>) -> Vec<usize> {
    let n_classes = model.classes.len();
    (0..kernel_rows.nrows())
        .map(|r| {
            let row: Vec<f64> = kernel_rows.row(r).to_vec();
            let mut votes = vec![0usize; n_classes];
            let mut scores = vec![0.0f64; n_classes];
            for ((a, b), bin) in model.pairs.iter().zip(&model.binaries) {
                let d = bin.decision(&row);
                if d >= 0.0 {
                    votes[*b] += 1;
                    scores[*b] += d;
                } else {
                    votes[*a] += 1;
                    scores[*a] -= d;
                }
            }
            let best = (0..n_classes)
                .max_by(|&x, &y| {
                    (votes[x], scores[x])
                        .partial_cmp(&(votes[y], scores[y]))
                        .expect("finite scores")
                        .then(y.cmp(&x))
                })
                .expect("at least two classes");
            model.classes[best]
        })
        .collect()
}

/// Walk the direction orthogonal to a binary linear-feature-map hyperplane
/// and invert each step back into a density.
///
/// The explicit normal is `w = sum alpha_i y_i phi(I_i)`; samples are taken
/// at `steps` evenly spaced offsets `s` spanning the training projections,
/// around the embedded dataset mean. Returns `(s, density)` pairs.
pub fn svm_decision_axis(
    model: &SvmModel,
    train: &[DiscreteDensity2D],
    template: &Template,
    steps: usize,
) -> Result<Vec<(f64, DiscreteDensity2D)>> {
    if model.spec != Some(KernelSpec::LinearPhi) {
        return Err(Error::RequiresLinearPhi);
    }
    if model.binaries.len() != 1 {
        return Err(Error::InvalidParameter(
            "decision axis requires a binary model".into(),
        ));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    let bin = &model.binaries[0];
    let phis: Vec<FeatureVector> = train
        .iter()
        .map(|d| phi_embed(d, template))
        .collect::<Result<_>>()?;

    // Embedded dataset mean.
    let mut mean = template.zero_feature();
    for p in &phis {
        mean = mean.plus(p)?;
    }
    let mean = mean.scaled(1.0 / phis.len() as f64);

    // Explicit normal in feature space.
    let mut w = template.zero_feature();
    for ((&idx, &a), &y) in bin.indices.iter().zip(&bin.alpha).zip(&bin.labels) {
        if a > 0.0 {
            w = w.plus(&phis[idx].scaled(a * y))?;
        }
    }
    let norm = w.norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter(
            "degenerate model: zero normal vector".into(),
        ));
    }
    let unit = w.scaled(1.0 / norm);

    // Span of the training projections around the mean.
    let mut span = 0.0f64;
    for p in &phis {
        let offset = p.minus(&mean)?.dot(&unit)?;
        span = span.max(offset.abs());
    }

    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let s = if steps == 1 {
            0.0
        } else {
            -span + 2.0 * span * k as f64 / (steps as f64 - 1.0)
        };
        let point = mean.plus(&unit.scaled(s))?;
        let density = phi_invert(&point, template)?;
        out.push((s, density));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_of(points: &[(f64, f64)]) -> Array2<f64> {
        let n = points.len();
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                // RBF keeps everything strictly positive definite.
                let d2 = (points[i].0 - points[j].0).powi(2) + (points[i].1 - points[j].1).powi(2);
                m[(i, j)] = (-0.5 * d2).exp();
            }
        }
        m
    }

    #[test]
    fn two_point_problem_is_separable() {
        let pts = [(0.0, 0.0), (2.0, 0.0)];
        let k = gram_of(&pts);
        let labels = [0usize, 1usize];
        let model = svm_train(&k, &labels, 10.0, 1e-6).unwrap();
        let pred = svm_predict(&model, &k);
        assert_eq!(pred, vec![0, 1]);
        // Both points are support vectors.
        assert_eq!(model.binaries[0].support.len(), 2);
    }

    #[test]
    fn rejects_single_class() {
        let k = gram_of(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(matches!(
            svm_train(&k, &[3, 3], 1.0, 1e-4),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn objective_trace_monotone_and_kkt_satisfied() {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            pts.push((0.1 * i as f64, 0.3 * ((i % 3) as f64)));
            labels.push(0usize);
            pts.push((4.0 + 0.1 * i as f64, 0.3 * ((i % 4) as f64)));
            labels.push(1usize);
        }
        let k = gram_of(&pts);
        let tol = 1e-5;
        let model = svm_train(&k, &labels, 5.0, tol).unwrap();
        let bin = &model.binaries[0];
        assert!(bin.kkt_violation <= tol, "kkt {}", bin.kkt_violation);
        for w in bin.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for &a in &bin.alpha {
            assert!((0.0..=5.0).contains(&a));
        }
        let pred = svm_predict(&model, &k);
        assert_eq!(pred, labels);
    }

    #[test]
    fn duplicated_training_set_keeps_decision_function() {
        let pts = [(0.0, 0.0), (0.3, 0.4), (3.0, 0.1), (3.3, -0.2)];
        let labels = [0usize, 0, 1, 1];
        let k = gram_of(&pts);
        let model = svm_train(&k, &labels, 2.0, 1e-8).unwrap();

        let doubled: Vec<(f64, f64)> = pts.iter().chain(pts.iter()).copied().collect();
        let labels2: Vec<usize> = labels.iter().chain(labels.iter()).copied().collect();
        let k2 = gram_of(&doubled);
        let model2 = svm_train(&k2, &labels2, 2.0, 1e-8).unwrap();

        // Decision values on the original points agree; the duals may split
        // across duplicates.
        for (r, _) in pts.iter().enumerate() {
            let row: Vec<f64> = (0..pts.len()).map(|c| k[(r, c)]).collect();
            let row2: Vec<f64> = (0..doubled.len()).map(|c| k2[(r, c)]).collect();
            let d1 = model.binaries[0].decision(&row);
            let d2 = model2.binaries[0].decision(&row2);
            assert!((d1 - d2).abs() < 1e-6, "point {r}: {d1} vs {d2}");
        }
    }

    #[test]
    fn three_class_one_vs_one_votes() {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (c, center) in [(0usize, (0.0, 0.0)), (1, (5.0, 0.0)), (2, (0.0, 5.0))] {
            for i in 0..6 {
                pts.push((center.0 + 0.05 * i as f64, center.1 + 0.07 * i as f64));
                labels.push(c);
            }
        }
        let k = gram_of(&pts);
        let model = svm_train(&k, &labels, 10.0, 1e-5).unwrap();
        assert_eq!(model.pairs.len(), 3);
        let pred = svm_predict(&model, &k);
        assert_eq!(pred, labels);
    }
}
