//! Entropy-based external cluster evaluation.

use std::collections::BTreeMap;

use crate::{Error, Result};

fn entropy_of_counts<'a, I: Iterator<Item = &'a usize>>(counts: I, total: f64) -> f64 {
    counts
        .map(|&c| {
            if c == 0 {
                0.0
            } else {
                let p = c as f64 / total;
                -p * p.ln()
            }
        })
        .sum()
}

/// V-measure: harmonic mean of homogeneity and completeness.
///
/// Homogeneity is 1 when every predicted cluster holds a single true class;
/// completeness is 1 when every true class lands in a single cluster. A
/// label permutation of the truth scores 1.0; a single cluster over several
/// classes scores 0.
pub fn v_measure(labels_true: &[usize], labels_pred: &[usize]) -> Result<f64> {
    if labels_true.len() != labels_pred.len() {
        return Err(Error::LengthMismatch(labels_true.len(), labels_pred.len()));
    }
    if labels_true.is_empty() {
        return Err(Error::InvalidParameter("empty labelings".into()));
    }
    let n = labels_true.len() as f64;

    let mut class_counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cluster_counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&c, &k) in labels_true.iter().zip(labels_pred) {
        *class_counts.entry(c).or_default() += 1;
        *cluster_counts.entry(k).or_default() += 1;
        *joint.entry((c, k)).or_default() += 1;
    }

    let h_class = entropy_of_counts(class_counts.values(), n);
    let h_cluster = entropy_of_counts(cluster_counts.values(), n);

    // H(C|K) and H(K|C) from the joint counts.
    let mut h_class_given_cluster = 0.0;
    let mut h_cluster_given_class = 0.0;
    for (&(c, k), &cnt) in &joint {
        let p = cnt as f64 / n;
        h_class_given_cluster -= p * (cnt as f64 / cluster_counts[&k] as f64).ln();
        h_cluster_given_class -= p * (cnt as f64 / class_counts[&c] as f64).ln();
    }

    let homogeneity = if h_class > 0.0 {
        1.0 - h_class_given_cluster / h_class
    } else {
        1.0
    };
    let completeness = if h_cluster > 0.0 {
        1.0 - h_cluster_given_class / h_cluster
    } else {
        1.0
    };
    if homogeneity + completeness <= 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * homogeneity * completeness / (homogeneity + completeness))
}
