//! Lloyd-style k-means in the kernel-induced feature space.
//!
//! Squared feature-space distance from point `i` to the centroid of cluster
//! `C` expands through the kernel trick as
//! `K_ii - 2 sum_{j in C} K_ij / |C| + sum_{j,l in C} K_jl / |C|^2`,
//! so the whole algorithm runs on the Gram matrix alone.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kernels::GramMatrix;
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 300;

/// Result of one kernel k-means run.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inertia after each Lloyd iteration; monotone non-increasing.
    pub inertia_trace: Vec<f64>,
}

struct ClusterStats {
    /// `point_sums[(i, c)] = sum_{j in c} K_ij`
    point_sums: Array2<f64>,
    /// `self_sums[c] = sum_{j,l in c} K_jl`
    self_sums: Vec<f64>,
    sizes: Vec<usize>,
}

fn stats(kernel: &Array2<f64>, labels: &[usize], k: usize) -> ClusterStats {
    let n = labels.len();
    let mut point_sums = Array2::zeros((n, k));
    let mut sizes = vec![0usize; k];
    for (j, &c) in labels.iter().enumerate() {
        sizes[c] += 1;
        for i in 0..n {
            point_sums[(i, c)] += kernel[(i, j)];
        }
    }
    let mut self_sums = vec![0.0; k];
    for (j, &c) in labels.iter().enumerate() {
        self_sums[c] += point_sums[(j, c)];
    }
    ClusterStats {
        point_sums,
        self_sums,
        sizes,
    }
}

fn distance_sq(kernel: &Array2<f64>, st: &ClusterStats, i: usize, c: usize) -> f64 {
    let size = st.sizes[c] as f64;
    kernel[(i, i)] - 2.0 * st.point_sums[(i, c)] / size + st.self_sums[c] / (size * size)
}

fn lloyd(
    kernel: &Array2<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, f64, usize, bool, Vec<f64>) {
    let n = kernel.nrows();

    // Seed: k distinct points become singleton clusters, everything else
    // joins its nearest seed.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let seeds = &order[..k];
    let mut labels = vec![0usize; n];
    for i in 0..n {
        let mut best = (f64::INFINITY, 0usize);
        for (c, &s) in seeds.iter().enumerate() {
            let d = kernel[(i, i)] - 2.0 * kernel[(i, s)] + kernel[(s, s)];
            if d < best.0 {
                best = (d, c);
            }
        }
        labels[i] = best.1;
    }
    for (c, &s) in seeds.iter().enumerate() {
        labels[s] = c;
    }

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut inertia = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let mut st = stats(kernel, &labels, k);

        // Empty-cluster repair: reseed from the point farthest from its
        // current centroid.
        while let Some(empty) = st.sizes.iter().position(|&s| s == 0) {
            let farthest = (0..n)
                .max_by(|&a, &b| {
                    distance_sq(kernel, &st, a, labels[a])
                        .total_cmp(&distance_sq(kernel, &st, b, labels[b]))
                })
                .expect("nonempty dataset");
            labels[farthest] = empty;
            st = stats(kernel, &labels, k);
        }

        let mut new_labels = vec![0usize; n];
        let mut new_inertia = 0.0;
        for (i, label) in new_labels.iter_mut().enumerate() {
            let mut best = (f64::INFINITY, 0usize);
            for c in 0..k {
                let d = distance_sq(kernel, &st, i, c);
                if d < best.0 {
                    best = (d, c);
                }
            }
            *label = best.1;
            new_inertia += best.0.max(0.0);
        }
        trace.push(new_inertia);
        let stable = new_labels == labels;
        labels = new_labels;
        inertia = new_inertia;
        if stable {
            converged = true;
            break;
        }
    }
    (labels, inertia, iterations, converged, trace)
}

/// Kernel k-means: best of `restarts` Lloyd runs by inertia, deterministic
/// for a fixed seed.
pub fn kernel_kmeans(
    g: &GramMatrix,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} outside 1..={n}"
        )));
    }
    let restarts = restarts.max(1);
    let kernel = g.entries();
    let mut best: Option<ClusterAssignment> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        // Burn one value so restart 0 with seed s differs from a fresh seed
        // s+1 run at restart 0.
        let _: u64 = rng.gen();
        let (labels, inertia, iterations, converged, inertia_trace) = lloyd(kernel, k, &mut rng);
        let candidate = ClusterAssignment {
            labels,
            inertia,
            iterations,
            converged,
            inertia_trace,
        };
        let better = match &best {
            None => true,
            Some(b) => candidate.inertia < b.inertia,
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(best.expect("restarts >= 1"))
}
