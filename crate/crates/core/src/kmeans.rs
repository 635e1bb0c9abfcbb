//! Lloyd's K-Means with distance-weighted seeding.
//!
//! Points are assigned to the centroid at the smallest Euclidean distance
//! (ties go to the lowest centroid index) and centroids move to the mean of
//! their points until they stop moving. A cluster that loses all its points
//! is re-seeded with the point lying farthest from its own centroid, so a fit
//! always reports exactly `k` non-empty clusters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    pub k: usize,
    /// `k` centroids of length `dims`.
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Sum of squared distances from each point to its assigned centroid.
    pub inertia: f64,
    /// Inertia after the initial assignment and after every Lloyd step.
    pub inertia_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub seed: u64,
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(squared_distance(a, b).sqrt())
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Labels each row with its nearest centroid.
pub fn assign(m: &FeatureMatrix, centroids: &[Vec<f64>]) -> Result<Vec<usize>> {
    if centroids.is_empty() {
        return Err(Error::arg("no centroids"));
    }
    if let Some(c) = centroids.iter().find(|c| c.len() != m.dims()) {
        return Err(Error::arg(format!(
            "centroid has {} dims, data has {}",
            c.len(),
            m.dims()
        )));
    }
    Ok(m.iter_rows().map(|p| nearest(p, centroids).0).collect())
}

pub fn inertia(m: &FeatureMatrix, centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    m.iter_rows()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p, &centroids[l]))
        .sum()
}

fn seed_centroids(m: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = m.rows();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(m.row(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = m
        .iter_rows()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` at the very end of the cumulative sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|w| *w > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..n)
        };
        let c = m.row(idx).to_vec();
        for (p, d) in m.iter_rows().zip(d2.iter_mut()) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Assigns points and re-seeds any empty cluster. Returns whether a repair
/// happened.
fn assign_and_repair(m: &FeatureMatrix, centroids: &mut [Vec<f64>], labels: &mut [usize]) -> bool {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for (p, l) in m.iter_rows().zip(labels.iter_mut()) {
        *l = nearest(p, centroids).0;
        sizes[*l] += 1;
    }
    let mut repaired = false;
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        // Farthest point from its own centroid, taken from a cluster that can spare it.
        let mut far = None;
        let mut far_d = f64::NEG_INFINITY;
        for (i, p) in m.iter_rows().enumerate() {
            if sizes[labels[i]] < 2 {
                continue;
            }
            let d = squared_distance(p, &centroids[labels[i]]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k <= n guarantees a donor cluster");
        sizes[labels[i]] -= 1;
        sizes[empty] += 1;
        labels[i] = empty;
        centroids[empty] = m.row(i).to_vec();
        repaired = true;
    }
    repaired
}

fn cluster_means(m: &FeatureMatrix, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dims = m.dims();
    let mut sums = vec![vec![0.0; dims]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in m.iter_rows().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, c) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= *c as f64;
        }
    }
    sums
}

pub fn kmeans_fit(
    m: &FeatureMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansModel> {
    let n = m.rows();
    if k < 1 || k > n {
        return Err(Error::arg(format!("k must be in 1..={n}, got {k}")));
    }
    if max_iter < 1 {
        return Err(Error::arg("max_iter must be at least 1"));
    }
    if !(tol >= 0.0) {
        return Err(Error::arg(format!("tol must be non-negative, got {tol}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(m, k, &mut rng);
    let mut labels = vec![0usize; n];
    assign_and_repair(m, &mut centroids, &mut labels);
    let mut trace = vec![inertia(m, &centroids, &labels)];

    let mut iterations_run = 0;
    let mut converged = false;
    let mut prev_labels = labels.clone();
    for iter in 1..=max_iter {
        let next = cluster_means(m, &labels, k);
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        prev_labels.copy_from_slice(&labels);
        let repaired = assign_and_repair(m, &mut centroids, &mut labels);
        trace.push(inertia(m, &centroids, &labels));
        iterations_run = iter;
        if !repaired && (labels == prev_labels || shift < tol) {
            converged = true;
            break;
        }
    }

    Ok(KMeansModel {
        k,
        inertia: *trace.last().expect("trace is never empty"),
        centroids,
        labels,
        inertia_trace: trace,
        iterations_run,
        converged,
        seed,
    })
}
