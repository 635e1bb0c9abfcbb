//! DBSCAN over an exact pairwise scan.
//!
//! The neighbourhood of `p` is every row strictly closer than `eps`,
//! including `p` itself, so two points exactly `eps` apart are not
//! neighbours. A row whose neighbourhood holds at least `min_pts` rows is a
//! core point. Clusters are numbered in order of discovery while scanning
//! rows by ascending index; a border point belongs to the first cluster that
//! reaches it and unreached rows are labelled [`NOISE`].

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::kmeans::squared_distance;

pub const NOISE: i64 = -1;
pub const DEFAULT_MIN_PTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct DbscanResult {
    pub eps: f64,
    pub min_pts: usize,
    /// Cluster id per row, or [`NOISE`].
    pub labels: Vec<i64>,
    pub core: Vec<bool>,
    pub n_clusters: usize,
}

impl DbscanResult {
    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::arg(format!(
            "eps must be positive and finite, got {eps}"
        )));
    }
    Ok(())
}

#[inline]
fn within(a: &[f64], b: &[f64], eps: f64) -> bool {
    squared_distance(a, b).sqrt() < eps
}

/// Indices of the rows strictly within `eps` of row `p`, ascending.
pub fn eps_neighborhood(p: usize, m: &FeatureMatrix, eps: f64) -> Result<Vec<usize>> {
    check_eps(eps)?;
    if p >= m.rows() {
        return Err(Error::arg(format!(
            "row {p} out of range for {} rows",
            m.rows()
        )));
    }
    Ok(neighbors(p, m, eps))
}

fn neighbors(p: usize, m: &FeatureMatrix, eps: f64) -> Vec<usize> {
    let x = m.row(p);
    m.iter_rows()
        .enumerate()
        .filter(|(_, q)| within(x, q, eps))
        .map(|(i, _)| i)
        .collect()
}

pub fn dbscan_fit(m: &FeatureMatrix, eps: f64, min_pts: usize) -> Result<DbscanResult> {
    check_eps(eps)?;
    if min_pts < 1 {
        return Err(Error::arg("min_pts must be at least 1"));
    }
    let n = m.rows();
    let core: Vec<bool> = (0..n)
        .map(|p| {
            let x = m.row(p);
            m.iter_rows().filter(|q| within(x, q, eps)).count() >= min_pts
        })
        .collect();

    let mut labels = vec![NOISE; n];
    let mut n_clusters = 0usize;
    let mut queue = VecDeque::new();
    for p in 0..n {
        if labels[p] != NOISE || !core[p] {
            continue;
        }
        let id = n_clusters as i64;
        n_clusters += 1;
        labels[p] = id;
        queue.push_back(p);
        while let Some(q) = queue.pop_front() {
            for r in neighbors(q, m, eps) {
                if labels[r] == NOISE {
                    labels[r] = id;
                    if core[r] {
                        queue.push_back(r);
                    }
                }
            }
        }
    }

    Ok(DbscanResult {
        eps,
        min_pts,
        labels,
        core,
        n_clusters,
    })
}
