//! Davies-Bouldin validation and per-algorithm parameter sweeps.
//!
//! For clusters with centroids `c_i` and scatters `S_i` (mean distance of
//! members to their centroid) the index is
//! `(1/k) Σ_i max_{j≠i} (S_i + S_j) / d(c_i, c_j)`. Lower is better.
//! Each sweep fits one model per parameter value, scores it, and keeps the
//! lowest-scoring value, preferring the smallest parameter on ties.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::dbscan;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gmm;
use crate::kmeans;

/// Davies-Bouldin index of a hard partition. Negative labels are noise and
/// are dropped when `exclude_noise` is set; otherwise they form one cluster.
pub fn davies_bouldin(m: &FeatureMatrix, labels: &[i64], exclude_noise: bool) -> Result<f64> {
    if labels.len() != m.rows() {
        return Err(Error::arg(format!(
            "{} labels for {} rows",
            labels.len(),
            m.rows()
        )));
    }
    let d = m.dims();
    let mut clusters: BTreeMap<i64, (usize, Vec<f64>)> = BTreeMap::new();
    for (x, &l) in m.iter_rows().zip(labels) {
        if exclude_noise && l < 0 {
            continue;
        }
        let entry = clusters.entry(l).or_insert_with(|| (0, vec![0.0; d]));
        entry.0 += 1;
        for (s, v) in entry.1.iter_mut().zip(x) {
            *s += v;
        }
    }
    if clusters.len() < 2 {
        return Err(Error::UndefinedDbi(format!(
            "need at least 2 clusters, found {}",
            clusters.len()
        )));
    }
    let index: BTreeMap<i64, usize> = clusters.keys().enumerate().map(|(i, l)| (*l, i)).collect();
    let centroids: Vec<Vec<f64>> = clusters
        .values()
        .map(|(n, s)| s.iter().map(|v| v / *n as f64).collect())
        .collect();
    let sizes: Vec<usize> = clusters.values().map(|(n, _)| *n).collect();

    let k = centroids.len();
    let mut scatter = vec![0.0; k];
    for (x, &l) in m.iter_rows().zip(labels) {
        if exclude_noise && l < 0 {
            continue;
        }
        let c = index[&l];
        scatter[c] += kmeans::squared_distance(x, &centroids[c]).sqrt();
    }
    for (s, n) in scatter.iter_mut().zip(&sizes) {
        *s /= *n as f64;
    }

    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = kmeans::squared_distance(&centroids[i], &centroids[j]).sqrt();
            if sep == 0.0 {
                return Err(Error::UndefinedDbi(format!(
                    "clusters {} and {} share a centroid",
                    clusters.keys().nth(i).unwrap(),
                    clusters.keys().nth(j).unwrap()
                )));
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KMeans,
    Gmm,
    Dbscan,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Gmm => "gmm",
            Algorithm::Dbscan => "dbscan",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    /// k, g, or eps.
    pub param: f64,
    /// `None` when the index is undefined for this fit.
    pub dbi: Option<f64>,
    pub n_clusters: usize,
    pub n_noise: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub household_id: String,
    pub algorithm: Algorithm,
    pub entries: Vec<SweepEntry>,
    pub best: SweepEntry,
    pub seed: u64,
}

impl SweepReport {
    /// Selects the lowest defined DBI; ties go to the smallest parameter.
    fn assemble(algorithm: Algorithm, entries: Vec<SweepEntry>, seed: u64) -> Result<Self> {
        let best = entries
            .iter()
            .filter(|e| e.dbi.is_some())
            .min_by(|a, b| {
                a.dbi
                    .unwrap()
                    .total_cmp(&b.dbi.unwrap())
                    .then(a.param.total_cmp(&b.param))
            })
            .cloned()
            .ok_or(Error::NoValidClustering)?;
        Ok(SweepReport {
            household_id: String::new(),
            algorithm,
            entries,
            best,
            seed,
        })
    }

    pub fn with_household(mut self, household_id: impl Into<String>) -> Self {
        self.household_id = household_id.into();
        self
    }
}

fn check_range(range: &RangeInclusive<usize>, n: usize, what: &str) -> Result<()> {
    if range.is_empty() {
        return Err(Error::arg(format!("{what} range is empty")));
    }
    if *range.start() < 2 || *range.end() + 1 > n {
        return Err(Error::arg(format!(
            "{what} range {}..{} must lie within 2..{} for {n} rows",
            range.start(),
            range.end(),
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

fn score(m: &FeatureMatrix, labels: &[i64], exclude_noise: bool) -> Result<Option<f64>> {
    match davies_bouldin(m, labels, exclude_noise) {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedDbi(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn distinct(labels: &[i64]) -> usize {
    let mut seen: Vec<i64> = labels.iter().copied().filter(|l| *l >= 0).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

pub fn sweep_kmeans(
    m: &FeatureMatrix,
    k_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<SweepReport> {
    check_range(&k_range, m.rows(), "k")?;
    let mut entries = Vec::new();
    for k in k_range {
        let model = kmeans::kmeans_fit(m, k, seed, kmeans::DEFAULT_MAX_ITER, kmeans::DEFAULT_TOL)?;
        let labels: Vec<i64> = model.labels.iter().map(|&l| l as i64).collect();
        entries.push(SweepEntry {
            param: k as f64,
            dbi: score(m, &labels, false)?,
            n_clusters: distinct(&labels),
            n_noise: 0,
        });
    }
    SweepReport::assemble(Algorithm::KMeans, entries, seed)
}

/// GMM fits are scored on their argmax labels; components that win no rows
/// are left out, so `n_clusters` can be below `g`.
pub fn sweep_gmm(
    m: &FeatureMatrix,
    g_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<SweepReport> {
    check_range(&g_range, m.rows(), "g")?;
    let mut entries = Vec::new();
    for g in g_range {
        let model = gmm::gmm_fit(m, g, seed, gmm::DEFAULT_MAX_ITER, gmm::DEFAULT_TOL)?;
        let labels: Vec<i64> = model.labels.iter().map(|&l| l as i64).collect();
        entries.push(SweepEntry {
            param: g as f64,
            dbi: score(m, &labels, false)?,
            n_clusters: distinct(&labels),
            n_noise: 0,
        });
    }
    SweepReport::assemble(Algorithm::Gmm, entries, seed)
}

pub fn sweep_dbscan(m: &FeatureMatrix, eps_values: &[f64], min_pts: usize) -> Result<SweepReport> {
    if eps_values.is_empty() {
        return Err(Error::arg("eps list is empty"));
    }
    let mut entries = Vec::new();
    for &eps in eps_values {
        let fit = dbscan::dbscan_fit(m, eps, min_pts)?;
        entries.push(SweepEntry {
            param: eps,
            dbi: score(m, &fit.labels, true)?,
            n_clusters: fit.n_clusters,
            n_noise: fit.n_noise(),
        });
    }
    SweepReport::assemble(Algorithm::Dbscan, entries, 0)
}

/// Default eps grid: 1, 2, ..., 10.
pub fn default_eps_values() -> Vec<f64> {
    (1..=10).map(f64::from).collect()
}

pub fn write_report_json<W: Write>(out: W, report: &SweepReport) -> Result<()> {
    serde_json::to_writer_pretty(out, report)?;
    Ok(())
}

pub fn read_report_json<R: Read>(input: R) -> Result<SweepReport> {
    Ok(serde_json::from_reader(input)?)
}

/// Writes `param,dbi,n_clusters,n_noise`, leaving `dbi` empty where undefined.
pub fn write_plot_csv<W: Write>(out: W, report: &SweepReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in &report.entries {
        w.serialize(e)?;
    }
    if report.entries.is_empty() {
        w.write_record(["param", "dbi", "n_clusters", "n_noise"])?;
    }
    w.flush().map_err(|e| Error::io("<plot>", e))?;
    Ok(())
}

pub fn read_plot_csv<R: Read>(input: R) -> Result<Vec<SweepEntry>> {
    let mut reader = csv::Reader::from_reader(input);
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<SweepEntry>, _>>()?;
    Ok(rows)
}
