//! Gaussian mixtures with full covariances, fitted by expectation-maximisation.
//!
//! The mixture density is `Σ_k π_k N(x; μ_k, Σ_k)`. Fits start from a K-Means
//! partition with the same seed. Responsibilities are evaluated in log space
//! so that well separated components do not underflow.
//!
//! Covariances are kept at or above a variance floor by clipping their
//! eigenvalues in the M-step. Clipping is the exact maximiser of the expected
//! complete-data log-likelihood over covariances whose eigenvalues are all at
//! least the floor, so the log-likelihood still cannot decrease between
//! iterations.

use std::io::{Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, DURATION};
use crate::kmeans;

pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const VARIANCE_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

impl GmmParams {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let g = weights.len();
        if g == 0 || means.len() != g || covariances.len() != g {
            return Err(Error::arg(
                "weights, means and covariances must have the same non-zero length",
            ));
        }
        let dims = means[0].len();
        if dims == 0 || means.iter().any(|m| m.len() != dims) {
            return Err(Error::arg(
                "component means must share a non-zero dimension",
            ));
        }
        if covariances
            .iter()
            .any(|c| c.nrows() != dims || c.ncols() != dims)
        {
            return Err(Error::arg("covariance shape does not match mean dimension"));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::arg("weights must lie in [0, 1]"));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::arg("weights must sum to 1"));
        }
        let params = GmmParams {
            weights,
            means,
            covariances,
        };
        params.components()?;
        Ok(params)
    }

    pub fn g(&self) -> usize {
        self.weights.len()
    }

    pub fn dims(&self) -> usize {
        self.means[0].len()
    }

    fn components(&self) -> Result<Vec<Component>> {
        (0..self.g()).map(|k| Component::new(self, k)).collect()
    }
}

/// A component prepared for repeated log-density evaluation.
struct Component {
    log_weight: f64,
    mean: Vec<f64>,
    /// Row-major lower Cholesky factor of the covariance.
    chol: Vec<f64>,
    log_norm: f64,
}

impl Component {
    fn new(params: &GmmParams, k: usize) -> Result<Self> {
        let d = params.dims();
        let cov = &params.covariances[k];
        if (cov - cov.transpose()).amax() > 1e-9 * cov.amax().max(1.0) {
            return Err(Error::arg(format!("covariance {k} is not symmetric")));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::arg(format!("covariance {k} is not positive definite")))?;
        let l = chol.l();
        let log_det: f64 = 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
        let mut flat = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                flat[i * d + j] = l[(i, j)];
            }
        }
        Ok(Component {
            log_weight: params.weights[k].ln(),
            mean: params.means[k].clone(),
            chol: flat,
            log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
        })
    }

    fn log_pdf(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let d = self.mean.len();
        // Forward substitution: L z = x - μ.
        let mut maha = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for j in 0..i {
                s -= self.chol[i * d + j] * scratch[j];
            }
            let z = s / self.chol[i * d + i];
            scratch[i] = z;
            maha += z * z;
        }
        self.log_norm - 0.5 * maha
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Fills `out` with `ln π_k + ln N(x; θ_k)` and returns their log-sum.
fn joint_log(components: &[Component], x: &[f64], out: &mut [f64], scratch: &mut [f64]) -> f64 {
    for (o, c) in out.iter_mut().zip(components) {
        *o = c.log_weight + c.log_pdf(x, scratch);
    }
    log_sum_exp(out)
}

fn check_dims(x: &[f64], params: &GmmParams) -> Result<()> {
    if x.len() != params.dims() {
        return Err(Error::arg(format!(
            "point has {} dims, model has {}",
            x.len(),
            params.dims()
        )));
    }
    Ok(())
}

/// Mixture density at `x`.
pub fn gmm_density(x: &[f64], params: &GmmParams) -> Result<f64> {
    check_dims(x, params)?;
    let components = params.components()?;
    let mut terms = vec![0.0; params.g()];
    let mut scratch = vec![0.0; params.dims()];
    Ok(joint_log(&components, x, &mut terms, &mut scratch).exp())
}

/// Posterior component probabilities for `x`.
pub fn responsibilities(x: &[f64], params: &GmmParams) -> Result<Vec<f64>> {
    check_dims(x, params)?;
    let components = params.components()?;
    let mut terms = vec![0.0; params.g()];
    let mut scratch = vec![0.0; params.dims()];
    let total = joint_log(&components, x, &mut terms, &mut scratch);
    Ok(terms.iter().map(|t| (t - total).exp()).collect())
}

/// Total log-likelihood of the rows of `m`.
pub fn log_likelihood(m: &FeatureMatrix, params: &GmmParams) -> Result<f64> {
    if m.dims() != params.dims() {
        return Err(Error::arg("data and model dimensions differ"));
    }
    let components = params.components()?;
    let mut terms = vec![0.0; params.g()];
    let mut scratch = vec![0.0; params.dims()];
    Ok(m.iter_rows()
        .map(|x| joint_log(&components, x, &mut terms, &mut scratch))
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub params: GmmParams,
    /// Argmax responsibility per row, ties to the lowest component.
    pub labels: Vec<usize>,
    pub log_likelihood: f64,
    /// Log-likelihood of the initial parameters and after every EM step.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub seed: u64,
}

/// Raises every eigenvalue of a symmetric matrix to at least `floor`.
fn clip_eigenvalues(cov: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().all(|l| *l >= floor) {
        return (&cov + cov.transpose()) * 0.5;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    (&out + out.transpose()) * 0.5
}

fn weighted_moments(
    m: &FeatureMatrix,
    weights: impl Fn(usize) -> f64,
    total: f64,
) -> (Vec<f64>, DMatrix<f64>) {
    let d = m.dims();
    let mut mean = vec![0.0; d];
    for (i, x) in m.iter_rows().enumerate() {
        let w = weights(i);
        for (a, v) in mean.iter_mut().zip(x) {
            *a += w * v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= total);
    let mut cov = DMatrix::zeros(d, d);
    for (i, x) in m.iter_rows().enumerate() {
        let w = weights(i);
        if w == 0.0 {
            continue;
        }
        for r in 0..d {
            let dr = x[r] - mean[r];
            for c in 0..=r {
                cov[(r, c)] += w * dr * (x[c] - mean[c]);
            }
        }
    }
    for r in 0..d {
        for c in 0..=r {
            let v = cov[(r, c)] / total;
            cov[(r, c)] = v;
            cov[(c, r)] = v;
        }
    }
    (mean, cov)
}

fn init_from_kmeans(m: &FeatureMatrix, g: usize, seed: u64) -> Result<GmmParams> {
    let km = kmeans::kmeans_fit(m, g, seed, kmeans::DEFAULT_MAX_ITER, kmeans::DEFAULT_TOL)?;
    let n = m.rows() as f64;
    let mut weights = Vec::with_capacity(g);
    let mut means = Vec::with_capacity(g);
    let mut covariances = Vec::with_capacity(g);
    for k in 0..g {
        let count = km.labels.iter().filter(|&&l| l == k).count() as f64;
        let (mean, cov) = weighted_moments(m, |i| if km.labels[i] == k { 1.0 } else { 0.0 }, count);
        weights.push(count / n);
        means.push(mean);
        covariances.push(clip_eigenvalues(cov, VARIANCE_FLOOR));
    }
    Ok(GmmParams {
        weights,
        means,
        covariances,
    })
}

/// Runs the E-step, filling the row-major `n × g` responsibility matrix.
/// Returns the log-likelihood.
fn e_step(
    m: &FeatureMatrix,
    params: &GmmParams,
    resp: &mut [f64],
    iteration: usize,
) -> Result<f64> {
    let g = params.g();
    let components = params.components().map_err(|e| Error::Fit {
        iteration,
        reason: e.to_string(),
    })?;
    let mut scratch = vec![0.0; m.dims()];
    let mut ll = 0.0;
    for (x, row) in m.iter_rows().zip(resp.chunks_exact_mut(g)) {
        let total = joint_log(&components, x, row, &mut scratch);
        if !total.is_finite() {
            return Err(Error::Fit {
                iteration,
                reason: "responsibilities are undefined".into(),
            });
        }
        for r in row.iter_mut() {
            *r = (*r - total).exp();
        }
        ll += total;
    }
    Ok(ll)
}

fn m_step(m: &FeatureMatrix, resp: &[f64], prev: &GmmParams) -> GmmParams {
    let g = prev.g();
    let nk: Vec<f64> = (0..g)
        .map(|k| resp.iter().skip(k).step_by(g).sum::<f64>())
        .collect();
    let total: f64 = nk.iter().sum();
    let weights = nk.iter().map(|v| (v / total).clamp(0.0, 1.0)).collect();
    let mut means = Vec::with_capacity(g);
    let mut covariances = Vec::with_capacity(g);
    for k in 0..g {
        // A component with no mass contributes nothing; keep its old shape.
        if nk[k] > 1e-280 {
            let (mean, cov) = weighted_moments(m, |i| resp[i * g + k], nk[k]);
            means.push(mean);
            covariances.push(clip_eigenvalues(cov, VARIANCE_FLOOR));
        } else {
            means.push(prev.means[k].clone());
            covariances.push(prev.covariances[k].clone());
        }
    }
    GmmParams {
        weights,
        means,
        covariances,
    }
}

pub fn gmm_fit(
    m: &FeatureMatrix,
    g: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<GmmModel> {
    gmm_fit_observed(m, g, seed, max_iter, tol, |_, _| {})
}

/// Like [`gmm_fit`], calling `observer(iteration, params)` after every M-step.
pub fn gmm_fit_observed<F>(
    m: &FeatureMatrix,
    g: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    mut observer: F,
) -> Result<GmmModel>
where
    F: FnMut(usize, &GmmParams),
{
    let n = m.rows();
    if n < 2 {
        return Err(Error::arg(format!("GMM needs at least 2 rows, got {n}")));
    }
    if g < 1 || g > n {
        return Err(Error::arg(format!("g must be in 1..={n}, got {g}")));
    }
    if max_iter < 1 {
        return Err(Error::arg("max_iter must be at least 1"));
    }
    if !(tol >= 0.0) {
        return Err(Error::arg(format!("tol must be non-negative, got {tol}")));
    }

    let mut params = init_from_kmeans(m, g, seed)?;
    let mut resp = vec![0.0; n * g];
    let mut ll = e_step(m, &params, &mut resp, 0)?;
    let mut trace = vec![ll];
    let mut iterations_run = 0;
    let mut converged = false;

    for iter in 1..=max_iter {
        params = m_step(m, &resp, &params);
        observer(iter, &params);
        let next = e_step(m, &params, &mut resp, iter)?;
        trace.push(next);
        iterations_run = iter;
        let improvement = next - ll;
        ll = next;
        if improvement < tol * trace[trace.len() - 2].abs() {
            converged = true;
            break;
        }
    }

    let labels = resp
        .chunks_exact(g)
        .map(|row| {
            let mut best = 0;
            for k in 1..g {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();

    Ok(GmmModel {
        params,
        labels,
        log_likelihood: ll,
        log_likelihood_trace: trace,
        iterations_run,
        converged,
        seed,
    })
}

/// Per-component summary of a fit in duration terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    /// Component index in the fitted model.
    pub category: usize,
    /// Component mean of the duration feature, in minutes.
    pub mean_duration_min: f64,
    pub weight: f64,
    /// Rows hard-assigned to the component.
    pub count: usize,
}

/// One row per component, ascending by mean duration.
pub fn category_summary(model: &GmmModel, m: &FeatureMatrix) -> Result<Vec<CategoryRow>> {
    if model.labels.len() != m.rows() || model.params.dims() != m.dims() {
        return Err(Error::arg("model was not fitted on this feature matrix"));
    }
    if m.feature_names().first().map(String::as_str) != Some(DURATION) {
        return Err(Error::arg(format!("feature column 0 must be `{DURATION}`")));
    }
    let mut counts = vec![0usize; model.params.g()];
    for l in &model.labels {
        counts[*l] += 1;
    }
    let mut rows: Vec<CategoryRow> = (0..model.params.g())
        .map(|k| CategoryRow {
            category: k,
            mean_duration_min: m.unscale_value(0, model.params.means[k][0]),
            weight: model.params.weights[k],
            count: counts[k],
        })
        .collect();
    rows.sort_by(|a, b| {
        a.mean_duration_min
            .total_cmp(&b.mean_duration_min)
            .then(a.category.cmp(&b.category))
    });
    Ok(rows)
}

/// Writes `category,mean_duration_min,weight,count`.
pub fn write_categories<W: Write>(out: W, rows: &[CategoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["category", "mean_duration_min", "weight", "count"])?;
    }
    w.flush().map_err(|e| Error::io("<categories>", e))?;
    Ok(())
}

pub fn read_categories<R: Read>(input: R) -> Result<Vec<CategoryRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<CategoryRow>, _>>()?;
    Ok(rows)
}
