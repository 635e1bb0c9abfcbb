//! Episode feature matrices and optional z-score standardisation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::episodes::ActivityEpisode;
use crate::error::{Error, Result};

pub const DURATION: &str = "duration_min";
pub const START_HOUR: &str = "start_hour";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    #[serde(rename = "duration")]
    DurationOnly,
    #[serde(rename = "duration+hour")]
    DurationAndStartHour,
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::DurationOnly => "duration",
            FeatureMode::DurationAndStartHour => "duration+hour",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "duration" => Ok(FeatureMode::DurationOnly),
            "duration+hour" => Ok(FeatureMode::DurationAndStartHour),
            other => Err(format!("unknown feature mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMethod {
    None,
    ZScore,
}

impl fmt::Display for ScalingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingMethod::None => "none",
            ScalingMethod::ZScore => "zscore",
        })
    }
}

impl FromStr for ScalingMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ScalingMethod::None),
            "zscore" => Ok(ScalingMethod::ZScore),
            other => Err(format!("unknown scaling `{other}`")),
        }
    }
}

/// How the stored data relates to the raw feature values.
#[derive(Debug, Clone, PartialEq)]
pub enum Scaling {
    None,
    /// `scaled = (raw - mean) / stddev` per column.
    ZScore {
        means: Vec<f64>,
        stddevs: Vec<f64>,
    },
}

/// Row-major `rows × dims` matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dims: usize,
    data: Vec<f64>,
    feature_names: Vec<String>,
    scaling: Scaling,
}

impl FeatureMatrix {
    pub fn new(
        rows: usize,
        dims: usize,
        data: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if dims == 0 {
            return Err(Error::arg("feature matrix needs at least one dimension"));
        }
        if data.len() != rows * dims {
            return Err(Error::arg(format!(
                "data length {} does not match {rows}x{dims}",
                data.len()
            )));
        }
        if feature_names.len() != dims {
            return Err(Error::arg(format!(
                "{} feature names for {dims} dimensions",
                feature_names.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!(
                "non-finite value at row {}, column {}",
                i / dims,
                i % dims
            )));
        }
        Ok(FeatureMatrix {
            rows,
            dims,
            data,
            feature_names,
            scaling: Scaling::None,
        })
    }

    /// Builds an unnamed matrix (`x0`, `x1`, ...) from row vectors.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != dims) {
            return Err(Error::arg("rows have differing lengths"));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        let names = (0..dims).map(|d| format!("x{d}")).collect();
        FeatureMatrix::new(rows.len(), dims, data, names)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dims)
    }

    pub fn column(&self, d: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(d).step_by(self.dims).copied()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    /// Maps a scaled value in column `d` back to raw units.
    pub fn unscale_value(&self, d: usize, v: f64) -> f64 {
        match &self.scaling {
            Scaling::None => v,
            Scaling::ZScore { means, stddevs } => v * stddevs[d] + means[d],
        }
    }

    /// The data in raw units.
    pub fn unscaled(&self) -> Vec<f64> {
        self.data
            .iter()
            .enumerate()
            .map(|(i, v)| self.unscale_value(i % self.dims, *v))
            .collect()
    }
}

pub fn build_features(episodes: &[ActivityEpisode], mode: FeatureMode) -> Result<FeatureMatrix> {
    if episodes.is_empty() {
        return Err(Error::arg("cannot build features from zero episodes"));
    }
    let (names, data): (Vec<&str>, Vec<f64>) = match mode {
        FeatureMode::DurationOnly => (
            vec![DURATION],
            episodes.iter().map(|e| e.duration_min).collect(),
        ),
        FeatureMode::DurationAndStartHour => (
            vec![DURATION, START_HOUR],
            episodes
                .iter()
                .flat_map(|e| [e.duration_min, e.start_hour])
                .collect(),
        ),
    };
    FeatureMatrix::new(
        episodes.len(),
        names.len(),
        data,
        names.into_iter().map(String::from).collect(),
    )
}

/// Standardises each column with its population mean and stddev. Constant
/// columns become zeros and record a stddev of 1.
pub fn scale_features(m: &FeatureMatrix, method: ScalingMethod) -> Result<FeatureMatrix> {
    match method {
        ScalingMethod::None => Ok(m.clone()),
        ScalingMethod::ZScore => {
            if m.rows < 2 {
                return Err(Error::arg(format!(
                    "z-scoring needs at least 2 rows, got {}",
                    m.rows
                )));
            }
            if !matches!(m.scaling, Scaling::None) {
                return Err(Error::arg("matrix is already scaled"));
            }
            let n = m.rows as f64;
            let means: Vec<f64> = (0..m.dims).map(|d| m.column(d).sum::<f64>() / n).collect();
            let stddevs: Vec<f64> = (0..m.dims)
                .map(|d| {
                    let var = m.column(d).map(|v| (v - means[d]).powi(2)).sum::<f64>() / n;
                    let sd = var.sqrt();
                    if sd > 0.0 && sd.is_finite() {
                        sd
                    } else {
                        1.0
                    }
                })
                .collect();
            let data = m
                .data
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let d = i % m.dims;
                    (v - means[d]) / stddevs[d]
                })
                .collect();
            Ok(FeatureMatrix {
                rows: m.rows,
                dims: m.dims,
                data,
                feature_names: m.feature_names.clone(),
                scaling: Scaling::ZScore { means, stddevs },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn episode(duration_min: f64, h: u32, m: u32) -> ActivityEpisode {
        let start = NaiveDate::from_ymd_opt(2023, 1, 1)
            .unwrap()
            .and_hms_opt(h, m, 0)
            .unwrap();
        ActivityEpisode {
            household_id: "H".into(),
            start,
            end: start + chrono::Duration::seconds((duration_min * 60.0) as i64),
            duration_min,
            start_hour: h as f64 + m as f64 / 60.0,
            event_count: 2,
        }
    }

    #[test]
    fn read_off_both_modes() {
        let eps = [episode(20.0, 12, 30)];
        let m = build_features(&eps, FeatureMode::DurationAndStartHour).unwrap();
        assert_eq!(m.data(), &[20.0, 12.5]);
        assert_eq!(m.feature_names(), &["duration_min", "start_hour"]);
        let m = build_features(&eps, FeatureMode::DurationOnly).unwrap();
        assert_eq!(m.data(), &[20.0]);
        assert_eq!(m.dims(), 1);
    }

    #[test]
    fn empty_episodes_rejected() {
        assert!(build_features(&[], FeatureMode::DurationOnly).is_err());
    }

    #[test]
    fn two_point_zscore() {
        let m = FeatureMatrix::from_rows(&[[2.0], [4.0]]).unwrap();
        let z = scale_features(&m, ScalingMethod::ZScore).unwrap();
        assert_eq!(z.data(), &[-1.0, 1.0]);
    }

    #[test]
    fn none_is_identity() {
        let m = FeatureMatrix::from_rows(&[[2.0, 1.0], [4.0, 3.0]]).unwrap();
        let s = scale_features(&m, ScalingMethod::None).unwrap();
        assert_eq!(s, m);
        assert_eq!(s.scaling(), &Scaling::None);
    }

    #[test]
    fn zscore_needs_two_rows() {
        let m = FeatureMatrix::from_rows(&[[2.0]]).unwrap();
        assert!(scale_features(&m, ScalingMethod::ZScore).is_err());
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let m = FeatureMatrix::from_rows(&[[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]).unwrap();
        let z = scale_features(&m, ScalingMethod::ZScore).unwrap();
        assert!(z.column(0).all(|v| v == 0.0));
        match z.scaling() {
            Scaling::ZScore { stddevs, .. } => assert_eq!(stddevs[0], 1.0),
            Scaling::None => panic!("expected zscore"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(FeatureMatrix::from_rows(&[[f64::NAN]]).is_err());
    }

    proptest! {
        #[test]
        fn zscored_columns_are_standardised(
            rows in prop::collection::vec(prop::array::uniform2(-1e3f64..1e3), 2..100)
        ) {
            let m = FeatureMatrix::from_rows(&rows).unwrap();
            let z = scale_features(&m, ScalingMethod::ZScore).unwrap();
            let n = rows.len() as f64;
            for d in 0..2 {
                let raw_sd = {
                    let mu = rows.iter().map(|r| r[d]).sum::<f64>() / n;
                    (rows.iter().map(|r| (r[d] - mu).powi(2)).sum::<f64>() / n).sqrt()
                };
                let mean = z.column(d).sum::<f64>() / n;
                let sd = (z.column(d).map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!(mean.abs() < 1e-9);
                if raw_sd > 1e-6 {
                    prop_assert!((sd - 1.0).abs() < 1e-9);
                }
            }
            let back = z.unscaled();
            for (a, b) in back.iter().zip(m.data()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
