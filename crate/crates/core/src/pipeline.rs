//! End-to-end run: ingest, filter, segment, featurise, sweep all three
//! algorithms and write per-household artifacts.
//!
//! Each household gets its own directory under the output root containing
//! `episodes.csv`, `{kmeans,gmm,dbscan}_sweep.json`,
//! `{kmeans,gmm,dbscan}_plot.csv`, `categories.csv` and `summary.json`.
//! A failing household is reported and skipped; the others still run.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dbscan;
use crate::episodes::{self, ActivityEpisode, SegmentConfig};
use crate::error::{Error, Result};
use crate::events::{self, SensorEvent};
use crate::features::{self, FeatureMode, ScalingMethod};
use crate::gmm::{self, CategoryRow};
use crate::profile;
use crate::synth;
use crate::validation::{self, SweepReport};

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    /// A sensor log in the events CSV schema.
    Csv(PathBuf),
    /// A household profile to synthesise a trace from.
    SynthProfile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: InputSource,
    pub locations: BTreeSet<String>,
    pub segment: SegmentConfig,
    pub features: FeatureMode,
    pub scaling: ScalingMethod,
    pub k_range: RangeInclusive<usize>,
    pub g_range: RangeInclusive<usize>,
    pub eps_values: Vec<f64>,
    pub min_pts: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Where to write the `line,reason` rejection report, if anywhere.
    pub rejections: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(input: InputSource, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            input,
            locations: events::default_meal_locations(),
            segment: SegmentConfig::default(),
            features: FeatureMode::DurationAndStartHour,
            scaling: ScalingMethod::None,
            k_range: 2..=10,
            g_range: 2..=10,
            eps_values: validation::default_eps_values(),
            min_pts: dbscan::DEFAULT_MIN_PTS,
            seed: 42,
            out_dir: out_dir.into(),
            rejections: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.locations.is_empty() {
            return Err(Error::arg("at least one location is required"));
        }
        self.segment.validate()?;
        for (name, r) in [("k", &self.k_range), ("g", &self.g_range)] {
            if r.is_empty() || *r.start() < 2 {
                return Err(Error::arg(format!(
                    "{name} range {}..{} must be non-empty and start at 2 or more",
                    r.start(),
                    r.end()
                )));
            }
        }
        if self.eps_values.is_empty() {
            return Err(Error::arg("eps list is empty"));
        }
        if let Some(e) = self
            .eps_values
            .iter()
            .find(|e| !(**e > 0.0) || !e.is_finite())
        {
            return Err(Error::arg(format!("eps values must be positive, got {e}")));
        }
        if self.min_pts < 1 {
            return Err(Error::arg("min_pts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub best_param: u64,
    pub dbi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmSummary {
    pub best_param: u64,
    pub dbi: f64,
    pub categories: Vec<CategoryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanSummary {
    pub best_param: f64,
    pub dbi: f64,
    pub n_noise: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummaries {
    pub kmeans: CountSummary,
    pub gmm: GmmSummary,
    /// `None` when no eps value produced two or more clusters.
    pub dbscan: Option<DbscanSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdSummary {
    pub household_id: String,
    pub n_episodes: usize,
    pub algorithms: AlgorithmSummaries,
}

pub fn read_summary(path: &Path) -> Result<HouseholdSummary> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(file)?)
}

/// Fatal problems that stop the run before any household is processed.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Input(Error),
    #[error("{0}")]
    Config(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdFailure {
    pub household_id: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct RunOutcome {
    pub summaries: Vec<HouseholdSummary>,
    pub failures: Vec<HouseholdFailure>,
    pub rejected_rows: usize,
}

impl RunOutcome {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty() && !self.summaries.is_empty()
    }
}

fn load_events(config: &RunConfig) -> Result<(Vec<SensorEvent>, Vec<events::Rejection>)> {
    match &config.input {
        InputSource::Csv(path) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let parsed = events::parse_events(std::io::BufReader::new(file))?;
            Ok((parsed.events, parsed.rejections))
        }
        InputSource::SynthProfile(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let profile = profile::parse_profile(&text)?;
            Ok((synth::generate_trace(&profile)?.events, Vec::new()))
        }
    }
}

/// Directory name for a household id; anything outside `[A-Za-z0-9_.-]`
/// becomes `_`.
pub fn household_dir_name(household_id: &str) -> String {
    let name: String = household_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if name.is_empty() || name.chars().all(|c| c == '.') {
        format!("_{name}")
    } else {
        name
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    let name = report.algorithm.as_str();
    write_with(&dir.join(format!("{name}_sweep.json")), |w| {
        validation::write_report_json(&mut *w, report)?;
        writeln!(w).map_err(|e| Error::io(dir, e))
    })?;
    write_with(&dir.join(format!("{name}_plot.csv")), |w| {
        validation::write_plot_csv(w, report)
    })
}

/// Runs one household. A DBSCAN sweep with no valid entry still writes the
/// other artifacts and the summary before reporting the failure.
fn run_household(
    config: &RunConfig,
    household_id: &str,
    meal_events: &[SensorEvent],
) -> std::result::Result<HouseholdSummary, (Option<HouseholdSummary>, String)> {
    let fail = |e: Error| (None, e.to_string());
    let episodes: Vec<ActivityEpisode> =
        episodes::segment_episodes(meal_events, &config.segment).map_err(fail)?;
    if episodes.is_empty() {
        return Err((None, "no episodes".into()));
    }
    let raw = features::build_features(&episodes, config.features).map_err(fail)?;
    let m = features::scale_features(&raw, config.scaling).map_err(fail)?;

    let (kmeans, gmm_sweep, dbscan) = std::thread::scope(|s| {
        let km = s.spawn(|| validation::sweep_kmeans(&m, config.k_range.clone(), config.seed));
        let gm = s.spawn(|| validation::sweep_gmm(&m, config.g_range.clone(), config.seed));
        let db = validation::sweep_dbscan(&m, &config.eps_values, config.min_pts);
        (
            km.join().expect("kmeans sweep panicked"),
            gm.join().expect("gmm sweep panicked"),
            db,
        )
    });
    let kmeans = kmeans.map_err(fail)?.with_household(household_id);
    let gmm_sweep = gmm_sweep.map_err(fail)?.with_household(household_id);
    let dbscan = match dbscan {
        Ok(r) => Ok(r.with_household(household_id)),
        Err(Error::NoValidClustering) => Err(format!("dbscan: {}", Error::NoValidClustering)),
        Err(e) => return Err(fail(e)),
    };

    let best_g = gmm_sweep.best.param as usize;
    let model = gmm::gmm_fit(
        &m,
        best_g,
        config.seed,
        gmm::DEFAULT_MAX_ITER,
        gmm::DEFAULT_TOL,
    )
    .map_err(fail)?;
    let categories = gmm::category_summary(&model, &m).map_err(fail)?;

    let dir = config.out_dir.join(household_dir_name(household_id));
    let write_all = || -> Result<()> {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_with(&dir.join("episodes.csv"), |w| {
            episodes::write_episodes(w, &episodes)
        })?;
        write_sweep(&dir, &kmeans)?;
        write_sweep(&dir, &gmm_sweep)?;
        if let Ok(db) = &dbscan {
            write_sweep(&dir, db)?;
        }
        write_with(&dir.join("categories.csv"), |w| {
            gmm::write_categories(w, &categories)
        })
    };
    write_all().map_err(fail)?;

    let summary = HouseholdSummary {
        household_id: household_id.to_string(),
        n_episodes: episodes.len(),
        algorithms: AlgorithmSummaries {
            kmeans: CountSummary {
                best_param: kmeans.best.param as u64,
                dbi: kmeans.best.dbi.expect("best entry has a defined index"),
            },
            gmm: GmmSummary {
                best_param: best_g as u64,
                dbi: gmm_sweep.best.dbi.expect("best entry has a defined index"),
                categories,
            },
            dbscan: dbscan.as_ref().ok().map(|r| DbscanSummary {
                best_param: r.best.param,
                dbi: r.best.dbi.expect("best entry has a defined index"),
                n_noise: r.best.n_noise,
            }),
        },
    };
    let summary_path = dir.join("summary.json");
    write_with(&summary_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        writeln!(w).map_err(|e| Error::io(&summary_path, e))
    })
    .map_err(fail)?;

    match dbscan {
        Ok(_) => Ok(summary),
        Err(reason) => Err((Some(summary), reason)),
    }
}

pub fn run_pipeline(config: &RunConfig) -> std::result::Result<RunOutcome, RunError> {
    config.validate().map_err(RunError::Config)?;
    let (all_events, rejections) = load_events(config).map_err(RunError::Input)?;
    if let Some(path) = &config.rejections {
        write_with(path, |w| events::write_rejections(w, &rejections)).map_err(RunError::Input)?;
    }
    let meal =
        events::filter_meal_locations(&all_events, &config.locations).map_err(RunError::Config)?;

    // Households seen anywhere in the log, so a house with no meal activity
    // is reported rather than silently skipped.
    let mut by_household: BTreeMap<&str, Vec<SensorEvent>> = all_events
        .iter()
        .map(|e| (e.household_id.as_str(), Vec::new()))
        .collect();
    for e in meal {
        if let Some(v) = by_household.get_mut(e.household_id.as_str()) {
            v.push(e);
        }
    }

    let mut outcome = RunOutcome {
        rejected_rows: rejections.len(),
        ..RunOutcome::default()
    };
    if by_household.is_empty() {
        outcome.failures.push(HouseholdFailure {
            household_id: String::new(),
            reason: "no episodes".into(),
        });
        return Ok(outcome);
    }
    for (household_id, evs) in by_household {
        match run_household(config, household_id, &evs) {
            Ok(summary) => outcome.summaries.push(summary),
            Err((summary, reason)) => {
                outcome.summaries.extend(summary);
                outcome.failures.push(HouseholdFailure {
                    household_id: household_id.to_string(),
                    reason,
                });
            }
        }
    }
    Ok(outcome)
}

/// Writes a synthetic trace and its planted-truth sidecar. The sidecar path
/// is the trace path with its extension replaced by `truth.csv`.
pub fn generate_command(profile_path: &Path, output_path: &Path) -> Result<PathBuf> {
    let text = fs::read_to_string(profile_path).map_err(|e| Error::io(profile_path, e))?;
    let profile = profile::parse_profile(&text)?;
    let trace = synth::generate_trace(&profile)?;
    if let Some(parent) = output_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_with(output_path, |w| events::write_events(w, &trace.events))?;
    let truth = truth_path(output_path);
    write_with(&truth, |w| synth::write_planted(w, &trace.planted))?;
    Ok(truth)
}

pub fn truth_path(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("truth.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dir_names_are_sanitised() {
        assert_eq!(household_dir_name("2385"), "2385");
        assert_eq!(household_dir_name("a/b c"), "a_b_c");
        assert_eq!(household_dir_name(".."), "_..");
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(InputSource::Csv("x.csv".into()), "out");
        assert!(c.validate().is_ok());
        c.k_range = 1..=4;
        assert!(c.validate().is_err());
        c.k_range = 2..=4;
        c.eps_values = vec![1.0, -2.0];
        assert!(c.validate().is_err());
        c.eps_values = vec![1.0];
        c.locations.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn truth_sidecar_path() {
        assert_eq!(
            truth_path(Path::new("a/trace.csv")),
            PathBuf::from("a/trace.truth.csv")
        );
    }
}
