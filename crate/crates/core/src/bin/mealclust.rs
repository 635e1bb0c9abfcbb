use std::collections::BTreeSet;
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mealclust::episodes::SegmentConfig;
use mealclust::features::{FeatureMode, ScalingMethod};
use mealclust::pipeline::{self, InputSource, RunConfig, RunError};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_PIPELINE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "mealclust",
    version,
    about = "Cluster meal-taking episodes from home sensor logs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment episodes and sweep K-Means, GMM and DBSCAN per household
    Run(RunArgs),
    /// Write a synthetic sensor log and its planted-truth sidecar
    Generate {
        /// Household profile file
        #[arg(long)]
        profile: PathBuf,
        /// Trace CSV to write; the sidecar goes next to it as `<stem>.truth.csv`
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Sensor log CSV
    #[arg(
        long,
        conflicts_with = "synth_profile",
        required_unless_present = "synth_profile"
    )]
    input: Option<PathBuf>,
    /// Household profile to synthesise the log from
    #[arg(long)]
    synth_profile: Option<PathBuf>,
    /// Comma-separated meal locations
    #[arg(long, value_delimiter = ',', default_value = "kitchen,dining_room")]
    locations: Vec<String>,
    /// Inactivity gap that closes an episode, in minutes
    #[arg(long, default_value_t = 10.0)]
    gap_min: f64,
    #[arg(long, default_value_t = 1.0)]
    min_duration_min: f64,
    #[arg(long, default_value_t = 2)]
    min_events: usize,
    /// `duration` or `duration+hour`
    #[arg(long, default_value = "duration+hour")]
    features: FeatureMode,
    /// `none` or `zscore`
    #[arg(long, default_value = "none")]
    scale: ScalingMethod,
    /// Inclusive K-Means range, e.g. 2..10
    #[arg(long, default_value = "2..10", value_parser = parse_range)]
    k_range: RangeInclusive<usize>,
    /// Inclusive GMM component range
    #[arg(long, default_value = "2..10", value_parser = parse_range)]
    g_range: RangeInclusive<usize>,
    /// Comma-separated DBSCAN eps values
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    min_pts: usize,
    #[arg(long, env = "MEALCLUST_SEED", default_value_t = 42)]
    seed: u64,
    /// Output directory; one subdirectory per household
    #[arg(long)]
    out: PathBuf,
    /// Write rejected input rows as `line,reason` to this file
    #[arg(long)]
    rejections: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let b: usize = b
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|e| format!("`{b}`: {e}"))?;
    if a > b {
        return Err(format!("empty range `{s}`"));
    }
    Ok(a..=b)
}

impl RunArgs {
    fn into_config(self) -> RunConfig {
        let input = match (self.input, self.synth_profile) {
            (Some(p), _) => InputSource::Csv(p),
            (None, Some(p)) => InputSource::SynthProfile(p),
            (None, None) => unreachable!("clap requires one input"),
        };
        RunConfig {
            input,
            locations: self
                .locations
                .into_iter()
                .map(|l| l.trim().to_string())
                .collect::<BTreeSet<_>>(),
            segment: SegmentConfig {
                gap_threshold_min: self.gap_min,
                min_duration_min: self.min_duration_min,
                min_events: self.min_events,
            },
            features: self.features,
            scaling: self.scale,
            k_range: self.k_range,
            g_range: self.g_range,
            eps_values: self.eps,
            min_pts: self.min_pts,
            seed: self.seed,
            out_dir: self.out,
            rejections: self.rejections,
        }
    }
}

fn run(args: RunArgs) -> ExitCode {
    let config = args.into_config();
    match pipeline::run_pipeline(&config) {
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(RunError::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
        Ok(outcome) => {
            for s in &outcome.summaries {
                let db = s
                    .algorithms
                    .dbscan
                    .as_ref()
                    .map_or_else(|| "-".to_string(), |d| d.best_param.to_string());
                println!(
                    "{}: {} episodes, kmeans k={}, gmm g={}, dbscan eps={}",
                    s.household_id,
                    s.n_episodes,
                    s.algorithms.kmeans.best_param,
                    s.algorithms.gmm.best_param,
                    db
                );
            }
            if outcome.rejected_rows > 0 {
                eprintln!("warning: {} input rows rejected", outcome.rejected_rows);
            }
            for f in &outcome.failures {
                if f.household_id.is_empty() {
                    eprintln!("error: {}", f.reason);
                } else {
                    eprintln!("error: household {}: {}", f.household_id, f.reason);
                }
            }
            if outcome.is_success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_PIPELINE)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.cmd {
        Command::Run(args) => run(args),
        Command::Generate { profile, out } => match pipeline::generate_command(&profile, &out) {
            Ok(truth) => {
                println!("wrote {} and {}", out.display(), truth.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_INPUT)
            }
        },
    }
}
