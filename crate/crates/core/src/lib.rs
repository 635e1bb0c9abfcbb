//! Meal-taking activity analysis for binary smart-home sensor logs.
//!
//! The pipeline reads timestamped motion/contact activations, keeps the ones
//! fired in meal locations (kitchen, dining room), groups them into activity
//! episodes by inactivity gaps, and clusters the episodes' duration and
//! start-hour with K-Means, a Gaussian mixture fitted by EM, and DBSCAN.
//! Each algorithm's free parameter is chosen by minimising the
//! Davies-Bouldin index over a sweep.
//!
//! ```no_run
//! use mealclust::{episodes, events, features, validation};
//!
//! let text = std::fs::read_to_string("trace.csv").unwrap();
//! let parsed = events::parse_events(text.as_bytes()).unwrap();
//! let meals = events::filter_meal_locations(&parsed.events, &events::default_meal_locations()).unwrap();
//! let eps = episodes::segment_episodes(&meals, &episodes::SegmentConfig::default()).unwrap();
//! let m = features::build_features(&eps, features::FeatureMode::DurationAndStartHour).unwrap();
//! let m = features::scale_features(&m, features::ScalingMethod::ZScore).unwrap();
//! let report = validation::sweep_kmeans(&m, 2..=10, 42).unwrap();
//! println!("best k = {}", report.best.param);
//! ```

pub mod dbscan;
pub mod episodes;
pub mod error;
pub mod events;
pub mod features;
pub mod gmm;
pub mod kmeans;
pub mod pipeline;
pub mod profile;
pub mod synth;
pub mod validation;

pub use error::{Error, Result};
