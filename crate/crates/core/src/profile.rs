//! Text format for [`HouseholdProfile`]s.
//!
//! ```text
//! # comment
//! household_id = synthetic-01
//! days = 365
//! noise_events_per_day = 20
//! seed = 42
//!
//! [category]
//! name = breakfast
//! start_hour_mean = 8.0
//! start_hour_sd = 0.5
//! duration_mean_min = 15
//! duration_sd_min = 3
//! daily_probability = 0.95
//! events_per_minute = 1.0
//! ```
//!
//! Top-level keys come first; each `[category]` line opens a new category
//! block. Every key is required and unknown keys are rejected.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::synth::{HouseholdProfile, MealCategory};

/// The profile shipped with the crate.
pub const BUNDLED_PROFILE: &str = include_str!("../profiles/default.profile");

const TOP_KEYS: [&str; 4] = ["household_id", "days", "noise_events_per_day", "seed"];
const CATEGORY_KEYS: [&str; 7] = [
    "name",
    "start_hour_mean",
    "start_hour_sd",
    "duration_mean_min",
    "duration_sd_min",
    "daily_probability",
    "events_per_minute",
];

type Block = Vec<(String, String, usize)>;

fn lookup<'b>(block: &'b Block, key: &str, scope: &str) -> Result<&'b (String, String, usize)> {
    block
        .iter()
        .find(|(k, _, _)| k == key)
        .ok_or_else(|| Error::Profile {
            field: format!("{scope}{key}"),
            reason: "missing".into(),
        })
}

fn value<T: FromStr>(block: &Block, key: &str, scope: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let (_, raw, line) = lookup(block, key, scope)?;
    raw.parse::<T>().map_err(|e| Error::Profile {
        field: format!("{scope}{key}"),
        reason: format!("line {line}: `{raw}`: {e}"),
    })
}

pub fn parse_profile(text: &str) -> Result<HouseholdProfile> {
    let mut top: Block = Vec::new();
    let mut categories: Vec<Block> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "[category]" {
            categories.push(Vec::new());
            continue;
        }
        let Some((key, val)) = line.split_once('=') else {
            return Err(Error::Profile {
                field: line.to_string(),
                reason: format!("line {line_no}: expected `key = value`"),
            });
        };
        let (key, val) = (key.trim().to_string(), val.trim().to_string());
        let (block, allowed) = match categories.last_mut() {
            Some(block) => (block, &CATEGORY_KEYS[..]),
            None => (&mut top, &TOP_KEYS[..]),
        };
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Profile {
                field: key,
                reason: format!("line {line_no}: unknown key"),
            });
        }
        if block.iter().any(|(k, _, _)| *k == key) {
            return Err(Error::Profile {
                field: key,
                reason: format!("line {line_no}: duplicate key"),
            });
        }
        block.push((key, val, line_no));
    }

    let categories = categories
        .iter()
        .enumerate()
        .map(|(i, block)| {
            let scope = format!("category[{i}].");
            Ok(MealCategory {
                name: value(block, "name", &scope)?,
                start_hour_mean: value(block, "start_hour_mean", &scope)?,
                start_hour_sd: value(block, "start_hour_sd", &scope)?,
                duration_mean_min: value(block, "duration_mean_min", &scope)?,
                duration_sd_min: value(block, "duration_sd_min", &scope)?,
                daily_probability: value(block, "daily_probability", &scope)?,
                events_per_minute: value(block, "events_per_minute", &scope)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let profile = HouseholdProfile {
        household_id: value(&top, "household_id", "")?,
        days: value(&top, "days", "")?,
        noise_events_per_day: value(&top, "noise_events_per_day", "")?,
        seed: value(&top, "seed", "")?,
        categories,
    };
    profile.validate()?;
    Ok(profile)
}

pub fn format_profile(profile: &HouseholdProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "household_id = {}", profile.household_id);
    let _ = writeln!(out, "days = {}", profile.days);
    let _ = writeln!(
        out,
        "noise_events_per_day = {}",
        profile.noise_events_per_day
    );
    let _ = writeln!(out, "seed = {}", profile.seed);
    for c in &profile.categories {
        let _ = writeln!(out, "\n[category]");
        let _ = writeln!(out, "name = {}", c.name);
        let _ = writeln!(out, "start_hour_mean = {}", c.start_hour_mean);
        let _ = writeln!(out, "start_hour_sd = {}", c.start_hour_sd);
        let _ = writeln!(out, "duration_mean_min = {}", c.duration_mean_min);
        let _ = writeln!(out, "duration_sd_min = {}", c.duration_sd_min);
        let _ = writeln!(out, "daily_probability = {}", c.daily_probability);
        let _ = writeln!(out, "events_per_minute = {}", c.events_per_minute);
    }
    out
}
