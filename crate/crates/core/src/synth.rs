//! Synthetic household traces with planted meal structure.
//!
//! Every day, each meal category independently produces one episode with its
//! daily probability. Start hour and duration are drawn from normals
//! truncated at three standard deviations; the episode's first and last
//! activations sit exactly at its start and end, with further activations
//! spread uniformly between them at the category's rate. Spurious
//! activations in non-meal rooms are sprinkled uniformly over each day.
//!
//! Randomness comes from ChaCha8 seeded with the profile seed, so a profile
//! yields the same trace on every platform.

use std::io::{Read, Write};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{self, parse_timestamp, SensorEvent, SensorKind, TIMESTAMP_FORMAT};

#[derive(Debug, Clone, PartialEq)]
pub struct MealCategory {
    pub name: String,
    pub start_hour_mean: f64,
    pub start_hour_sd: f64,
    pub duration_mean_min: f64,
    pub duration_sd_min: f64,
    pub daily_probability: f64,
    pub events_per_minute: f64,
}

impl MealCategory {
    fn validate(&self) -> Result<()> {
        let field = |name: &str, reason: String| Error::Profile {
            field: format!("{}.{name}", self.name),
            reason,
        };
        if self.name.trim().is_empty() {
            return Err(Error::Profile {
                field: "name".into(),
                reason: "category name is empty".into(),
            });
        }
        if !(0.0..24.0).contains(&self.start_hour_mean) {
            return Err(field(
                "start_hour_mean",
                format!("{} not in [0, 24)", self.start_hour_mean),
            ));
        }
        for (name, v) in [
            ("start_hour_sd", self.start_hour_sd),
            ("duration_mean_min", self.duration_mean_min),
            ("duration_sd_min", self.duration_sd_min),
            ("events_per_minute", self.events_per_minute),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(field(name, format!("{v} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.daily_probability) {
            return Err(field(
                "daily_probability",
                format!("{} not in [0, 1]", self.daily_probability),
            ));
        }
        if self.duration_mean_min - 3.0 * self.duration_sd_min <= 0.0 {
            return Err(field(
                "duration_sd_min",
                "duration_mean_min - 3 * duration_sd_min must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdProfile {
    pub household_id: String,
    pub categories: Vec<MealCategory>,
    pub days: u32,
    pub noise_events_per_day: f64,
    pub seed: u64,
}

impl HouseholdProfile {
    /// Breakfast, lunch, afternoon snack and dinner. Start-hour sd is half an
    /// hour and duration sd is 20% of the mean.
    pub fn four_category(household_id: &str, days: u32, seed: u64) -> Self {
        let cat = |name: &str, hour: f64, minutes: f64, p: f64| MealCategory {
            name: name.to_string(),
            start_hour_mean: hour,
            start_hour_sd: 0.5,
            duration_mean_min: minutes,
            duration_sd_min: 0.2 * minutes,
            daily_probability: p,
            events_per_minute: 1.0,
        };
        HouseholdProfile {
            household_id: household_id.to_string(),
            categories: vec![
                cat("breakfast", 8.0, 15.0, 0.95),
                cat("lunch", 12.5, 30.0, 1.0),
                cat("snack", 16.5, 8.0, 0.6),
                cat("dinner", 19.5, 35.0, 1.0),
            ],
            days,
            noise_events_per_day: 20.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.household_id.trim().is_empty() {
            return Err(Error::Profile {
                field: "household_id".into(),
                reason: "must not be empty".into(),
            });
        }
        if self.categories.is_empty() {
            return Err(Error::Profile {
                field: "category".into(),
                reason: "at least one category is required".into(),
            });
        }
        if !(self.noise_events_per_day >= 0.0) || !self.noise_events_per_day.is_finite() {
            return Err(Error::Profile {
                field: "noise_events_per_day".into(),
                reason: format!("{} must be non-negative", self.noise_events_per_day),
            });
        }
        self.categories.iter().try_for_each(MealCategory::validate)
    }
}

/// One episode the generator planted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEpisode {
    pub day: u32,
    pub category: String,
    #[serde(with = "timestamp_format")]
    pub start: NaiveDateTime,
    pub duration_min: f64,
}

mod timestamp_format {
    use super::{parse_timestamp, NaiveDateTime, TIMESTAMP_FORMAT};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.format(TIMESTAMP_FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let raw = String::deserialize(d)?;
        parse_timestamp(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    /// Sorted the same way [`events::parse_events`] sorts.
    pub events: Vec<SensorEvent>,
    pub planted: Vec<PlantedEpisode>,
}

const MEAL_SENSORS: [(&str, SensorKind, &str); 4] = [
    ("kitchen_pir", SensorKind::Motion, "kitchen"),
    ("fridge_door", SensorKind::Contact, "kitchen"),
    ("cupboard_door", SensorKind::Contact, "kitchen"),
    ("dining_pir", SensorKind::Motion, "dining_room"),
];

const OTHER_SENSORS: [(&str, SensorKind, &str); 4] = [
    ("bedroom_pir", SensorKind::Motion, "bedroom"),
    ("bathroom_pir", SensorKind::Motion, "bathroom"),
    ("living_pir", SensorKind::Motion, "living_room"),
    ("entrance_door", SensorKind::Contact, "entrance"),
];

const SECONDS_PER_DAY: i64 = 86_400;

fn first_day() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2023, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid constant date")
}

/// Draws from `N(mean, sd)` until the value lies within three sd of the mean
/// and satisfies `accept`.
fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, accept: impl Fn(f64) -> bool) -> f64 {
    let normal = Normal::new(mean, sd).expect("sd validated positive");
    loop {
        let v = normal.sample(rng);
        if (v - mean).abs() <= 3.0 * sd && accept(v) {
            return v;
        }
    }
}

fn activation(household: &str, t: NaiveDateTime, sensor: &(&str, SensorKind, &str)) -> SensorEvent {
    SensorEvent {
        timestamp: t,
        household_id: household.to_string(),
        sensor_id: sensor.0.to_string(),
        sensor_kind: sensor.1,
        location: sensor.2.to_string(),
        value: 1,
    }
}

pub fn generate_trace(profile: &HouseholdProfile) -> Result<SyntheticTrace> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let noise = if profile.noise_events_per_day > 0.0 {
        Some(
            Poisson::new(profile.noise_events_per_day).map_err(|e| Error::Profile {
                field: "noise_events_per_day".into(),
                reason: e.to_string(),
            })?,
        )
    } else {
        None
    };
    let household = profile.household_id.as_str();
    let mut evs = Vec::new();
    let mut planted = Vec::new();

    for day in 0..profile.days {
        let midnight = first_day() + Duration::days(day as i64);
        for cat in &profile.categories {
            if rng.random::<f64>() >= cat.daily_probability {
                continue;
            }
            let hour = truncated_normal(&mut rng, cat.start_hour_mean, cat.start_hour_sd, |h| {
                (0.0..24.0).contains(&h)
            });
            let minutes =
                truncated_normal(&mut rng, cat.duration_mean_min, cat.duration_sd_min, |d| {
                    d > 0.0
                });
            let offset = ((hour * 3600.0).round() as i64).min(SECONDS_PER_DAY - 1);
            let length = ((minutes * 60.0).round() as i64).max(1);
            let start = midnight + Duration::seconds(offset);
            let end = start + Duration::seconds(length);

            let pick =
                |rng: &mut ChaCha8Rng| &MEAL_SENSORS[rng.random_range(0..MEAL_SENSORS.len())];
            evs.push(activation(household, start, pick(&mut rng)));
            let interior = (cat.events_per_minute * minutes).floor() as usize;
            for _ in 0..interior {
                let t = start + Duration::seconds(rng.random_range(0..=length));
                evs.push(activation(household, t, pick(&mut rng)));
            }
            evs.push(activation(household, end, pick(&mut rng)));

            planted.push(PlantedEpisode {
                day,
                category: cat.name.clone(),
                start,
                duration_min: length as f64 / 60.0,
            });
        }
        if let Some(noise) = &noise {
            let count = noise.sample(&mut rng) as usize;
            for _ in 0..count {
                let t = midnight + Duration::seconds(rng.random_range(0..SECONDS_PER_DAY));
                let sensor = &OTHER_SENSORS[rng.random_range(0..OTHER_SENSORS.len())];
                evs.push(activation(household, t, sensor));
            }
        }
    }

    events::sort_events(&mut evs);
    planted.sort_by_key(|p| p.start);
    Ok(SyntheticTrace {
        events: evs,
        planted,
    })
}

/// Writes `day,category,start,duration_min`.
pub fn write_planted<W: Write>(out: W, planted: &[PlantedEpisode]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in planted {
        w.serialize(p)?;
    }
    if planted.is_empty() {
        w.write_record(["day", "category", "start", "duration_min"])?;
    }
    w.flush().map_err(|e| Error::io("<planted>", e))?;
    Ok(())
}

pub fn read_planted<R: Read>(input: R) -> Result<Vec<PlantedEpisode>> {
    let mut reader = csv::Reader::from_reader(input);
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<PlantedEpisode>, _>>()?;
    Ok(rows)
}
