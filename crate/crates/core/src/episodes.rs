//! Gap-based sessionization of meal-location events into activity episodes.
//!
//! Consecutive events of one household closer than the gap threshold form
//! one episode, spanning from its first to its last event. This is a
//! reconstruction of the tracking flowchart: the merge gap and blip filters
//! are configurable because the original decision thresholds are unknown.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{parse_timestamp, SensorEvent, TIMESTAMP_FORMAT};

#[derive(Debug, Clone, PartialEq)]
pub struct ActivityEpisode {
    pub household_id: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub duration_min: f64,
    /// Hour of day of `start` as a real, e.g. 13.5 for 13:30.
    pub start_hour: f64,
    pub event_count: usize,
}

impl ActivityEpisode {
    fn new(
        household_id: &str,
        start: NaiveDateTime,
        end: NaiveDateTime,
        event_count: usize,
    ) -> Self {
        ActivityEpisode {
            household_id: household_id.to_string(),
            start,
            end,
            duration_min: minutes_between(start, end),
            start_hour: hour_of_day(start),
            event_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentConfig {
    pub gap_threshold_min: f64,
    pub min_duration_min: f64,
    pub min_events: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            gap_threshold_min: 10.0,
            min_duration_min: 1.0,
            min_events: 2,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_threshold_min > 0.0) || !self.gap_threshold_min.is_finite() {
            return Err(Error::arg(format!(
                "gap threshold must be positive, got {}",
                self.gap_threshold_min
            )));
        }
        if !(self.min_duration_min >= 0.0) || !self.min_duration_min.is_finite() {
            return Err(Error::arg(format!(
                "minimum duration must be non-negative, got {}",
                self.min_duration_min
            )));
        }
        Ok(())
    }
}

pub fn minutes_between(start: NaiveDateTime, end: NaiveDateTime) -> f64 {
    let delta = end - start;
    delta.num_milliseconds() as f64 / 60_000.0
}

pub fn hour_of_day(t: NaiveDateTime) -> f64 {
    t.num_seconds_from_midnight() as f64 / 3600.0
}

/// Groups time-ordered meal-location events into episodes.
///
/// Households are segmented independently. The result is ordered by start
/// time, ties broken by household id.
pub fn segment_episodes(
    events: &[SensorEvent],
    config: &SegmentConfig,
) -> Result<Vec<ActivityEpisode>> {
    config.validate()?;
    if let Some(i) = events
        .windows(2)
        .position(|w| w[1].timestamp < w[0].timestamp)
    {
        return Err(Error::arg(format!(
            "events are not sorted by timestamp (index {})",
            i + 1
        )));
    }

    let mut by_household: BTreeMap<&str, Vec<NaiveDateTime>> = BTreeMap::new();
    for e in events {
        by_household
            .entry(&e.household_id)
            .or_default()
            .push(e.timestamp);
    }

    let mut out = Vec::new();
    for (household, times) in by_household {
        segment_household(household, &times, config, &mut out);
    }
    out.sort_by(|a, b| {
        a.start
            .cmp(&b.start)
            .then_with(|| a.household_id.cmp(&b.household_id))
    });
    Ok(out)
}

fn segment_household(
    household: &str,
    times: &[NaiveDateTime],
    config: &SegmentConfig,
    out: &mut Vec<ActivityEpisode>,
) {
    let mut keep = |start: NaiveDateTime, end: NaiveDateTime, count: usize| {
        let ep = ActivityEpisode::new(household, start, end, count);
        if ep.event_count >= config.min_events && ep.duration_min >= config.min_duration_min {
            out.push(ep);
        }
    };

    let Some((&first, rest)) = times.split_first() else {
        return;
    };
    let (mut start, mut last, mut count) = (first, first, 1usize);
    for &t in rest {
        if minutes_between(last, t) < config.gap_threshold_min {
            last = t;
            count += 1;
        } else {
            keep(start, last, count);
            start = t;
            last = t;
            count = 1;
        }
    }
    keep(start, last, count);
}

#[derive(Serialize, Deserialize)]
struct EpisodeRow {
    household_id: String,
    start: String,
    end: String,
    duration_min: f64,
    start_hour: f64,
    event_count: usize,
}

/// Writes `household_id,start,end,duration_min,start_hour,event_count`.
pub fn write_episodes<W: Write>(out: W, episodes: &[ActivityEpisode]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for ep in episodes {
        w.serialize(EpisodeRow {
            household_id: ep.household_id.clone(),
            start: ep.start.format(TIMESTAMP_FORMAT).to_string(),
            end: ep.end.format(TIMESTAMP_FORMAT).to_string(),
            duration_min: ep.duration_min,
            start_hour: ep.start_hour,
            event_count: ep.event_count,
        })?;
    }
    if episodes.is_empty() {
        w.write_record([
            "household_id",
            "start",
            "end",
            "duration_min",
            "start_hour",
            "event_count",
        ])?;
    }
    w.flush().map_err(|e| Error::io("<episodes>", e))?;
    Ok(())
}

/// Reads an episodes CSV. Durations and start hours are recomputed from the
/// timestamps.
pub fn read_episodes<R: Read>(input: R) -> Result<Vec<ActivityEpisode>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in reader.deserialize::<EpisodeRow>() {
        let row = row?;
        let start = parse_timestamp(&row.start).map_err(Error::Argument)?;
        let end = parse_timestamp(&row.end).map_err(Error::Argument)?;
        if end < start {
            return Err(Error::arg(format!(
                "episode ends before it starts: {}",
                row.start
            )));
        }
        out.push(ActivityEpisode::new(
            &row.household_id,
            start,
            end,
            row.event_count,
        ));
    }
    Ok(out)
}
