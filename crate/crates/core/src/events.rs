//! Sensor log ingestion.
//!
//! Logs are CSV with the header
//! `timestamp,household_id,sensor_id,sensor_kind,location,value`, where
//! timestamps are naive local time formatted `YYYY-MM-DDTHH:MM:SS`.
//! Columns may appear in any order but all six must be present and no
//! others are accepted. Rows that fail validation are reported with their
//! line number instead of being dropped silently.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub const COLUMNS: [&str; 6] = [
    "timestamp",
    "household_id",
    "sensor_id",
    "sensor_kind",
    "location",
    "value",
];

const MIN_YEAR: i32 = 2000;
const MAX_YEAR: i32 = 2100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Motion,
    Contact,
}

impl SensorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Motion => "motion",
            SensorKind::Contact => "contact",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "motion" => Ok(SensorKind::Motion),
            "contact" => Ok(SensorKind::Contact),
            other => Err(format!("unknown sensor_kind `{other}`")),
        }
    }
}

/// One binary activation reported by a home sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorEvent {
    pub timestamp: NaiveDateTime,
    pub household_id: String,
    pub sensor_id: String,
    pub sensor_kind: SensorKind,
    pub location: String,
    /// Always 0 or 1.
    pub value: u8,
}

/// A data row that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the input, counting the header as line 1.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedEvents {
    pub events: Vec<SensorEvent>,
    pub rejections: Vec<Rejection>,
}

/// Column positions resolved from the header.
struct Layout([usize; 6]);

impl Layout {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let mut positions = [usize::MAX; 6];
        for (pos, name) in header.iter().enumerate() {
            let name = name.trim();
            match COLUMNS.iter().position(|c| *c == name) {
                Some(idx) if positions[idx] == usize::MAX => positions[idx] = pos,
                Some(_) => return Err(Error::Schema(format!("duplicate column `{name}`"))),
                None => return Err(Error::Schema(format!("unknown column `{name}`"))),
            }
        }
        if let Some(idx) = positions.iter().position(|p| *p == usize::MAX) {
            return Err(Error::Schema(format!("missing column `{}`", COLUMNS[idx])));
        }
        Ok(Layout(positions))
    }

    fn field<'r>(&self, record: &'r csv::StringRecord, col: usize) -> &'r str {
        record.get(self.0[col]).unwrap_or("").trim()
    }
}

pub fn parse_timestamp(raw: &str) -> std::result::Result<NaiveDateTime, String> {
    let ts = NaiveDateTime::parse_from_str(raw, TIMESTAMP_FORMAT)
        .map_err(|e| format!("bad timestamp `{raw}`: {e}"))?;
    if ts.year() < MIN_YEAR || ts.year() > MAX_YEAR {
        return Err(format!("timestamp `{raw}` outside {MIN_YEAR}..={MAX_YEAR}"));
    }
    Ok(ts)
}

fn parse_row(
    layout: &Layout,
    record: &csv::StringRecord,
) -> std::result::Result<SensorEvent, String> {
    if record.len() != COLUMNS.len() {
        return Err(format!(
            "expected {} fields, found {}",
            COLUMNS.len(),
            record.len()
        ));
    }
    let timestamp = parse_timestamp(layout.field(record, 0))?;
    let non_empty = |col: usize| -> std::result::Result<String, String> {
        let v = layout.field(record, col);
        if v.is_empty() {
            Err(format!("empty {}", COLUMNS[col]))
        } else {
            Ok(v.to_string())
        }
    };
    let household_id = non_empty(1)?;
    let sensor_id = non_empty(2)?;
    let sensor_kind = layout.field(record, 3).parse::<SensorKind>()?;
    let location = non_empty(4)?;
    let value = match layout.field(record, 5) {
        "0" => 0,
        "1" => 1,
        other => return Err(format!("non-binary value `{other}`")),
    };
    Ok(SensorEvent {
        timestamp,
        household_id,
        sensor_id,
        sensor_kind,
        location,
        value,
    })
}

/// Orders events by timestamp, breaking ties by sensor id. Remaining ties
/// keep their input order.
pub fn sort_events(events: &mut [SensorEvent]) {
    events.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.sensor_id.cmp(&b.sensor_id))
    });
}

/// Parses a sensor log. Only header problems are fatal; bad data rows end up
/// in [`ParsedEvents::rejections`].
pub fn parse_events<R: Read>(input: R) -> Result<ParsedEvents> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header.get(0) == Some("")) {
        return Err(Error::Schema(format!("missing column `{}`", COLUMNS[0])));
    }
    let layout = Layout::from_header(&header)?;

    let mut out = ParsedEvents::default();
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(line, |p| p.line());
                match parse_row(&layout, &record) {
                    Ok(ev) => out.events.push(ev),
                    Err(reason) => out.rejections.push(Rejection { line, reason }),
                }
            }
            // Invalid UTF-8 and similar per-record failures.
            Err(e) if !e.is_io_error() => {
                let line = e.position().map_or(line, |p| p.line());
                out.rejections.push(Rejection {
                    line,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    sort_events(&mut out.events);
    Ok(out)
}

/// The locations treated as meal-related when none are given.
pub fn default_meal_locations() -> BTreeSet<String> {
    ["kitchen", "dining_room"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Keeps events whose location is in `locations`, preserving order.
pub fn filter_meal_locations(
    events: &[SensorEvent],
    locations: &BTreeSet<String>,
) -> Result<Vec<SensorEvent>> {
    if locations.is_empty() {
        return Err(Error::arg("location set must not be empty"));
    }
    Ok(events
        .iter()
        .filter(|e| locations.contains(&e.location))
        .cloned()
        .collect())
}

pub fn write_events<W: Write>(out: W, events: &[SensorEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for e in events {
        let ts = e.timestamp.format(TIMESTAMP_FORMAT).to_string();
        let value = e.value.to_string();
        w.write_record([
            ts.as_str(),
            e.household_id.as_str(),
            e.sensor_id.as_str(),
            e.sensor_kind.as_str(),
            e.location.as_str(),
            value.as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<events>", e))?;
    Ok(())
}

/// Writes the rejection report as `line,reason`.
pub fn write_rejections<W: Write>(out: W, rejections: &[Rejection]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rejections {
        w.serialize(r)?;
    }
    if rejections.is_empty() {
        w.write_record(["line", "reason"])?;
    }
    w.flush().map_err(|e| Error::io("<rejections>", e))?;
    Ok(())
}
