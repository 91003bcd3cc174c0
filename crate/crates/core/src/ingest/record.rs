use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::ClassLabel;

/// One incident: location in decimal degrees, minute-precision dispatch time, category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrimeRecord {
    x: f64,
    y: f64,
    timestamp: NaiveDateTime,
    label: ClassLabel,
    address: Option<String>,
    district: Option<i64>,
}

impl CrimeRecord {
    /// Builds a record. Seconds and sub-second parts of `timestamp` are truncated.
    pub fn new(x: f64, y: f64, timestamp: NaiveDateTime, label: ClassLabel) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Parameter(format!(
                "coordinates must be finite, got ({x}, {y})"
            )));
        }
        let timestamp = truncate_to_minute(timestamp);
        Ok(Self {
            x,
            y,
            timestamp,
            label,
            address: None,
            district: None,
        })
    }

    pub fn with_address(mut self, address: impl Into<String>) -> Self {
        let address = address.into();
        self.address = if address.trim().is_empty() {
            None
        } else {
            Some(address)
        };
        self
    }

    pub fn with_district(mut self, district: i64) -> Self {
        self.district = Some(district);
        self
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn point(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn timestamp(&self) -> NaiveDateTime {
        self.timestamp
    }

    pub fn year(&self) -> i32 {
        self.timestamp.year()
    }

    pub fn label(&self) -> ClassLabel {
        self.label
    }

    pub fn address(&self) -> Option<&str> {
        self.address.as_deref()
    }

    pub fn district(&self) -> Option<i64> {
        self.district
    }
}

fn truncate_to_minute(ts: NaiveDateTime) -> NaiveDateTime {
    let time = NaiveTime::from_hms_opt(ts.hour(), ts.minute(), 0).expect("valid h:m");
    NaiveDateTime::new(ts.date(), time)
}

/// Parses `M/D/YYYY H:MM` on a 24-hour clock. Leading zeros are optional.
pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    let mut parts = text.split_whitespace();
    let date = parts.next()?;
    let time = parts.next()?;
    if parts.next().is_some() {
        return None;
    }

    let mut d = date.split('/');
    let month: u32 = d.next()?.parse().ok()?;
    let day: u32 = d.next()?.parse().ok()?;
    let year_text = d.next()?;
    if d.next().is_some() || year_text.len() != 4 {
        return None;
    }
    let year: i32 = year_text.parse().ok()?;

    let mut t = time.split(':');
    let hour: u32 = t.next()?.parse().ok()?;
    let minute_text = t.next()?;
    if t.next().is_some() || minute_text.len() != 2 {
        return None;
    }
    let minute: u32 = minute_text.parse().ok()?;

    let date = NaiveDate::from_ymd_opt(year, month, day)?;
    let time = NaiveTime::from_hms_opt(hour, minute, 0)?;
    Some(NaiveDateTime::new(date, time))
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    format!(
        "{}/{}/{} {}:{:02}",
        ts.month(),
        ts.day(),
        ts.year(),
        ts.hour(),
        ts.minute()
    )
}
