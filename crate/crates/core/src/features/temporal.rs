use chrono::{Datelike, NaiveDateTime, Timelike, Weekday};

use super::schema::FeatureName;
use crate::ingest::CrimeRecord;

/// Calendar features of a dispatch timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalFeatures {
    pub hour: u32,
    pub minute: u32,
    pub day: u32,
    pub month: u32,
    pub year: i32,
    /// Monday = 0.
    pub day_of_week: u32,
    /// ISO-8601 week number.
    pub week_of_year: u32,
    pub is_weekend: bool,
    /// Meteorological season: DJF = 0, MAM = 1, JJA = 2, SON = 3.
    pub season: u32,
    /// Six-hour day part: 0 night, 1 morning, 2 afternoon, 3 evening.
    pub hour_zone: u32,
}

impl TemporalFeatures {
    pub fn from_timestamp(ts: NaiveDateTime) -> Self {
        let hour = ts.hour();
        let month = ts.month();
        let weekday = ts.weekday();
        Self {
            hour,
            minute: ts.minute(),
            day: ts.day(),
            month,
            year: ts.year(),
            day_of_week: weekday.num_days_from_monday(),
            week_of_year: ts.iso_week().week(),
            is_weekend: matches!(weekday, Weekday::Sat | Weekday::Sun),
            season: (month % 12) / 3,
            hour_zone: hour / 6,
        }
    }

    pub fn value(&self, name: FeatureName) -> Option<f64> {
        use FeatureName::*;
        let v = match name {
            HourZone => self.hour_zone as f64,
            Hour => self.hour as f64,
            Minute => self.minute as f64,
            Day => self.day as f64,
            Month => self.month as f64,
            Year => self.year as f64,
            DayOfWeekNum => self.day_of_week as f64,
            WeekOfYear => self.week_of_year as f64,
            IsWeekend => f64::from(u8::from(self.is_weekend)),
            Season => self.season as f64,
            _ => return None,
        };
        Some(v)
    }
}

pub fn temporal_features(record: &CrimeRecord) -> TemporalFeatures {
    TemporalFeatures::from_timestamp(record.timestamp())
}
