use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::record::CrimeRecord;
use crate::error::{Error, Result};

/// Train/test partition where every training record precedes every test record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<CrimeRecord>,
    pub test: Vec<CrimeRecord>,
    pub split_timestamp: NaiveDateTime,
}

fn sorted_by_time(records: &[CrimeRecord]) -> Vec<CrimeRecord> {
    let mut sorted = records.to_vec();
    // stable: equal timestamps keep input order
    sorted.sort_by_key(CrimeRecord::timestamp);
    sorted
}

/// Sorts by timestamp and sends the first `ceil(ratio * N)` records to training.
///
/// Both sides are kept non-empty, so for tiny inputs the training share is
/// clamped to `[1, N - 1]`.
pub fn chronological_split(records: &[CrimeRecord], ratio: f64) -> Result<SplitDataset> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Parameter(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let n = records.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 records to split, got {n}"
        )));
    }
    let n_train = ((ratio * n as f64 - 1e-9).ceil() as usize).clamp(1, n - 1);
    let mut train = sorted_by_time(records);
    let test = train.split_off(n_train);
    let split_timestamp = train.last().expect("n_train >= 1").timestamp();
    Ok(SplitDataset {
        train,
        test,
        split_timestamp,
    })
}

/// Training set is every record before January 1st of `year`.
pub fn split_at_year(records: &[CrimeRecord], year: i32) -> Result<SplitDataset> {
    let split_timestamp = NaiveDate::from_ymd_opt(year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .ok_or_else(|| Error::Parameter(format!("invalid split year {year}")))?;
    let (train, test): (Vec<_>, Vec<_>) = sorted_by_time(records)
        .into_iter()
        .partition(|r| r.timestamp() < split_timestamp);
    if train.is_empty() || test.is_empty() {
        return Err(Error::InsufficientData(format!(
            "splitting at {year} leaves {} training and {} test records",
            train.len(),
            test.len()
        )));
    }
    Ok(SplitDataset {
        train,
        test,
        split_timestamp,
    })
}
