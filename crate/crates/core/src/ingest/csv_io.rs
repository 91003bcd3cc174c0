use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::record::{format_timestamp, parse_timestamp, CrimeRecord};
use crate::error::{Error, Result};
use crate::labels::{encode_label, ClassLabel};

/// Maps record fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub x: String,
    pub y: String,
    pub date: String,
    pub description: String,
    pub address: Option<String>,
    pub district: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            x: "X".into(),
            y: "Y".into(),
            date: "Date".into(),
            description: "Description".into(),
            address: Some("Address".into()),
            district: Some("PdDistrict".into()),
        }
    }
}

/// Why a row did not make it into the cleaned record set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    MalformedRow,
    MissingCoordinate,
    InvalidCoordinate,
    MissingTimestamp,
    InvalidTimestamp,
    MissingLabel,
    UnknownLabel,
    OutOfBounds,
}

/// Row accounting emitted by parsing and cleaning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub drops: BTreeMap<DropCause, usize>,
}

impl IngestReport {
    pub(crate) fn record_drop(&mut self, cause: DropCause) {
        *self.drops.entry(cause).or_insert(0) += 1;
    }
}

/// A parsed row before cleaning. Unparseable values are `None` and the first
/// parse problem is kept in `issue`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordCandidate {
    pub row: usize,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub timestamp: Option<NaiveDateTime>,
    pub label: Option<ClassLabel>,
    pub address: Option<String>,
    pub district: Option<i64>,
    pub issue: Option<DropCause>,
}

impl RecordCandidate {
    /// The first reason this candidate cannot become a record, ignoring bounds.
    pub fn defect(&self) -> Option<DropCause> {
        if self.issue.is_some() {
            return self.issue;
        }
        if self.x.is_none() || self.y.is_none() {
            Some(DropCause::MissingCoordinate)
        } else if self.timestamp.is_none() {
            Some(DropCause::MissingTimestamp)
        } else if self.label.is_none() {
            Some(DropCause::MissingLabel)
        } else {
            None
        }
    }
}

impl From<CrimeRecord> for RecordCandidate {
    fn from(r: CrimeRecord) -> Self {
        RecordCandidate {
            row: 0,
            x: Some(r.x()),
            y: Some(r.y()),
            timestamp: Some(r.timestamp()),
            label: Some(r.label()),
            address: r.address().map(str::to_string),
            district: r.district(),
            issue: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParsedCsv {
    pub candidates: Vec<RecordCandidate>,
    pub report: IngestReport,
}

pub fn parse_csv(path: &Path, columns: &ColumnMapping) -> Result<ParsedCsv> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv_reader(file, columns).map_err(|e| match e {
        Error::Csv { source, .. } => Error::csv(path, source),
        other => other,
    })
}

pub fn parse_csv_reader<R: Read>(reader: R, columns: &ColumnMapping) -> Result<ParsedCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| Error::csv("<input>", e))?
        .clone();
    if header.is_empty() {
        return Err(Error::Schema("missing header row".into()));
    }
    let find = |name: &str| header.iter().position(|h| h == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| Error::Schema(format!("missing required column {name:?}")))
    };
    let x_col = required(&columns.x)?;
    let y_col = required(&columns.y)?;
    let date_col = required(&columns.date)?;
    let label_col = required(&columns.description)?;
    let address_col = columns.address.as_deref().and_then(find);
    let district_col = columns.district.as_deref().and_then(find);

    let mut candidates = Vec::new();
    let mut report = IngestReport::default();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::csv("<input>", e))?;
        report.rows_read += 1;
        let cell = |col: usize| row.get(col).filter(|v| !v.is_empty());
        let mut issue = None;
        let mut flag = |cause: DropCause| {
            if issue.is_none() {
                issue = Some(cause);
            }
        };
        if row.len() != header.len() {
            flag(DropCause::MalformedRow);
        }
        let mut coordinate = |col: usize| match cell(col).map(str::parse::<f64>) {
            None => None,
            Some(Ok(v)) if v.is_finite() => Some(v),
            Some(_) => {
                flag(DropCause::InvalidCoordinate);
                None
            }
        };
        let x = coordinate(x_col);
        let y = coordinate(y_col);
        let timestamp = cell(date_col).and_then(|text| {
            let ts = parse_timestamp(text);
            if ts.is_none() {
                flag(DropCause::InvalidTimestamp);
            }
            ts
        });
        let label = cell(label_col).and_then(|text| match encode_label(text) {
            Ok(label) => Some(label),
            Err(_) => {
                flag(DropCause::UnknownLabel);
                None
            }
        });

        let candidate = RecordCandidate {
            row: i + 1,
            x,
            y,
            timestamp,
            label,
            address: address_col.and_then(cell).map(str::to_string),
            district: district_col
                .and_then(cell)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite() && v.fract() == 0.0)
                .map(|v| v as i64),
            issue,
        };

        match candidate.defect() {
            Some(cause) => report.record_drop(cause),
            None => report.rows_kept += 1,
        }
        candidates.push(candidate);
    }
    Ok(ParsedCsv { candidates, report })
}

/// Writes records with the default column names; `parse_csv` reads them back unchanged.
pub fn write_records_csv<W: Write>(writer: W, records: &[CrimeRecord]) -> Result<()> {
    let defaults = ColumnMapping::default();
    let mut wtr = csv::Writer::from_writer(writer);
    let header = [
        defaults.x.as_str(),
        defaults.y.as_str(),
        defaults.date.as_str(),
        defaults.description.as_str(),
        defaults.address.as_deref().unwrap_or("Address"),
        defaults.district.as_deref().unwrap_or("PdDistrict"),
    ];
    wtr.write_record(header)
        .map_err(|e| Error::csv("<output>", e))?;
    for r in records {
        wtr.write_record([
            r.x().to_string(),
            r.y().to_string(),
            format_timestamp(r.timestamp()),
            r.label().name().to_string(),
            r.address().unwrap_or("").to_string(),
            r.district().map(|d| d.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| Error::csv("<output>", e))?;
    }
    wtr.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}
