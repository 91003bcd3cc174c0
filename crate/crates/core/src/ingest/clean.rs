use serde::{Deserialize, Serialize};

use super::csv_io::{DropCause, IngestReport, RecordCandidate};
use super::record::CrimeRecord;

/// Inclusive longitude/latitude window outside of which records are discarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
}

impl Default for BoundingBox {
    /// Longitude/latitude box of the default study area.
    fn default() -> Self {
        Self {
            min_x: -75.30,
            max_x: -74.95,
            min_y: 39.85,
            max_y: 40.15,
        }
    }
}

impl BoundingBox {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.min_x..=self.max_x).contains(&x) && (self.min_y..=self.max_y).contains(&y)
    }
}

#[derive(Debug, Clone)]
pub struct CleanedRecords {
    pub records: Vec<CrimeRecord>,
    pub report: IngestReport,
}

/// Drops incomplete and out-of-bounds candidates, keeping input order. Never fails.
pub fn clean_records<I>(candidates: I, bounds: &BoundingBox) -> CleanedRecords
where
    I: IntoIterator<Item = RecordCandidate>,
{
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    for candidate in candidates {
        report.rows_read += 1;
        if let Some(cause) = candidate.defect() {
            report.record_drop(cause);
            continue;
        }
        let (x, y) = (candidate.x.unwrap(), candidate.y.unwrap());
        if !bounds.contains(x, y) {
            report.record_drop(DropCause::OutOfBounds);
            continue;
        }
        let record = CrimeRecord::new(
            x,
            y,
            candidate.timestamp.unwrap(),
            candidate.label.unwrap(),
        )
        .expect("defect() guarantees finite coordinates");
        let record = match candidate.address {
            Some(address) => record.with_address(address),
            None => record,
        };
        let record = match candidate.district {
            Some(d) => record.with_district(d),
            None => record,
        };
        records.push(record);
    }
    report.rows_kept = records.len();
    CleanedRecords { records, report }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_csv_reader, ColumnMapping};

    fn parse(text: &str) -> Vec<RecordCandidate> {
        parse_csv_reader(text.as_bytes(), &ColumnMapping::default())
            .unwrap()
            .candidates
    }

    #[test]
    fn drops_by_cause() {
        let candidates = parse(
            "X,Y,Date,Description
-75.174324,,4/3/2009 8:46,Other Assaults
0,0,4/3/2009 8:46,Other Assaults
-75.174324,39.986978,4/3/2009 8:46,Other Assaults
",
        );
        let cleaned = clean_records(candidates, &BoundingBox::default());
        assert_eq!(cleaned.records.len(), 1);
        assert_eq!(cleaned.report.rows_read, 3);
        assert_eq!(cleaned.report.rows_kept, 1);
        assert_eq!(cleaned.report.drops[&DropCause::MissingCoordinate], 1);
        assert_eq!(cleaned.report.drops[&DropCause::OutOfBounds], 1);
        let r = &cleaned.records[0];
        assert_eq!((r.x(), r.y()), (-75.174324, 39.986978));
        assert_eq!(r.label().index(), 19);
    }

    #[test]
    fn bounds_are_configurable() {
        let candidates = parse("X,Y,Date,Description\n0,0,4/3/2009 8:46,Thefts\n");
        let world = BoundingBox {
            min_x: -180.0,
            max_x: 180.0,
            min_y: -90.0,
            max_y: 90.0,
        };
        assert_eq!(clean_records(candidates, &world).records.len(), 1);
    }
}
