//! Reading, validating, splitting and counting raw incident records.

mod aggregate;
mod clean;
mod csv_io;
mod record;
mod split;

pub use aggregate::{aggregate_counts, CountAggregate, Granularity};
pub use clean::{clean_records, BoundingBox, CleanedRecords};
pub use csv_io::{
    parse_csv, parse_csv_reader, write_records_csv, ColumnMapping, DropCause, IngestReport,
    ParsedCsv, RecordCandidate,
};
pub use record::{format_timestamp, parse_timestamp, CrimeRecord};
pub use split::{chronological_split, split_at_year, SplitDataset};
