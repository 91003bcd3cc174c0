use std::collections::BTreeMap;

use chrono::{Datelike, Timelike};
use serde::{Deserialize, Serialize};

use super::record::CrimeRecord;
use crate::labels::ClassLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Hour,
    Month,
    Year,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Hour => "hour",
            Granularity::Month => "month",
            Granularity::Year => "year",
        }
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hour" => Ok(Granularity::Hour),
            "month" => Ok(Granularity::Month),
            "year" => Ok(Granularity::Year),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

/// Incident counts per hour of day (0..=23), month (1..=12) or calendar year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountAggregate {
    pub granularity: Granularity,
    pub label_filter: Option<ClassLabel>,
    pub bins: BTreeMap<i32, usize>,
}

impl CountAggregate {
    pub fn total(&self) -> usize {
        self.bins.values().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,count\n");
        for (bin, count) in &self.bins {
            out.push_str(&format!("{bin},{count}\n"));
        }
        out
    }
}

pub fn aggregate_counts(
    records: &[CrimeRecord],
    granularity: Granularity,
    label_filter: Option<ClassLabel>,
) -> CountAggregate {
    let mut bins = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| label_filter.is_none_or(|l| r.label() == l))
    {
        let ts = r.timestamp();
        let bin = match granularity {
            Granularity::Hour => ts.hour() as i32,
            Granularity::Month => ts.month() as i32,
            Granularity::Year => ts.year(),
        };
        *bins.entry(bin).or_insert(0) += 1;
    }
    CountAggregate {
        granularity,
        label_filter,
        bins,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_timestamp;
    use crate::labels::encode_label;

    fn rec(date: &str, label: &str) -> CrimeRecord {
        CrimeRecord::new(
            -75.1,
            39.9,
            parse_timestamp(date).unwrap(),
            encode_label(label).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn hourly_hand_count() {
        let records = [
            rec("4/3/2009 8:46", "Thefts"),
            rec("4/3/2009 8:59", "Thefts"),
            rec("4/3/2009 13:35", "Thefts"),
        ];
        let agg = aggregate_counts(&records, Granularity::Hour, None);
        assert_eq!(agg.bins, BTreeMap::from([(8, 2), (13, 1)]));
        assert_eq!(agg.to_csv(), "bin,count\n8,2\n13,1\n");
    }

    #[test]
    fn yearly_over_sample_table() {
        let records = [
            rec("4/3/2009 8:46", "Other Assaults"),
            rec("2/2/2008 7:56", "Robbery Firearm"),
            rec("4/8/2007 2:54", "Driving Under Influence"),
            rec("5/19/2006 11:37", "Thefts"),
            rec("7/26/2006 13:35", "Other Assaults"),
        ];
        let agg = aggregate_counts(&records, Granularity::Year, None);
        assert_eq!(
            agg.bins,
            BTreeMap::from([(2006, 2), (2007, 1), (2008, 1), (2009, 1)])
        );
        let assaults = aggregate_counts(
            &records,
            Granularity::Month,
            Some(encode_label("Other Assaults").unwrap()),
        );
        assert_eq!(assaults.bins, BTreeMap::from([(4, 1), (7, 1)]));
        assert_eq!(assaults.total(), 2);
    }

    #[test]
    fn empty_input() {
        assert!(aggregate_counts(&[], Granularity::Month, None).bins.is_empty());
    }
}
