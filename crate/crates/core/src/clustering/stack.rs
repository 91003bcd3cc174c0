use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans_fit, nearest, KMeansParams, Point};
use crate::error::{Error, Result};
use crate::ingest::CrimeRecord;

pub const STACKED_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearCenters {
    pub year: i32,
    pub centers: Vec<Point>,
    pub inertia: f64,
    pub record_count: usize,
}

/// Per-year K-Means centers stacked into one list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedCenters {
    pub format_version: u32,
    pub k: usize,
    pub years: Vec<YearCenters>,
    /// Years left out because they had fewer than `k` distinct locations.
    #[serde(default)]
    pub skipped_years: Vec<i32>,
}

/// What to do with a year that cannot support `k` clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortYearPolicy {
    #[default]
    Error,
    Skip,
}

impl StackedCenters {
    pub fn from_centers(k: usize, years: Vec<YearCenters>) -> Self {
        Self {
            format_version: STACKED_FORMAT_VERSION,
            k,
            years,
            skipped_years: Vec::new(),
        }
    }

    /// All centers in year order.
    pub fn flattened(&self) -> Vec<Point> {
        self.years
            .iter()
            .flat_map(|y| y.centers.iter().copied())
            .collect()
    }

    /// `(year, center)` pairs in year order.
    pub fn tagged(&self) -> Vec<(i32, Point)> {
        self.years
            .iter()
            .flat_map(|y| y.centers.iter().map(move |c| (y.year, *c)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.years.iter().map(|y| y.centers.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nearest_distance(&self, point: &Point) -> Result<f64> {
        nearest_center_distance(point, &self.flattened())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let stacked: Self = serde_json::from_str(text)?;
        if stacked.format_version != STACKED_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: stacked.format_version,
                expected: STACKED_FORMAT_VERSION,
            });
        }
        Ok(stacked)
    }
}

/// Euclidean distance to the closest center.
pub fn nearest_center_distance(point: &Point, centers: &[Point]) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::State("no cluster centers to measure against".into()));
    }
    Ok(nearest(point, centers).1.sqrt())
}

/// Clusters each calendar year on raw `(x, y)` with the same parameters and seed.
pub fn stack_yearly_centers(
    records: &[CrimeRecord],
    params: &KMeansParams,
    policy: ShortYearPolicy,
) -> Result<StackedCenters> {
    let mut by_year: BTreeMap<i32, Vec<Point>> = BTreeMap::new();
    for r in records {
        by_year.entry(r.year()).or_default().push(r.point());
    }
    if by_year.is_empty() {
        return Err(Error::InsufficientData("no records to cluster".into()));
    }
    let mut years = Vec::new();
    let mut skipped = Vec::new();
    for (year, points) in by_year {
        match kmeans_fit(&points, params) {
            Ok(model) => years.push(YearCenters {
                year,
                centers: model.centers,
                inertia: model.inertia,
                record_count: points.len(),
            }),
            Err(Error::Parameter(msg)) if points.len() < params.k || msg.contains("distinct") => {
                match policy {
                    ShortYearPolicy::Skip => skipped.push(year),
                    ShortYearPolicy::Error => {
                        return Err(Error::InsufficientData(format!("year {year}: {msg}")))
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }
    if years.is_empty() {
        return Err(Error::InsufficientData(format!(
            "every year has fewer than k = {} distinct locations",
            params.k
        )));
    }
    let mut stacked = StackedCenters::from_centers(params.k, years);
    stacked.skipped_years = skipped;
    Ok(stacked)
}
