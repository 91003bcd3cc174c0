//! Generated datasets for tests, examples and the acceptance suite.

use std::f64::consts::PI;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::clustering::Point;
use crate::error::{Error, Result};
use crate::ingest::{write_records_csv, BoundingBox, CrimeRecord};
use crate::labels::ClassLabel;
use crate::seed::rng_for;

/// Isotropic Gaussian blobs whose centers sit on a randomly rotated circle,
/// with neighbouring centers `separation` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSuite {
    pub k: usize,
    pub points_per_blob: usize,
    pub sigma: f64,
    pub separation: f64,
    pub seed: u64,
}

impl BlobSuite {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            points_per_blob: 200,
            sigma: 0.01,
            separation: 1.0,
            seed,
        }
    }

    pub fn centers(&self) -> Vec<Point> {
        if self.k == 1 {
            return vec![[0.0, 0.0]];
        }
        let radius = self.separation / (2.0 * (PI / self.k as f64).sin());
        let rotation = rng_for(self.seed, "blob-rotation", 0).random_range(0.0..2.0 * PI);
        (0..self.k)
            .map(|i| {
                let a = rotation + 2.0 * PI * i as f64 / self.k as f64;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect()
    }

    /// Points grouped blob by blob.
    pub fn points(&self) -> Vec<Point> {
        let mut rng = rng_for(self.seed, "blob-points", 0);
        let mut out = Vec::with_capacity(self.k * self.points_per_blob);
        for c in self.centers() {
            for _ in 0..self.points_per_blob {
                let dx: f64 = rng.sample(StandardNormal);
                let dy: f64 = rng.sample(StandardNormal);
                out.push([c[0] + self.sigma * dx, c[1] + self.sigma * dy]);
            }
        }
        out
    }

    /// The same blobs as incident records: `origin + scale·point`, labels drawn
    /// uniformly from the first `n_labels` classes, times spread over `years`.
    pub fn records(&self, origin: Point, scale: f64, n_labels: usize, years: (i32, i32)) -> Result<Vec<CrimeRecord>> {
        let labels = label_range(n_labels)?;
        let mut rng = rng_for(self.seed, "blob-records", 0);
        self.points()
            .into_iter()
            .map(|p| {
                let ts = random_timestamp(&mut rng, years);
                let label = labels[rng.random_range(0..labels.len())];
                CrimeRecord::new(origin[0] + scale * p[0], origin[1] + scale * p[1], ts, label)
            })
            .collect()
    }
}

fn label_range(n_labels: usize) -> Result<Vec<ClassLabel>> {
    if !(1..=ClassLabel::COUNT).contains(&n_labels) {
        return Err(Error::Parameter(format!(
            "n_labels must be in [1, {}], got {n_labels}",
            ClassLabel::COUNT
        )));
    }
    (0..n_labels).map(ClassLabel::from_index).collect()
}

fn random_timestamp(rng: &mut impl Rng, years: (i32, i32)) -> NaiveDateTime {
    let start = NaiveDate::from_ymd_opt(years.0, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let end = NaiveDate::from_ymd_opt(years.1 + 1, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let minutes = (end - start).num_minutes();
    start + Duration::minutes(rng.random_range(0..minutes))
}

const STREETS: [&str; 12] = [
    "MARKET ST", "BROAD ST", "GIRARD AVE", "SPRUCE ST", "FRANKFORD AVE", "LEHIGH AVE",
    "ROOSEVELT BLVD", "KENSINGTON AVE", "CHESTNUT ST", "RIDGE AVE", "OREGON AVE", "MAIN ST",
];

/// Records whose label depends on location and time of day: each label has a
/// home location inside `bbox` and a preferred hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSignal {
    pub n_records: usize,
    pub n_labels: usize,
    /// Spatial spread around each label's home, in degrees.
    pub spatial_sigma: f64,
    /// Spread around each label's preferred hour, in hours.
    pub hour_sigma: f64,
    /// Fraction of records placed uniformly at random, carrying no signal.
    pub noise_fraction: f64,
    pub years: (i32, i32),
    pub seed: u64,
}

impl PlantedSignal {
    pub fn new(n_records: usize, n_labels: usize, seed: u64) -> Self {
        Self {
            n_records,
            n_labels,
            spatial_sigma: 0.01,
            hour_sigma: 1.5,
            noise_fraction: 0.1,
            years: (2006, 2015),
            seed,
        }
    }

    pub fn records(&self, bbox: &BoundingBox) -> Result<Vec<CrimeRecord>> {
        let labels = label_range(self.n_labels)?;
        let mut setup = rng_for(self.seed, "planted-setup", 0);
        let margin = 3.0 * self.spatial_sigma;
        let homes: Vec<Point> = labels
            .iter()
            .map(|_| {
                [
                    setup.random_range(bbox.min_x + margin..bbox.max_x - margin),
                    setup.random_range(bbox.min_y + margin..bbox.max_y - margin),
                ]
            })
            .collect();
        let hours: Vec<f64> = labels.iter().map(|_| setup.random_range(0.0..24.0)).collect();
        // mildly skewed label frequencies
        let weights: Vec<f64> = (0..labels.len()).map(|i| 1.0 / (1.0 + i as f64 / 8.0)).collect();
        let total: f64 = weights.iter().sum();

        let spatial = Normal::new(0.0, self.spatial_sigma)
            .map_err(|e| Error::Parameter(format!("spatial_sigma: {e}")))?;
        let temporal = Normal::new(0.0, self.hour_sigma)
            .map_err(|e| Error::Parameter(format!("hour_sigma: {e}")))?;
        let mut rng = rng_for(self.seed, "planted-records", 0);
        (0..self.n_records)
            .map(|_| {
                let mut u = rng.random::<f64>() * total;
                let mut l = 0;
                while l + 1 < weights.len() && u >= weights[l] {
                    u -= weights[l];
                    l += 1;
                }
                let noisy = rng.random::<f64>() < self.noise_fraction;
                let (x, y, hour) = if noisy {
                    (
                        rng.random_range(bbox.min_x..bbox.max_x),
                        rng.random_range(bbox.min_y..bbox.max_y),
                        rng.random_range(0.0..24.0),
                    )
                } else {
                    (
                        (homes[l][0] + spatial.sample(&mut rng)).clamp(bbox.min_x, bbox.max_x),
                        (homes[l][1] + spatial.sample(&mut rng)).clamp(bbox.min_y, bbox.max_y),
                        (hours[l] + temporal.sample(&mut rng)).rem_euclid(24.0),
                    )
                };
                let day = random_timestamp(&mut rng, self.years).date();
                let minute = (hour * 60.0) as i64 % (24 * 60);
                let ts = day.and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(minute);
                let street = STREETS[(l + rng.random_range(0..3)) % STREETS.len()];
                let address = format!("{}00 BLOCK {street}", rng.random_range(1..60));
                Ok(CrimeRecord::new(x, y, ts, labels[l])?
                    .with_address(address)
                    .with_district(rng.random_range(1..25)))
            })
            .collect()
    }
}

pub fn write_csv(path: &Path, records: &[CrimeRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records_csv(std::io::BufWriter::new(file), records)
}
