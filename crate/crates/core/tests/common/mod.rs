#![allow(dead_code)]

use std::path::{Path, PathBuf};

use crimecast::ingest::{BoundingBox, CrimeRecord};
use crimecast::pipeline::PipelineConfig;
use crimecast::synthetic::{write_csv, BlobSuite, PlantedSignal};

pub const CITY_CENTER: [f64; 2] = [-75.125, 40.0];

pub fn planted_csv(dir: &Path, n: usize, labels: usize, seed: u64) -> PathBuf {
    let records = PlantedSignal::new(n, labels, seed).records(&BoundingBox::default()).unwrap();
    let path = dir.join(format!("planted-{n}-{labels}-{seed}.csv"));
    write_csv(&path, &records).unwrap();
    path
}

/// Seven blobs in degrees: centers 0.05 apart, spread 0.0005.
pub fn blob_records(k: usize, seed: u64) -> Vec<CrimeRecord> {
    BlobSuite::new(k, seed).records(CITY_CENTER, 0.05, 3, (2008, 2012)).unwrap()
}

pub fn blob_csv(dir: &Path, k: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("blobs-{k}-{seed}.csv"));
    write_csv(&path, &blob_records(k, seed)).unwrap();
    path
}

pub fn config(input: PathBuf, out: &Path) -> PipelineConfig {
    PipelineConfig {
        input,
        output_dir: Some(out.to_path_buf()),
        ..Default::default()
    }
}
