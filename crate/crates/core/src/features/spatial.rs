use serde::{Deserialize, Serialize};

use super::schema::FeatureName;
use crate::error::{Error, Result};
use crate::ingest::CrimeRecord;

/// Anchor point for the polar and rotated coordinates: the training-set mean location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialReference {
    pub centroid_x: f64,
    pub centroid_y: f64,
}

impl SpatialReference {
    pub fn fit(train: &[CrimeRecord]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InsufficientData(
                "spatial reference needs at least one training record".into(),
            ));
        }
        let n = train.len() as f64;
        Ok(Self {
            centroid_x: train.iter().map(CrimeRecord::x).sum::<f64>() / n,
            centroid_y: train.iter().map(CrimeRecord::y).sum::<f64>() / n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialFeatures {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub angle: f64,
    /// Rotated `(x, y)` offsets for 30, 45 and 60 degrees.
    pub rotations: [(f64, f64); 3],
}

const ROTATION_DEGREES: [f64; 3] = [30.0, 45.0, 60.0];

impl SpatialFeatures {
    pub fn new(x: f64, y: f64, reference: &SpatialReference) -> Self {
        let dx = x - reference.centroid_x;
        let dy = y - reference.centroid_y;
        let rotations = ROTATION_DEGREES.map(|deg: f64| {
            let (sin, cos) = deg.to_radians().sin_cos();
            (dx * cos + dy * sin, dy * cos - dx * sin)
        });
        Self {
            x,
            y,
            radius: dx.hypot(dy),
            // atan2(0, 0) is 0; -0.0 offsets would give -pi, so fold signed zeros.
            angle: (dy + 0.0).atan2(dx + 0.0),
            rotations,
        }
    }

    pub fn value(&self, name: FeatureName) -> Option<f64> {
        use FeatureName::*;
        let v = match name {
            X => self.x,
            Y => self.y,
            Radius => self.radius,
            Angle => self.angle,
            Rot30X => self.rotations[0].0,
            Rot30Y => self.rotations[0].1,
            Rot45X => self.rotations[1].0,
            Rot45Y => self.rotations[1].1,
            Rot60X => self.rotations[2].0,
            Rot60Y => self.rotations[2].1,
            _ => return None,
        };
        Some(v)
    }
}

pub fn spatial_features(record: &CrimeRecord, reference: &SpatialReference) -> SpatialFeatures {
    SpatialFeatures::new(record.x(), record.y(), reference)
}
