use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};

/// Column means and population standard deviations from the fit set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

impl Standardizer {
    pub fn fit(matrix: &FeatureMatrix) -> Result<Self> {
        let n = matrix.n_rows();
        if n == 0 {
            return Err(Error::InsufficientData(
                "cannot fit standardization on an empty matrix".into(),
            ));
        }
        let values = matrix.values();
        let mut means = Vec::with_capacity(matrix.n_features());
        let mut std_devs = Vec::with_capacity(matrix.n_features());
        for col in values.columns() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            means.push(mean);
            std_devs.push(var.sqrt());
        }
        Ok(Self { means, std_devs })
    }

    /// Zero-variance columns (relative to their magnitude) map to zero.
    fn is_constant(mean: f64, std: f64) -> bool {
        std <= 1e-12 * mean.abs().max(1.0)
    }

    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        if matrix.n_features() != self.means.len() {
            return Err(Error::Schema(format!(
                "standardizer fitted on {} columns, got {}",
                self.means.len(),
                matrix.n_features()
            )));
        }
        let mut values = matrix.values().clone();
        for (j, mut col) in values.columns_mut().into_iter().enumerate() {
            let (mean, std) = (self.means[j], self.std_devs[j]);
            if Self::is_constant(mean, std) {
                col.fill(0.0);
            } else {
                col.mapv_inplace(|v| (v - mean) / std);
            }
        }
        Ok(FeatureMatrix::new(
            matrix.schema().clone(),
            values,
            matrix.labels().to_vec(),
            matrix.class_count(),
        )?
        .with_standardization(self.clone()))
    }
}

/// Fits z-scoring on `train` and returns the standardized matrix with its statistics.
pub fn standardize(train: &FeatureMatrix) -> Result<(FeatureMatrix, Standardizer)> {
    let s = Standardizer::fit(train)?;
    Ok((s.transform(train)?, s))
}
