use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k_neighbors: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k_neighbors: 5 }
    }
}

/// Stored training rows; probabilities are raw vote fractions of the k nearest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    k_neighbors: usize,
    class_count: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl Knn {
    pub fn fit(matrix: &FeatureMatrix, params: &KnnParams) -> Result<Self> {
        let n = matrix.n_rows();
        if params.k_neighbors < 1 || params.k_neighbors > n {
            return Err(Error::Parameter(format!(
                "k_neighbors must be in [1, {n}], got {}",
                params.k_neighbors
            )));
        }
        Ok(Self {
            k_neighbors: params.k_neighbors,
            class_count: matrix.class_count(),
            points: matrix.values().rows().into_iter().map(|r| r.to_vec()).collect(),
            labels: matrix.labels().to_vec(),
        })
    }

    /// Indices of the k nearest training rows, nearest first; equal distances go to the lower index.
    pub fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = p.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                (d, i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = self.k_neighbors;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, order);
            dist.truncate(k);
        }
        dist.sort_unstable_by(order);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub(crate) fn predict_row(&self, row: &[f64], out: &mut [f64]) {
        let share = 1.0 / self.k_neighbors as f64;
        for i in self.neighbors(row) {
            out[self.labels[i]] += share;
        }
    }
}
