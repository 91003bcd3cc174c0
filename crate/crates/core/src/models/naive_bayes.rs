use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesParams {
    /// Added to every per-class variance.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        Self { var_smoothing: 1e-9 }
    }
}

/// Per-class independent Gaussians. Classes absent from training keep prior 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl GaussianNb {
    pub fn fit(matrix: &FeatureMatrix, params: &NaiveBayesParams) -> Result<Self> {
        let n = matrix.n_rows();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "naive Bayes needs at least 2 rows, got {n}"
            )));
        }
        if !(params.var_smoothing >= 0.0 && params.var_smoothing.is_finite()) {
            return Err(Error::Parameter("var_smoothing must be finite and nonnegative".into()));
        }
        let c = matrix.class_count();
        let f = matrix.n_features();
        let mut counts = vec![0usize; c];
        let mut sums = vec![vec![0.0; f]; c];
        for (row, &y) in matrix.values().rows().into_iter().zip(matrix.labels()) {
            counts[y] += 1;
            for (s, v) in sums[y].iter_mut().zip(row) {
                *s += v;
            }
        }
        if counts.iter().all(|&k| k == 0) {
            return Err(Error::State("no classes present in training data".into()));
        }
        let means: Vec<Vec<f64>> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &k)| s.iter().map(|v| if k > 0 { v / k as f64 } else { 0.0 }).collect())
            .collect();
        let mut sq = vec![vec![0.0; f]; c];
        for (row, &y) in matrix.values().rows().into_iter().zip(matrix.labels()) {
            for ((s, v), m) in sq[y].iter_mut().zip(row).zip(&means[y]) {
                *s += (v - m) * (v - m);
            }
        }
        let variances = sq
            .iter()
            .zip(&counts)
            .map(|(s, &k)| {
                s.iter()
                    .map(|v| if k > 0 { v / k as f64 } else { 1.0 } + params.var_smoothing)
                    .collect()
            })
            .collect();
        Ok(Self {
            priors: counts.iter().map(|&k| k as f64 / n as f64).collect(),
            means,
            variances,
        })
    }

    pub(crate) fn predict_row(&self, row: &[f64], out: &mut [f64]) {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let mut best = f64::NEG_INFINITY;
        for (c, o) in out.iter_mut().enumerate() {
            if self.priors[c] == 0.0 {
                *o = f64::NEG_INFINITY;
                continue;
            }
            let mut lp = self.priors[c].ln();
            for ((x, m), v) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                lp -= 0.5 * (ln_2pi + v.ln()) + (x - m) * (x - m) / (2.0 * v);
            }
            *o = lp;
            best = best.max(lp);
        }
        let mut total = 0.0;
        for o in out.iter_mut() {
            *o = if o.is_finite() { (*o - best).exp() } else { 0.0 };
            total += *o;
        }
        out.iter_mut().for_each(|o| *o /= total);
    }
}
