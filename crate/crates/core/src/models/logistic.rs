use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            learning_rate: 0.1,
            epochs: 500,
        }
    }
}

/// Multinomial softmax regression. `weights` is C×F.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    /// Objective before each update, then once more after the last.
    pub loss_history: Vec<f64>,
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - max).exp());
        let total = row.sum();
        row.mapv_inplace(|p| p / total);
    }
}

/// Mean cross-entropy plus `0.5·l2·‖W‖²` (bias unpenalized) and its gradient
/// with respect to `weights` (C×F) and `bias` (C).
pub fn logistic_loss_and_gradient(
    x: &Array2<f64>,
    y: &[usize],
    weights: &Array2<f64>,
    bias: &Array1<f64>,
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let logits = x.dot(&weights.t()) + bias;
    let mut loss = 0.0;
    for (row, &label) in logits.rows().into_iter().zip(y) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += lse - row[label];
    }
    loss = loss / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();

    let mut delta = logits;
    softmax_rows(&mut delta);
    for (mut row, &label) in delta.rows_mut().into_iter().zip(y) {
        row[label] -= 1.0;
    }
    delta /= n;
    let grad_w = delta.t().dot(x) + &(weights * l2);
    let grad_b = delta.sum_axis(Axis(0));
    (loss, grad_w, grad_b)
}

impl LogisticRegression {
    pub fn fit(matrix: &FeatureMatrix, params: &LogisticParams) -> Result<Self> {
        if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
            return Err(Error::Parameter("learning_rate must be positive".into()));
        }
        if !(params.l2 >= 0.0 && params.l2.is_finite()) {
            return Err(Error::Parameter("l2 must be finite and nonnegative".into()));
        }
        if params.epochs < 1 {
            return Err(Error::Parameter("epochs must be at least 1".into()));
        }
        if matrix.n_rows() == 0 {
            return Err(Error::InsufficientData("cannot fit on zero rows".into()));
        }
        let (c, f) = (matrix.class_count(), matrix.n_features());
        let x = matrix.values();
        let y = matrix.labels();
        let mut w = Array2::<f64>::zeros((c, f));
        let mut b = Array1::<f64>::zeros(c);
        let mut history = Vec::with_capacity(params.epochs + 1);
        for epoch in 0..params.epochs {
            let (loss, gw, gb) = logistic_loss_and_gradient(x, y, &w, &b, params.l2);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            history.push(loss);
            w.scaled_add(-params.learning_rate, &gw);
            b.scaled_add(-params.learning_rate, &gb);
        }
        let (loss, _, _) = logistic_loss_and_gradient(x, y, &w, &b, params.l2);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch: params.epochs });
        }
        history.push(loss);
        Ok(Self {
            weights: w.rows().into_iter().map(|r| r.to_vec()).collect(),
            bias: b.to_vec(),
            loss_history: history,
        })
    }

    pub(crate) fn predict_row(&self, row: &[f64], out: &mut [f64]) {
        for ((o, w), b) in out.iter_mut().zip(&self.weights).zip(&self.bias) {
            *o = b + w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>();
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.iter_mut().for_each(|o| *o = (*o - max).exp());
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|o| *o /= total);
    }
}
