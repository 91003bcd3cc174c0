//! Log loss, accuracy, per-label diagnostics, smoothing search and the uniform baseline.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::ClassLabel;
use crate::models::{argmax, ModelKind};

/// Probabilities below this are clipped before taking the log.
pub const CLIP: f64 = 1e-15;

fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Mean as `x0 + Σ(x − x0)/n` with a fixed pairwise order; exact for constant input.
pub fn stable_mean(values: &[f64]) -> f64 {
    let Some(&first) = values.first() else {
        return f64::NAN;
    };
    let shifted: Vec<f64> = values.iter().map(|v| v - first).collect();
    first + pairwise_sum(&shifted) / values.len() as f64
}

fn validate(p: &Array2<f64>, y: &[usize]) -> Result<()> {
    if p.nrows() != y.len() {
        return Err(Error::Parameter(format!(
            "{} probability rows but {} labels",
            p.nrows(),
            y.len()
        )));
    }
    if p.nrows() == 0 {
        return Err(Error::InsufficientData("no rows to evaluate".into()));
    }
    let c = p.ncols();
    for (row, (r, &label)) in p.rows().into_iter().zip(y).enumerate() {
        if label >= c {
            return Err(Error::LabelOutOfRange {
                row,
                label,
                classes: c,
            });
        }
        if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Parameter(format!(
                "row {row} has a negative or non-finite probability"
            )));
        }
        if !(r.sum() > 0.0) {
            return Err(Error::DegenerateRow { row });
        }
    }
    Ok(())
}

fn row_loss(row: ArrayView1<'_, f64>, label: usize) -> f64 {
    let p = row[label] / row.sum();
    -p.max(CLIP).ln()
}

/// Per-row `−ln(max(p_y / Σp, 1e-15))`.
pub fn row_log_losses(p: &Array2<f64>, y: &[usize]) -> Result<Vec<f64>> {
    validate(p, y)?;
    Ok((0..p.nrows())
        .into_par_iter()
        .map(|i| row_loss(p.row(i), y[i]))
        .collect())
}

pub fn multiclass_log_loss(p: &Array2<f64>, y: &[usize]) -> Result<f64> {
    Ok(stable_mean(&row_log_losses(p, y)?))
}

/// Argmax per row; ties go to the lower class index.
pub fn predictions(p: &Array2<f64>) -> Vec<usize> {
    p.rows().into_iter().map(|r| argmax(r.iter().copied())).collect()
}

pub fn accuracy(p: &Array2<f64>, y: &[usize]) -> Result<f64> {
    validate(p, y)?;
    let correct = predictions(p).iter().zip(y).filter(|(a, b)| a == b).count();
    Ok(correct as f64 / y.len() as f64)
}

pub fn baseline_uniform_loss(class_count: usize) -> Result<f64> {
    if class_count < 1 {
        return Err(Error::Parameter("class count must be at least 1".into()));
    }
    Ok((class_count as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDiagnostic {
    pub label: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mispredictions: usize,
    pub mean_log_loss: f64,
}

/// Misprediction count and mean loss over mispredicted rows, per true label.
/// Labels that were never mispredicted are left out.
pub fn per_label_diagnostics(p: &Array2<f64>, y: &[usize]) -> Result<Vec<LabelDiagnostic>> {
    let losses = row_log_losses(p, y)?;
    let preds = predictions(p);
    let mut missed: Vec<Vec<f64>> = vec![Vec::new(); p.ncols()];
    for ((&pred, &label), &loss) in preds.iter().zip(y).zip(&losses) {
        if pred != label {
            missed[label].push(loss);
        }
    }
    Ok(missed
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(label, l)| LabelDiagnostic {
            label,
            name: ClassLabel::from_index(label).ok().map(|c| c.name().to_string()),
            mispredictions: l.len(),
            mean_log_loss: stable_mean(l),
        })
        .collect())
}

pub fn per_label_csv(table: &[LabelDiagnostic]) -> String {
    let mut out = String::from("label,mispredictions,mean_log_loss\n");
    for d in table {
        out.push_str(&format!("{},{},{}\n", d.label, d.mispredictions, d.mean_log_loss));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingResult {
    pub epsilon_grid: Vec<f64>,
    pub losses: Vec<f64>,
    pub best_epsilon: f64,
    pub best_loss: f64,
    /// `100·(loss(0) − best)/loss(0)`; absent when 0 is not on the grid or loss(0) is 0.
    pub improvement_percent: Option<f64>,
}

/// 0 followed by 60 log-spaced values from 1e-7 to 1e-1.
pub fn default_smoothing_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend((0..60).map(|i| 10f64.powf(-7.0 + 6.0 * i as f64 / 59.0)));
    grid
}

/// Evaluates the log loss of `P + ε` (renormalized per row) for every grid value.
/// The grid is sorted ascending; on equal losses the smaller ε wins.
pub fn smoothing_search(p: &Array2<f64>, y: &[usize], grid: &[f64]) -> Result<SmoothingResult> {
    if grid.is_empty() {
        return Err(Error::Parameter("smoothing grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::Parameter(format!(
            "smoothing values must be finite and nonnegative, got {bad}"
        )));
    }
    validate(p, y)?;
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let losses = grid
        .iter()
        .map(|&eps| multiclass_log_loss(&p.mapv(|v| v + eps), y))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, l) in losses.iter().enumerate() {
        if *l < losses[best] {
            best = i;
        }
    }
    let improvement_percent = (grid[0] == 0.0 && losses[0] > 0.0)
        .then(|| 100.0 * (losses[0] - losses[best]) / losses[0]);
    Ok(SmoothingResult {
        best_epsilon: grid[best],
        best_loss: losses[best],
        epsilon_grid: grid,
        losses,
        improvement_percent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_kind: Option<ModelKind>,
    pub n_rows: usize,
    pub class_count: usize,
    pub log_loss: f64,
    pub accuracy: f64,
    pub correct: usize,
    pub baseline_log_loss: f64,
    pub per_label: Vec<LabelDiagnostic>,
}

pub fn evaluate(p: &Array2<f64>, y: &[usize], model_kind: Option<ModelKind>) -> Result<EvaluationReport> {
    let log_loss = multiclass_log_loss(p, y)?;
    let correct = predictions(p).iter().zip(y).filter(|(a, b)| a == b).count();
    Ok(EvaluationReport {
        model_kind,
        n_rows: y.len(),
        class_count: p.ncols(),
        log_loss,
        accuracy: correct as f64 / y.len() as f64,
        correct,
        baseline_log_loss: baseline_uniform_loss(p.ncols())?,
        per_label: per_label_diagnostics(p, y)?,
    })
}
