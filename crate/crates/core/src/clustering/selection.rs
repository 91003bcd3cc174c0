//! Choosing the number of clusters: elbow (maximum chord distance) and gap statistic.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans_fit, KMeansParams, Point};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};

/// Shared K-Means settings for every fit a selection method performs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub kmax: usize,
    pub seed: u64,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl SelectionParams {
    pub fn new(kmax: usize, seed: u64) -> Self {
        let d = KMeansParams::new(1, seed);
        Self {
            kmax,
            seed,
            n_init: d.n_init,
            max_iter: d.max_iter,
            tol: d.tol,
        }
    }

    fn kmeans(&self, k: usize, seed: u64) -> KMeansParams {
        KMeansParams {
            k,
            seed,
            n_init: self.n_init,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowReport {
    pub k_elbow: usize,
    /// `inertias[i]` is the inertia for `k = i + 1`.
    pub inertias: Vec<f64>,
    pub chord_distances: Vec<f64>,
    pub seed: u64,
}

/// Perpendicular distance of each `(k, inertia)` to the chord joining the first
/// and last points, both axes min-max normalized.
pub fn chord_distances(inertias: &[f64]) -> Vec<f64> {
    let n = inertias.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let (lo, hi) = inertias
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let ys: Vec<f64> = inertias
        .iter()
        .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect();
    let (x0, y0) = (0.0, ys[0]);
    let (x1, y1) = (1.0, ys[n - 1]);
    let norm = ((x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0)).sqrt();
    ys.iter()
        .enumerate()
        .map(|(i, &y)| {
            let x = i as f64 / (n - 1) as f64;
            ((y1 - y0) * x - (x1 - x0) * y + x1 * y0 - y1 * x0).abs() / norm
        })
        .collect()
}

/// `k` at the largest chord distance; near-ties (within 1e-12) go to the smallest `k`.
pub fn elbow_point(inertias: &[f64]) -> usize {
    let d = chord_distances(inertias);
    let max = d.iter().copied().fold(0.0, f64::max);
    d.iter().position(|&v| v >= max - 1e-12).unwrap_or(0) + 1
}

pub fn elbow_select(points: &[Point], params: &SelectionParams) -> Result<ElbowReport> {
    if params.kmax < 3 {
        return Err(Error::Parameter(format!(
            "elbow selection needs kmax >= 3, got {}",
            params.kmax
        )));
    }
    let inertias = (1..=params.kmax)
        .into_par_iter()
        .map(|k| kmeans_fit(points, &params.kmeans(k, params.seed)).map(|m| m.inertia))
        .collect::<Result<Vec<_>>>()?;
    Ok(ElbowReport {
        k_elbow: elbow_point(&inertias),
        chord_distances: chord_distances(&inertias),
        inertias,
        seed: params.seed,
    })
}

pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEntry {
    pub k: usize,
    pub log_wk: f64,
    /// Mean of `log W_kb` over the reference sets.
    pub expected_log_wkb: f64,
    pub log_wkb: Vec<f64>,
    pub gap: f64,
    pub sd: f64,
    /// `sd * sqrt(1 + 1/B)`.
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub entries: Vec<GapEntry>,
    /// Smallest k with `Gap(k) >= Gap(k+1) - s(k+1)`.
    pub chosen_k_onesd: usize,
    /// k with the highest gap value.
    pub chosen_k_max: usize,
    pub reference_sets: usize,
    pub seed: u64,
    /// True when some inertia was zero and its logarithm was floored at `LOG_FLOOR`.
    pub floored: bool,
}

fn floored_ln(w: f64, floored: &mut bool) -> f64 {
    if w < LOG_FLOOR {
        *floored = true;
    }
    w.max(LOG_FLOOR).ln()
}

fn bounding_box(points: &[Point]) -> (Point, Point) {
    points.iter().fold(
        ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
        |(lo, hi), p| {
            (
                [lo[0].min(p[0]), lo[1].min(p[1])],
                [hi[0].max(p[0]), hi[1].max(p[1])],
            )
        },
    )
}

/// Uniform reference set over the axis-aligned bounding box of `points`.
pub fn reference_set(points: &[Point], seed: u64, index: u64) -> Vec<Point> {
    let (lo, hi) = bounding_box(points);
    let mut rng = rng_for(seed, "gap-reference", index);
    (0..points.len())
        .map(|_| {
            [
                lo[0] + (hi[0] - lo[0]) * rng.random::<f64>(),
                lo[1] + (hi[1] - lo[1]) * rng.random::<f64>(),
            ]
        })
        .collect()
}

pub fn gap_statistic(points: &[Point], params: &SelectionParams, b: usize) -> Result<GapReport> {
    let kmax = params.kmax;
    if kmax < 2 {
        return Err(Error::Parameter(format!(
            "gap statistic needs kmax >= 2, got {kmax}"
        )));
    }
    if b < 1 {
        return Err(Error::Parameter("need at least one reference set".into()));
    }
    if points.is_empty() {
        return Err(Error::InsufficientData("no points to cluster".into()));
    }

    let observed: Vec<f64> = (1..=kmax)
        .into_par_iter()
        .map(|k| kmeans_fit(points, &params.kmeans(k, params.seed)).map(|m| m.inertia))
        .collect::<Result<_>>()?;

    let references: Vec<Vec<Point>> = (0..b as u64)
        .into_par_iter()
        .map(|i| reference_set(points, params.seed, i))
        .collect();
    // reference_wk[k - 1][b]
    let tasks: Vec<(usize, usize)> = (1..=kmax)
        .flat_map(|k| (0..b).map(move |r| (k, r)))
        .collect();
    let reference_wk: Vec<f64> = tasks
        .par_iter()
        .map(|&(k, r)| {
            let seed = derive_seed(params.seed, "gap-reference-fit", r as u64);
            kmeans_fit(&references[r], &params.kmeans(k, seed)).map(|m| m.inertia)
        })
        .collect::<Result<_>>()?;

    let mut floored = false;
    let scale = (1.0 + 1.0 / b as f64).sqrt();
    let entries: Vec<GapEntry> = (1..=kmax)
        .map(|k| {
            let log_wk = floored_ln(observed[k - 1], &mut floored);
            let log_wkb: Vec<f64> = reference_wk[(k - 1) * b..k * b]
                .iter()
                .map(|&w| floored_ln(w, &mut floored))
                .collect();
            let expected = log_wkb.iter().sum::<f64>() / b as f64;
            let sd = (log_wkb.iter().map(|v| (v - expected).powi(2)).sum::<f64>() / b as f64)
                .sqrt();
            GapEntry {
                k,
                log_wk,
                expected_log_wkb: expected,
                gap: expected - log_wk,
                log_wkb,
                sd,
                s: sd * scale,
            }
        })
        .collect();

    let (chosen_k_onesd, chosen_k_max) = choose_gap_k(&entries);
    Ok(GapReport {
        entries,
        chosen_k_onesd,
        chosen_k_max,
        reference_sets: b,
        seed: params.seed,
        floored,
    })
}

/// Returns `(one-standard-error choice, argmax choice)`; argmax ties go to the smaller k.
pub fn choose_gap_k(entries: &[GapEntry]) -> (usize, usize) {
    let onesd = entries
        .windows(2)
        .find(|w| w[0].gap >= w[1].gap - w[1].s)
        .map_or(entries.last().map_or(1, |e| e.k), |w| w[0].k);
    let mut best = &entries[0];
    for e in &entries[1..] {
        if e.gap > best.gap {
            best = e;
        }
    }
    (onesd, best.k)
}
