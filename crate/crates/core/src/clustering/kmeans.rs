//! Lloyd's algorithm with k-means++ seeding on 2-D points, finished with single-point transfers.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

pub type Point = [f64; 2];

#[inline]
pub fn squared_distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Index of the nearest center and its squared distance; ties go to the lowest index.
#[inline]
pub fn nearest(point: &Point, centers: &[Point]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Sum of squared distances from each point to its nearest center.
pub fn inertia(points: &[Point], centers: &[Point]) -> f64 {
    points.iter().map(|p| nearest(p, centers).1).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub n_init: usize,
    pub max_iter: usize,
    /// Convergence threshold on the summed squared center shift.
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            n_init: 10,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centers: Vec<Point>,
    pub inertia: f64,
    pub assignments: Vec<usize>,
    pub iterations_run: usize,
    pub seed: u64,
    /// Inertia after each assignment step of the winning restart.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inertia_trace: Vec<f64>,
}

pub(crate) fn count_distinct(points: &[Point]) -> usize {
    let mut keys: Vec<(u64, u64)> = points
        .iter()
        .map(|p| ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

pub fn kmeans_fit(points: &[Point], params: &KMeansParams) -> Result<ClusterModel> {
    let KMeansParams {
        k,
        n_init,
        max_iter,
        tol,
        ..
    } = *params;
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if n_init == 0 || max_iter == 0 {
        return Err(Error::Parameter("n_init and max_iter must be positive".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::Parameter(format!("tol must be non-negative, got {tol}")));
    }
    if k > points.len() {
        return Err(Error::Parameter(format!(
            "k = {k} exceeds the number of points ({})",
            points.len()
        )));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Parameter("points must be finite".into()));
    }
    let distinct = count_distinct(points);
    if k > distinct {
        return Err(Error::Parameter(format!(
            "k = {k} exceeds the number of distinct points ({distinct})"
        )));
    }

    let runs: Vec<ClusterModel> = (0..n_init)
        .into_par_iter()
        .map(|restart| lloyd(points, params, restart as u64))
        .collect();
    // strict < keeps the lowest restart index on ties
    let mut best = None::<ClusterModel>;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn plus_plus_init(points: &[Point], k: usize, rng: &mut impl Rng) -> Vec<Point> {
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())]);
    let mut dist: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut chosen = None;
        for (i, &d) in dist.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            chosen = Some(i);
            if target < d {
                break;
            }
            target -= d;
        }
        // distinct points >= k guarantees some positive distance remains
        let next = points[chosen.expect("a point away from every center")];
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &next));
        }
        centers.push(next);
    }
    centers
}

fn assign(points: &[Point], centers: &[Point], labels: &mut [usize], dist: &mut [f64]) -> f64 {
    labels
        .par_iter_mut()
        .zip(dist.par_iter_mut())
        .zip(points.par_iter())
        .for_each(|((label, d), p)| {
            let (i, sq) = nearest(p, centers);
            *label = i;
            *d = sq;
        });
    // sequential sum keeps the result independent of the thread count
    dist.iter().sum()
}

fn lloyd(points: &[Point], params: &KMeansParams, restart: u64) -> ClusterModel {
    let k = params.k;
    let mut rng = rng_for(params.seed, "kmeans-init", restart);
    let mut centers = plus_plus_init(points, k, &mut rng);
    let mut labels = vec![0usize; points.len()];
    let mut dist = vec![0.0; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        let current = assign(points, &centers, &mut labels, &mut dist);
        trace.push(current);
        if iterations == params.max_iter {
            break;
        }
        iterations += 1;

        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        let mut next: Vec<Point> = (0..k)
            .map(|j| {
                if counts[j] > 0 {
                    let n = counts[j] as f64;
                    [sums[j][0] / n, sums[j][1] / n]
                } else {
                    centers[j]
                }
            })
            .collect();
        // Re-seed empty clusters at the point farthest from its own center.
        let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
        for j in empty {
            let far = (0..points.len())
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                counts[j] = 1;
                next[j] = points[i];
                dist[i] = 0.0;
                labels[i] = j;
            }
        }

        let shift: f64 = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| squared_distance(a, b))
            .sum();
        centers = next;
        if shift <= params.tol {
            let last = assign(points, &centers, &mut labels, &mut dist);
            trace.push(last);
            break;
        }
    }

    if hartigan_transfers(points, &mut centers, &mut labels) {
        trace.push(assign(points, &centers, &mut labels, &mut dist));
    }

    ClusterModel {
        k,
        inertia: *trace.last().expect("at least one assignment"),
        centers,
        assignments: labels,
        iterations_run: iterations,
        seed: params.seed,
        inertia_trace: trace,
    }
}

/// Moves single points between clusters while that lowers the total inertia, then
/// recomputes the means. Lloyd can stop where moving one point would still help.
/// Returns whether anything moved.
fn hartigan_transfers(points: &[Point], centers: &mut [Point], labels: &mut [usize]) -> bool {
    let k = centers.len();
    let mut counts = vec![0usize; k];
    let mut sums = vec![[0.0f64; 2]; k];
    for (p, &l) in points.iter().zip(labels.iter()) {
        counts[l] += 1;
        sums[l][0] += p[0];
        sums[l][1] += p[1];
    }
    let mean = |s: [f64; 2], n: usize| [s[0] / n as f64, s[1] / n as f64];
    let mut means: Vec<Point> = (0..k)
        .map(|j| if counts[j] > 0 { mean(sums[j], counts[j]) } else { centers[j] })
        .collect();
    let mut moved_any = false;
    // each accepted move strictly lowers inertia, so this terminates; the cap guards
    // against float noise cycling
    for _ in 0..100 * points.len().max(1) {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = labels[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let removal = na / (na - 1.0) * squared_distance(p, &means[a]);
            let mut best = (a, removal);
            for b in (0..k).filter(|&b| b != a && counts[b] > 0) {
                let nb = counts[b] as f64;
                let cost = nb / (nb + 1.0) * squared_distance(p, &means[b]);
                if cost < best.1 * (1.0 - 1e-12) {
                    best = (b, cost);
                }
            }
            let b = best.0;
            if b == a {
                continue;
            }
            counts[a] -= 1;
            counts[b] += 1;
            for d in 0..2 {
                sums[a][d] -= p[d];
                sums[b][d] += p[d];
            }
            means[a] = mean(sums[a], counts[a]);
            means[b] = mean(sums[b], counts[b]);
            labels[i] = b;
            moved = true;
        }
        if !moved {
            break;
        }
        moved_any = true;
    }
    if moved_any {
        // fresh sums avoid drift from the incremental updates
        let mut sums = vec![[0.0f64; 2]; k];
        for (p, &l) in points.iter().zip(labels.iter()) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
        }
        for j in (0..k).filter(|&j| counts[j] > 0) {
            centers[j] = mean(sums[j], counts[j]);
        }
    }
    moved_any
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_square_single_cluster() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let m = kmeans_fit(&pts, &KMeansParams::new(1, 3)).unwrap();
        assert_abs_diff_eq!(m.centers[0][0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.centers[0][1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.inertia, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let pts = [[0.0, 0.0], [1.0, 5.0], [3.0, 1.0], [7.0, 7.0], [2.0, 9.0]];
        let m = kmeans_fit(&pts, &KMeansParams::new(5, 11)).unwrap();
        assert_eq!(m.inertia, 0.0);
        let mut centers = m.centers.clone();
        centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expected = pts.to_vec();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(centers, expected);
    }

    #[test]
    fn parameter_errors() {
        let pts = [[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]];
        assert!(matches!(kmeans_fit(&pts, &KMeansParams::new(4, 0)), Err(Error::Parameter(_))));
        match kmeans_fit(&pts, &KMeansParams::new(3, 0)) {
            Err(Error::Parameter(msg)) => assert!(msg.contains("distinct"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(kmeans_fit(&pts, &KMeansParams::new(0, 0)).is_err());
        assert!(kmeans_fit(&[[f64::NAN, 0.0]], &KMeansParams::new(1, 0)).is_err());
    }

    #[test]
    fn converged_model_invariants() {
        let mut rng = rng_for(5, "test", 0);
        let pts: Vec<Point> = (0..300)
            .map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 4.0])
            .collect();
        let m = kmeans_fit(&pts, &KMeansParams::new(6, 5)).unwrap();
        for w in m.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "inertia rose: {w:?}");
        }
        for (p, &a) in pts.iter().zip(&m.assignments) {
            assert_eq!(nearest(p, &m.centers).0, a);
        }
        assert_abs_diff_eq!(inertia(&pts, &m.centers), m.inertia, epsilon = 1e-9);
        for (j, c) in m.centers.iter().enumerate() {
            let members: Vec<_> = pts
                .iter()
                .zip(&m.assignments)
                .filter(|(_, &a)| a == j)
                .map(|(p, _)| p)
                .collect();
            let n = members.len() as f64;
            let mx = members.iter().map(|p| p[0]).sum::<f64>() / n;
            let my = members.iter().map(|p| p[1]).sum::<f64>() / n;
            assert!(squared_distance(c, &[mx, my]) <= 1e-6);
        }
    }

    #[test]
    fn transfer_escapes_lloyd_fixed_point() {
        // {0, 2} | {3} is stable under Lloyd (point 2 is equidistant) but moving 2
        // across drops inertia from 2 to 0.5
        let pts = [[0.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let mut centers = vec![[1.0, 0.0], [3.0, 0.0]];
        let mut labels = vec![0, 0, 1];
        assert!(hartigan_transfers(&pts, &mut centers, &mut labels));
        assert_eq!(labels, vec![0, 1, 1]);
        assert_eq!(centers, vec![[0.0, 0.0], [2.5, 0.0]]);
        assert_abs_diff_eq!(inertia(&pts, &centers), 0.5, epsilon = 1e-12);
        assert!(!hartigan_transfers(&pts, &mut centers, &mut labels));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut rng = rng_for(9, "test", 0);
        let pts: Vec<Point> = (0..500).map(|_| [rng.random(), rng.random()]).collect();
        let params = KMeansParams::new(5, 42);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| kmeans_fit(&pts, &params).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
