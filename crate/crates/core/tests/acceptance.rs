//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::Rng;

use crimecast::clustering::{elbow_select, gap_statistic, kmeans_fit, KMeansParams, Point, SelectionParams};
use crimecast::evaluation::{accuracy, baseline_uniform_loss, default_smoothing_grid, multiclass_log_loss, smoothing_search};
use crimecast::features::{
    build_feature_matrix, pca_fit, standardize, FeatureMatrix, FeatureName, FeatureSchema, SpatialFeatures,
    SpatialReference,
};
use crimecast::ingest::BoundingBox;
use crimecast::models::{
    logistic_loss_and_gradient, train_decision_tree, train_gaussian_nb, train_knn, train_random_forest, ForestParams,
    TreeNode, TreeParams,
};
use crimecast::pipeline::run_pipeline;
use crimecast::seed::rng_for;
use crimecast::synthetic::{BlobSuite, PlantedSignal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, Box<dyn Fn() -> Outcome>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn check<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn ac1_baseline() -> Outcome {
    let baseline = check(baseline_uniform_loss(34))?;
    ensure!((baseline - 3.5263605).abs() < 1e-6, "baseline_uniform_loss(34) = {baseline}");
    for n in [1, 10, 1000] {
        let p = Array2::from_elem((n, 34), 1.0 / 34.0);
        let y: Vec<usize> = (0..n).map(|i| i % 34).collect();
        let loss = check(multiclass_log_loss(&p, &y))?;
        ensure!(loss.to_bits() == baseline.to_bits(), "N={n}: uniform loss {loss:e} != {baseline:e}");
    }
    Ok(format!("ln 34 = {baseline:.7}, uniform rows bit-identical"))
}

fn ac2_k_selection() -> Outcome {
    for seed in 0..10 {
        let report = check(gap_statistic(&BlobSuite::new(7, seed).points(), &SelectionParams::new(16, seed), 10))?;
        ensure!(report.chosen_k_max == 7, "gap_max chose {} on seed {seed}", report.chosen_k_max);
        let report = check(elbow_select(&BlobSuite::new(3, seed).points(), &SelectionParams::new(16, seed)))?;
        ensure!(report.k_elbow == 3, "elbow chose {} on seed {seed}", report.k_elbow);
    }
    Ok("gap_max 7/7 blobs and elbow 3/3 blobs on 10/10 seeds".into())
}

/// Minimum within-cluster sum of squares over all two-group partitions.
fn best_bipartition(points: &[Point]) -> f64 {
    let sse = |g: &[Point]| {
        let m = g.len() as f64;
        let c = [g.iter().map(|p| p[0]).sum::<f64>() / m, g.iter().map(|p| p[1]).sum::<f64>() / m];
        g.iter().map(|p| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sum::<f64>()
    };
    let n = points.len();
    (1u32..(1 << n) - 1)
        .map(|mask| {
            let (a, b): (Vec<(usize, &Point)>, _) = points.iter().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
            let a: Vec<Point> = a.into_iter().map(|(_, p)| *p).collect();
            let b: Vec<Point> = b.into_iter().map(|(_, p)| *p).collect();
            sse(&a) + sse(&b)
        })
        .fold(f64::INFINITY, f64::min)
}

fn ac3_kmeans_oracle() -> Outcome {
    let mut misses = Vec::new();
    for instance in 0..200u64 {
        let mut rng = rng_for(2024, "exhaustive-instances", instance);
        let n = rng.random_range(2..=8);
        let points: Vec<Point> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
        let model = check(kmeans_fit(&points, &KMeansParams::new(2, instance)))?;
        let optimum = best_bipartition(&points);
        if (model.inertia - optimum).abs() > 1e-9 {
            misses.push(instance);
        }
    }
    ensure!(misses.is_empty(), "{}/200 instances off the optimum: {misses:?}", 200 - misses.len());
    Ok("200/200 instances at the exhaustive optimum".into())
}

fn ac4_log_loss_oracles() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    // rows already normalized
    let p = Array2::from_shape_vec((3, 3), vec![0.5, 0.25, 0.25, 0.1, 0.7, 0.2, 0.3, 0.3, 0.4]).unwrap();
    let y = [0, 1, 2];
    let hand = (2f64.ln() - 0.7f64.ln() - 0.4f64.ln()) / 3.0;
    ensure!(close(check(multiclass_log_loss(&p, &y))?, hand), "normalized case");
    ensure!(check(accuracy(&p, &y))? == 1.0, "normalized case accuracy");
    // unnormalized rows and a three-way tie that goes to class 0
    let p = Array2::from_shape_vec((3, 3), vec![2.0, 1.0, 1.0, 0.0, 0.0, 3.0, 1.0, 1.0, 1.0]).unwrap();
    let y = [1, 2, 0];
    ensure!(close(check(multiclass_log_loss(&p, &y))?, (4f64.ln() + 3f64.ln()) / 3.0), "renormalized case");
    ensure!(close(check(accuracy(&p, &y))?, 2.0 / 3.0), "tie case accuracy");
    // zero on the true class hits the clip
    let p = Array2::from_shape_vec((3, 3), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let y = [1, 1, 2];
    ensure!(close(check(multiclass_log_loss(&p, &y))?, -(1e-15f64).ln() / 3.0), "clipped case");
    ensure!(close(check(accuracy(&p, &y))?, 2.0 / 3.0), "clipped case accuracy");

    let grid = default_smoothing_grid();
    let mut rng = rng_for(7, "acceptance-matrices", 0);
    for m in 0..1000 {
        let n = rng.random_range(1..40);
        let c = rng.random_range(2..12);
        let mut p = Array2::from_shape_fn((n, c), |_| if rng.random::<f64>() < 0.15 { 0.0 } else { rng.random() });
        for mut row in p.rows_mut() {
            if row.sum() == 0.0 {
                row[0] = 1.0;
            }
        }
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let loss = check(multiclass_log_loss(&p, &y))?;
        let acc = check(accuracy(&p, &y))?;

        let mut scaled = p.clone();
        for mut row in scaled.rows_mut() {
            let k = 10f64.powf(rng.random_range(-6.0..6.0));
            row.mapv_inplace(|v| v * k);
        }
        let scaled_loss = check(multiclass_log_loss(&scaled, &y))?;
        ensure!((scaled_loss - loss).abs() <= 1e-9 * loss.max(1.0), "matrix {m}: scaled loss {scaled_loss} vs {loss}");
        ensure!(check(accuracy(&scaled, &y))? == acc, "matrix {m}: scaling changed accuracy");
        let cubed = p.mapv(|v| v.powi(3) + 2.0 * v);
        ensure!(check(accuracy(&cubed, &y))? == acc, "matrix {m}: monotone transform changed accuracy");

        let s = check(smoothing_search(&p, &y, &grid))?;
        let min = s.losses.iter().copied().fold(f64::INFINITY, f64::min);
        ensure!(s.best_loss <= s.losses[0] && s.best_loss == min, "matrix {m}: best loss not the grid minimum");
        ensure!(s.losses[0] == loss, "matrix {m}: epsilon 0 differs from the plain loss");
        if let Some(pct) = s.improvement_percent {
            ensure!(close(pct, 100.0 * (loss - s.best_loss) / loss), "matrix {m}: improvement percent");
        }
    }
    Ok("3 hand cases, 1000 random matrices".into())
}

fn matrix(rows: &[Vec<f64>], labels: &[usize], classes: usize, names: &[FeatureName]) -> Result<FeatureMatrix, String> {
    let f = names.len();
    let values = Array2::from_shape_vec((rows.len(), f), rows.concat()).map_err(|e| e.to_string())?;
    check(FeatureMatrix::new(check(FeatureSchema::new(names.to_vec()))?, values, labels.to_vec(), classes))
}

const THREE: [FeatureName; 3] = [FeatureName::X, FeatureName::Y, FeatureName::Hour];

fn gini(counts: &[usize]) -> f64 {
    let n = counts.iter().sum::<usize>() as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn ac5_models() -> Outcome {
    let mut rng = rng_for(3, "acceptance-models", 0);

    // logistic gradient against central differences
    let x = Array2::from_shape_fn((25, 4), |_| rng.random_range(-2.0..2.0));
    let y: Vec<usize> = (0..25).map(|_| rng.random_range(0..3)).collect();
    let w = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
    let b = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
    let (_, gw, gb) = logistic_loss_and_gradient(&x, &y, &w, &b, 0.01);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..4 {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[[i, j]] += h;
            wm[[i, j]] -= h;
            let fd = (logistic_loss_and_gradient(&x, &y, &wp, &b, 0.01).0
                - logistic_loss_and_gradient(&x, &y, &wm, &b, 0.01).0)
                / (2.0 * h);
            worst = worst.max((fd - gw[[i, j]]).abs());
        }
        let (mut bp, mut bm) = (b.clone(), b.clone());
        bp[i] += h;
        bm[i] -= h;
        let fd = (logistic_loss_and_gradient(&x, &y, &w, &bp, 0.01).0 - logistic_loss_and_gradient(&x, &y, &w, &bm, 0.01).0)
            / (2.0 * h);
        worst = worst.max((fd - gb[i]).abs());
    }
    ensure!(worst < 1e-6, "gradient error {worst:e}");

    // Gaussian NB against Bayes rule by hand: class 0 {0, 2}, class 1 {4, 6, 5, 5}
    let rows: Vec<Vec<f64>> = [0.0, 2.0, 4.0, 6.0, 5.0, 5.0].iter().map(|&v| vec![v]).collect();
    let nb = check(train_gaussian_nb(&matrix(&rows, &[0, 0, 1, 1, 1, 1], 2, &[FeatureName::X])?))?;
    let gauss = |x: f64, m: f64, v: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    for q in [-1.0, 1.0, 2.9, 3.5, 8.0] {
        let a = (2.0 / 6.0) * gauss(q, 1.0, 1.0 + 1e-9);
        let bb = (4.0 / 6.0) * gauss(q, 5.0, 0.5 + 1e-9);
        let p = check(nb.predict_proba(&matrix(&[vec![q]], &[0], 2, &[FeatureName::X])?))?;
        ensure!((p[[0, 0]] - a / (a + bb)).abs() < 1e-6, "GNB posterior at {q}");
    }

    // tree root split against exhaustive Gini search
    for trial in 0..20 {
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let labels: Vec<usize> = rows
            .iter()
            .map(|r| if r[1] + rng.random_range(-2.0..2.0) > 6.0 { 2 } else { usize::from(r[0] > 4.0) })
            .collect();
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..3 {
            let mut v: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            for w in v.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (mut l, mut r) = (vec![0; 3], vec![0; 3]);
                for (row, &y) in rows.iter().zip(&labels) {
                    if row[f] <= t { l[y] += 1 } else { r[y] += 1 }
                }
                let (nl, nr) = (l.iter().sum::<usize>() as f64, r.iter().sum::<usize>() as f64);
                let imp = (nl * gini(&l) + nr * gini(&r)) / rows.len() as f64;
                if best.is_none_or(|b| imp < b.0 - 1e-12) {
                    best = Some((imp, f, t));
                }
            }
        }
        let (_, f, t) = best.ok_or("no candidate split")?;
        let model = check(train_decision_tree(&matrix(&rows, &labels, 3, &THREE)?, TreeParams::unpruned()))?;
        let tree = model.trees().ok_or("tree model has no tree")?[0];
        let TreeNode::Split { feature, threshold, .. } = tree.root else {
            return Err(format!("trial {trial}: root is a leaf"));
        };
        ensure!(feature == f && (threshold - t).abs() < 1e-12, "trial {trial}: root ({feature}, {threshold}) vs ({f}, {t})");
    }

    // one-tree forest without bootstrap over all features is the tree
    let blob = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| -> (Vec<Vec<f64>>, Vec<usize>) {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let rows = labels.iter().map(|&y| (0..3).map(|d| (y * d) as f64 + rng.random_range(-1.5..1.5)).collect()).collect();
        (rows, labels)
    };
    let (rows, labels) = blob(150, &mut rng);
    let train = matrix(&rows, &labels, 3, &THREE)?;
    let tree = check(train_decision_tree(&train, TreeParams::unpruned()))?;
    let forest = check(train_random_forest(
        &train,
        ForestParams { n_trees: 1, bootstrap: false, features_per_split: Some(3), ..Default::default() },
        17,
    ))?;
    let (rows, labels) = blob(100, &mut rng);
    let held = matrix(&rows, &labels, 3, &THREE)?;
    ensure!(check(tree.predict_proba(&held))? == check(forest.predict_proba(&held))?, "forest differs from tree");

    // KNN leave-one-out against brute force with (distance, index) ordering
    let pts: Vec<(Vec<f64>, usize)> = (0..60)
        .map(|_| {
            let y = rng.random_range(0..3);
            (vec![rng.random_range(0..6) as f64 + y as f64, rng.random_range(0..6) as f64], y)
        })
        .collect();
    for held in 0..pts.len() {
        let train: Vec<&(Vec<f64>, usize)> = pts.iter().enumerate().filter(|(i, _)| *i != held).map(|(_, p)| p).collect();
        let rows: Vec<Vec<f64>> = train.iter().map(|p| p.0.clone()).collect();
        let labels: Vec<usize> = train.iter().map(|p| p.1).collect();
        let knn = check(train_knn(&matrix(&rows, &labels, 3, &THREE[..2])?, 5))?;
        let q = &pts[held].0;
        let got = check(knn.predict_proba(&matrix(std::slice::from_ref(q), &[0], 3, &THREE[..2])?))?;
        let mut order: Vec<(f64, usize)> =
            rows.iter().enumerate().map(|(i, r)| ((r[0] - q[0]).powi(2) + (r[1] - q[1]).powi(2), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut expected = vec![0.0; 3];
        for &(_, i) in &order[..5] {
            expected[labels[i]] += 1.0 / 5.0;
        }
        ensure!(got.row(0).to_vec() == expected, "held-out row {held}: {:?} vs {expected:?}", got.row(0));
    }
    Ok(format!("gradient error {worst:.1e}, GNB/tree/forest/KNN oracles agree"))
}

fn ac6_signal(dir: &Path) -> Outcome {
    let input = common::planted_csv(dir, 5000, 33, 1);
    let manifest = check(run_pipeline(&common::config(input, &dir.join("ac6"))))?;
    let report: serde_json::Value =
        check(serde_json::from_slice(&check(fs::read(manifest.run_dir.join("evaluation.json")))?))?;
    let loss = report["log_loss"].as_f64().ok_or("no log_loss")?;
    let acc = report["accuracy"].as_f64().ok_or("no accuracy")?;
    let ln33 = 33f64.ln();
    ensure!(loss < ln33 && acc > 2.0 / 33.0, "log loss {loss:.4} (ln 33 = {ln33:.4}), accuracy {acc:.4}");
    Ok(format!("log loss {loss:.4} < {ln33:.4}, accuracy {acc:.4} > {:.4}", 2.0 / 33.0))
}

fn ac7_geometry() -> Outcome {
    let mut rng = rng_for(5, "acceptance-geometry", 0);
    let reference = SpatialReference { centroid_x: -75.13, centroid_y: 40.0 };
    for i in 0..10_000 {
        let (x, y) = (rng.random_range(-75.3..-74.95), rng.random_range(39.86..40.14));
        let f = SpatialFeatures::new(x, y, &reference);
        let (dx, dy) = (x - reference.centroid_x, y - reference.centroid_y);
        for (rx, ry) in f.rotations {
            ensure!((rx * rx + ry * ry - f.radius * f.radius).abs() < 1e-9, "point {i}: rotation not an isometry");
        }
        ensure!((f.radius * f.angle.cos() - dx).abs() < 1e-9, "point {i}: polar x");
        ensure!((f.radius * f.angle.sin() - dy).abs() < 1e-9, "point {i}: polar y");
    }

    use FeatureName::*;
    let schema = check(FeatureSchema::new(vec![
        HourZone, Hour, Minute, Day, Month, Year, DayOfWeekNum, WeekOfYear, IsWeekend, Season, X, Y, Radius, Angle,
        Rot30X, Rot30Y, Rot45X, Rot45Y, Rot60X, Rot60Y, PdDistrictNum,
    ]))?;
    let records = check(PlantedSignal::new(2000, 10, 8).records(&BoundingBox::default()))?;
    let reference = check(SpatialReference::fit(&records))?;
    let raw = check(build_feature_matrix(&records, &schema, &reference, None, None))?;
    let (m, _) = check(standardize(&raw))?;
    let pca = check(pca_fit(&m))?;
    let total: f64 = pca.explained_variance_ratio.iter().sum();
    ensure!((total - 1.0).abs() < 1e-9, "ratios sum to {total}");
    let scores = check(pca.transform(&m, m.n_features()))?;
    let back = pca.inverse_transform(scores.values());
    let err = (&back - m.values()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    ensure!(err < 1e-6, "reconstruction error {err:e}");
    Ok(format!("10000 points; PCA on {} features, reconstruction error {err:.1e}", m.n_features()))
}

fn ac8_determinism(dir: &Path) -> Outcome {
    let input = common::planted_csv(dir, 2000, 8, 3);
    let cfg = dir.join("ac8.json");
    check(fs::write(&cfg, format!(r#"{{"input": {:?}, "seed": 21}}"#, input.to_str().ok_or("path")?)))?;
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4"].into_iter().enumerate() {
        let out = dir.join(format!("ac8-{i}"));
        let o = check(
            Command::new(env!("CARGO_BIN_EXE_crimecast"))
                .args(["--threads", threads, "run", "--config", cfg.to_str().ok_or("path")?])
                .arg("--output-dir")
                .arg(&out)
                .output(),
        )?;
        ensure!(o.status.success(), "run failed: {}", String::from_utf8_lossy(&o.stderr));
        let manifest: serde_json::Value = check(serde_json::from_slice(&o.stdout))?;
        let run_dir = Path::new(manifest["run_dir"].as_str().ok_or("no run_dir")?).to_path_buf();
        outputs.push((check(fs::read(run_dir.join("evaluation.json")))?, check(fs::read(run_dir.join("model.json")))?));
    }
    ensure!(outputs[0].0 == outputs[1].0, "evaluation.json differs");
    ensure!(outputs[0].1 == outputs[1].1, "model.json differs");
    Ok("evaluation.json and model.json byte-identical at 1 and 4 threads".into())
}

fn ac9_importance() -> Outcome {
    let mut rng = rng_for(9, "acceptance-importance", 0);
    use FeatureName::*;
    let names = [X, Y, Hour, Month, Radius];
    let rows: Vec<Vec<f64>> = (0..600).map(|_| (0..names.len()).map(|_| rng.random()).collect()).collect();
    let labels: Vec<usize> = rows.iter().map(|r| usize::from(r[0] > 0.5)).collect();
    let m = matrix(&rows, &labels, 2, &names)?;
    let forest = check(train_random_forest(&m, ForestParams { n_trees: 50, ..Default::default() }, 4))?;
    let ranking = check(forest.feature_importance())?;
    let signal = ranking.weight(X).ok_or("X missing from ranking")?;
    ensure!(signal > 0.95, "signal feature weight {signal:.4}");

    let tree = check(train_decision_tree(&m, TreeParams::default()))?;
    for r in [&ranking, &check(tree.feature_importance())?] {
        let sum: f64 = r.entries.iter().map(|e| e.weight).sum();
        ensure!((sum - 1.0).abs() < 1e-9, "ranking sums to {sum}");
    }
    Ok(format!("signal weight {signal:.4}, rankings sum to 1"))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let path = dir.path().to_path_buf();
    let criteria: Vec<Criterion> = vec![
        ("AC1 baseline exactness", Duration::from_secs(1), Box::new(ac1_baseline)),
        ("AC2 k-selection recovery", Duration::from_secs(60), Box::new(ac2_k_selection)),
        ("AC3 k-means exhaustive oracle", Duration::from_secs(30), Box::new(ac3_kmeans_oracle)),
        ("AC4 log-loss and accuracy oracles", Duration::from_secs(10), Box::new(ac4_log_loss_oracles)),
        ("AC5 model correctness", Duration::from_secs(60), Box::new(ac5_models)),
        ("AC6 end-to-end signal", Duration::from_secs(300), Box::new({
            let p = path.clone();
            move || ac6_signal(&p)
        })),
        ("AC7 feature geometry", Duration::from_secs(60), Box::new(ac7_geometry)),
        ("AC8 determinism", Duration::from_secs(300), Box::new({
            let p = path.clone();
            move || ac8_determinism(&p)
        })),
        ("AC9 importance sanity", Duration::from_secs(60), Box::new(ac9_importance)),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; took {elapsed:.1?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
