use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{KSelection, PipelineConfig};
use crate::clustering::{
    elbow_select, gap_statistic, kde_density_grid, stack_yearly_centers, ElbowReport, GapReport,
    KMeansParams, Point, SelectionParams, StackedCenters,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, per_label_csv, smoothing_search, EvaluationReport, SmoothingResult};
use crate::features::{pca_fit, FeatureMatrix, FeatureState, PcaModel, Standardizer};
use crate::ingest::{
    aggregate_counts, chronological_split, clean_records, parse_csv, CrimeRecord, Granularity,
    IngestReport, SplitDataset,
};
use crate::models::{train, Classifier, ImportanceRanking};
use crate::seed::derive_seed;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub run_dir: PathBuf,
    pub config: PipelineConfig,
    pub preprocessing_order: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_k: Option<usize>,
    pub artifacts: Vec<ArtifactEntry>,
    pub phase_timings: Vec<PhaseTiming>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_phase: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn artifact(&self, name: &str) -> Option<&ArtifactEntry> {
        self.artifacts.iter().find(|a| a.path == name)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes artifacts into one directory and remembers their hashes.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.entries.retain(|a| a.path != name);
        self.entries.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn entries(&self) -> &[ArtifactEntry] {
        &self.entries
    }
}

/// Parses and cleans the input file.
pub fn ingest_phase(config: &PipelineConfig) -> Result<(Vec<CrimeRecord>, IngestReport)> {
    let parsed = parse_csv(&config.input, &config.columns)?;
    let cleaned = clean_records(parsed.candidates, &config.bounds);
    if cleaned.records.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable records after cleaning; need at least 2 to split",
            cleaned.records.len()
        )));
    }
    Ok((cleaned.records, cleaned.report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub ratio: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub split_timestamp: String,
    pub preprocessing_order: String,
}

pub fn split_phase(config: &PipelineConfig, records: &[CrimeRecord]) -> Result<(SplitDataset, SplitSummary)> {
    let split = chronological_split(records, config.split_ratio)?;
    let summary = SplitSummary {
        ratio: config.split_ratio,
        n_train: split.train.len(),
        n_test: split.test.len(),
        split_timestamp: crate::ingest::format_timestamp(split.split_timestamp),
        preprocessing_order: "clean_then_split".into(),
    };
    Ok((split, summary))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub gap: GapReport,
    pub elbow: ElbowReport,
    pub chosen_k: usize,
}

fn selection_params(config: &PipelineConfig) -> SelectionParams {
    SelectionParams {
        kmax: config.kmax,
        seed: derive_seed(config.seed, "k-selection", 0),
        n_init: config.kmeans_n_init,
        max_iter: config.kmeans_max_iter,
        tol: config.kmeans_tol,
    }
}

/// Gap statistic and elbow on training coordinates. Both reports are always
/// produced; the configured method decides which k is used.
pub fn select_k_phase(config: &PipelineConfig, train: &[CrimeRecord]) -> Result<Selection> {
    let points: Vec<Point> = train.iter().map(CrimeRecord::point).collect();
    let params = selection_params(config);
    let gap = gap_statistic(&points, &params, config.gap_references)?;
    let elbow = elbow_select(&points, &params)?;
    let chosen_k = match config.k_selection {
        KSelection::GapMax => gap.chosen_k_max,
        KSelection::GapOnesd => gap.chosen_k_onesd,
        KSelection::Elbow => elbow.k_elbow,
        KSelection::Fixed => config.fixed_k.expect("validated"),
    };
    Ok(Selection { gap, elbow, chosen_k })
}

pub fn cluster_phase(config: &PipelineConfig, train: &[CrimeRecord], k: usize) -> Result<StackedCenters> {
    let params = KMeansParams {
        k,
        seed: derive_seed(config.seed, "yearly-kmeans", 0),
        n_init: config.kmeans_n_init,
        max_iter: config.kmeans_max_iter,
        tol: config.kmeans_tol,
    };
    stack_yearly_centers(train, &params, config.short_years)
}

#[derive(Debug, Clone)]
pub struct Featurized {
    pub state: FeatureState,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    /// Fitted only on standardized features.
    pub pca: Option<PcaModel>,
}

/// Fits vocabulary, centroid and standardization on `train` only, then transforms both sides.
pub fn featurize_phase(
    config: &PipelineConfig,
    split: &SplitDataset,
    centers: &StackedCenters,
) -> Result<Featurized> {
    let mut state = FeatureState::fit(&split.train, config.schema()?)?;
    if config.standardize {
        let raw_train = state.transform(&split.train, Some(centers))?;
        state.standardization = Some(Standardizer::fit(&raw_train)?);
    }
    let mut train = state.transform(&split.train, Some(centers))?;
    let mut test = state.transform(&split.test, Some(centers))?;
    if config.class_count != train.class_count() {
        train = train.with_class_count(config.class_count)?;
        test = test.with_class_count(config.class_count)?;
    }
    let pca = if config.standardize { Some(pca_fit(&train)?) } else { None };
    if let (Some(model), Some(n)) = (&pca, config.pca_components) {
        train = model.transform(&train, n)?;
        test = model.transform(&test, n)?;
    }
    Ok(Featurized { state, train, test, pca })
}

pub fn train_phase(config: &PipelineConfig, train_matrix: &FeatureMatrix) -> Result<Classifier> {
    train(&config.model, train_matrix, derive_seed(config.seed, "model", 0))
}

#[derive(Debug, Clone)]
pub struct Evaluated {
    pub probabilities: Array2<f64>,
    pub report: EvaluationReport,
    pub smoothing: SmoothingResult,
    pub importance: Option<ImportanceRanking>,
}

pub fn evaluate_phase(config: &PipelineConfig, model: &Classifier, test: &FeatureMatrix) -> Result<Evaluated> {
    let probabilities = model.predict_proba(test)?;
    let report = evaluate(&probabilities, test.labels(), Some(model.kind()))?;
    let smoothing = smoothing_search(&probabilities, test.labels(), &config.smoothing_grid)?;
    let importance = model
        .kind()
        .is_tree_based()
        .then(|| model.feature_importance())
        .transpose()?;
    Ok(Evaluated {
        probabilities,
        report,
        smoothing,
        importance,
    })
}

fn csv_bytes(m: &FeatureMatrix) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    m.write_csv(&mut buf)?;
    Ok(buf)
}

struct Runner {
    writer: ArtifactWriter,
    timings: Vec<PhaseTiming>,
}

impl Runner {
    fn phase<T>(&mut self, name: &str, f: impl FnOnce(&mut ArtifactWriter) -> Result<T>) -> std::result::Result<T, (String, Error)> {
        let start = Instant::now();
        let out = f(&mut self.writer);
        self.timings.push(PhaseTiming {
            phase: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out.map_err(|e| (name.to_string(), e))
    }
}

/// Runs every phase and writes all reports plus `manifest.json` into the run directory.
///
/// On failure the artifacts written so far stay on disk and the manifest names the
/// failed phase; the returned error carries the same phase.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    config.validate().map_err(|e| e.in_phase("config"))?;
    let run_dir = config.run_dir()?;
    let mut runner = Runner {
        writer: ArtifactWriter::create(&run_dir)?,
        timings: Vec::new(),
    };
    let mut chosen_k = None;
    let outcome = run_phases(config, &mut runner, &mut chosen_k);
    let (failed_phase, error) = match &outcome {
        Ok(()) => (None, None),
        Err((phase, e)) => (Some(phase.clone()), Some(e.to_string())),
    };
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        run_dir: run_dir.clone(),
        config: config.clone(),
        preprocessing_order: "clean_then_split".into(),
        chosen_k,
        artifacts: runner.writer.entries().to_vec(),
        phase_timings: runner.timings,
        failed_phase,
        error,
    };
    runner.writer.write_json("manifest.json", &manifest)?;
    match outcome {
        Ok(()) => Ok(manifest),
        Err((phase, e)) => Err(e.in_phase(&phase)),
    }
}

fn run_phases(
    config: &PipelineConfig,
    runner: &mut Runner,
    chosen_k: &mut Option<usize>,
) -> std::result::Result<(), (String, Error)> {
    let records = runner.phase("ingest", |w| {
        let (records, report) = ingest_phase(config)?;
        w.write_json("ingest_report.json", &report)?;
        for g in [Granularity::Hour, Granularity::Month, Granularity::Year] {
            let counts = aggregate_counts(&records, g, None);
            w.write(&format!("counts_by_{}.csv", g.as_str()), counts.to_csv().as_bytes())?;
        }
        Ok(records)
    })?;

    let split = runner.phase("split", |w| {
        let (split, summary) = split_phase(config, &records)?;
        w.write_json("split.json", &summary)?;
        Ok(split)
    })?;
    drop(records);

    let selection = runner.phase("select_k", |w| {
        let s = select_k_phase(config, &split.train)?;
        w.write_json("gap.json", &s.gap)?;
        w.write_json("elbow.json", &s.elbow)?;
        Ok(s)
    })?;
    *chosen_k = Some(selection.chosen_k);

    let centers = runner.phase("cluster", |w| {
        let centers = cluster_phase(config, &split.train, selection.chosen_k)?;
        w.write_json("clusters.json", &centers)?;
        let points: Vec<Point> = split.train.iter().map(CrimeRecord::point).collect();
        let grid = kde_density_grid(&points, None, config.density_grid)?;
        w.write("density_grid.csv", grid.to_csv().as_bytes())?;
        Ok(centers)
    })?;

    let featurized = runner.phase("featurize", |w| {
        let f = featurize_phase(config, &split, &centers)?;
        w.write("features.json", format!("{}\n", f.state.to_json()?).as_bytes())?;
        w.write("train_features.csv", &csv_bytes(&f.train)?)?;
        w.write("test_features.csv", &csv_bytes(&f.test)?)?;
        if let Some(pca) = &f.pca {
            w.write_json("pca.json", pca)?;
        }
        Ok(f)
    })?;

    let model = runner.phase("train", |w| {
        let model = train_phase(config, &featurized.train)?;
        w.write("model.json", format!("{}\n", model.to_json()?).as_bytes())?;
        Ok(model)
    })?;

    runner.phase("evaluate", |w| {
        let e = evaluate_phase(config, &model, &featurized.test)?;
        w.write_json("evaluation.json", &e.report)?;
        w.write("per_label.csv", per_label_csv(&e.report.per_label).as_bytes())?;
        w.write_json("smoothing.json", &e.smoothing)?;
        if let Some(ranking) = &e.importance {
            w.write("importance.csv", ranking.to_csv().as_bytes())?;
        }
        Ok(())
    })
}
