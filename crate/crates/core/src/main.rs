use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crimecast::clustering::{elbow_select, gap_statistic, kde_density_grid, Point, SelectionParams};
use crimecast::evaluation::per_label_csv;
use crimecast::ingest::{aggregate_counts, write_records_csv, CrimeRecord, Granularity};
use crimecast::models::{Classifier, ModelKind, ModelSpec};
use crimecast::pipeline::{
    cluster_phase, evaluate_phase, featurize_phase, ingest_phase, run_pipeline, select_k_phase,
    split_phase, train_phase, ArtifactWriter, Featurized, KSelection, PipelineConfig, TOOL_VERSION,
};
use crimecast::seed::derive_seed;
use crimecast::{encode_label, Error};

#[derive(Parser)]
#[command(name = "crimecast", version, about = "Crime-type prediction from incident records")]
struct Cli {
    /// Worker threads for parallel phases (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON pipeline config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and clean the input; write the cleaned CSV and drop report.
    Ingest(Common),
    /// Incident counts per hour, month or year.
    Aggregate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "hour")]
        granularity: Granularity,
        /// Only count this label.
        #[arg(long)]
        label: Option<String>,
    },
    /// Gap statistic or elbow curve on training coordinates.
    SelectK {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "gap", value_parser = ["gap", "elbow"])]
        method: String,
        #[arg(long)]
        kmax: Option<usize>,
        /// Number of uniform reference sets.
        #[arg(long = "B")]
        references: Option<usize>,
    },
    /// Per-year K-Means on training records, stacked.
    Cluster {
        #[command(flatten)]
        common: Common,
        /// Use this k instead of the configured selection method.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Build, standardize and write train/test feature matrices.
    Featurize(Common),
    /// Train a model on the training features and write model.json.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<ModelKind>,
    },
    /// Score a model on the test features.
    Evaluate(ModelArgs),
    /// Search the smoothing grid on the test predictions.
    Smooth(ModelArgs),
    /// Impurity-based feature ranking of a tree model.
    Importance(ModelArgs),
    /// Full pipeline; prints the manifest.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        k_selection: Option<KSelection>,
        #[arg(long)]
        fixed_k: Option<usize>,
    },
    /// Print the tool version.
    Version,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    common: Common,
    /// A saved model.json; without it the configured model is trained first.
    #[arg(long)]
    model: Option<PathBuf>,
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(input) = &common.input {
        config.input = input.clone();
    }
    if let Some(dir) = &common.output_dir {
        config.output_dir = Some(dir.clone());
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

/// Writes to stdout; a reader that went away (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn writer(config: &PipelineConfig) -> Result<ArtifactWriter> {
    Ok(ArtifactWriter::create(&config.run_dir()?)?)
}

fn train_records(config: &PipelineConfig) -> Result<crimecast::ingest::SplitDataset> {
    let (records, _) = ingest_phase(config).map_err(|e| e.in_phase("ingest"))?;
    Ok(split_phase(config, &records).map_err(|e| e.in_phase("split"))?.0)
}

fn featurized(config: &PipelineConfig) -> Result<Featurized> {
    let split = train_records(config)?;
    let selection = select_k_phase(config, &split.train).map_err(|e| e.in_phase("select_k"))?;
    let centers = cluster_phase(config, &split.train, selection.chosen_k).map_err(|e| e.in_phase("cluster"))?;
    Ok(featurize_phase(config, &split, &centers).map_err(|e| e.in_phase("featurize"))?)
}

fn model_and_test(config: &PipelineConfig, model: Option<&PathBuf>) -> Result<(Classifier, Featurized)> {
    let f = featurized(config)?;
    let model = match model {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Classifier::from_json(&text)?
        }
        None => train_phase(config, &f.train).map_err(|e| e.in_phase("train"))?,
    };
    Ok((model, f))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Version => emit(&format!("crimecast {TOOL_VERSION}\n"))?,
        Command::Ingest(common) => {
            let config = load_config(&common)?;
            config.validate()?;
            let (records, report) = ingest_phase(&config)?;
            let mut w = writer(&config)?;
            let mut csv = Vec::new();
            write_records_csv(&mut csv, &records)?;
            w.write("cleaned.csv", &csv)?;
            w.write_json("ingest_report.json", &report)?;
            print_json(&report)?;
        }
        Command::Aggregate { common, granularity, label } => {
            let config = load_config(&common)?;
            config.validate()?;
            let label = label.map(|l| encode_label(&l)).transpose()?;
            let (records, _) = ingest_phase(&config)?;
            emit(&aggregate_counts(&records, granularity, label).to_csv())?;
        }
        Command::SelectK { common, method, kmax, references } => {
            let mut config = load_config(&common)?;
            if let Some(k) = kmax {
                config.kmax = k;
            }
            if let Some(b) = references {
                config.gap_references = b;
            }
            config.validate()?;
            let split = train_records(&config)?;
            let points: Vec<Point> = split.train.iter().map(CrimeRecord::point).collect();
            let params = SelectionParams {
                kmax: config.kmax,
                seed: derive_seed(config.seed, "k-selection", 0),
                n_init: config.kmeans_n_init,
                max_iter: config.kmeans_max_iter,
                tol: config.kmeans_tol,
            };
            let mut w = writer(&config)?;
            if method == "gap" {
                let report = gap_statistic(&points, &params, config.gap_references)?;
                w.write_json("gap.json", &report)?;
                print_json(&report)?;
            } else {
                let report = elbow_select(&points, &params)?;
                w.write_json("elbow.json", &report)?;
                print_json(&report)?;
            }
        }
        Command::Cluster { common, k } => {
            let mut config = load_config(&common)?;
            if let Some(k) = k {
                config.k_selection = KSelection::Fixed;
                config.fixed_k = Some(k);
            }
            config.validate()?;
            let split = train_records(&config)?;
            let k = match config.fixed_k {
                Some(k) => k,
                None => select_k_phase(&config, &split.train)?.chosen_k,
            };
            let centers = cluster_phase(&config, &split.train, k)?;
            let points: Vec<Point> = split.train.iter().map(CrimeRecord::point).collect();
            let grid = kde_density_grid(&points, None, config.density_grid)?;
            let mut w = writer(&config)?;
            w.write_json("clusters.json", &centers)?;
            w.write("density_grid.csv", grid.to_csv().as_bytes())?;
            print_json(&centers)?;
        }
        Command::Featurize(common) => {
            let config = load_config(&common)?;
            config.validate()?;
            let f = featurized(&config)?;
            let mut w = writer(&config)?;
            w.write("features.json", f.state.to_json()?.as_bytes())?;
            for (name, m) in [("train_features.csv", &f.train), ("test_features.csv", &f.test)] {
                let mut buf = Vec::new();
                m.write_csv(&mut buf)?;
                w.write(name, &buf)?;
            }
            if let Some(pca) = &f.pca {
                w.write_json("pca.json", pca)?;
            }
            print_json(&serde_json::json!({
                "run_dir": w.dir(),
                "features": f.train.schema(),
                "train_rows": f.train.n_rows(),
                "test_rows": f.test.n_rows(),
            }))?;
        }
        Command::Train { common, model } => {
            let mut config = load_config(&common)?;
            if let Some(kind) = model {
                config.model = ModelSpec::default_for(kind);
            }
            config.validate()?;
            let f = featurized(&config)?;
            let model = train_phase(&config, &f.train)?;
            let mut w = writer(&config)?;
            let path = w.write("model.json", model.to_json()?.as_bytes())?;
            print_json(&serde_json::json!({
                "model": path,
                "kind": model.kind(),
                "schema_fingerprint": model.schema_fingerprint(),
            }))?;
        }
        Command::Evaluate(args) => {
            let config = load_config(&args.common)?;
            config.validate()?;
            let (model, f) = model_and_test(&config, args.model.as_ref())?;
            let e = evaluate_phase(&config, &model, &f.test)?;
            let mut w = writer(&config)?;
            w.write_json("evaluation.json", &e.report)?;
            w.write("per_label.csv", per_label_csv(&e.report.per_label).as_bytes())?;
            print_json(&e.report)?;
        }
        Command::Smooth(args) => {
            let config = load_config(&args.common)?;
            config.validate()?;
            let (model, f) = model_and_test(&config, args.model.as_ref())?;
            let e = evaluate_phase(&config, &model, &f.test)?;
            writer(&config)?.write_json("smoothing.json", &e.smoothing)?;
            print_json(&e.smoothing)?;
        }
        Command::Importance(args) => {
            let config = load_config(&args.common)?;
            config.validate()?;
            let model = match &args.model {
                Some(path) => {
                    let text =
                        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    Classifier::from_json(&text)?
                }
                None => model_and_test(&config, None)?.0,
            };
            let ranking = model.feature_importance()?;
            writer(&config)?.write("importance.csv", ranking.to_csv().as_bytes())?;
            emit(&ranking.to_csv())?;
        }
        Command::Run { common, model, k_selection, fixed_k } => {
            let mut config = load_config(&common)?;
            if let Some(kind) = model {
                config.model = ModelSpec::default_for(kind);
            }
            if let Some(method) = k_selection {
                config.k_selection = method;
            }
            if let Some(k) = fixed_k {
                config.k_selection = KSelection::Fixed;
                config.fixed_k = Some(k);
            }
            let manifest = run_pipeline(&config)?;
            print_json(&manifest)?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map(|e| e.exit_code() as u8)
        .unwrap_or(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
