//! Configuration, the end-to-end run, and artifact bookkeeping.

mod config;
mod run;

pub use config::{KSelection, PipelineConfig, OUTPUT_DIR_ENV};
pub use run::{
    cluster_phase, evaluate_phase, featurize_phase, ingest_phase, run_pipeline, select_k_phase,
    sha256_hex, split_phase, train_phase, ArtifactEntry, ArtifactWriter, Evaluated, Featurized,
    PhaseTiming, RunManifest, Selection, SplitSummary, TOOL_VERSION,
};
