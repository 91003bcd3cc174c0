use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::ShortYearPolicy;
use crate::error::{Error, Result};
use crate::evaluation::default_smoothing_grid;
use crate::features::{FeatureName, FeatureSchema};
use crate::ingest::{BoundingBox, ColumnMapping};
use crate::labels::ClassLabel;
use crate::models::ModelSpec;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CRIMECAST_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSelection {
    GapMax,
    GapOnesd,
    Elbow,
    Fixed,
}

impl std::str::FromStr for KSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| Error::Config(format!("unknown k-selection method {s:?}")))
    }
}

/// Everything one run needs. Serialized as JSON; every field has a default
/// except `input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub columns: ColumnMapping,
    pub bounds: BoundingBox,
    pub split_ratio: f64,
    pub k_selection: KSelection,
    pub fixed_k: Option<usize>,
    pub kmax: usize,
    /// Number of uniform reference sets for the gap statistic.
    #[serde(alias = "B")]
    pub gap_references: usize,
    pub kmeans_n_init: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub short_years: ShortYearPolicy,
    pub features: Vec<FeatureName>,
    /// Scale features to zero mean and unit variance using training statistics.
    pub standardize: bool,
    /// Replace the features with this many principal components before training.
    pub pca_components: Option<usize>,
    pub model: ModelSpec,
    pub smoothing_grid: Vec<f64>,
    pub class_count: usize,
    pub density_grid: (usize, usize),
    pub seed: u64,
    /// Defaults to `$CRIMECAST_OUTPUT_DIR`, then `runs`.
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            columns: ColumnMapping::default(),
            bounds: BoundingBox::default(),
            split_ratio: 0.8,
            k_selection: KSelection::GapMax,
            fixed_k: None,
            kmax: 16,
            gap_references: 10,
            kmeans_n_init: 10,
            kmeans_max_iter: 300,
            kmeans_tol: 1e-6,
            short_years: ShortYearPolicy::default(),
            features: FeatureSchema::full().names().to_vec(),
            standardize: true,
            pca_components: None,
            model: ModelSpec::default(),
            smoothing_grid: default_smoothing_grid(),
            class_count: ClassLabel::COUNT,
            density_grid: (100, 100),
            seed: 0,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        // relative input paths are taken relative to the config file
        if config.input.is_relative() && !config.input.as_os_str().is_empty() {
            if let Some(dir) = path.parent() {
                config.input = dir.join(&config.input);
            }
        }
        Ok(config)
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        FeatureSchema::new(self.features.clone())
    }

    /// Checks ranges and cross-field consistency; runs before any work.
    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("no input file given".into()));
        }
        if !self.input.is_file() {
            return Err(Error::io(
                &self.input,
                std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
            ));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio must be in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if self.kmax < 3 {
            return Err(Error::Config(format!("kmax must be at least 3, got {}", self.kmax)));
        }
        if self.gap_references < 1 {
            return Err(Error::Config("gap_references must be at least 1".into()));
        }
        match (self.k_selection, self.fixed_k) {
            (KSelection::Fixed, None) | (KSelection::Fixed, Some(0)) => {
                return Err(Error::Config("k_selection \"fixed\" needs fixed_k >= 1".into()))
            }
            (KSelection::Fixed, Some(_)) | (_, None) => {}
            (method, Some(_)) => {
                return Err(Error::Config(format!(
                    "fixed_k is only used with k_selection \"fixed\", not {method:?}"
                )))
            }
        }
        if self.kmeans_n_init < 1 || self.kmeans_max_iter < 1 || !(self.kmeans_tol >= 0.0) {
            return Err(Error::Config("invalid K-Means settings".into()));
        }
        let schema = self.schema()?;
        if schema.is_empty() {
            return Err(Error::Config("feature list is empty".into()));
        }
        if let Some(n) = self.pca_components {
            if !self.standardize {
                return Err(Error::Config("pca_components needs standardize = true".into()));
            }
            if n < 1 || n > schema.len() {
                return Err(Error::Config(format!(
                    "pca_components must be in [1, {}], got {n}",
                    schema.len()
                )));
            }
        }
        if self.smoothing_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Config("smoothing grid values must be nonnegative".into()));
        }
        if self.class_count < ClassLabel::COUNT {
            return Err(Error::Config(format!(
                "class_count must be at least {}, got {}",
                ClassLabel::COUNT,
                self.class_count
            )));
        }
        if self.density_grid.0 < 1 || self.density_grid.1 < 1 {
            return Err(Error::Config("density_grid needs at least one cell per axis".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// First 12 hex digits of the SHA-256 of the config JSON, output dir excluded.
    pub fn hash12(&self) -> Result<String> {
        let mut keyed = self.clone();
        keyed.output_dir = None;
        let digest = Sha256::digest(serde_json::to_vec(&keyed)?);
        Ok(hex::encode(digest)[..12].to_string())
    }

    pub fn output_root(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }

    pub fn run_dir(&self) -> Result<PathBuf> {
        Ok(self.output_root().join(format!("run-{}", self.hash12()?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ForestParams, ModelKind};

    #[test]
    fn minimal_json_takes_defaults() {
        let c = PipelineConfig::from_json(r#"{"input": "data.csv", "B": 5}"#).unwrap();
        assert_eq!(c.gap_references, 5);
        assert_eq!(c.split_ratio, 0.8);
        assert_eq!(c.model, ModelSpec::RandomForest(ForestParams::default()));
        assert_eq!(c.features.len(), 27);
        assert_eq!(c.smoothing_grid.len(), 61);
        assert!(PipelineConfig::from_json(r#"{"inptu": "x"}"#).is_err());
    }

    #[test]
    fn validation() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let ok = PipelineConfig {
            input: file.path().to_path_buf(),
            ..Default::default()
        };
        ok.validate().unwrap();
        let bad = [
            PipelineConfig { split_ratio: 1.0, ..ok.clone() },
            PipelineConfig { k_selection: KSelection::Fixed, ..ok.clone() },
            PipelineConfig { fixed_k: Some(3), ..ok.clone() },
            PipelineConfig { kmax: 2, ..ok.clone() },
            PipelineConfig { pca_components: Some(99), ..ok.clone() },
            PipelineConfig { pca_components: Some(2), standardize: false, ..ok.clone() },
            PipelineConfig { class_count: 5, ..ok.clone() },
            PipelineConfig { input: "/definitely/not/here.csv".into(), ..ok.clone() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let fixed = PipelineConfig { k_selection: KSelection::Fixed, fixed_k: Some(4), ..ok };
        fixed.validate().unwrap();
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = PipelineConfig::default();
        let b = PipelineConfig { output_dir: Some("elsewhere".into()), ..a.clone() };
        assert_eq!(a.hash12().unwrap(), b.hash12().unwrap());
        let c = PipelineConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash12().unwrap(), c.hash12().unwrap());
        assert_eq!("gap-onesd".parse::<KSelection>().unwrap(), KSelection::GapOnesd);
        let spec = ModelSpec::default_for(ModelKind::Knn);
        let d = PipelineConfig { model: spec, ..a };
        let back = PipelineConfig::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
    }
}
