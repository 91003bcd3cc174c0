//! Multiclass classifiers sharing one train / predict-probability contract.

mod forest;
mod importance;
mod knn;
mod logistic;
mod naive_bayes;
mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use forest::{ForestParams, RandomForest};
pub use importance::{ImportanceEntry, ImportanceRanking};
pub use knn::{Knn, KnnParams};
pub use logistic::{logistic_loss_and_gradient, LogisticParams, LogisticRegression};
pub use naive_bayes::{GaussianNb, NaiveBayesParams};
pub use tree::{best_split, pessimistic_error_rate, DecisionTree, SplitChoice, TreeNode, TreeParams};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureSchema};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    GaussianNb,
    DecisionTree,
    RandomForest,
    LogisticRegression,
    Svm,
    Mlp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::GaussianNb => "gaussian_nb",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn is_tree_based(self) -> bool {
        matches!(self, ModelKind::DecisionTree | ModelKind::RandomForest)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown model kind {s:?}")))
    }
}

/// A model kind with its hyperparameters. In JSON:
/// `{"kind": "random_forest", "hyperparameters": {"n_trees": 10}}`; omitted
/// hyperparameters take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum ModelSpec {
    Knn(KnnParams),
    GaussianNb(NaiveBayesParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    LogisticRegression(LogisticParams),
    Svm,
    Mlp,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hyperparameters: Option<serde_json::Value>,
}

impl TryFrom<RawSpec> for ModelSpec {
    type Error = serde_json::Error;

    fn try_from(raw: RawSpec) -> std::result::Result<Self, Self::Error> {
        let params = raw
            .hyperparameters
            .unwrap_or_else(|| serde_json::Value::Object(Default::default()));
        Ok(match raw.kind {
            ModelKind::Knn => ModelSpec::Knn(serde_json::from_value(params)?),
            ModelKind::GaussianNb => ModelSpec::GaussianNb(serde_json::from_value(params)?),
            ModelKind::DecisionTree => ModelSpec::DecisionTree(serde_json::from_value(params)?),
            ModelKind::RandomForest => ModelSpec::RandomForest(serde_json::from_value(params)?),
            ModelKind::LogisticRegression => {
                ModelSpec::LogisticRegression(serde_json::from_value(params)?)
            }
            ModelKind::Svm => ModelSpec::Svm,
            ModelKind::Mlp => ModelSpec::Mlp,
        })
    }
}

impl From<ModelSpec> for RawSpec {
    fn from(spec: ModelSpec) -> Self {
        let kind = spec.kind();
        let hyperparameters = match spec {
            ModelSpec::Knn(p) => serde_json::to_value(p),
            ModelSpec::GaussianNb(p) => serde_json::to_value(p),
            ModelSpec::DecisionTree(p) => serde_json::to_value(p),
            ModelSpec::RandomForest(p) => serde_json::to_value(p),
            ModelSpec::LogisticRegression(p) => serde_json::to_value(p),
            ModelSpec::Svm | ModelSpec::Mlp => Ok(serde_json::Value::Object(Default::default())),
        };
        RawSpec {
            kind,
            hyperparameters: Some(hyperparameters.expect("parameter structs serialize")),
        }
    }
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Knn => ModelSpec::Knn(Default::default()),
            ModelKind::GaussianNb => ModelSpec::GaussianNb(Default::default()),
            ModelKind::DecisionTree => ModelSpec::DecisionTree(Default::default()),
            ModelKind::RandomForest => ModelSpec::RandomForest(Default::default()),
            ModelKind::LogisticRegression => ModelSpec::LogisticRegression(Default::default()),
            ModelKind::Svm => ModelSpec::Svm,
            ModelKind::Mlp => ModelSpec::Mlp,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Knn(_) => ModelKind::Knn,
            ModelSpec::GaussianNb(_) => ModelKind::GaussianNb,
            ModelSpec::DecisionTree(_) => ModelKind::DecisionTree,
            ModelSpec::RandomForest(_) => ModelKind::RandomForest,
            ModelSpec::LogisticRegression(_) => ModelKind::LogisticRegression,
            ModelSpec::Svm => ModelKind::Svm,
            ModelSpec::Mlp => ModelKind::Mlp,
        }
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::RandomForest(ForestParams::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Fitted {
    Knn(Knn),
    GaussianNb(GaussianNb),
    Tree(DecisionTree),
    Forest(RandomForest),
    Logistic(LogisticRegression),
}

/// A fitted model. Probability columns follow class indices `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    spec: ModelSpec,
    class_count: usize,
    schema: FeatureSchema,
    schema_fingerprint: String,
    fitted: Fitted,
}

/// `seed` only matters for the forest.
pub fn train(spec: &ModelSpec, matrix: &FeatureMatrix, seed: u64) -> Result<Classifier> {
    let fitted = match spec {
        ModelSpec::Knn(p) => Fitted::Knn(Knn::fit(matrix, p)?),
        ModelSpec::GaussianNb(p) => Fitted::GaussianNb(GaussianNb::fit(matrix, p)?),
        ModelSpec::DecisionTree(p) => Fitted::Tree(DecisionTree::fit(matrix, p)?),
        ModelSpec::RandomForest(p) => Fitted::Forest(RandomForest::fit(matrix, p, seed)?),
        ModelSpec::LogisticRegression(p) => Fitted::Logistic(LogisticRegression::fit(matrix, p)?),
        ModelSpec::Svm | ModelSpec::Mlp => {
            return Err(Error::UnsupportedModel(format!(
                "{} training is not implemented; use knn, gaussian_nb, decision_tree, \
                 random_forest or logistic_regression",
                spec.kind()
            )))
        }
    };
    Ok(Classifier {
        spec: spec.clone(),
        class_count: matrix.class_count(),
        schema: matrix.schema().clone(),
        schema_fingerprint: matrix.schema().fingerprint(),
        fitted,
    })
}

pub fn train_knn(matrix: &FeatureMatrix, k_neighbors: usize) -> Result<Classifier> {
    train(&ModelSpec::Knn(KnnParams { k_neighbors }), matrix, 0)
}

pub fn train_gaussian_nb(matrix: &FeatureMatrix) -> Result<Classifier> {
    train(&ModelSpec::GaussianNb(Default::default()), matrix, 0)
}

pub fn train_decision_tree(matrix: &FeatureMatrix, params: TreeParams) -> Result<Classifier> {
    train(&ModelSpec::DecisionTree(params), matrix, 0)
}

pub fn train_random_forest(matrix: &FeatureMatrix, params: ForestParams, seed: u64) -> Result<Classifier> {
    train(&ModelSpec::RandomForest(params), matrix, seed)
}

pub fn train_logistic_regression(matrix: &FeatureMatrix, params: LogisticParams) -> Result<Classifier> {
    train(&ModelSpec::LogisticRegression(params), matrix, 0)
}

pub fn predict_proba(model: &Classifier, matrix: &FeatureMatrix) -> Result<Array2<f64>> {
    model.predict_proba(matrix)
}

pub fn feature_importance(model: &Classifier) -> Result<ImportanceRanking> {
    model.feature_importance()
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    #[serde(flatten)]
    spec: ModelSpec,
    schema_fingerprint: String,
    class_count: usize,
    features: FeatureSchema,
    state: serde_json::Value,
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn schema_fingerprint(&self) -> &str {
        &self.schema_fingerprint
    }

    pub fn trees(&self) -> Option<Vec<&DecisionTree>> {
        match &self.fitted {
            Fitted::Tree(t) => Some(vec![t]),
            Fitted::Forest(f) => Some(f.trees.iter().collect()),
            _ => None,
        }
    }

    pub fn loss_history(&self) -> Option<&[f64]> {
        match &self.fitted {
            Fitted::Logistic(l) => Some(&l.loss_history),
            _ => None,
        }
    }

    fn predict_row(&self, row: &[f64], out: &mut [f64]) {
        match &self.fitted {
            Fitted::Knn(m) => m.predict_row(row, out),
            Fitted::GaussianNb(m) => m.predict_row(row, out),
            Fitted::Tree(m) => m.predict_row(row, out),
            Fitted::Forest(m) => m.predict_row(row, out),
            Fitted::Logistic(m) => m.predict_row(row, out),
        }
    }

    /// N×C row-stochastic matrix. Rejects matrices built with a different schema.
    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Array2<f64>> {
        let fingerprint = matrix.schema().fingerprint();
        if fingerprint != self.schema_fingerprint {
            return Err(Error::Schema(format!(
                "feature schema fingerprint {} does not match the trained model's {}",
                &fingerprint[..12],
                &self.schema_fingerprint[..12.min(self.schema_fingerprint.len())]
            )));
        }
        let c = self.class_count;
        let rows: Vec<Vec<f64>> = (0..matrix.n_rows())
            .into_par_iter()
            .map(|i| {
                let row = matrix.row(i).to_vec();
                let mut out = vec![0.0; c];
                self.predict_row(&row, &mut out);
                out
            })
            .collect();
        let flat = rows.into_iter().flatten().collect();
        Ok(Array2::from_shape_vec((matrix.n_rows(), c), flat).expect("rows have C columns"))
    }

    /// Argmax class per row, ties to the lower index.
    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
        let p = self.predict_proba(matrix)?;
        Ok(p.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
    }

    pub fn feature_importance(&self) -> Result<ImportanceRanking> {
        let trees = self.trees().ok_or_else(|| {
            Error::UnsupportedModel(format!(
                "feature importance needs a tree-based model, not {}",
                self.kind()
            ))
        })?;
        Ok(ImportanceRanking::from_trees(trees, self.schema.names()))
    }

    pub fn to_json(&self) -> Result<String> {
        let state = match &self.fitted {
            Fitted::Knn(m) => serde_json::to_value(m),
            Fitted::GaussianNb(m) => serde_json::to_value(m),
            Fitted::Tree(m) => serde_json::to_value(m),
            Fitted::Forest(m) => serde_json::to_value(m),
            Fitted::Logistic(m) => serde_json::to_value(m),
        }?;
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            spec: self.spec.clone(),
            schema_fingerprint: self.schema_fingerprint.clone(),
            class_count: self.class_count,
            features: self.schema.clone(),
            state,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let value = serde_json::Value::deserialize(&mut de)?;
        if let Some(found) = value.get("format_version").and_then(|v| v.as_u64()) {
            if found != MODEL_FORMAT_VERSION as u64 {
                return Err(Error::FormatVersion {
                    found: found as u32,
                    expected: MODEL_FORMAT_VERSION,
                });
            }
        }
        let doc: ModelDocument = serde_json::from_value(value)?;
        let state = doc.state;
        let fitted = match doc.spec.kind() {
            ModelKind::Knn => Fitted::Knn(serde_json::from_value(state)?),
            ModelKind::GaussianNb => Fitted::GaussianNb(serde_json::from_value(state)?),
            ModelKind::DecisionTree => Fitted::Tree(serde_json::from_value(state)?),
            ModelKind::RandomForest => Fitted::Forest(serde_json::from_value(state)?),
            ModelKind::LogisticRegression => Fitted::Logistic(serde_json::from_value(state)?),
            kind => return Err(Error::UnsupportedModel(format!("{kind} has no fitted state"))),
        };
        if doc.features.fingerprint() != doc.schema_fingerprint {
            return Err(Error::Schema("model features do not match its fingerprint".into()));
        }
        Ok(Self {
            spec: doc.spec,
            class_count: doc.class_count,
            schema: doc.features,
            schema_fingerprint: doc.schema_fingerprint,
            fitted,
        })
    }
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
