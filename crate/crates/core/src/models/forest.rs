use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{columns_of, DecisionTree, Grower, TreeParams};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features drawn per split; `None` means ⌈√F⌉.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 10,
            features_per_split: None,
            bootstrap: true,
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

impl ForestParams {
    pub fn features_per_split_for(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub seed: u64,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Tree `t` draws its bootstrap rows and split subsets from the sub-seed `(seed, "forest-tree", t)`.
    pub fn fit(matrix: &FeatureMatrix, params: &ForestParams, seed: u64) -> Result<Self> {
        let n = matrix.n_rows();
        let f = matrix.n_features();
        if params.n_trees < 1 {
            return Err(Error::Parameter("n_trees must be at least 1".into()));
        }
        let m = params.features_per_split_for(f);
        if m < 1 || m > f {
            return Err(Error::Parameter(format!(
                "features_per_split must be in [1, {f}], got {m}"
            )));
        }
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            confidence_factor: None,
        };
        tree_params.validate()?;
        if n == 0 {
            return Err(Error::InsufficientData("cannot grow a forest on zero rows".into()));
        }
        let columns = columns_of(matrix);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_for(seed, "forest-tree", t as u64);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut grower = Grower {
                    columns: &columns,
                    labels: matrix.labels(),
                    class_count: matrix.class_count(),
                    params: tree_params,
                    subsample: Some((m, rng)),
                };
                DecisionTree {
                    root: grower.grow(rows, 0),
                    n_features: f,
                    class_count: matrix.class_count(),
                    n_train: n,
                }
            })
            .collect();
        Ok(Self { seed, trees })
    }

    pub(crate) fn predict_row(&self, row: &[f64], out: &mut [f64]) {
        let mut buf = vec![0.0; out.len()];
        for tree in &self.trees {
            tree.predict_row(row, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }
}
