use serde::{Deserialize, Serialize};

use super::tree::DecisionTree;
use crate::features::FeatureName;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: FeatureName,
    pub weight: f64,
}

/// Features by mean decrease in impurity, heaviest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceRanking {
    /// Sums each tree's split decreases (scaled by that tree's training size), then
    /// normalizes. Without any split the weights are uniform.
    pub(crate) fn from_trees<'a>(
        trees: impl IntoIterator<Item = &'a DecisionTree>,
        names: &[FeatureName],
    ) -> Self {
        let mut totals = vec![0.0; names.len()];
        for tree in trees {
            let n = tree.n_train as f64;
            tree.root.visit_splits(&mut |feature, decrease| totals[feature] += decrease / n);
        }
        let sum: f64 = totals.iter().sum();
        let weights: Vec<f64> = if sum > 0.0 {
            totals.iter().map(|t| t / sum).collect()
        } else {
            vec![1.0 / names.len() as f64; names.len()]
        };
        let mut entries: Vec<ImportanceEntry> = names
            .iter()
            .zip(weights)
            .map(|(&feature, weight)| ImportanceEntry { feature, weight })
            .collect();
        entries.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        Self { entries }
    }

    pub fn weight(&self, feature: FeatureName) -> Option<f64> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.weight)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,weight\n");
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, e.feature, e.weight));
        }
        out
    }
}
