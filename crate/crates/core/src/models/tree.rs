use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Pessimistic-pruning confidence; `None` keeps the fully grown tree.
    pub confidence_factor: Option<f64>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            confidence_factor: Some(0.3),
        }
    }
}

impl TreeParams {
    pub fn unpruned() -> Self {
        Self {
            confidence_factor: None,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.min_samples_leaf < 1 {
            return Err(Error::Parameter("min_samples_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Parameter("max_depth must be at least 1".into()));
        }
        if let Some(cf) = self.confidence_factor {
            if !(cf > 0.0 && cf <= 0.5) {
                return Err(Error::Parameter(format!(
                    "confidence_factor must be in (0, 0.5], got {cf}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        n_samples: usize,
        /// Gini decrease in row units: n·G(node) − n_l·G(left) − n_r·G(right).
        weighted_decrease: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        counts: Vec<usize>,
    },
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn leaf<'a>(&'a self, row: &[f64]) -> &'a [usize] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    fn counts(&self) -> Vec<usize> {
        match self {
            TreeNode::Leaf { counts } => counts.clone(),
            TreeNode::Split { left, right, .. } => {
                let mut c = left.counts();
                for (a, b) in c.iter_mut().zip(right.counts()) {
                    *a += b;
                }
                c
            }
        }
    }

    pub(crate) fn visit_splits(&self, f: &mut impl FnMut(usize, f64)) {
        if let TreeNode::Split {
            feature,
            weighted_decrease,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *weighted_decrease);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }
}

/// A fitted CART tree; `n_train` is the number of rows it was grown on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub n_features: usize,
    pub class_count: usize,
    pub n_train: usize,
}

/// The best axis split found at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Σ(left counts²)/n_l + Σ(right counts²)/n_r; larger means lower weighted Gini.
    pub score: f64,
}

/// Scans the given features in order and their thresholds ascending; strict improvement
/// is required to replace the incumbent, so ties keep the earlier feature and threshold.
pub fn best_split(
    columns: &[Vec<f64>],
    labels: &[usize],
    rows: &[usize],
    features: impl IntoIterator<Item = usize>,
    class_count: usize,
    min_samples_leaf: usize,
) -> Option<SplitChoice> {
    let n = rows.len();
    if n < 2 * min_samples_leaf {
        return None;
    }
    let mut total = vec![0u64; class_count];
    for &r in rows {
        total[labels[r]] += 1;
    }
    let total_sq: u64 = total.iter().map(|c| c * c).sum();
    let mut order = rows.to_vec();
    let mut best: Option<SplitChoice> = None;
    let mut left = vec![0u64; class_count];
    for feature in features {
        let col = &columns[feature];
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        left.iter_mut().for_each(|c| *c = 0);
        let (mut left_sq, mut right_sq) = (0u64, total_sq);
        for i in 1..n {
            let y = labels[order[i - 1]];
            let right_count = total[y] - left[y];
            left_sq += 2 * left[y] + 1;
            right_sq -= 2 * right_count - 1;
            left[y] += 1;
            let (a, b) = (col[order[i - 1]], col[order[i]]);
            if a == b || i < min_samples_leaf || n - i < min_samples_leaf {
                continue;
            }
            let score = left_sq as f64 / i as f64 + right_sq as f64 / (n - i) as f64;
            if best.is_none_or(|s| score > s.score) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}

pub(crate) struct Grower<'a, R> {
    pub columns: &'a [Vec<f64>],
    pub labels: &'a [usize],
    pub class_count: usize,
    pub params: TreeParams,
    /// Random feature subsets per split, for forests.
    pub subsample: Option<(usize, R)>,
}

impl<R: Rng> Grower<'_, R> {
    pub fn grow(&mut self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let mut counts = vec![0usize; self.class_count];
        for &r in &rows {
            counts[self.labels[r]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached {
            return TreeNode::Leaf { counts };
        }
        let Some(choice) = self.choose(&rows) else {
            return TreeNode::Leaf { counts };
        };
        let col = &self.columns[choice.feature];
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| col[i] <= choice.threshold);
        let n = rows.len() as f64;
        let node_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
        let weighted_decrease = (choice.score - node_sq / n).max(0.0);
        TreeNode::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            n_samples: rows.len(),
            weighted_decrease,
            left: Box::new(self.grow(l, depth + 1)),
            right: Box::new(self.grow(r, depth + 1)),
        }
    }

    fn choose(&mut self, rows: &[usize]) -> Option<SplitChoice> {
        let f = self.columns.len();
        let (c, leaf) = (self.class_count, self.params.min_samples_leaf);
        match &mut self.subsample {
            Some((m, rng)) if *m < f => {
                let mut picked = sample(rng, f, *m).into_vec();
                picked.sort_unstable();
                best_split(self.columns, self.labels, rows, picked.iter().copied(), c, leaf).or_else(
                    || {
                        let rest = (0..f).filter(|j| picked.binary_search(j).is_err());
                        best_split(self.columns, self.labels, rows, rest, c, leaf)
                    },
                )
            }
            _ => best_split(self.columns, self.labels, rows, 0..f, c, leaf),
        }
    }
}

pub(crate) fn columns_of(matrix: &FeatureMatrix) -> Vec<Vec<f64>> {
    matrix.values().columns().into_iter().map(|c| c.to_vec()).collect()
}

impl DecisionTree {
    pub fn fit(matrix: &FeatureMatrix, params: &TreeParams) -> Result<Self> {
        params.validate()?;
        if matrix.n_rows() == 0 {
            return Err(Error::InsufficientData("cannot grow a tree on zero rows".into()));
        }
        let columns = columns_of(matrix);
        let mut grower: Grower<'_, rand_chacha::ChaCha8Rng> = Grower {
            columns: &columns,
            labels: matrix.labels(),
            class_count: matrix.class_count(),
            params: *params,
            subsample: None,
        };
        let root = grower.grow((0..matrix.n_rows()).collect(), 0);
        let mut tree = Self {
            root,
            n_features: matrix.n_features(),
            class_count: matrix.class_count(),
            n_train: matrix.n_rows(),
        };
        if let Some(cf) = params.confidence_factor {
            tree.prune(cf);
        }
        Ok(tree)
    }

    /// Collapses subtrees whose summed pessimistic error is no better than a single leaf.
    pub fn prune(&mut self, confidence_factor: f64) {
        let z = Normal::standard().inverse_cdf(1.0 - confidence_factor);
        let root = std::mem::replace(&mut self.root, TreeNode::Leaf { counts: vec![] });
        self.root = prune_node(root, z).0;
    }

    pub(crate) fn predict_row(&self, row: &[f64], out: &mut [f64]) {
        let counts = self.root.leaf(row);
        let total: usize = counts.iter().sum();
        for (o, &c) in out.iter_mut().zip(counts) {
            *o = c as f64 / total as f64;
        }
    }
}

/// Upper confidence bound on a leaf's error rate (Wilson score interval).
pub fn pessimistic_error_rate(errors: usize, n: usize, z: f64) -> f64 {
    let n = n as f64;
    let f = errors as f64 / n;
    let z2 = z * z;
    let spread = (f / n - f * f / n + z2 / (4.0 * n * n)).max(0.0).sqrt();
    (f + z2 / (2.0 * n) + z * spread) / (1.0 + z2 / n)
}

fn leaf_bound(counts: &[usize], z: f64) -> f64 {
    let n: usize = counts.iter().sum();
    let errors = n - counts.iter().max().copied().unwrap_or(0);
    n as f64 * pessimistic_error_rate(errors, n, z)
}

fn prune_node(node: TreeNode, z: f64) -> (TreeNode, f64) {
    match node {
        TreeNode::Leaf { counts } => {
            let bound = leaf_bound(&counts, z);
            (TreeNode::Leaf { counts }, bound)
        }
        TreeNode::Split {
            feature,
            threshold,
            n_samples,
            weighted_decrease,
            left,
            right,
        } => {
            let (left, lb) = prune_node(*left, z);
            let (right, rb) = prune_node(*right, z);
            let node = TreeNode::Split {
                feature,
                threshold,
                n_samples,
                weighted_decrease,
                left: Box::new(left),
                right: Box::new(right),
            };
            let counts = node.counts();
            let collapsed = leaf_bound(&counts, z);
            if lb + rb >= collapsed {
                (TreeNode::Leaf { counts }, collapsed)
            } else {
                (node, lb + rb)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureName, FeatureSchema};
    use crate::seed::rng_for;
    use ndarray::Array2;

    fn matrix(rows: &[Vec<f64>], labels: &[usize], classes: usize) -> FeatureMatrix {
        let names = [FeatureName::X, FeatureName::Y, FeatureName::Hour, FeatureName::Month];
        let f = rows[0].len();
        let schema = FeatureSchema::new(names[..f].to_vec()).unwrap();
        let flat = rows.iter().flatten().copied().collect();
        FeatureMatrix::new(schema, Array2::from_shape_vec((rows.len(), f), flat).unwrap(), labels.to_vec(), classes)
            .unwrap()
    }

    fn predict(tree: &DecisionTree, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; tree.class_count];
        tree.predict_row(row, &mut out);
        out
    }

    fn leaf_totals(node: &TreeNode) -> usize {
        match node {
            TreeNode::Leaf { counts } => counts.iter().sum(),
            TreeNode::Split { left, right, n_samples, .. } => {
                let total = leaf_totals(left) + leaf_totals(right);
                assert_eq!(total, *n_samples);
                total
            }
        }
    }

    #[test]
    fn pure_set_is_one_leaf() {
        let m = matrix(&[vec![0.0], vec![1.0], vec![2.0]], &[1, 1, 1], 3);
        let t = DecisionTree::fit(&m, &TreeParams::default()).unwrap();
        assert!(t.root.is_leaf());
        assert_eq!(predict(&t, &[-9.0]), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn xor_is_learned_at_depth_two() {
        let rows = [vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let labels = [0, 0, 1, 1];
        for params in [
            TreeParams { max_depth: Some(2), ..TreeParams::default() },
            TreeParams::unpruned(),
        ] {
            let t = DecisionTree::fit(&matrix(&rows, &labels, 2), &params).unwrap();
            for (r, &y) in rows.iter().zip(&labels) {
                assert_eq!(predict(&t, r)[y], 1.0);
            }
        }
    }

    #[test]
    fn midpoint_thresholds_and_leaf_totals() {
        let m = matrix(&[vec![1.0], vec![2.0], vec![4.0], vec![8.0]], &[0, 0, 1, 1], 2);
        let t = DecisionTree::fit(&m, &TreeParams::unpruned()).unwrap();
        match &t.root {
            TreeNode::Split { threshold, feature, .. } => assert_eq!((*feature, *threshold), (0, 3.0)),
            leaf => panic!("expected a split, got {leaf:?}"),
        }
        assert_eq!(leaf_totals(&t.root), 4);
    }

    #[test]
    fn adjacent_floats_use_lower_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = matrix(&[vec![a], vec![b]], &[0, 1], 2);
        let t = DecisionTree::fit(&m, &TreeParams::unpruned()).unwrap();
        assert_eq!(predict(&t, &[a]), vec![1.0, 0.0]);
        assert_eq!(predict(&t, &[b]), vec![0.0, 1.0]);
    }

    /// Gini of a count vector.
    fn gini(counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
    }

    /// Every feature and every midpoint, scored by weighted child Gini.
    fn exhaustive_root(rows: &[Vec<f64>], labels: &[usize], classes: usize) -> (usize, f64) {
        let n = rows.len();
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..rows[0].len() {
            let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for w in values.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let mut l = vec![0; classes];
                let mut r = vec![0; classes];
                for (row, &y) in rows.iter().zip(labels) {
                    if row[f] <= t { l[y] += 1 } else { r[y] += 1 }
                }
                let (nl, nr) = (l.iter().sum::<usize>() as f64, r.iter().sum::<usize>() as f64);
                let impurity = (nl * gini(&l) + nr * gini(&r)) / n as f64;
                if best.is_none_or(|b| impurity < b.0 - 1e-12) {
                    best = Some((impurity, f, t));
                }
            }
        }
        let (_, f, t) = best.unwrap();
        (f, t)
    }

    #[test]
    fn root_split_matches_exhaustive_search() {
        for trial in 0..20 {
            let mut rng = rng_for(11, "tree-oracle", trial);
            let rows: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..3).map(|_| rng.random_range(0.0..10.0f64)).collect())
                .collect();
            let labels: Vec<usize> = rows
                .iter()
                .map(|r| if r[1] + rng.random_range(-2.0..2.0) > 6.0 { 2 } else if r[0] > 4.0 { 1 } else { 0 })
                .collect();
            let params = TreeParams { max_depth: Some(3), ..TreeParams::unpruned() };
            let t = DecisionTree::fit(&matrix(&rows, &labels, 3), &params).unwrap();
            let TreeNode::Split { feature, threshold, .. } = t.root else { panic!("leaf root") };
            let (f, th) = exhaustive_root(&rows, &labels, 3);
            assert_eq!(feature, f, "trial {trial}");
            assert!((threshold - th).abs() < 1e-12, "trial {trial}");
            assert!(t.root.depth() <= 3);
        }
    }

    #[test]
    fn unbounded_tree_fits_consistent_data() {
        let mut rng = rng_for(5, "tree-fit", 0);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random(), rng.random()]).collect();
        let labels: Vec<usize> = (0..200).map(|_| rng.random_range(0..4)).collect();
        let t = DecisionTree::fit(&matrix(&rows, &labels, 4), &TreeParams::unpruned()).unwrap();
        for (r, &y) in rows.iter().zip(&labels) {
            assert_eq!(predict(&t, r)[y], 1.0);
        }
        assert_eq!(leaf_totals(&t.root), 200);
    }

    #[test]
    fn pruning_collapses_noise() {
        let mut rng = rng_for(6, "tree-prune", 0);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random()]).collect();
        let labels: Vec<usize> = (0..300).map(|i| usize::from(i % 10 == 0)).collect();
        // Pure leaves always carry a smaller bound than their parent, so pruning only has
        // something to collapse once leaves are forced to be impure.
        let grown = TreeParams { min_samples_leaf: 5, ..TreeParams::unpruned() };
        let full = DecisionTree::fit(&matrix(&rows, &labels, 2), &grown).unwrap();
        let pruned_params = TreeParams { confidence_factor: Some(0.3), ..grown };
        let pruned = DecisionTree::fit(&matrix(&rows, &labels, 2), &pruned_params).unwrap();
        assert!(pruned.root.leaf_count() < full.root.leaf_count());
        assert_eq!(leaf_totals(&pruned.root), 300);
    }

    #[test]
    fn row_order_does_not_matter() {
        let mut rng = rng_for(8, "tree-perm", 0);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random_range(0..5) as f64, rng.random()]).collect();
        let labels: Vec<usize> = (0..60).map(|_| rng.random_range(0..3)).collect();
        let a = DecisionTree::fit(&matrix(&rows, &labels, 3), &TreeParams::default()).unwrap();
        let rev_rows: Vec<_> = rows.iter().rev().cloned().collect();
        let rev_labels: Vec<_> = labels.iter().rev().copied().collect();
        let b = DecisionTree::fit(&matrix(&rev_rows, &rev_labels, 3), &TreeParams::default()).unwrap();
        assert_eq!(a.root, b.root);
    }

    #[test]
    fn wilson_bound_values() {
        // zero errors on one row: z²/(1+z²)
        let z = 0.5244005127080407;
        assert!((pessimistic_error_rate(0, 1, z) - z * z / (1.0 + z * z)).abs() < 1e-12);
        assert!(pessimistic_error_rate(5, 10, z) > 0.5);
    }

    #[test]
    fn invalid_parameters() {
        let m = matrix(&[vec![0.0]], &[0], 1);
        for p in [
            TreeParams { min_samples_leaf: 0, ..TreeParams::default() },
            TreeParams { max_depth: Some(0), ..TreeParams::default() },
            TreeParams { confidence_factor: Some(0.0), ..TreeParams::default() },
            TreeParams { confidence_factor: Some(0.9), ..TreeParams::default() },
        ] {
            assert!(matches!(DecisionTree::fit(&m, &p), Err(Error::Parameter(_))));
        }
    }
}
