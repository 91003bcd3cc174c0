use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::matrix::FeatureMatrix;
use super::schema::{FeatureName, FeatureSchema};
use crate::error::{Error, Result};

/// Principal axes of the feature covariance, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub feature_names: Vec<FeatureName>,
    pub means: Vec<f64>,
    /// `components[i]` is the i-th unit eigenvector.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

pub fn pca_fit(matrix: &FeatureMatrix) -> Result<PcaModel> {
    let n = matrix.n_rows();
    let f = matrix.n_features();
    if n < 2 {
        return Err(Error::InsufficientData(format!("PCA needs at least 2 rows, got {n}")));
    }
    if f == 0 {
        return Err(Error::InsufficientData("PCA needs at least one feature".into()));
    }
    let values = matrix.values();
    let means: Vec<f64> = values.columns().into_iter().map(|c| c.sum() / n as f64).collect();
    let mut cov = DMatrix::<f64>::zeros(f, f);
    for row in values.rows() {
        for a in 0..f {
            let da = row[a] - means[a];
            for b in a..f {
                cov[(a, b)] += da * (row[b] - means[b]);
            }
        }
    }
    for a in 0..f {
        for b in a..f {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..f).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(Error::InsufficientData("features have zero total variance".into()));
    }
    let components = order
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eigen.eigenvectors.column(i).iter().copied().collect();
            // sign convention: largest-magnitude entry positive
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(PcaModel {
        feature_names: matrix.schema().names().to_vec(),
        means,
        components,
        explained_variance_ratio: eigenvalues.iter().map(|e| e / total).collect(),
        eigenvalues,
    })
}

impl PcaModel {
    /// Projects onto the first `n_components` axes; columns are named `PC0, PC1, ...`.
    pub fn transform(&self, matrix: &FeatureMatrix, n_components: usize) -> Result<FeatureMatrix> {
        let f = self.means.len();
        if n_components > f {
            return Err(Error::Parameter(format!(
                "requested {n_components} components from {f} features"
            )));
        }
        if matrix.schema().names() != self.feature_names.as_slice() {
            return Err(Error::Schema("PCA fitted on a different schema".into()));
        }
        let values = matrix.values();
        let mut out = Array2::<f64>::zeros((matrix.n_rows(), n_components));
        for (i, row) in values.rows().into_iter().enumerate() {
            for (c, comp) in self.components.iter().take(n_components).enumerate() {
                out[[i, c]] = row
                    .iter()
                    .zip(&self.means)
                    .zip(comp)
                    .map(|((v, m), w)| (v - m) * w)
                    .sum();
            }
        }
        let schema = FeatureSchema::new((0..n_components as u16).map(FeatureName::Component).collect())?;
        FeatureMatrix::new(schema, out, matrix.labels().to_vec(), matrix.class_count())
    }

    /// Maps component scores back to feature space.
    pub fn inverse_transform(&self, scores: &Array2<f64>) -> Array2<f64> {
        let f = self.means.len();
        let mut out = Array2::<f64>::zeros((scores.nrows(), f));
        for (i, row) in scores.rows().into_iter().enumerate() {
            for j in 0..f {
                out[[i, j]] = self.means[j]
                    + row
                        .iter()
                        .zip(&self.components)
                        .map(|(s, comp)| s * comp[j])
                        .sum::<f64>();
            }
        }
        out
    }
}

pub fn pca_transform(model: &PcaModel, matrix: &FeatureMatrix, n_components: usize) -> Result<FeatureMatrix> {
    model.transform(matrix, n_components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::standardize;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> FeatureMatrix {
        let names = [FeatureName::X, FeatureName::Y, FeatureName::Hour, FeatureName::Minute];
        let schema = FeatureSchema::new(names[..cols].to_vec()).unwrap();
        FeatureMatrix::new(schema, Array2::from_shape_vec((rows, cols), data).unwrap(), vec![0; rows], 1)
            .unwrap()
    }

    #[test]
    fn rank_one_line() {
        let data: Vec<f64> = (0..20).flat_map(|i| [i as f64, i as f64]).collect();
        let (m, _) = standardize(&matrix(20, 2, data)).unwrap();
        let pca = pca_fit(&m).unwrap();
        assert!((pca.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(pca.explained_variance_ratio[1].abs() < 1e-12);
        assert!(pca.components[0].iter().all(|v| *v > 0.0));
    }

    #[test]
    fn isotropic_gaussian_splits_variance_evenly() {
        let mut rng = crate::seed::rng_for(2024, "pca-test", 0);
        let data: Vec<f64> = (0..20_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (m, _) = standardize(&matrix(10_000, 2, data)).unwrap();
        let pca = pca_fit(&m).unwrap();
        for r in &pca.explained_variance_ratio {
            assert!((r - 0.5).abs() < 0.02, "{r}");
        }
    }

    #[test]
    fn full_reconstruction_and_orthonormality() {
        let mut rng = crate::seed::rng_for(7, "pca-test", 1);
        let data: Vec<f64> = (0..400)
            .map(|i| rng.random::<f64>() * (1 + i % 4) as f64)
            .collect();
        let (m, _) = standardize(&matrix(100, 4, data)).unwrap();
        let pca = pca_fit(&m).unwrap();
        let ratios = &pca.explained_variance_ratio;
        assert!((ratios.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(ratios.windows(2).all(|w| w[0] >= w[1]));
        for (a, ca) in pca.components.iter().enumerate() {
            for (b, cb) in pca.components.iter().enumerate() {
                let dot: f64 = ca.iter().zip(cb).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
        let scores = pca_transform(&pca, &m, 4).unwrap();
        let back = pca.inverse_transform(scores.values());
        for (x, y) in back.iter().zip(m.values()) {
            assert!((x - y).abs() < 1e-6);
        }
        assert_eq!(pca_transform(&pca, &m, 2).unwrap().schema().names()[1], FeatureName::Component(1));
        assert!(matches!(pca_transform(&pca, &m, 5), Err(Error::Parameter(_))));
    }
}
