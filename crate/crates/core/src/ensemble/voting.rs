//! Hard-voting pair of linear classifiers: one log-loss, one hinge.

use crate::data::FeatureMatrix;
use crate::error::{CoreError, Result};
use crate::linear::{predict_linear, sgd_fit, LinearModel, LossKind, SgdConfig};
use crate::seeding::derive_seed;

/// Per-feature standardization fitted on the training matrix. SGD with a
/// fixed step size is hypersensitive to raw tabular scales, so both members
/// train and predict on z-scored inputs; the scaler travels with the model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl FeatureScaler {
    /// Population mean and standard deviation per feature. Constant columns
    /// get a standard deviation of 1 so they scale to exactly zero.
    pub fn fit(m: &FeatureMatrix) -> FeatureScaler {
        let n = m.n_rows() as f64;
        let p = m.n_features();
        let mut means = vec![0.0; p];
        for i in 0..m.n_rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                means[j] += v;
            }
        }
        for mean in &mut means {
            *mean /= n;
        }
        let mut variances = vec![0.0; p];
        for i in 0..m.n_rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                let d = v - means[j];
                variances[j] += d * d;
            }
        }
        let stds = variances
            .iter()
            .map(|&v| {
                let s = (v / n).sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        FeatureScaler { means, stds }
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.means.len() {
            return Err(CoreError::DimensionMismatch {
                expected: self.means.len(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&mean, &std))| (v - mean) / std)
            .collect())
    }

    fn transform_matrix(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut values = Vec::with_capacity(m.n_rows() * m.n_features());
        for i in 0..m.n_rows() {
            values.extend(self.transform(m.row(i))?);
        }
        FeatureMatrix::from_dense(
            values,
            m.n_rows(),
            m.n_features(),
            m.labels().to_vec(),
            m.n_classes(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VotingPair {
    pub scaler: FeatureScaler,
    pub log_member: LinearModel,
    pub hinge_member: LinearModel,
}

/// Standardizes the features, then trains both members on the same scaled
/// data with per-member derived seeds.
pub fn fit_voting(m: &FeatureMatrix, config: &SgdConfig) -> Result<VotingPair> {
    let scaler = FeatureScaler::fit(m);
    let scaled = scaler.transform_matrix(m)?;
    let log_config = SgdConfig {
        seed: derive_seed(config.seed, 0),
        ..*config
    };
    let hinge_config = SgdConfig {
        seed: derive_seed(config.seed, 1),
        ..*config
    };
    let log_member = sgd_fit(&scaled, LossKind::Log, &log_config)?;
    let hinge_member = sgd_fit(&scaled, LossKind::Hinge, &hinge_config)?;
    Ok(VotingPair {
        scaler,
        log_member,
        hinge_member,
    })
}

/// Hard vote: when the two members agree, that class; otherwise the
/// log-loss member's prediction breaks the tie.
pub fn predict_voting(pair: &VotingPair, x: &[f64]) -> Result<usize> {
    let scaled = pair.scaler.transform(x)?;
    let log_vote = predict_linear(&pair.log_member, &scaled)?;
    // A two-member hard vote either agrees or splits 1-1, and the tie rule
    // awards splits to the log-loss member, so its vote always decides. The
    // hinge member is still consulted so its errors surface.
    let _hinge_vote = predict_linear(&pair.hinge_member, &scaled)?;
    Ok(log_vote)
}
