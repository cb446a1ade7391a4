//! The five classifiers and a common dispatch wrapper.

pub mod adaboost;
pub mod forest;
pub mod gbm;
pub mod voting;

pub use adaboost::{
    fit_adaboost, predict_adaboost, stage_weight, AdaBoostConfig, AdaBoostModel, BoostStage,
};
pub use forest::{
    fit_extra_trees, fit_random_forest, mode_lowest, predict_majority, predict_majority_rows,
    Forest, ForestConfig, ForestVariant,
};
pub use gbm::{fit_gbm, predict_gbm, GbmConfig, GbmModel, RegNode, RegressionTree};
pub use voting::{fit_voting, predict_voting, FeatureScaler, VotingPair};

use crate::error::{CoreError, Result};

/// Model family identifier, in the fixed order used by report tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    Voting,
    RandomForest,
    AdaBoost,
    ExtraTrees,
    Gbm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Voting,
        ModelKind::RandomForest,
        ModelKind::AdaBoost,
        ModelKind::ExtraTrees,
        ModelKind::Gbm,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            ModelKind::Voting => "voting",
            ModelKind::RandomForest => "rf",
            ModelKind::AdaBoost => "adaboost",
            ModelKind::ExtraTrees => "extratrees",
            ModelKind::Gbm => "gbm",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            ModelKind::Voting => "Voting",
            ModelKind::RandomForest => "RandomForest",
            ModelKind::AdaBoost => "AdaBoost",
            ModelKind::ExtraTrees => "ExtraTrees",
            ModelKind::Gbm => "GBM",
        }
    }

    pub fn from_key(key: &str) -> Option<ModelKind> {
        ModelKind::ALL.iter().copied().find(|k| k.key() == key)
    }
}

/// Any fitted classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleModel {
    Forest(Forest),
    AdaBoost(AdaBoostModel),
    Gbm(GbmModel),
    Voting(VotingPair),
}

impl EnsembleModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            EnsembleModel::Forest(f) => match f.variant {
                ForestVariant::RandomForest => ModelKind::RandomForest,
                ForestVariant::ExtraTrees => ModelKind::ExtraTrees,
            },
            EnsembleModel::AdaBoost(_) => ModelKind::AdaBoost,
            EnsembleModel::Gbm(_) => ModelKind::Gbm,
            EnsembleModel::Voting(_) => ModelKind::Voting,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            EnsembleModel::Forest(m) => m.n_features,
            EnsembleModel::AdaBoost(m) => m.n_features,
            EnsembleModel::Gbm(m) => m.n_features,
            EnsembleModel::Voting(m) => m.log_member.n_features(),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            EnsembleModel::Forest(m) => m.n_classes,
            EnsembleModel::AdaBoost(m) => m.n_classes,
            EnsembleModel::Gbm(m) => m.n_classes,
            EnsembleModel::Voting(m) => m.log_member.n_classes(),
        }
    }

    /// Predicted class index for one input row.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        match self {
            EnsembleModel::Forest(m) => predict_majority(m, x),
            EnsembleModel::AdaBoost(m) => predict_adaboost(m, x),
            EnsembleModel::Gbm(m) => predict_gbm(m, x),
            EnsembleModel::Voting(m) => crate::ensemble::voting::predict_voting(m, x),
        }
    }

    /// Batch prediction. Forests take a vectorized tree-major path; the
    /// other models predict row by row.
    pub fn predict_rows(&self, rows: &[&[f64]]) -> Result<Vec<usize>> {
        match self {
            EnsembleModel::Forest(m) => predict_majority_rows(m, rows),
            _ => rows.iter().map(|x| self.predict(x)).collect(),
        }
    }

    /// Borrows the inner [`Forest`], erroring for non-forest models. Useful
    /// where only bagged ensembles make sense (permutation importance needs
    /// out-of-bag masks).
    pub fn expect_forest(&self) -> Result<&Forest> {
        match self {
            EnsembleModel::Forest(f) => Ok(f),
            other => Err(CoreError::InvalidParameter(format!(
                "expected a bagged forest, got {}",
                other.kind().display_name()
            ))),
        }
    }
}
