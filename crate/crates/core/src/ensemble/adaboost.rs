//! Multiclass AdaBoost (SAMME) over depth-1 decision stumps.

use crate::data::FeatureMatrix;
use crate::error::{CoreError, Result};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::tree::{
    argmax, fit_tree_on_rows, predict_tree, CutRule, DecisionTree, FeatureSampling, SplitCriterion,
    TreeConfig, TreeParams,
};

/// Weighted error floor: a perfect stump still needs a finite stage weight.
const EPSILON_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaBoostConfig {
    pub rounds: usize,
    pub seed: u64,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        AdaBoostConfig { rounds: 50, seed: 0 }
    }
}

/// A fitted boosting stage: stump, stage weight, and its weighted training
/// error at acceptance time.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostStage {
    pub stump: DecisionTree,
    pub alpha: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostModel {
    pub config: AdaBoostConfig,
    pub stages: Vec<BoostStage>,
    pub n_features: usize,
    pub n_classes: usize,
    /// Majority class of the training data; used if no stage was accepted.
    pub fallback_class: usize,
}

/// SAMME stage weight: `ln((1 - e) / e) + ln(K - 1)`.
pub fn stage_weight(error: f64, n_classes: usize) -> f64 {
    let e = error.max(EPSILON_FLOOR);
    ((1.0 - e) / e).ln() + ((n_classes - 1) as f64).ln()
}

pub fn fit_adaboost(m: &FeatureMatrix, config: &AdaBoostConfig) -> Result<AdaBoostModel> {
    if config.rounds == 0 {
        return Err(CoreError::InvalidParameter("rounds must be >= 1".into()));
    }
    let n = m.n_rows();
    if n == 0 {
        return Err(CoreError::EmptyDataset);
    }
    let k = m.n_classes();
    let rows: Vec<usize> = (0..n).collect();
    let stump_config = TreeConfig {
        params: TreeParams {
            max_depth: 1,
            min_samples_split: 2,
            min_leaf: 1,
            criterion: SplitCriterion::Gini,
        },
        sampling: FeatureSampling::All,
        cut_rule: CutRule::Best,
    };

    let mut weights = vec![1.0 / n as f64; n];
    let mut stages: Vec<BoostStage> = Vec::new();

    for round in 0..config.rounds {
        let mut rng = rng_from_seed(derive_seed(config.seed, round as u64));
        let stump = fit_tree_on_rows(m, &rows, Some(&weights), &stump_config, &mut rng)?;

        let mut misclassified = vec![false; n];
        let mut error = 0.0f64;
        for i in 0..n {
            let predicted = argmax(&predict_tree(&stump, m.row(i))?);
            if predicted != m.labels()[i] {
                misclassified[i] = true;
                error += weights[i];
            }
        }
        if !error.is_finite() {
            return Err(CoreError::BoostingDiverged { round });
        }

        // A stage no better than random guessing is discarded and boosting
        // stops: reweighting through it would not make progress.
        if error >= 1.0 - 1.0 / k as f64 {
            break;
        }

        let alpha = stage_weight(error, k);
        stages.push(BoostStage {
            stump,
            alpha,
            error,
        });

        // A perfect stage leaves nothing to reweight.
        if error == 0.0 {
            break;
        }

        let scale = alpha.exp();
        for (w, &miss) in weights.iter_mut().zip(&misclassified) {
            if miss {
                *w *= scale;
            }
        }
        let total: f64 = weights.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(CoreError::BoostingDiverged { round });
        }
        for w in weights.iter_mut() {
            *w /= total;
        }
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    let fallback_class = crate::ensemble::forest::mode_lowest(&m.class_counts());
    Ok(AdaBoostModel {
        config: *config,
        stages,
        n_features: m.n_features(),
        n_classes: k,
        fallback_class,
    })
}

/// Alpha-weighted vote across stages; ties go to the lower class index.
pub fn predict_adaboost(model: &AdaBoostModel, x: &[f64]) -> Result<usize> {
    if x.len() != model.n_features {
        return Err(CoreError::DimensionMismatch {
            expected: model.n_features,
            actual: x.len(),
        });
    }
    if model.stages.is_empty() {
        return Ok(model.fallback_class);
    }
    let mut scores = vec![0.0f64; model.n_classes];
    for stage in &model.stages {
        let predicted = argmax(&predict_tree(&stage.stump, x)?);
        scores[predicted] += stage.alpha;
    }
    Ok(argmax(&scores))
}
