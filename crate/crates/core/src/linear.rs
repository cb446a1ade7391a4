//! One-vs-rest linear classifiers trained with mini-batch SGD.
//!
//! Two loss functions: logistic (log-loss) and hinge. Scores are affine
//! `w . x + b`; the intercept is the last weight and is excluded from L2.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::error::{CoreError, Result};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::tree::argmax;

/// Exponent clamp for the logistic link; keeps `exp` finite.
pub const LOGIT_CLAMP: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Log,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 32,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl SgdConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(CoreError::InvalidParameter("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(CoreError::InvalidParameter("batch size must be >= 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "l2 strength must be non-negative, got {}",
                self.l2
            )));
        }
        Ok(())
    }
}

/// One-vs-rest linear model: one weight vector of length `n_features + 1`
/// per class, intercept last.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub loss: LossKind,
}

impl LinearModel {
    pub fn n_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn n_features(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len() - 1)
    }

    /// Raw per-class scores `w . x + b`.
    pub fn decision_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(CoreError::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(self.weights.iter().map(|w| raw_score(w, x)).collect())
    }
}

fn raw_score(w: &[f64], x: &[f64]) -> f64 {
    let (coef, intercept) = w.split_at(w.len() - 1);
    let dot: f64 = coef.iter().zip(x).map(|(a, b)| a * b).sum();
    dot + intercept[0]
}

fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-z).exp())
}

/// Per-class probabilities from a log-loss model: clamped sigmoids of the
/// raw scores, normalized to sum to 1.
pub fn logit_probability(model: &LinearModel, x: &[f64]) -> Result<Vec<f64>> {
    if model.loss != LossKind::Log {
        return Err(CoreError::InvalidParameter(
            "probabilities are defined only for log-loss models".into(),
        ));
    }
    let scores = model.decision_scores(x)?;
    let mut probs: Vec<f64> = scores.iter().map(|&z| sigmoid(z)).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Mean loss and gradient of one binary one-vs-rest problem over a batch.
///
/// `targets[i]` is true when row `i` belongs to the positive class. The L2
/// term `l2/2 * |w|^2` (intercept excluded) is included in both outputs.
pub fn loss_and_gradient(
    loss: LossKind,
    weights: &[f64],
    batch: &[&[f64]],
    targets: &[bool],
    l2: f64,
) -> Result<(f64, Vec<f64>)> {
    if batch.len() != targets.len() {
        return Err(CoreError::LengthMismatch {
            left: batch.len(),
            right: targets.len(),
        });
    }
    if batch.is_empty() {
        return Err(CoreError::InvalidParameter(
            "loss over an empty batch".into(),
        ));
    }
    let d = weights.len() - 1;
    let mut grad = vec![0.0f64; weights.len()];
    let mut total = 0.0f64;
    for (&x, &positive) in batch.iter().zip(targets) {
        if x.len() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                actual: x.len(),
            });
        }
        let z = raw_score(weights, x);
        match loss {
            LossKind::Log => {
                let zc = z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
                let y = if positive { 1.0 } else { 0.0 };
                // Stable form of -y ln p - (1-y) ln(1-p).
                total += softplus(zc) - y * zc;
                let residual = sigmoid(zc) - y;
                for (g, &xi) in grad.iter_mut().zip(x) {
                    *g += residual * xi;
                }
                grad[d] += residual;
            }
            LossKind::Hinge => {
                let s = if positive { 1.0 } else { -1.0 };
                let margin = s * z;
                if margin < 1.0 {
                    total += 1.0 - margin;
                    for (g, &xi) in grad.iter_mut().zip(x) {
                        *g += -s * xi;
                    }
                    grad[d] += -s;
                }
            }
        }
    }
    let inv = 1.0 / batch.len() as f64;
    total *= inv;
    for g in grad.iter_mut() {
        *g *= inv;
    }
    // Ridge penalty on coefficients only.
    let mut penalty = 0.0;
    for (j, &w) in weights[..d].iter().enumerate() {
        penalty += w * w;
        grad[j] += l2 * w;
    }
    total += 0.5 * l2 * penalty;
    Ok((total, grad))
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Trains one one-vs-rest weight vector per class with mini-batch SGD.
///
/// Rows are reshuffled every epoch; each class trains on an independent
/// derived stream, so results do not depend on scheduling.
pub fn sgd_fit(m: &FeatureMatrix, loss: LossKind, config: &SgdConfig) -> Result<LinearModel> {
    config.validate()?;
    if m.n_rows() == 0 {
        return Err(CoreError::EmptyDataset);
    }
    let weights: Vec<Vec<f64>> = (0..m.n_classes())
        .into_par_iter()
        .map(|class| fit_one_class(m, loss, config, class))
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearModel { weights, loss })
}

fn fit_one_class(
    m: &FeatureMatrix,
    loss: LossKind,
    config: &SgdConfig,
    class: usize,
) -> Result<Vec<f64>> {
    let d = m.n_features();
    let mut w = vec![0.0f64; d + 1];
    let mut order: Vec<usize> = (0..m.n_rows()).collect();
    let mut rng = rng_from_seed(derive_seed(config.seed, class as u64));

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&[f64]> = chunk.iter().map(|&r| m.row(r)).collect();
            let targets: Vec<bool> = chunk.iter().map(|&r| m.labels()[r] == class).collect();
            let (_, grad) = loss_and_gradient(loss, &w, &batch, &targets, config.l2)?;
            for (wj, gj) in w.iter_mut().zip(&grad) {
                *wj -= config.learning_rate * gj;
            }
        }
        let batch: Vec<&[f64]> = (0..m.n_rows()).map(|r| m.row(r)).collect();
        let targets: Vec<bool> = m.labels().iter().map(|&l| l == class).collect();
        let (epoch_loss, _) = loss_and_gradient(loss, &w, &batch, &targets, config.l2)?;
        if !epoch_loss.is_finite() {
            return Err(CoreError::SgdDiverged { class, epoch });
        }
    }
    Ok(w)
}

/// Predicted class: argmax of raw scores, ties to the lower index.
pub fn predict_linear(model: &LinearModel, x: &[f64]) -> Result<usize> {
    Ok(argmax(&model.decision_scores(x)?))
}
