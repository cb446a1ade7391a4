//! Multiclass gradient boosting with softmax loss.
//!
//! Each round fits one variance-reducing regression tree per class to the
//! residuals `one_hot - softmax(scores)`. Leaf values take the standard
//! multiclass step `(K-1)/K * sum(r) / sum(|r| * (1 - |r|))` with the
//! shrinkage factor baked into the stored value.

use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::error::{CoreError, Result};
use crate::tree::{argmax, TreeParams};

/// Probability floor inside logs; keeps the initial log-priors finite when a
/// class is absent from the training split.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmConfig {
    pub rounds: usize,
    pub shrinkage: f64,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            rounds: 100,
            shrinkage: 0.1,
            tree: TreeParams {
                max_depth: 3,
                ..TreeParams::default()
            },
            seed: 0,
        }
    }
}

/// Regression tree node for residual fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum RegNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: Box<RegNode>,
        right: Box<RegNode>,
    },
    Leaf {
        /// Additive score step, shrinkage included.
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub root: RegNode,
    pub n_features: usize,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature_index] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    pub config: GbmConfig,
    /// Per-class log-prior scores the stages add onto.
    pub priors: Vec<f64>,
    /// `stages[round][class]`.
    pub stages: Vec<Vec<RegressionTree>>,
    pub n_features: usize,
    pub n_classes: usize,
    /// Mean softmax loss after initialization and after every round.
    pub train_loss: Vec<f64>,
}

impl GbmModel {
    /// Raw additive scores for one input.
    pub fn decision_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(CoreError::DimensionMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        let mut scores = self.priors.clone();
        for round in &self.stages {
            for (k, tree) in round.iter().enumerate() {
                scores[k] += tree.predict(x);
            }
        }
        Ok(scores)
    }
}

pub fn fit_gbm(m: &FeatureMatrix, config: &GbmConfig) -> Result<GbmModel> {
    if config.rounds == 0 {
        return Err(CoreError::InvalidParameter("rounds must be >= 1".into()));
    }
    if !(config.shrinkage > 0.0 && config.shrinkage <= 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "shrinkage must be in (0, 1], got {}",
            config.shrinkage
        )));
    }
    let n = m.n_rows();
    if n == 0 {
        return Err(CoreError::EmptyDataset);
    }
    let k = m.n_classes();

    let counts = m.class_counts();
    let priors: Vec<f64> = counts
        .iter()
        .map(|&c| ((c as f64 / n as f64).max(PROB_FLOOR)).ln())
        .collect();

    // scores[i * k + c]
    let mut scores: Vec<f64> = Vec::with_capacity(n * k);
    for _ in 0..n {
        scores.extend_from_slice(&priors);
    }
    let mut train_loss = vec![mean_softmax_loss(&scores, m.labels(), k)];

    let mut stages: Vec<Vec<RegressionTree>> = Vec::with_capacity(config.rounds);
    let mut residuals = vec![0.0f64; n * k];

    for round in 0..config.rounds {
        for i in 0..n {
            let row = &scores[i * k..(i + 1) * k];
            let probs = softmax(row);
            for c in 0..k {
                let y = if m.labels()[i] == c { 1.0 } else { 0.0 };
                residuals[i * k + c] = y - probs[c];
            }
        }

        let trees: Vec<RegressionTree> = (0..k)
            .into_par_iter()
            .map(|c| {
                let targets: Vec<f64> = (0..n).map(|i| residuals[i * k + c]).collect();
                fit_residual_tree(m, &targets, &config.tree, config.shrinkage, k)
            })
            .collect();

        for (c, tree) in trees.iter().enumerate() {
            for i in 0..n {
                scores[i * k + c] += tree.predict(m.row(i));
            }
        }
        let loss = mean_softmax_loss(&scores, m.labels(), k);
        if !loss.is_finite() {
            return Err(CoreError::BoostingDiverged { round });
        }
        train_loss.push(loss);
        stages.push(trees);
    }

    Ok(GbmModel {
        config: *config,
        priors,
        stages,
        n_features: m.n_features(),
        n_classes: k,
        train_loss,
    })
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / total).collect()
}

fn mean_softmax_loss(scores: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = &scores[i * k..(i + 1) * k];
        let probs = softmax(row);
        total += -(probs[label].max(PROB_FLOOR)).ln();
    }
    total / n as f64
}

/// Variance-split regression tree over residual targets, with the multiclass
/// leaf step applied at the leaves.
fn fit_residual_tree(
    m: &FeatureMatrix,
    targets: &[f64],
    params: &TreeParams,
    shrinkage: f64,
    n_classes: usize,
) -> RegressionTree {
    let rows: Vec<usize> = (0..m.n_rows()).collect();
    let root = grow_reg(m, &rows, targets, params, shrinkage, n_classes, 0);
    RegressionTree {
        root,
        n_features: m.n_features(),
    }
}

fn leaf_value(rows: &[usize], targets: &[f64], shrinkage: f64, n_classes: usize) -> f64 {
    let k = n_classes as f64;
    let num: f64 = rows.iter().map(|&r| targets[r]).sum();
    let den: f64 = rows
        .iter()
        .map(|&r| {
            let a = targets[r].abs();
            a * (1.0 - a)
        })
        .sum();
    if den.abs() < 1e-150 {
        return 0.0;
    }
    shrinkage * ((k - 1.0) / k) * (num / den)
}

fn grow_reg(
    m: &FeatureMatrix,
    rows: &[usize],
    targets: &[f64],
    params: &TreeParams,
    shrinkage: f64,
    n_classes: usize,
    depth: usize,
) -> RegNode {
    let make_leaf = |rows: &[usize]| RegNode::Leaf {
        value: leaf_value(rows, targets, shrinkage, n_classes),
    };
    if depth >= params.max_depth || rows.len() < params.min_samples_split {
        return make_leaf(rows);
    }
    let Some((feature, threshold)) = best_variance_split(m, rows, targets, params.min_leaf) else {
        return make_leaf(rows);
    };
    let mut left_rows = Vec::new();
    let mut right_rows = Vec::new();
    for &r in rows {
        if m.value(r, feature) <= threshold {
            left_rows.push(r);
        } else {
            right_rows.push(r);
        }
    }
    let left = grow_reg(m, &left_rows, targets, params, shrinkage, n_classes, depth + 1);
    let right = grow_reg(m, &right_rows, targets, params, shrinkage, n_classes, depth + 1);
    RegNode::Split {
        feature_index: feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Best SSE-reducing split over all features; ties break to the lower
/// feature index, then the lower threshold.
fn best_variance_split(
    m: &FeatureMatrix,
    rows: &[usize],
    targets: &[f64],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = rows.len();
    let total_sum: f64 = rows.iter().map(|&r| targets[r]).sum();
    let total_sq: f64 = rows.iter().map(|&r| targets[r] * targets[r]).sum();
    let parent_sse = total_sq - total_sum * total_sum / n as f64;

    let mut best: Option<(usize, f64, f64)> = None;
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
    for feature in 0..m.n_features() {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (m.value(r, feature), targets[r])));
        sorted.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for i in 1..n {
            let (prev_value, prev_target) = sorted[i - 1];
            left_sum += prev_target;
            left_sq += prev_target * prev_target;
            let value = sorted[i].0;
            if value <= prev_value {
                continue;
            }
            if i < min_leaf || n - i < min_leaf {
                continue;
            }
            let mut threshold = 0.5 * (prev_value + value);
            if threshold >= value {
                threshold = prev_value;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let left_sse = left_sq - left_sum * left_sum / i as f64;
            let right_sse = right_sq - right_sum * right_sum / (n - i) as f64;
            let decrease = parent_sse - left_sse - right_sse;
            let better = match best {
                None => decrease > 1e-12,
                Some((_, _, b)) => decrease > b,
            };
            if better {
                best = Some((feature, threshold, decrease));
            }
        }
    }
    best.map(|(f, t, _)| (f, t))
}

/// Predicted class: argmax of the additive scores, ties to the lower index.
pub fn predict_gbm(model: &GbmModel, x: &[f64]) -> Result<usize> {
    Ok(argmax(&model.decision_scores(x)?))
}
