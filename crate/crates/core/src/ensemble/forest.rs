//! Bagged tree ensembles: random forests and extremely randomized trees.

use rand::Rng;
use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::error::{CoreError, Result};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::tree::{
    fit_tree_on_rows, predict_tree, CutRule, DecisionTree, FeatureSampling, TreeConfig, TreeParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForestVariant {
    /// Bootstrap rows, best-cut splits on random feature subsets.
    RandomForest,
    /// Full sample, one random cut per candidate feature.
    ExtraTrees,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: FeatureSampling,
    pub tree: TreeParams,
    /// Random forests only; extremely randomized trees never bootstrap.
    pub bootstrap: bool,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: FeatureSampling::Sqrt,
            tree: TreeParams::default(),
            bootstrap: true,
            seed: 0,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub variant: ForestVariant,
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
    /// Per tree: `true` where the training row was out of bag. Empty when
    /// the variant or configuration never leaves rows out.
    pub oob_masks: Vec<Vec<bool>>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl Forest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

pub fn fit_random_forest(m: &FeatureMatrix, config: &ForestConfig) -> Result<Forest> {
    fit_forest(m, config, ForestVariant::RandomForest)
}

pub fn fit_extra_trees(m: &FeatureMatrix, config: &ForestConfig) -> Result<Forest> {
    fit_forest(m, config, ForestVariant::ExtraTrees)
}

fn fit_forest(m: &FeatureMatrix, config: &ForestConfig, variant: ForestVariant) -> Result<Forest> {
    if config.n_trees == 0 {
        return Err(CoreError::InvalidParameter("n_trees must be >= 1".into()));
    }
    if m.n_rows() == 0 {
        return Err(CoreError::EmptyDataset);
    }

    let fit_one = |index: usize| -> Result<(DecisionTree, Vec<bool>)> {
        // Every tree gets its own derived stream, so parallel and sequential
        // fits are identical.
        let mut rng = rng_from_seed(derive_seed(config.seed, index as u64));
        let n = m.n_rows();
        let (rows, oob): (Vec<usize>, Vec<bool>) = match variant {
            ForestVariant::RandomForest if config.bootstrap => {
                let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let mut in_bag = vec![false; n];
                for &r in &rows {
                    in_bag[r] = true;
                }
                (rows, in_bag.iter().map(|&b| !b).collect())
            }
            _ => ((0..n).collect(), Vec::new()),
        };
        let cut_rule = match variant {
            ForestVariant::RandomForest => CutRule::Best,
            ForestVariant::ExtraTrees => CutRule::Random,
        };
        let tree_config = TreeConfig {
            params: config.tree,
            sampling: config.max_features,
            cut_rule,
        };
        let tree = fit_tree_on_rows(m, &rows, None, &tree_config, &mut rng)?;
        Ok((tree, oob))
    };

    let fitted: Vec<(DecisionTree, Vec<bool>)> = if config.parallel {
        (0..config.n_trees)
            .into_par_iter()
            .map(fit_one)
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..config.n_trees)
            .map(fit_one)
            .collect::<Result<Vec<_>>>()?
    };

    let mut trees = Vec::with_capacity(config.n_trees);
    let mut oob_masks = Vec::with_capacity(config.n_trees);
    for (tree, oob) in fitted {
        trees.push(tree);
        if !oob.is_empty() {
            oob_masks.push(oob);
        }
    }
    if !oob_masks.is_empty() && oob_masks.len() != trees.len() {
        // All-or-nothing by construction; defensive.
        return Err(CoreError::InvalidParameter(
            "inconsistent out-of-bag bookkeeping".into(),
        ));
    }
    Ok(Forest {
        variant,
        config: *config,
        trees,
        oob_masks,
        n_features: m.n_features(),
        n_classes: m.n_classes(),
    })
}

/// Majority vote over per-tree argmax predictions; vote ties go to the lower
/// class index.
pub fn predict_majority(forest: &Forest, x: &[f64]) -> Result<usize> {
    if x.len() != forest.n_features {
        return Err(CoreError::DimensionMismatch {
            expected: forest.n_features,
            actual: x.len(),
        });
    }
    let mut votes = vec![0usize; forest.n_classes];
    for tree in &forest.trees {
        votes[tree_vote(tree, x)?] += 1;
    }
    Ok(mode_lowest(&votes))
}

/// Batch prediction, vectorized tree-major rather than row-major.
pub fn predict_majority_rows(forest: &Forest, rows: &[&[f64]]) -> Result<Vec<usize>> {
    let mut votes = vec![vec![0usize; forest.n_classes]; rows.len()];
    for tree in &forest.trees {
        for (i, &x) in rows.iter().enumerate() {
            if x.len() != forest.n_features {
                return Err(CoreError::DimensionMismatch {
                    expected: forest.n_features,
                    actual: x.len(),
                });
            }
            votes[i][tree_vote(tree, x)?] += 1;
        }
    }
    Ok(votes.iter().map(|v| mode_lowest(v)).collect())
}

fn tree_vote(tree: &DecisionTree, x: &[f64]) -> Result<usize> {
    let dist = predict_tree(tree, x)?;
    Ok(crate::tree::argmax(&dist))
}

/// Index of the largest count; ties go to the lower index.
pub fn mode_lowest(votes: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate().skip(1) {
        if v > votes[best] {
            best = i;
        }
    }
    best
}
