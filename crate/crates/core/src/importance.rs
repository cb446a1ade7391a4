//! Permutation feature importance over a bagged forest's out-of-bag rows.
//!
//! For every tree and feature, the feature column is permuted on the tree's
//! out-of-bag rows and the increase in misclassification rate is recorded.
//! Raw importance is the mean increase across trees; scores are normalized
//! to zero mean and unit variance across features.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::ensemble::forest::Forest;
use crate::error::{CoreError, Result};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::tree::{argmax, predict_tree, DecisionTree};

/// Standard-deviation floor for normalization; below it all scores are 0.
const STD_FLOOR: f64 = 1e-12;

/// One feature's importance result.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub feature_index: usize,
    pub name: String,
    /// Mean out-of-bag error increase across trees.
    pub raw: f64,
    /// Raw importance normalized to zero mean / unit variance.
    pub normalized: f64,
}

/// Permutation importance for every feature of the forest's training matrix.
///
/// The forest must carry out-of-bag masks (bootstrap fits). Results are
/// returned in feature order; `seed` drives the permutations.
pub fn permutation_importance(
    forest: &Forest,
    m: &FeatureMatrix,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    if forest.oob_masks.len() != forest.trees.len() || forest.trees.is_empty() {
        return Err(CoreError::NoOutOfBagRows);
    }
    if forest.n_features != m.n_features() {
        return Err(CoreError::DimensionMismatch {
            expected: forest.n_features,
            actual: m.n_features(),
        });
    }
    let usable: Vec<(usize, Vec<usize>)> = forest
        .oob_masks
        .iter()
        .enumerate()
        .filter_map(|(t, mask)| {
            let rows: Vec<usize> = (0..m.n_rows()).filter(|&r| mask[r]).collect();
            if rows.is_empty() {
                None
            } else {
                Some((t, rows))
            }
        })
        .collect();
    if usable.is_empty() {
        return Err(CoreError::NoOutOfBagRows);
    }

    let raw: Vec<f64> = (0..m.n_features())
        .into_par_iter()
        .map(|feature| {
            let mut increases = Vec::with_capacity(usable.len());
            for (t, rows) in &usable {
                let tree = &forest.trees[*t];
                let baseline = oob_error(tree, m, rows, None, feature);
                // Permute the feature column over this tree's rows only;
                // one derived stream per (feature, tree) pair.
                let mut rng =
                    rng_from_seed(derive_seed(seed, (feature * forest.trees.len() + t) as u64));
                let mut shuffled: Vec<f64> =
                    rows.iter().map(|&r| m.value(r, feature)).collect();
                shuffled.shuffle(&mut rng);
                let permuted = oob_error(tree, m, rows, Some(&shuffled), feature);
                increases.push(permuted - baseline);
            }
            increases.iter().sum::<f64>() / increases.len() as f64
        })
        .collect();

    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let variance = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / raw.len() as f64;
    let std = variance.sqrt();
    let normalized: Vec<f64> = if std < STD_FLOOR {
        vec![0.0; raw.len()]
    } else {
        raw.iter().map(|v| (v - mean) / std).collect()
    };

    Ok(m.feature_names()
        .iter()
        .enumerate()
        .map(|(i, name)| FeatureImportance {
            feature_index: i,
            name: name.clone(),
            raw: raw[i],
            normalized: normalized[i],
        })
        .collect())
}

/// Misclassification rate of one tree over `rows`, optionally overriding one
/// feature column with `override_values` (aligned with `rows`).
fn oob_error(
    tree: &DecisionTree,
    m: &FeatureMatrix,
    rows: &[usize],
    override_values: Option<&[f64]>,
    feature: usize,
) -> f64 {
    let mut wrong = 0usize;
    let mut x = vec![0.0f64; m.n_features()];
    for (pos, &r) in rows.iter().enumerate() {
        x.copy_from_slice(m.row(r));
        if let Some(values) = override_values {
            x[feature] = values[pos];
        }
        let predicted = argmax(&predict_tree(tree, &x).expect("dimensions checked"));
        if predicted != m.labels()[r] {
            wrong += 1;
        }
    }
    wrong as f64 / rows.len() as f64
}

/// The `k` highest-importance entries, sorted by normalized score descending
/// with index-ascending tie-break.
pub fn select_top_k(scores: &[FeatureImportance], k: usize) -> Result<Vec<FeatureImportance>> {
    if k == 0 || k > scores.len() {
        return Err(CoreError::InvalidParameter(format!(
            "k must be in 1..={}, got {k}",
            scores.len()
        )));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| {
        b.normalized
            .partial_cmp(&a.normalized)
            .expect("scores are finite")
            .then(a.feature_index.cmp(&b.feature_index))
    });
    sorted.truncate(k);
    Ok(sorted)
}

/// Column projection of a matrix onto named features, keeping their order.
pub fn project(m: &FeatureMatrix, names: &[String]) -> Result<FeatureMatrix> {
    if names.is_empty() {
        return Err(CoreError::InvalidParameter(
            "cannot project onto zero features".into(),
        ));
    }
    let mut cols = Vec::with_capacity(names.len());
    for name in names {
        match m.feature_index(name) {
            Some(i) => cols.push(i),
            None => return Err(CoreError::UnknownFeature(name.clone())),
        }
    }
    Ok(m.take_columns(&cols))
}
