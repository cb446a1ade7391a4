//! CART-style decision trees for classification.
//!
//! Splits are axis-aligned `x[feature] <= threshold` tests. The best-cut rule
//! scans midpoints between consecutive distinct sorted values; the random-cut
//! rule (used by extremely randomized trees) draws one uniform threshold per
//! candidate feature.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::FeatureMatrix;
use crate::error::{CoreError, Result};
use crate::seeding::rng_from_seed;

/// Impurity function used to score splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCriterion {
    Gini,
    Entropy,
}

/// How many features each node considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSampling {
    All,
    /// `max(1, floor(sqrt(n_features)))` features drawn without replacement.
    Sqrt,
    Fixed(usize),
}

/// Threshold selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutRule {
    Best,
    /// One uniform threshold in `[min, max)` per candidate feature.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_leaf: usize,
    pub criterion: SplitCriterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 16,
            min_samples_split: 2,
            min_leaf: 1,
            criterion: SplitCriterion::Gini,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub params: TreeParams,
    pub sampling: FeatureSampling,
    pub cut_rule: CutRule,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            params: TreeParams::default(),
            sampling: FeatureSampling::All,
            cut_rule: CutRule::Best,
        }
    }
}

/// A split found by the search, with its quality and resulting side sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub feature_index: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
    pub n_left: usize,
    pub n_right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Class distribution of the training rows (weight mass) at the leaf;
        /// sums to 1.
        distribution: Vec<f64>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub n_features: usize,
    pub n_classes: usize,
}

impl DecisionTree {
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn n_leaves(&self) -> usize {
        self.root.n_leaves()
    }
}

/// Gini impurity `1 - sum(p_k^2)` of a class count vector.
pub fn gini(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(CoreError::InvalidParameter(
            "gini impurity of an empty count vector".into(),
        ));
    }
    let total = total as f64;
    let sum_sq: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p
        })
        .sum();
    Ok(1.0 - sum_sq)
}

fn impurity(criterion: SplitCriterion, class_mass: &[f64], total: f64) -> f64 {
    match criterion {
        SplitCriterion::Gini => {
            let sum_sq: f64 = class_mass
                .iter()
                .map(|&m| {
                    let p = m / total;
                    p * p
                })
                .sum();
            1.0 - sum_sq
        }
        SplitCriterion::Entropy => class_mass
            .iter()
            .filter(|&&m| m > 0.0)
            .map(|&m| {
                let p = m / total;
                -p * p.ln()
            })
            .sum(),
    }
}

/// Exhaustive best split over `feature_subset` for the rows in `rows`,
/// scored by Gini impurity decrease. Returns `None` when no candidate
/// strictly reduces impurity under the `min_leaf` constraint.
pub fn best_split(
    m: &FeatureMatrix,
    rows: &[usize],
    feature_subset: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let mut subset = feature_subset.to_vec();
    subset.sort_unstable();
    let weights = vec![1.0; m.n_rows()];
    best_split_weighted(m, rows, &weights, &subset, min_leaf, SplitCriterion::Gini)
}

/// Weighted split search. `feature_subset` must be sorted ascending so the
/// lower-feature-index tie-break falls out of scan order.
fn best_split_weighted(
    m: &FeatureMatrix,
    rows: &[usize],
    weights: &[f64],
    feature_subset: &[usize],
    min_leaf: usize,
    criterion: SplitCriterion,
) -> Option<SplitCandidate> {
    if rows.is_empty() || feature_subset.is_empty() {
        return None;
    }
    let k = m.n_classes();
    let mut parent_mass = vec![0.0f64; k];
    for &r in rows {
        parent_mass[m.labels()[r]] += weights[r];
    }
    let parent_total: f64 = parent_mass.iter().sum();
    if parent_total <= 0.0 {
        return None;
    }
    let parent_impurity = impurity(criterion, &parent_mass, parent_total);

    let mut best: Option<SplitCandidate> = None;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(rows.len());

    for &feature in feature_subset {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (m.value(r, feature), r)));
        sorted.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));

        let mut left_mass = vec![0.0f64; k];
        let mut left_total = 0.0f64;
        let mut left_count = 0usize;
        for i in 1..sorted.len() {
            let (prev_value, prev_row) = sorted[i - 1];
            left_mass[m.labels()[prev_row]] += weights[prev_row];
            left_total += weights[prev_row];
            left_count += 1;

            let value = sorted[i].0;
            if value <= prev_value {
                continue;
            }
            let n_left = left_count;
            let n_right = sorted.len() - left_count;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            // Midpoint between the two distinct values. If rounding lands on
            // the upper value (adjacent floats), fall back to the lower one
            // so `<=` routes exactly the prefix to the left.
            let mut threshold = 0.5 * (prev_value + value);
            if threshold >= value {
                threshold = prev_value;
            }

            let right_total = parent_total - left_total;
            let mut right_mass = vec![0.0f64; k];
            for (c, &lm) in left_mass.iter().enumerate() {
                right_mass[c] = parent_mass[c] - lm;
            }
            let decrease = parent_impurity
                - (left_total / parent_total) * impurity(criterion, &left_mass, left_total)
                - (right_total / parent_total) * impurity(criterion, &right_mass, right_total);

            let better = match &best {
                None => decrease > 0.0,
                Some(b) => decrease > b.impurity_decrease,
            };
            if better {
                best = Some(SplitCandidate {
                    feature_index: feature,
                    threshold,
                    impurity_decrease: decrease,
                    n_left,
                    n_right,
                });
            }
        }
    }
    best
}

/// Random-cut split: one uniform threshold per non-constant candidate
/// feature, best impurity decrease wins.
fn random_cut_split(
    m: &FeatureMatrix,
    rows: &[usize],
    weights: &[f64],
    feature_subset: &[usize],
    min_leaf: usize,
    criterion: SplitCriterion,
    rng: &mut ChaCha8Rng,
) -> Option<SplitCandidate> {
    let k = m.n_classes();
    let mut parent_mass = vec![0.0f64; k];
    for &r in rows {
        parent_mass[m.labels()[r]] += weights[r];
    }
    let parent_total: f64 = parent_mass.iter().sum();
    if parent_total <= 0.0 {
        return None;
    }
    let parent_impurity = impurity(criterion, &parent_mass, parent_total);

    let mut best: Option<SplitCandidate> = None;
    for &feature in feature_subset {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in rows {
            let v = m.value(r, feature);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        // Matrix values are validated finite, so this cleanly skips constant
        // features (and empty row sets, where lo/hi keep their infinities).
        if hi <= lo {
            continue;
        }
        let threshold = rng.gen_range(lo..hi);

        let mut left_mass = vec![0.0f64; k];
        let mut left_total = 0.0;
        let mut n_left = 0usize;
        for &r in rows {
            if m.value(r, feature) <= threshold {
                left_mass[m.labels()[r]] += weights[r];
                left_total += weights[r];
                n_left += 1;
            }
        }
        let n_right = rows.len() - n_left;
        if n_left < min_leaf || n_right < min_leaf {
            continue;
        }
        let right_total = parent_total - left_total;
        let mut right_mass = vec![0.0f64; k];
        for (c, &lm) in left_mass.iter().enumerate() {
            right_mass[c] = parent_mass[c] - lm;
        }
        let decrease = parent_impurity
            - (left_total / parent_total) * impurity(criterion, &left_mass, left_total)
            - (right_total / parent_total) * impurity(criterion, &right_mass, right_total);

        let better = match &best {
            None => decrease > 0.0,
            Some(b) => decrease > b.impurity_decrease,
        };
        if better {
            best = Some(SplitCandidate {
                feature_index: feature,
                threshold,
                impurity_decrease: decrease,
                n_left,
                n_right,
            });
        }
    }
    best
}

/// Fits a tree on all rows with unit weights.
pub fn fit_tree(m: &FeatureMatrix, config: &TreeConfig, seed: u64) -> Result<DecisionTree> {
    let rows: Vec<usize> = (0..m.n_rows()).collect();
    let mut rng = rng_from_seed(seed);
    fit_tree_on_rows(m, &rows, None, config, &mut rng)
}

/// Fits a tree on a row view with optional per-row weights. Row indices may
/// repeat (bootstrap samples).
pub(crate) fn fit_tree_on_rows(
    m: &FeatureMatrix,
    rows: &[usize],
    weights: Option<&[f64]>,
    config: &TreeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<DecisionTree> {
    if rows.is_empty() {
        return Err(CoreError::InvalidParameter(
            "cannot fit a tree on zero rows".into(),
        ));
    }
    if config.params.min_leaf == 0 {
        return Err(CoreError::InvalidParameter("min_leaf must be >= 1".into()));
    }
    if config.params.min_samples_split < 2 {
        return Err(CoreError::InvalidParameter(
            "min_samples_split must be >= 2".into(),
        ));
    }
    if let FeatureSampling::Fixed(k) = config.sampling {
        if k == 0 || k > m.n_features() {
            return Err(CoreError::InvalidParameter(format!(
                "fixed feature sample size {k} out of range 1..={}",
                m.n_features()
            )));
        }
    }
    let unit;
    let weights = match weights {
        Some(w) => {
            if w.len() != m.n_rows() {
                return Err(CoreError::LengthMismatch {
                    left: m.n_rows(),
                    right: w.len(),
                });
            }
            w
        }
        None => {
            unit = vec![1.0; m.n_rows()];
            &unit
        }
    };
    let root = grow(m, rows, weights, config, 0, rng);
    Ok(DecisionTree {
        root,
        n_features: m.n_features(),
        n_classes: m.n_classes(),
    })
}

fn grow(
    m: &FeatureMatrix,
    rows: &[usize],
    weights: &[f64],
    config: &TreeConfig,
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let k = m.n_classes();
    let mut mass = vec![0.0f64; k];
    for &r in rows {
        mass[m.labels()[r]] += weights[r];
    }
    let total: f64 = mass.iter().sum();
    let leaf = |mass: Vec<f64>, total: f64| TreeNode::Leaf {
        distribution: mass.iter().map(|&v| v / total).collect(),
    };

    let pure = mass.iter().filter(|&&v| v > 0.0).count() <= 1;
    if pure || depth >= config.params.max_depth || rows.len() < config.params.min_samples_split {
        return leaf(mass, total);
    }

    let subset = sample_features(m.n_features(), config.sampling, rng);
    let candidate = match config.cut_rule {
        CutRule::Best => best_split_weighted(
            m,
            rows,
            weights,
            &subset,
            config.params.min_leaf,
            config.params.criterion,
        ),
        CutRule::Random => random_cut_split(
            m,
            rows,
            weights,
            &subset,
            config.params.min_leaf,
            config.params.criterion,
            rng,
        ),
    };
    let Some(split) = candidate else {
        return leaf(mass, total);
    };

    let mut left_rows = Vec::with_capacity(split.n_left);
    let mut right_rows = Vec::with_capacity(split.n_right);
    for &r in rows {
        if m.value(r, split.feature_index) <= split.threshold {
            left_rows.push(r);
        } else {
            right_rows.push(r);
        }
    }
    debug_assert_eq!(left_rows.len(), split.n_left);
    debug_assert_eq!(right_rows.len(), split.n_right);

    let left = grow(m, &left_rows, weights, config, depth + 1, rng);
    let right = grow(m, &right_rows, weights, config, depth + 1, rng);
    TreeNode::Split {
        feature_index: split.feature_index,
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Draws the per-node candidate feature set, sorted ascending.
fn sample_features(n_features: usize, sampling: FeatureSampling, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = match sampling {
        FeatureSampling::All => return (0..n_features).collect(),
        FeatureSampling::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
        FeatureSampling::Fixed(k) => k,
    };
    if k >= n_features {
        return (0..n_features).collect();
    }
    let mut subset = rand::seq::index::sample(rng, n_features, k).into_vec();
    subset.sort_unstable();
    subset
}

/// Class distribution at the leaf `x` routes to.
pub fn predict_tree(tree: &DecisionTree, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != tree.n_features {
        return Err(CoreError::DimensionMismatch {
            expected: tree.n_features,
            actual: x.len(),
        });
    }
    let mut node = &tree.root;
    loop {
        match node {
            TreeNode::Leaf { distribution } => return Ok(distribution.clone()),
            TreeNode::Split {
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

/// Argmax class at the leaf `x` routes to; ties go to the lower index.
pub fn predict_tree_class(tree: &DecisionTree, x: &[f64]) -> Result<usize> {
    let dist = predict_tree(tree, x)?;
    Ok(argmax(&dist))
}

/// Index of the maximum value; ties go to the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
