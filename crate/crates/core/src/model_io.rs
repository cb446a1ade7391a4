//! Versioned plain-text model files.
//!
//! The format is line-oriented and self-describing: a version header, the
//! training schema and categorical encodings (so raw CSV inputs can be
//! encoded consistently at prediction time), then the model section. Floats
//! are written with the shortest text that round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{ColumnEncoding, ColumnKind, ColumnRole, ColumnSpec, EncodingMap, FeatureSchema};
use crate::ensemble::{
    AdaBoostConfig, AdaBoostModel, BoostStage, EnsembleModel, FeatureScaler, Forest, ForestConfig,
    ForestVariant, GbmConfig, GbmModel, RegNode, RegressionTree, VotingPair,
};
use crate::error::{CoreError, Result};
use crate::linear::{LinearModel, LossKind};
use crate::tree::{
    DecisionTree, FeatureSampling, SplitCriterion, TreeNode, TreeParams,
};

const VERSION_LINE: &str = "accsev-model v1";

/// Everything needed to apply a trained model to raw CSV input.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: EnsembleModel,
    pub schema: FeatureSchema,
    pub encoding: EncodingMap,
    /// The encoded columns the model consumes, in input order. May be a
    /// strict subset of the encoding's expansion when the model was trained
    /// on a feature projection (e.g. one of a timestamp's derived columns).
    pub feature_names: Vec<String>,
    /// Class index -> original label value.
    pub class_values: Vec<i64>,
}

pub fn save_model_file(path: &Path, file: &ModelFile) -> Result<()> {
    let text = write_model_file(file)?;
    std::fs::write(path, text).map_err(|e| CoreError::io(path, e))
}

pub fn load_model_file(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    parse_model_file(&text)
}

pub fn write_model_file(file: &ModelFile) -> Result<String> {
    let mut out = String::new();
    out.push_str(VERSION_LINE);
    out.push('\n');

    write!(out, "classes {}:", file.class_values.len()).unwrap();
    for v in &file.class_values {
        write!(out, " {v}").unwrap();
    }
    out.push('\n');

    writeln!(out, "schema {}", file.schema.columns().len()).unwrap();
    for col in file.schema.columns() {
        ensure_single_line(&col.name)?;
        writeln!(out, "col {} {} {}", col.kind, col.role, col.name).unwrap();
    }
    for enc in &file.encoding.columns {
        if enc.kind == ColumnKind::Categorical {
            ensure_single_line(&enc.name)?;
            writeln!(out, "categories {} {}", enc.categories.len(), enc.name).unwrap();
            for cat in &enc.categories {
                ensure_single_line(cat)?;
                writeln!(out, "cat {cat}").unwrap();
            }
        }
    }

    writeln!(out, "features {}", file.feature_names.len()).unwrap();
    for name in &file.feature_names {
        ensure_single_line(name)?;
        writeln!(out, "f {name}").unwrap();
    }

    match &file.model {
        EnsembleModel::Forest(m) => write_forest(&mut out, m),
        EnsembleModel::AdaBoost(m) => write_adaboost(&mut out, m),
        EnsembleModel::Gbm(m) => write_gbm(&mut out, m),
        EnsembleModel::Voting(m) => write_voting(&mut out, m),
    }
    out.push_str("end\n");
    Ok(out)
}

pub fn parse_model_file(text: &str) -> Result<ModelFile> {
    let mut lines = Lines::new(text);
    let version = lines.next_line()?;
    if version != VERSION_LINE {
        return Err(CoreError::ModelFormat(format!(
            "unsupported header '{version}', expected '{VERSION_LINE}'"
        )));
    }

    let class_line = lines.next_line()?;
    let class_values = parse_classes(class_line)?;

    let schema_line = lines.next_line()?;
    let n_cols = parse_count(schema_line, "schema")?;
    let mut columns = Vec::with_capacity(n_cols);
    for _ in 0..n_cols {
        columns.push(parse_col(lines.next_line()?)?);
    }
    let schema = FeatureSchema::new(columns)?;

    let mut encoding = EncodingMap {
        columns: schema
            .feature_columns()
            .map(|c| ColumnEncoding {
                name: c.name.clone(),
                kind: c.kind,
                categories: Vec::new(),
            })
            .collect(),
    };
    while lines.peek()?.starts_with("categories ") {
        let line = lines.next_line()?;
        let rest = &line["categories ".len()..];
        let (count_s, name) = rest.split_once(' ').ok_or_else(|| {
            CoreError::ModelFormat(format!("malformed categories line '{line}'"))
        })?;
        let count: usize = count_s
            .parse()
            .map_err(|_| CoreError::ModelFormat(format!("bad category count '{count_s}'")))?;
        let mut categories = Vec::with_capacity(count);
        for _ in 0..count {
            let cat_line = lines.next_line()?;
            let value = cat_line.strip_prefix("cat ").ok_or_else(|| {
                CoreError::ModelFormat(format!("expected 'cat <value>', got '{cat_line}'"))
            })?;
            categories.push(value.to_string());
        }
        let entry = encoding
            .columns
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| {
                CoreError::ModelFormat(format!("categories for unknown column '{name}'"))
            })?;
        if entry.kind != ColumnKind::Categorical {
            return Err(CoreError::ModelFormat(format!(
                "categories for non-categorical column '{name}'"
            )));
        }
        entry.categories = categories;
    }

    let features_line = lines.next_line()?;
    let n_feature_names = parse_count(features_line, "features")?;
    let mut feature_names = Vec::with_capacity(n_feature_names);
    for _ in 0..n_feature_names {
        let line = lines.next_line()?;
        let name = line.strip_prefix("f ").ok_or_else(|| {
            CoreError::ModelFormat(format!("expected 'f <name>', got '{line}'"))
        })?;
        feature_names.push(name.to_string());
    }

    let model_line = lines.next_line()?;
    let kind = model_line.strip_prefix("model ").ok_or_else(|| {
        CoreError::ModelFormat(format!("expected 'model <kind>', got '{model_line}'"))
    })?;
    let model = match kind {
        "rf" | "extratrees" => EnsembleModel::Forest(parse_forest(&mut lines, kind)?),
        "adaboost" => EnsembleModel::AdaBoost(parse_adaboost(&mut lines)?),
        "gbm" => EnsembleModel::Gbm(parse_gbm(&mut lines)?),
        "voting" => EnsembleModel::Voting(parse_voting(&mut lines)?),
        other => {
            return Err(CoreError::ModelFormat(format!("unknown model kind '{other}'")))
        }
    };

    let end = lines.next_line()?;
    if end != "end" {
        return Err(CoreError::ModelFormat(format!(
            "expected trailing 'end', got '{end}'"
        )));
    }
    if model.n_classes() != class_values.len() {
        return Err(CoreError::ModelFormat(format!(
            "model has {} classes but the file declares {}",
            model.n_classes(),
            class_values.len()
        )));
    }
    if model.n_features() != feature_names.len() {
        return Err(CoreError::ModelFormat(format!(
            "model consumes {} features but the file lists {}",
            model.n_features(),
            feature_names.len()
        )));
    }
    Ok(ModelFile {
        model,
        schema,
        encoding,
        feature_names,
        class_values,
    })
}

// ---------------------------------------------------------------------------
// line cursor

struct Lines<'a> {
    iter: std::iter::Peekable<std::str::Lines<'a>>,
    lineno: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().peekable(),
            lineno: 0,
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        self.lineno += 1;
        self.iter
            .next()
            .ok_or_else(|| CoreError::ModelFormat(format!("unexpected end at line {}", self.lineno)))
    }

    fn peek(&mut self) -> Result<&'a str> {
        self.iter.peek().copied().ok_or_else(|| {
            CoreError::ModelFormat(format!("unexpected end after line {}", self.lineno))
        })
    }
}

fn ensure_single_line(value: &str) -> Result<()> {
    if value.contains('\n') || value.contains('\r') {
        return Err(CoreError::ModelFormat(format!(
            "value '{value:?}' contains a line break and cannot be serialized"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// header pieces

fn parse_classes(line: &str) -> Result<Vec<i64>> {
    let rest = line
        .strip_prefix("classes ")
        .ok_or_else(|| CoreError::ModelFormat(format!("expected 'classes', got '{line}'")))?;
    let (count_s, values_s) = rest
        .split_once(':')
        .ok_or_else(|| CoreError::ModelFormat(format!("malformed classes line '{line}'")))?;
    let count: usize = count_s
        .trim()
        .parse()
        .map_err(|_| CoreError::ModelFormat(format!("bad class count '{count_s}'")))?;
    let values: Vec<i64> = values_s
        .split_whitespace()
        .map(|t| {
            t.parse::<i64>()
                .map_err(|_| CoreError::ModelFormat(format!("bad class value '{t}'")))
        })
        .collect::<Result<_>>()?;
    if values.len() != count {
        return Err(CoreError::ModelFormat(format!(
            "class count {count} does not match {} values",
            values.len()
        )));
    }
    Ok(values)
}

fn parse_count(line: &str, keyword: &str) -> Result<usize> {
    let rest = line.strip_prefix(keyword).ok_or_else(|| {
        CoreError::ModelFormat(format!("expected '{keyword} <n>', got '{line}'"))
    })?;
    rest.trim()
        .parse()
        .map_err(|_| CoreError::ModelFormat(format!("bad count in '{line}'")))
}

fn parse_col(line: &str) -> Result<ColumnSpec> {
    let rest = line
        .strip_prefix("col ")
        .ok_or_else(|| CoreError::ModelFormat(format!("expected 'col', got '{line}'")))?;
    let mut parts = rest.splitn(3, ' ');
    let kind_s = parts.next().unwrap_or("");
    let role_s = parts.next().unwrap_or("");
    let name = parts
        .next()
        .ok_or_else(|| CoreError::ModelFormat(format!("missing column name in '{line}'")))?;
    let kind = match kind_s {
        "numeric" => ColumnKind::Numeric,
        "categorical" => ColumnKind::Categorical,
        "boolean" => ColumnKind::Boolean,
        "timestamp" => ColumnKind::Timestamp,
        other => return Err(CoreError::ModelFormat(format!("unknown kind '{other}'"))),
    };
    let role = match role_s {
        "feature" => ColumnRole::Feature,
        "target" => ColumnRole::Target,
        "ignored" => ColumnRole::Ignored,
        other => return Err(CoreError::ModelFormat(format!("unknown role '{other}'"))),
    };
    Ok(ColumnSpec::new(name, kind, role))
}

// ---------------------------------------------------------------------------
// scalar helpers

fn parse_f64(token: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| CoreError::ModelFormat(format!("bad float '{token}'")))?;
    if v.is_nan() {
        return Err(CoreError::ModelFormat("NaN is not a valid stored value".into()));
    }
    Ok(v)
}

fn parse_usize(token: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| CoreError::ModelFormat(format!("bad integer '{token}'")))
}

fn parse_bool(token: &str) -> Result<bool> {
    match token {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(CoreError::ModelFormat(format!("bad boolean '{other}'"))),
    }
}

/// Reads `key <value>` where the key is fixed.
fn keyed<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    let rest = line
        .strip_prefix(key)
        .ok_or_else(|| CoreError::ModelFormat(format!("expected '{key} ...', got '{line}'")))?;
    Ok(rest.trim_start())
}

fn sampling_str(s: FeatureSampling) -> String {
    match s {
        FeatureSampling::All => "all".into(),
        FeatureSampling::Sqrt => "sqrt".into(),
        FeatureSampling::Fixed(k) => format!("fixed {k}"),
    }
}

fn parse_sampling(token: &str) -> Result<FeatureSampling> {
    match token {
        "all" => Ok(FeatureSampling::All),
        "sqrt" => Ok(FeatureSampling::Sqrt),
        other => match other.strip_prefix("fixed ") {
            Some(k) => Ok(FeatureSampling::Fixed(parse_usize(k.trim())?)),
            None => Err(CoreError::ModelFormat(format!(
                "unknown feature sampling '{other}'"
            ))),
        },
    }
}

fn criterion_str(c: SplitCriterion) -> &'static str {
    match c {
        SplitCriterion::Gini => "gini",
        SplitCriterion::Entropy => "entropy",
    }
}

fn parse_criterion(token: &str) -> Result<SplitCriterion> {
    match token {
        "gini" => Ok(SplitCriterion::Gini),
        "entropy" => Ok(SplitCriterion::Entropy),
        other => Err(CoreError::ModelFormat(format!("unknown criterion '{other}'"))),
    }
}

fn write_tree_params(out: &mut String, p: &TreeParams) {
    writeln!(out, "max-depth {}", p.max_depth).unwrap();
    writeln!(out, "min-samples-split {}", p.min_samples_split).unwrap();
    writeln!(out, "min-leaf {}", p.min_leaf).unwrap();
    writeln!(out, "criterion {}", criterion_str(p.criterion)).unwrap();
}

fn parse_tree_params(lines: &mut Lines) -> Result<TreeParams> {
    Ok(TreeParams {
        max_depth: parse_usize(keyed(lines.next_line()?, "max-depth")?)?,
        min_samples_split: parse_usize(keyed(lines.next_line()?, "min-samples-split")?)?,
        min_leaf: parse_usize(keyed(lines.next_line()?, "min-leaf")?)?,
        criterion: parse_criterion(keyed(lines.next_line()?, "criterion")?)?,
    })
}

// ---------------------------------------------------------------------------
// classification trees

fn count_nodes(node: &TreeNode) -> usize {
    match node {
        TreeNode::Leaf { .. } => 1,
        TreeNode::Split { left, right, .. } => 1 + count_nodes(left) + count_nodes(right),
    }
}

fn write_nodes(out: &mut String, node: &TreeNode) {
    match node {
        TreeNode::Split {
            feature_index,
            threshold,
            left,
            right,
        } => {
            writeln!(out, "s {feature_index} {threshold}").unwrap();
            write_nodes(out, left);
            write_nodes(out, right);
        }
        TreeNode::Leaf { distribution } => {
            out.push('l');
            for p in distribution {
                write!(out, " {p}").unwrap();
            }
            out.push('\n');
        }
    }
}

/// Serializes one classification tree as a `tree` block.
pub fn write_tree(tree: &DecisionTree) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "tree {} {} {}",
        tree.n_features,
        tree.n_classes,
        count_nodes(&tree.root)
    )
    .unwrap();
    write_nodes(&mut out, &tree.root);
    out
}

pub fn parse_tree(text: &str) -> Result<DecisionTree> {
    let mut lines = Lines::new(text);
    let tree = parse_tree_block(&mut lines)?;
    Ok(tree)
}

fn parse_tree_block(lines: &mut Lines) -> Result<DecisionTree> {
    let header = lines.next_line()?;
    let rest = keyed(header, "tree")?;
    let mut parts = rest.split_whitespace();
    let n_features = parse_usize(parts.next().unwrap_or(""))?;
    let n_classes = parse_usize(parts.next().unwrap_or(""))?;
    let n_nodes = parse_usize(parts.next().unwrap_or(""))?;
    let mut consumed = 0usize;
    let root = parse_node(lines, n_classes, &mut consumed)?;
    if consumed != n_nodes {
        return Err(CoreError::ModelFormat(format!(
            "tree declared {n_nodes} nodes but {consumed} were read"
        )));
    }
    Ok(DecisionTree {
        root,
        n_features,
        n_classes,
    })
}

fn parse_node(lines: &mut Lines, n_classes: usize, consumed: &mut usize) -> Result<TreeNode> {
    let line = lines.next_line()?;
    *consumed += 1;
    if let Some(rest) = line.strip_prefix("s ") {
        let mut parts = rest.split_whitespace();
        let feature_index = parse_usize(parts.next().unwrap_or(""))?;
        let threshold = parse_f64(parts.next().unwrap_or(""))?;
        let left = parse_node(lines, n_classes, consumed)?;
        let right = parse_node(lines, n_classes, consumed)?;
        Ok(TreeNode::Split {
            feature_index,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        })
    } else if let Some(rest) = line.strip_prefix("l ") {
        let distribution: Vec<f64> = rest
            .split_whitespace()
            .map(parse_f64)
            .collect::<Result<_>>()?;
        if distribution.len() != n_classes {
            return Err(CoreError::ModelFormat(format!(
                "leaf has {} probabilities, expected {n_classes}",
                distribution.len()
            )));
        }
        Ok(TreeNode::Leaf { distribution })
    } else {
        Err(CoreError::ModelFormat(format!(
            "expected a node line, got '{line}'"
        )))
    }
}

// ---------------------------------------------------------------------------
// forest

fn write_forest(out: &mut String, m: &Forest) {
    let kind = match m.variant {
        ForestVariant::RandomForest => "rf",
        ForestVariant::ExtraTrees => "extratrees",
    };
    writeln!(out, "model {kind}").unwrap();
    writeln!(out, "n-trees {}", m.config.n_trees).unwrap();
    writeln!(out, "max-features {}", sampling_str(m.config.max_features)).unwrap();
    writeln!(out, "bootstrap {}", m.config.bootstrap).unwrap();
    write_tree_params(out, &m.config.tree);
    writeln!(out, "seed {}", m.config.seed).unwrap();
    writeln!(out, "parallel {}", m.config.parallel).unwrap();
    writeln!(out, "n-features {}", m.n_features).unwrap();
    writeln!(out, "n-classes {}", m.n_classes).unwrap();
    writeln!(out, "trees {}", m.trees.len()).unwrap();
    for tree in &m.trees {
        out.push_str(&write_tree(tree));
    }
}

fn parse_forest(lines: &mut Lines, kind: &str) -> Result<Forest> {
    let variant = if kind == "rf" {
        ForestVariant::RandomForest
    } else {
        ForestVariant::ExtraTrees
    };
    let n_trees = parse_usize(keyed(lines.next_line()?, "n-trees")?)?;
    let max_features = parse_sampling(keyed(lines.next_line()?, "max-features")?)?;
    let bootstrap = parse_bool(keyed(lines.next_line()?, "bootstrap")?)?;
    let tree = parse_tree_params(lines)?;
    let seed = parse_usize(keyed(lines.next_line()?, "seed")?)? as u64;
    let parallel = parse_bool(keyed(lines.next_line()?, "parallel")?)?;
    let n_features = parse_usize(keyed(lines.next_line()?, "n-features")?)?;
    let n_classes = parse_usize(keyed(lines.next_line()?, "n-classes")?)?;
    let stored = parse_usize(keyed(lines.next_line()?, "trees")?)?;
    let mut trees = Vec::with_capacity(stored);
    for _ in 0..stored {
        trees.push(parse_tree_block(lines)?);
    }
    Ok(Forest {
        variant,
        config: ForestConfig {
            n_trees,
            max_features,
            tree,
            bootstrap,
            seed,
            parallel,
        },
        trees,
        // Out-of-bag masks are fit-time artifacts tied to the training
        // matrix; they are not persisted.
        oob_masks: Vec::new(),
        n_features,
        n_classes,
    })
}

// ---------------------------------------------------------------------------
// adaboost

fn write_adaboost(out: &mut String, m: &AdaBoostModel) {
    writeln!(out, "model adaboost").unwrap();
    writeln!(out, "rounds {}", m.config.rounds).unwrap();
    writeln!(out, "seed {}", m.config.seed).unwrap();
    writeln!(out, "n-features {}", m.n_features).unwrap();
    writeln!(out, "n-classes {}", m.n_classes).unwrap();
    writeln!(out, "fallback {}", m.fallback_class).unwrap();
    writeln!(out, "stages {}", m.stages.len()).unwrap();
    for stage in &m.stages {
        writeln!(out, "stage {} {}", stage.alpha, stage.error).unwrap();
        out.push_str(&write_tree(&stage.stump));
    }
}

fn parse_adaboost(lines: &mut Lines) -> Result<AdaBoostModel> {
    let rounds = parse_usize(keyed(lines.next_line()?, "rounds")?)?;
    let seed = parse_usize(keyed(lines.next_line()?, "seed")?)? as u64;
    let n_features = parse_usize(keyed(lines.next_line()?, "n-features")?)?;
    let n_classes = parse_usize(keyed(lines.next_line()?, "n-classes")?)?;
    let fallback_class = parse_usize(keyed(lines.next_line()?, "fallback")?)?;
    let n_stages = parse_usize(keyed(lines.next_line()?, "stages")?)?;
    let mut stages = Vec::with_capacity(n_stages);
    for _ in 0..n_stages {
        let line = lines.next_line()?;
        let rest = keyed(line, "stage")?;
        let mut parts = rest.split_whitespace();
        let alpha = parse_f64(parts.next().unwrap_or(""))?;
        let error = parse_f64(parts.next().unwrap_or(""))?;
        let stump = parse_tree_block(lines)?;
        stages.push(BoostStage {
            stump,
            alpha,
            error,
        });
    }
    Ok(AdaBoostModel {
        config: AdaBoostConfig { rounds, seed },
        stages,
        n_features,
        n_classes,
        fallback_class,
    })
}

// ---------------------------------------------------------------------------
// gbm

fn count_reg_nodes(node: &RegNode) -> usize {
    match node {
        RegNode::Leaf { .. } => 1,
        RegNode::Split { left, right, .. } => 1 + count_reg_nodes(left) + count_reg_nodes(right),
    }
}

fn write_reg_nodes(out: &mut String, node: &RegNode) {
    match node {
        RegNode::Split {
            feature_index,
            threshold,
            left,
            right,
        } => {
            writeln!(out, "rs {feature_index} {threshold}").unwrap();
            write_reg_nodes(out, left);
            write_reg_nodes(out, right);
        }
        RegNode::Leaf { value } => {
            writeln!(out, "rl {value}").unwrap();
        }
    }
}

fn parse_reg_node(lines: &mut Lines, consumed: &mut usize) -> Result<RegNode> {
    let line = lines.next_line()?;
    *consumed += 1;
    if let Some(rest) = line.strip_prefix("rs ") {
        let mut parts = rest.split_whitespace();
        let feature_index = parse_usize(parts.next().unwrap_or(""))?;
        let threshold = parse_f64(parts.next().unwrap_or(""))?;
        let left = parse_reg_node(lines, consumed)?;
        let right = parse_reg_node(lines, consumed)?;
        Ok(RegNode::Split {
            feature_index,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        })
    } else if let Some(rest) = line.strip_prefix("rl ") {
        Ok(RegNode::Leaf {
            value: parse_f64(rest.trim())?,
        })
    } else {
        Err(CoreError::ModelFormat(format!(
            "expected a regression node line, got '{line}'"
        )))
    }
}

fn write_gbm(out: &mut String, m: &GbmModel) {
    writeln!(out, "model gbm").unwrap();
    writeln!(out, "rounds {}", m.config.rounds).unwrap();
    writeln!(out, "shrinkage {}", m.config.shrinkage).unwrap();
    write_tree_params(out, &m.config.tree);
    writeln!(out, "seed {}", m.config.seed).unwrap();
    writeln!(out, "n-features {}", m.n_features).unwrap();
    writeln!(out, "n-classes {}", m.n_classes).unwrap();
    out.push_str("priors");
    for p in &m.priors {
        write!(out, " {p}").unwrap();
    }
    out.push('\n');
    writeln!(out, "stages {}", m.stages.len()).unwrap();
    for round in &m.stages {
        for tree in round {
            writeln!(
                out,
                "rtree {} {}",
                tree.n_features,
                count_reg_nodes(&tree.root)
            )
            .unwrap();
            write_reg_nodes(out, &tree.root);
        }
    }
}

fn parse_gbm(lines: &mut Lines) -> Result<GbmModel> {
    let rounds = parse_usize(keyed(lines.next_line()?, "rounds")?)?;
    let shrinkage = parse_f64(keyed(lines.next_line()?, "shrinkage")?)?;
    let tree = parse_tree_params(lines)?;
    let seed = parse_usize(keyed(lines.next_line()?, "seed")?)? as u64;
    let n_features = parse_usize(keyed(lines.next_line()?, "n-features")?)?;
    let n_classes = parse_usize(keyed(lines.next_line()?, "n-classes")?)?;
    let priors: Vec<f64> = keyed(lines.next_line()?, "priors")?
        .split_whitespace()
        .map(parse_f64)
        .collect::<Result<_>>()?;
    if priors.len() != n_classes {
        return Err(CoreError::ModelFormat(format!(
            "{} priors for {n_classes} classes",
            priors.len()
        )));
    }
    let n_stages = parse_usize(keyed(lines.next_line()?, "stages")?)?;
    let mut stages = Vec::with_capacity(n_stages);
    for _ in 0..n_stages {
        let mut round = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            let header = lines.next_line()?;
            let rest = keyed(header, "rtree")?;
            let mut parts = rest.split_whitespace();
            let tree_features = parse_usize(parts.next().unwrap_or(""))?;
            let n_nodes = parse_usize(parts.next().unwrap_or(""))?;
            let mut consumed = 0usize;
            let root = parse_reg_node(lines, &mut consumed)?;
            if consumed != n_nodes {
                return Err(CoreError::ModelFormat(format!(
                    "regression tree declared {n_nodes} nodes but {consumed} were read"
                )));
            }
            round.push(RegressionTree {
                root,
                n_features: tree_features,
            });
        }
        stages.push(round);
    }
    Ok(GbmModel {
        config: GbmConfig {
            rounds,
            shrinkage,
            tree,
            seed,
        },
        priors,
        stages,
        n_features,
        n_classes,
        // The loss curve is a fit-time artifact; it is not persisted.
        train_loss: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// linear / voting

fn loss_str(loss: LossKind) -> &'static str {
    match loss {
        LossKind::Log => "log",
        LossKind::Hinge => "hinge",
    }
}

fn parse_loss(token: &str) -> Result<LossKind> {
    match token {
        "log" => Ok(LossKind::Log),
        "hinge" => Ok(LossKind::Hinge),
        other => Err(CoreError::ModelFormat(format!("unknown loss '{other}'"))),
    }
}

/// Serializes one linear model as a `linear` block.
pub fn write_linear(model: &LinearModel) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "linear {} {} {}",
        loss_str(model.loss),
        model.n_classes(),
        model.n_features()
    )
    .unwrap();
    for w in &model.weights {
        out.push('w');
        for v in w {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_linear(text: &str) -> Result<LinearModel> {
    let mut lines = Lines::new(text);
    parse_linear_block(&mut lines)
}

fn parse_linear_block(lines: &mut Lines) -> Result<LinearModel> {
    let header = lines.next_line()?;
    let rest = keyed(header, "linear")?;
    let mut parts = rest.split_whitespace();
    let loss = parse_loss(parts.next().unwrap_or(""))?;
    let n_classes = parse_usize(parts.next().unwrap_or(""))?;
    let n_features = parse_usize(parts.next().unwrap_or(""))?;
    let mut weights = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let line = lines.next_line()?;
        let rest = line
            .strip_prefix("w ")
            .ok_or_else(|| CoreError::ModelFormat(format!("expected 'w ...', got '{line}'")))?;
        let w: Vec<f64> = rest
            .split_whitespace()
            .map(parse_f64)
            .collect::<Result<_>>()?;
        if w.len() != n_features + 1 {
            return Err(CoreError::ModelFormat(format!(
                "weight row has {} entries, expected {}",
                w.len(),
                n_features + 1
            )));
        }
        weights.push(w);
    }
    Ok(LinearModel { weights, loss })
}

fn write_voting(out: &mut String, m: &VotingPair) {
    writeln!(out, "model voting").unwrap();
    writeln!(out, "scaler {}", m.scaler.means.len()).unwrap();
    out.push_str("means");
    for v in &m.scaler.means {
        write!(out, " {v}").unwrap();
    }
    out.push('\n');
    out.push_str("stds");
    for v in &m.scaler.stds {
        write!(out, " {v}").unwrap();
    }
    out.push('\n');
    out.push_str(&write_linear(&m.log_member));
    out.push_str(&write_linear(&m.hinge_member));
}

fn float_row(line: &str, key: &str, expected: usize) -> Result<Vec<f64>> {
    let rest = keyed(line, key)?;
    let v: Vec<f64> = rest
        .split_whitespace()
        .map(parse_f64)
        .collect::<Result<_>>()?;
    if v.len() != expected {
        return Err(CoreError::ModelFormat(format!(
            "{key} row has {} entries, expected {expected}",
            v.len()
        )));
    }
    Ok(v)
}

fn parse_voting(lines: &mut Lines) -> Result<VotingPair> {
    let header = lines.next_line()?;
    let n = parse_usize(keyed(header, "scaler")?)?;
    let means = float_row(lines.next_line()?, "means", n)?;
    let stds = float_row(lines.next_line()?, "stds", n)?;
    if stds.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
        return Err(CoreError::ModelFormat(
            "scaler stds must be finite and positive".into(),
        ));
    }
    let log_member = parse_linear_block(lines)?;
    let hinge_member = parse_linear_block(lines)?;
    if log_member.loss != LossKind::Log || hinge_member.loss != LossKind::Hinge {
        return Err(CoreError::ModelFormat(
            "voting members must be a log model then a hinge model".into(),
        ));
    }
    if log_member.n_features() != n || hinge_member.n_features() != n {
        return Err(CoreError::ModelFormat(format!(
            "scaler covers {n} features but members expect {} and {}",
            log_member.n_features(),
            hinge_member.n_features()
        )));
    }
    Ok(VotingPair {
        scaler: FeatureScaler { means, stds },
        log_member,
        hinge_member,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode, FeatureMatrix};
    use crate::ensemble::{
        fit_adaboost, fit_extra_trees, fit_gbm, fit_random_forest, fit_voting,
    };
    use crate::linear::SgdConfig;
    use crate::synth::{generate, SynthSpec};
    use crate::tree::{fit_tree, TreeConfig};

    fn fixture() -> (crate::model_io::ModelFile, FeatureMatrix) {
        let out = generate(&SynthSpec {
            n_rows: 120,
            n_informative: 3,
            n_noise: 2,
            n_classes: 3,
            class_weights: vec![0.3, 0.4, 0.3],
            seed: 21,
            ..SynthSpec::default()
        })
        .unwrap();
        let m = encode(&out.dataset).unwrap();
        let forest = fit_random_forest(
            &m,
            &ForestConfig {
                n_trees: 5,
                seed: 2,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let file = ModelFile {
            model: EnsembleModel::Forest(forest),
            schema: out.dataset.schema().clone(),
            encoding: m.encoding().clone(),
            feature_names: m.feature_names().to_vec(),
            class_values: m.class_values().to_vec(),
        };
        (file, m)
    }

    fn assert_round_trip(file: &ModelFile, m: &FeatureMatrix) {
        let text = write_model_file(file).unwrap();
        let parsed = parse_model_file(&text).unwrap();
        assert_eq!(parsed.schema, file.schema);
        assert_eq!(parsed.encoding, file.encoding);
        assert_eq!(parsed.class_values, file.class_values);
        for i in 0..m.n_rows() {
            assert_eq!(
                parsed.model.predict(m.row(i)).unwrap(),
                file.model.predict(m.row(i)).unwrap(),
                "prediction diverged at row {i}"
            );
        }
        // Serialization is stable: writing the parsed model reproduces the
        // exact same bytes.
        assert_eq!(write_model_file(&parsed).unwrap(), text);
    }

    #[test]
    fn forest_round_trips() {
        let (file, m) = fixture();
        assert_round_trip(&file, &m);
    }

    #[test]
    fn extra_trees_round_trips() {
        let (mut file, m) = fixture();
        file.model = EnsembleModel::Forest(
            fit_extra_trees(
                &m,
                &ForestConfig {
                    n_trees: 4,
                    seed: 3,
                    ..ForestConfig::default()
                },
            )
            .unwrap(),
        );
        assert_round_trip(&file, &m);
    }

    #[test]
    fn adaboost_round_trips() {
        let (mut file, m) = fixture();
        file.model = EnsembleModel::AdaBoost(
            fit_adaboost(&m, &crate::ensemble::AdaBoostConfig { rounds: 8, seed: 1 }).unwrap(),
        );
        assert_round_trip(&file, &m);
    }

    #[test]
    fn gbm_round_trips() {
        let (mut file, m) = fixture();
        file.model = EnsembleModel::Gbm(
            fit_gbm(
                &m,
                &GbmConfig {
                    rounds: 4,
                    ..GbmConfig::default()
                },
            )
            .unwrap(),
        );
        assert_round_trip(&file, &m);
    }

    #[test]
    fn voting_round_trips() {
        let (mut file, m) = fixture();
        file.model = EnsembleModel::Voting(
            fit_voting(
                &m,
                &SgdConfig {
                    epochs: 3,
                    seed: 4,
                    ..SgdConfig::default()
                },
            )
            .unwrap(),
        );
        assert_round_trip(&file, &m);
    }

    #[test]
    fn thresholds_round_trip_bit_for_bit() {
        let (file, _) = fixture();
        let text = write_model_file(&file).unwrap();
        let parsed = parse_model_file(&text).unwrap();
        let (EnsembleModel::Forest(a), EnsembleModel::Forest(b)) = (&file.model, &parsed.model)
        else {
            panic!("fixture is a forest");
        };
        // Tree equality covers every threshold and leaf probability bit.
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn bare_tree_round_trips() {
        let values: Vec<f64> = (0..40).map(|i| ((i * 7) % 19) as f64).collect();
        let labels: Vec<usize> = (0..20).map(|i| (i * 3) % 2).collect();
        let m = FeatureMatrix::from_dense(values, 20, 2, labels, 2).unwrap();
        let tree = fit_tree(&m, &TreeConfig::default(), 5).unwrap();
        let text = write_tree(&tree);
        let parsed = parse_tree(&text).unwrap();
        assert_eq!(parsed, tree);
    }

    #[test]
    fn bare_linear_round_trips() {
        let model = LinearModel {
            weights: vec![vec![0.1, -2.5, 3.625], vec![-0.75, 0.0, 1e-9]],
            loss: LossKind::Hinge,
        };
        let parsed = parse_linear(&write_linear(&model)).unwrap();
        assert_eq!(parsed, model);
    }

    #[test]
    fn projected_model_keeps_only_consumed_encoded_columns() {
        use crate::data::{
            encode_with_map, Column, ColumnKind, ColumnRole, ColumnSpec, ColumnValues, Dataset,
            FeatureSchema, TimeParts,
        };
        use crate::importance::project;

        let schema = FeatureSchema::new(vec![
            ColumnSpec::new("Severity", ColumnKind::Numeric, ColumnRole::Target),
            ColumnSpec::new("When", ColumnKind::Timestamp, ColumnRole::Feature),
            ColumnSpec::new("Load", ColumnKind::Numeric, ColumnRole::Feature),
        ])
        .unwrap();
        let n = 40;
        let when = Column::new(
            schema.column("When").unwrap().clone(),
            vec![false; n],
            ColumnValues::Timestamp(
                (0..n)
                    .map(|i| TimeParts {
                        hour: (i % 24) as u8,
                        weekday: (i % 7) as u8,
                    })
                    .collect(),
            ),
        )
        .unwrap();
        let load = Column::new(
            schema.column("Load").unwrap().clone(),
            vec![false; n],
            ColumnValues::Numeric((0..n).map(|i| (i % 5) as f64).collect()),
        )
        .unwrap();
        // Label is decided by the hour, so a model on When#hour alone works.
        let labels: Vec<Option<i64>> = (0..n)
            .map(|i| Some(if (i % 24) < 12 { 1 } else { 2 }))
            .collect();
        let d = Dataset::from_columns(schema.clone(), vec![when, load], labels, None).unwrap();
        let m = encode(&d).unwrap();
        assert_eq!(m.feature_names(), &["When#hour", "When#dow", "Load"]);

        // Keep one derived timestamp column plus the numeric column.
        let kept = vec!["When#hour".to_string(), "Load".to_string()];
        let pm = project(&m, &kept).unwrap();
        let forest = fit_random_forest(
            &pm,
            &ForestConfig {
                n_trees: 3,
                seed: 9,
                ..ForestConfig::default()
            },
        )
        .unwrap();

        let file = ModelFile {
            model: EnsembleModel::Forest(forest),
            schema: schema.clone(),
            encoding: pm.encoding().clone(),
            feature_names: pm.feature_names().to_vec(),
            class_values: pm.class_values().to_vec(),
        };
        let loaded = parse_model_file(&write_model_file(&file).unwrap()).unwrap();
        assert_eq!(loaded.feature_names, kept);

        // Prediction-time flow: the restricted encoding still expands the
        // timestamp to both derived columns, and the stored feature list
        // picks out exactly what the model consumes.
        let enc = encode_with_map(&d, &loaded.encoding).unwrap();
        assert_eq!(enc.feature_names, &["When#hour", "When#dow", "Load"]);
        let positions = enc.column_positions(&loaded.feature_names).unwrap();
        assert_eq!(positions, vec![0, 2]);
        for i in 0..n {
            let x: Vec<f64> = positions.iter().map(|&p| enc.row(i)[p]).collect();
            let predicted = loaded.model.predict(&x).unwrap();
            assert_eq!(predicted, file.model.predict(pm.row(i)).unwrap());
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let (file, _) = fixture();
        let text = write_model_file(&file).unwrap();
        let tampered = text.replace("accsev-model v1", "accsev-model v9");
        let err = parse_model_file(&tampered).unwrap_err();
        assert!(err.to_string().contains("unsupported header"));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let (file, _) = fixture();
        let text = write_model_file(&file).unwrap();
        let cut: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(parse_model_file(&cut).is_err());
    }

    #[test]
    fn garbage_is_rejected_with_model_format_error() {
        let err = parse_model_file("not a model\n").unwrap_err();
        assert!(matches!(err, CoreError::ModelFormat(_)));
    }

    #[test]
    fn file_round_trips_via_disk() {
        let (file, m) = fixture();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        save_model_file(tmp.path(), &file).unwrap();
        let loaded = load_model_file(tmp.path()).unwrap();
        for i in 0..m.n_rows().min(20) {
            assert_eq!(
                loaded.model.predict(m.row(i)).unwrap(),
                file.model.predict(m.row(i)).unwrap()
            );
        }
    }
}
