//! Experiment configuration: a line-oriented `key = value` file with
//! `[section]` headers. Unknown sections and keys are errors, not warnings,
//! so a typo cannot silently fall back to a default.

use std::path::{Path, PathBuf};

use accsev_core::data::FeatureSchema;
use accsev_core::ensemble::{ForestConfig, GbmConfig};
use accsev_core::linear::SgdConfig;
use accsev_core::metrics::Averaging;
use accsev_core::synth::SynthSpec;
use anyhow::{bail, Context, Result};

/// Where the experiment's rows come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Csv {
        data: PathBuf,
        schema: SchemaSource,
        /// Declared class set; inferred from observed labels when absent.
        classes: Option<Vec<i64>>,
    },
    Synth {
        spec: SynthSpec,
        /// Uniform missing-cell rate injected into every feature column.
        missing_rate: f64,
    },
}

#[derive(Debug, Clone)]
pub enum SchemaSource {
    /// The built-in 49-column road-accident schema.
    Builtin,
    Path(PathBuf),
}

impl SchemaSource {
    pub fn load(&self) -> Result<FeatureSchema> {
        match self {
            SchemaSource::Builtin => Ok(FeatureSchema::us_accidents()),
            SchemaSource::Path(p) => FeatureSchema::load(p)
                .with_context(|| format!("loading schema {}", p.display())),
        }
    }
}

/// Hyperparameters for the five models.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Both voting members (log-loss and hinge-loss) share these.
    pub sgd: SgdConfig,
    pub rf: ForestConfig,
    pub adaboost_rounds: usize,
    pub extratrees: ForestConfig,
    pub gbm: GbmConfig,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            sgd: SgdConfig::default(),
            rf: ForestConfig::default(),
            adaboost_rounds: 50,
            extratrees: ForestConfig::default(),
            gbm: GbmConfig::default(),
        }
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub train_fraction: f64,
    pub k_significant: usize,
    pub averaging: Averaging,
    /// Compute feature importance on the whole dataset instead of only the
    /// training split. Leaks test information; off by default.
    pub paper_faithful: bool,
    /// Feature columns whose missing fraction exceeds this are dropped.
    pub missing_threshold: f64,
    /// Train forests across threads. Results are identical either way.
    pub parallel: bool,
    pub source: DataSource,
    pub out_dir: PathBuf,
    pub models: ModelParams,
}

impl ExperimentConfig {
    pub fn with_source(source: DataSource) -> Self {
        ExperimentConfig {
            seed: 0,
            train_fraction: 0.7,
            k_significant: 20,
            averaging: Averaging::Weighted,
            paper_faithful: false,
            missing_threshold: 0.5,
            parallel: true,
            source,
            out_dir: PathBuf::from("out"),
            models: ModelParams::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut seed = 0u64;
        let mut train_fraction = 0.7f64;
        let mut k_significant = 20usize;
        let mut averaging = Averaging::Weighted;
        let mut paper_faithful = false;
        let mut missing_threshold = 0.5f64;
        let mut parallel = true;
        let mut out_dir = PathBuf::from("out");
        let mut models = ModelParams::default();

        let mut csv_path: Option<PathBuf> = None;
        let mut schema = SchemaSource::Builtin;
        let mut classes: Option<Vec<i64>> = None;
        let mut synth: Option<SynthSpec> = None;
        let mut missing_rate = 0.0f64;

        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .with_context(|| format!("line {lineno}: unterminated section header"))?;
                section = name.trim().to_string();
                match section.as_str() {
                    "experiment" | "data" | "output" | "models.voting" | "models.rf"
                    | "models.adaboost" | "models.extratrees" | "models.gbm" => {}
                    "synth" => {
                        synth.get_or_insert_with(SynthSpec::default);
                    }
                    other => bail!("line {lineno}: unknown section [{other}]"),
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {lineno}: expected 'key = value'"))?;
            let key = key.trim();
            let value = value.trim();
            let err = |what: &str| format!("line {lineno}: {what} '{key} = {value}'");

            match (section.as_str(), key) {
                ("experiment", "seed") => seed = value.parse().with_context(|| err("bad seed"))?,
                ("experiment", "train_fraction") => {
                    train_fraction = value.parse().with_context(|| err("bad fraction"))?
                }
                ("experiment", "k_significant") => {
                    k_significant = value.parse().with_context(|| err("bad count"))?
                }
                ("experiment", "averaging") => averaging = parse_averaging(value)?,
                ("experiment", "paper_faithful") => {
                    paper_faithful = parse_bool(value).with_context(|| err("bad boolean"))?
                }
                ("experiment", "missing_threshold") => {
                    missing_threshold = value.parse().with_context(|| err("bad fraction"))?
                }
                ("experiment", "parallel") => {
                    parallel = parse_bool(value).with_context(|| err("bad boolean"))?
                }
                ("data", "csv") => csv_path = Some(PathBuf::from(value)),
                ("data", "schema") => {
                    schema = if value == "builtin" {
                        SchemaSource::Builtin
                    } else {
                        SchemaSource::Path(PathBuf::from(value))
                    }
                }
                ("data", "classes") => {
                    classes = Some(parse_classes(value).with_context(|| err("bad class list"))?)
                }
                ("synth", "missing_rate") => {
                    missing_rate = value.parse().with_context(|| err("bad rate"))?
                }
                ("synth", _) => {
                    let spec = synth.as_mut().expect("section seen");
                    apply_synth_key(spec, key, value)
                        .with_context(|| format!("line {lineno}: [synth] {key}"))?;
                }
                ("output", "dir") => out_dir = PathBuf::from(value),
                ("models.voting", "learning_rate") => {
                    models.sgd.learning_rate = value.parse().with_context(|| err("bad rate"))?
                }
                ("models.voting", "epochs") => {
                    models.sgd.epochs = value.parse().with_context(|| err("bad count"))?
                }
                ("models.voting", "batch_size") => {
                    models.sgd.batch_size = value.parse().with_context(|| err("bad count"))?
                }
                ("models.voting", "l2") => {
                    models.sgd.l2 = value.parse().with_context(|| err("bad penalty"))?
                }
                ("models.rf", _) => apply_forest_key(&mut models.rf, key, value)
                    .with_context(|| format!("line {lineno}: [models.rf] {key}"))?,
                ("models.extratrees", _) => apply_forest_key(&mut models.extratrees, key, value)
                    .with_context(|| format!("line {lineno}: [models.extratrees] {key}"))?,
                ("models.adaboost", "rounds") => {
                    models.adaboost_rounds = value.parse().with_context(|| err("bad count"))?
                }
                ("models.gbm", "rounds") => {
                    models.gbm.rounds = value.parse().with_context(|| err("bad count"))?
                }
                ("models.gbm", "shrinkage") => {
                    models.gbm.shrinkage = value.parse().with_context(|| err("bad shrinkage"))?
                }
                ("models.gbm", "max_depth") => {
                    models.gbm.tree.max_depth = value.parse().with_context(|| err("bad depth"))?
                }
                ("", _) => bail!("line {lineno}: '{key}' appears before any [section]"),
                (section, key) => bail!("line {lineno}: unknown key '{key}' in [{section}]"),
            }
        }

        let source = match (csv_path, synth) {
            (Some(_), Some(_)) => bail!("config declares both [data] csv and [synth] sources"),
            (Some(data), None) => DataSource::Csv { data, schema, classes },
            (None, Some(spec)) => DataSource::Synth { spec, missing_rate },
            (None, None) => bail!("config declares no data source ([data] csv or [synth])"),
        };

        let mut cfg = ExperimentConfig::with_source(source);
        cfg.seed = seed;
        cfg.train_fraction = train_fraction;
        cfg.k_significant = k_significant;
        cfg.averaging = averaging;
        cfg.paper_faithful = paper_faithful;
        cfg.missing_threshold = missing_threshold;
        cfg.parallel = parallel;
        cfg.out_dir = out_dir;
        cfg.models = models;
        Ok(cfg)
    }
}

fn apply_forest_key(cfg: &mut ForestConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "trees" => cfg.n_trees = value.parse()?,
        "max_depth" => cfg.tree.max_depth = value.parse()?,
        "min_samples_split" => cfg.tree.min_samples_split = value.parse()?,
        "min_leaf" => cfg.tree.min_leaf = value.parse()?,
        other => bail!("unknown key '{other}'"),
    }
    Ok(())
}

fn apply_synth_key(spec: &mut SynthSpec, key: &str, value: &str) -> Result<()> {
    match key {
        "rows" => spec.n_rows = value.parse()?,
        "informative" => spec.n_informative = value.parse()?,
        "noise" => spec.n_noise = value.parse()?,
        "classes" => spec.n_classes = value.parse()?,
        "class_weights" => spec.class_weights = parse_weights(value)?,
        "categorical_fraction" => spec.categorical_fraction = value.parse()?,
        "noise_heavy_fraction" => spec.noise_heavy_row_fraction = value.parse()?,
        "seed" => spec.seed = value.parse()?,
        other => bail!("unknown key '{other}'"),
    }
    Ok(())
}

pub fn parse_weights(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad class weight '{t}'"))
        })
        .collect()
}

pub fn parse_classes(value: &str) -> Result<Vec<i64>> {
    value
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .with_context(|| format!("bad class label '{t}'"))
        })
        .collect()
}

pub fn parse_averaging(value: &str) -> Result<Averaging> {
    match value {
        "macro" => Ok(Averaging::Macro),
        "weighted" => Ok(Averaging::Weighted),
        other => bail!("averaging must be 'macro' or 'weighted', got '{other}'"),
    }
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => bail!("expected true or false, got '{other}'"),
    }
}
