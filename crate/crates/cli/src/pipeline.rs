//! The two-phase experiment pipeline shared by `experiment`, `train`, and
//! `importance`: ingest -> preprocess -> encode -> split -> phase 1 (all
//! features) -> feature importance -> top-k selection -> phase 2 (projected
//! features). Every random decision draws from a stream derived from the
//! master seed, so a (config, seed) pair fully determines the result.

use std::collections::HashMap;
use std::time::Instant;

use accsev_core::data::{encode, train_test_split, Dataset, FeatureMatrix};
use accsev_core::ensemble::{
    fit_adaboost, fit_extra_trees, fit_gbm, fit_random_forest, fit_voting, AdaBoostConfig,
    EnsembleModel, ForestConfig, GbmConfig, ModelKind,
};
use accsev_core::importance::{permutation_importance, select_top_k, FeatureImportance};
use accsev_core::linear::SgdConfig;
use accsev_core::metrics::{Averaging, ConfusionMatrix, EvalSummary};
use accsev_core::seeding::derive_seed;
use accsev_core::synth;
use anyhow::{Context, Result};

use crate::config::{DataSource, ExperimentConfig, ModelParams};

/// Seed streams: one reserved lane per random decision. Keeping them fixed
/// means adding a stage never shifts another stage's randomness.
pub const STREAM_SPLIT: u64 = 1;
pub const STREAM_PHASE1_BASE: u64 = 10;
pub const STREAM_IMPORTANCE_FOREST: u64 = 20;
pub const STREAM_IMPORTANCE_PERMUTE: u64 = 21;
pub const STREAM_PHASE2_BASE: u64 = 30;
pub const STREAM_MISSING_INJECTION: u64 = 50;

/// Wraps a pipeline stage so any error names the stage that failed.
pub fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().with_context(|| format!("stage '{name}'"))
}

/// Loads rows from the configured source (CSV file or generator).
pub fn load_dataset(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Csv {
            data,
            schema,
            classes,
        } => {
            let schema = schema.load()?;
            let dataset = Dataset::load_csv(data, &schema)
                .with_context(|| format!("loading {}", data.display()))?;
            match classes {
                Some(classes) => Ok(dataset.with_declared_classes(classes.clone())?),
                None => Ok(dataset),
            }
        }
        DataSource::Synth { spec, missing_rate } => {
            let generated = synth::generate(spec)?;
            if *missing_rate > 0.0 {
                let rates: HashMap<String, f64> = generated
                    .dataset
                    .schema()
                    .feature_columns()
                    .map(|c| (c.name.clone(), *missing_rate))
                    .collect();
                let seed = derive_seed(spec.seed, STREAM_MISSING_INJECTION);
                Ok(synth::inject_missing(&generated.dataset, &rates, seed)?)
            } else {
                Ok(generated.dataset)
            }
        }
    }
}

/// Fits one of the five models with the hyperparameters from `params`.
pub fn fit_model(
    kind: ModelKind,
    m: &FeatureMatrix,
    params: &ModelParams,
    seed: u64,
    parallel: bool,
) -> accsev_core::Result<EnsembleModel> {
    match kind {
        ModelKind::Voting => {
            let cfg = SgdConfig { seed, ..params.sgd };
            Ok(EnsembleModel::Voting(fit_voting(m, &cfg)?))
        }
        ModelKind::RandomForest => {
            let cfg = ForestConfig {
                seed,
                parallel,
                ..params.rf
            };
            Ok(EnsembleModel::Forest(fit_random_forest(m, &cfg)?))
        }
        ModelKind::AdaBoost => {
            let cfg = AdaBoostConfig {
                rounds: params.adaboost_rounds,
                seed,
            };
            Ok(EnsembleModel::AdaBoost(fit_adaboost(m, &cfg)?))
        }
        ModelKind::ExtraTrees => {
            let cfg = ForestConfig {
                seed,
                parallel,
                ..params.extratrees
            };
            Ok(EnsembleModel::Forest(fit_extra_trees(m, &cfg)?))
        }
        ModelKind::Gbm => {
            let cfg = GbmConfig { seed, ..params.gbm };
            Ok(EnsembleModel::Gbm(fit_gbm(m, &cfg)?))
        }
    }
}

/// One model's test-set evaluation within a phase.
#[derive(Debug, Clone)]
pub struct PhaseResult {
    pub kind: ModelKind,
    pub summary: EvalSummary,
    pub fit_ms: u128,
    pub eval_ms: u128,
}

/// Fits and evaluates all five models in the fixed table order.
pub fn run_phase(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    params: &ModelParams,
    master_seed: u64,
    stream_base: u64,
    parallel: bool,
    averaging: Averaging,
) -> Result<Vec<PhaseResult>> {
    let mut results = Vec::with_capacity(ModelKind::ALL.len());
    for (i, kind) in ModelKind::ALL.into_iter().enumerate() {
        let seed = derive_seed(master_seed, stream_base + i as u64);
        let started = Instant::now();
        let model = fit_model(kind, train, params, seed, parallel)
            .with_context(|| format!("fitting {}", kind.key()))?;
        let fit_ms = started.elapsed().as_millis();

        let started = Instant::now();
        let summary = evaluate(&model, test, averaging)
            .with_context(|| format!("evaluating {}", kind.key()))?;
        let eval_ms = started.elapsed().as_millis();

        results.push(PhaseResult {
            kind,
            summary,
            fit_ms,
            eval_ms,
        });
    }
    Ok(results)
}

/// Test-set confusion-matrix summary for a fitted model.
pub fn evaluate(
    model: &EnsembleModel,
    test: &FeatureMatrix,
    averaging: Averaging,
) -> Result<EvalSummary> {
    let rows: Vec<&[f64]> = (0..test.n_rows()).map(|i| test.row(i)).collect();
    let predicted = model.predict_rows(&rows)?;
    let cm = ConfusionMatrix::from_labels(test.labels(), &predicted, test.n_classes())?;
    Ok(cm.summary(averaging))
}

/// Everything the report files need from one experiment run.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub class_values: Vec<i64>,
    pub dropped_columns: Vec<String>,
    pub dropped_rows: usize,
    pub n_features_all: usize,
    pub n_features_selected: usize,
    pub phase1: Vec<PhaseResult>,
    pub phase2: Vec<PhaseResult>,
    /// Every feature's importance, ranked best first.
    pub importance: Vec<FeatureImportance>,
    /// The top-k feature names in rank order.
    pub selected: Vec<String>,
    pub stage_ms: Vec<(&'static str, u128)>,
}

/// Runs the full two-phase experiment. Pure computation: writes nothing.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let mut stage_ms: Vec<(&'static str, u128)> = Vec::new();
    let mut timed = |name: &'static str, started: Instant| {
        stage_ms.push((name, started.elapsed().as_millis()));
    };

    let started = Instant::now();
    let raw = stage("ingest", || load_dataset(&cfg.source))?;
    timed("ingest", started);

    let started = Instant::now();
    let pre = stage("preprocess", || {
        Ok(raw.preprocess(cfg.missing_threshold)?)
    })?;
    timed("preprocess", started);

    let started = Instant::now();
    let matrix = stage("encode", || Ok(encode(&pre.dataset)?))?;
    timed("encode", started);

    let started = Instant::now();
    let (train, test) = stage("split", || {
        Ok(train_test_split(
            &matrix,
            cfg.train_fraction,
            derive_seed(cfg.seed, STREAM_SPLIT),
        )?)
    })?;
    timed("split", started);

    let started = Instant::now();
    let phase1 = stage("phase-1 training", || {
        run_phase(
            &train,
            &test,
            &cfg.models,
            cfg.seed,
            STREAM_PHASE1_BASE,
            cfg.parallel,
            cfg.averaging,
        )
    })?;
    timed("phase-1 training", started);

    let started = Instant::now();
    let importance = stage("importance", || {
        compute_importance(cfg, &matrix, &train)
    })?;
    timed("importance", started);

    let started = Instant::now();
    let (selected, train2, test2) = stage("selection", || {
        let top = select_top_k(&importance, cfg.k_significant)?;
        let names: Vec<String> = top.into_iter().map(|f| f.name).collect();
        let train2 = accsev_core::importance::project(&train, &names)?;
        let test2 = accsev_core::importance::project(&test, &names)?;
        Ok((names, train2, test2))
    })?;
    timed("selection", started);

    let started = Instant::now();
    let phase2 = stage("phase-2 training", || {
        run_phase(
            &train2,
            &test2,
            &cfg.models,
            cfg.seed,
            STREAM_PHASE2_BASE,
            cfg.parallel,
            cfg.averaging,
        )
    })?;
    timed("phase-2 training", started);

    let mut ranked = importance;
    ranked.sort_by(|a, b| {
        b.normalized
            .partial_cmp(&a.normalized)
            .expect("scores are finite")
            .then(a.feature_index.cmp(&b.feature_index))
    });

    Ok(ExperimentOutcome {
        n_rows: matrix.n_rows(),
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        class_values: matrix.class_values().to_vec(),
        dropped_columns: pre.dropped_columns,
        dropped_rows: pre.dropped_rows,
        n_features_all: matrix.n_features(),
        n_features_selected: train2.n_features(),
        phase1,
        phase2,
        importance: ranked,
        selected,
        stage_ms,
    })
}

/// Permutation importance from a dedicated random forest. The default fits
/// on the training split only; `paper_faithful` uses every row, which leaks
/// test information into the feature ranking.
pub fn compute_importance(
    cfg: &ExperimentConfig,
    full: &FeatureMatrix,
    train: &FeatureMatrix,
) -> Result<Vec<FeatureImportance>> {
    let basis = if cfg.paper_faithful {
        eprintln!(
            "warning: --paper-faithful computes feature importance on the whole \
             dataset, so the ranking sees the test rows"
        );
        full
    } else {
        train
    };
    let forest_cfg = ForestConfig {
        seed: derive_seed(cfg.seed, STREAM_IMPORTANCE_FOREST),
        parallel: cfg.parallel,
        bootstrap: true,
        ..cfg.models.rf
    };
    let forest = fit_random_forest(basis, &forest_cfg)?;
    let scores = permutation_importance(
        &forest,
        basis,
        derive_seed(cfg.seed, STREAM_IMPORTANCE_PERMUTE),
    )?;
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use accsev_core::synth::SynthSpec;

    fn tiny_config() -> ExperimentConfig {
        let spec = SynthSpec {
            n_rows: 120,
            n_informative: 4,
            n_noise: 4,
            n_classes: 3,
            class_weights: vec![0.4, 0.3, 0.3],
            categorical_fraction: 0.25,
            noise_heavy_row_fraction: 0.0,
            seed: 5,
        };
        let mut cfg = ExperimentConfig::with_source(DataSource::Synth {
            spec,
            missing_rate: 0.0,
        });
        cfg.seed = 5;
        cfg.k_significant = 4;
        cfg.models.rf.n_trees = 15;
        cfg.models.extratrees.n_trees = 15;
        cfg.models.adaboost_rounds = 10;
        cfg.models.gbm.rounds = 10;
        cfg.models.sgd.epochs = 10;
        cfg
    }

    #[test]
    fn experiment_produces_five_rows_per_phase() {
        let outcome = run_experiment(&tiny_config()).unwrap();
        assert_eq!(outcome.phase1.len(), 5);
        assert_eq!(outcome.phase2.len(), 5);
        let order: Vec<ModelKind> = outcome.phase1.iter().map(|r| r.kind).collect();
        assert_eq!(order, ModelKind::ALL.to_vec());
        assert_eq!(outcome.selected.len(), 4);
        assert_eq!(outcome.n_features_selected, 4);
        assert_eq!(outcome.n_train + outcome.n_test, outcome.n_rows);
        assert_eq!(outcome.class_values, vec![1, 2, 3]);
        // Rank order: best scores first.
        for pair in outcome.importance.windows(2) {
            assert!(pair[0].normalized >= pair[1].normalized);
        }
    }

    #[test]
    fn identical_configs_give_identical_outcomes() {
        let a = run_experiment(&tiny_config()).unwrap();
        let b = run_experiment(&tiny_config()).unwrap();
        for (x, y) in a.phase1.iter().zip(&b.phase1) {
            assert_eq!(x.summary, y.summary);
        }
        for (x, y) in a.phase2.iter().zip(&b.phase2) {
            assert_eq!(x.summary, y.summary);
        }
        assert_eq!(a.selected, b.selected);
    }

    #[test]
    fn parallel_and_sequential_runs_agree() {
        let mut cfg = tiny_config();
        cfg.parallel = false;
        let seq = run_experiment(&cfg).unwrap();
        cfg.parallel = true;
        let par = run_experiment(&cfg).unwrap();
        for (x, y) in seq.phase1.iter().zip(&par.phase1) {
            assert_eq!(x.summary, y.summary);
        }
        assert_eq!(seq.selected, par.selected);
    }

    #[test]
    fn selection_rejects_oversized_k() {
        let mut cfg = tiny_config();
        cfg.k_significant = 99;
        let err = run_experiment(&cfg).unwrap_err();
        assert!(format!("{err:#}").contains("stage 'selection'"));
    }

    #[test]
    fn missing_rate_injects_missing_cells() {
        let spec = SynthSpec {
            n_rows: 200,
            n_informative: 3,
            n_noise: 3,
            n_classes: 2,
            class_weights: vec![0.5, 0.5],
            categorical_fraction: 0.0,
            noise_heavy_row_fraction: 0.0,
            seed: 9,
        };
        let clean = load_dataset(&DataSource::Synth {
            spec: spec.clone(),
            missing_rate: 0.0,
        })
        .unwrap();
        let holed = load_dataset(&DataSource::Synth {
            spec,
            missing_rate: 0.2,
        })
        .unwrap();
        let clean_total: f64 = clean.missing_fractions().iter().map(|(_, f)| f).sum();
        assert_eq!(clean_total, 0.0);
        let mean: f64 = holed.missing_fractions().iter().map(|(_, f)| f).sum::<f64>() / 6.0;
        assert!((mean - 0.2).abs() < 0.08, "mean injected rate {mean}");
    }
}
