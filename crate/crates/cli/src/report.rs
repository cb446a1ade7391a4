//! Report rendering. Everything deterministic goes into `report.txt`,
//! `results.csv`, `importance.csv`, and `selected_features.txt`; wall-clock
//! timings are kept apart in `timings.txt` so the deterministic files are
//! byte-identical across repeated runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use accsev_core::ensemble::ModelKind;
use accsev_core::metrics::round_half_up;
use anyhow::{Context, Result};

use crate::config::{DataSource, ExperimentConfig, SchemaSource};
use crate::pipeline::{ExperimentOutcome, PhaseResult};

/// Model names as the report tables print them.
pub fn table_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Voting => "Voting Classifier",
        ModelKind::RandomForest => "Random Forest",
        ModelKind::AdaBoost => "AdaBoost Classifier",
        ModelKind::ExtraTrees => "Extra Tree Classifier",
        ModelKind::Gbm => "Gradient Boosting Machine",
    }
}

pub const TABLE_HEADER: &str = "Models\tAccuracy\tPrecision\tRecall\tF-Score";

/// One five-row result table, tab-separated, scores rounded to 3 decimals.
pub fn render_table(results: &[PhaseResult]) -> String {
    let mut out = String::new();
    out.push_str(TABLE_HEADER);
    out.push('\n');
    for r in results {
        let s = &r.summary;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            table_name(r.kind),
            round_half_up(s.accuracy, 3),
            round_half_up(s.precision, 3),
            round_half_up(s.recall, 3),
            round_half_up(s.f_score, 3),
        )
        .expect("writing to a string");
    }
    out
}

fn describe_source(source: &DataSource) -> String {
    match source {
        DataSource::Csv { data, schema, .. } => {
            let schema = match schema {
                SchemaSource::Builtin => "builtin".to_string(),
                SchemaSource::Path(p) => p.display().to_string(),
            };
            format!("csv {} (schema {schema})", data.display())
        }
        DataSource::Synth { spec, missing_rate } => format!(
            "synthetic ({} rows, {} informative + {} noise features, {} classes, \
             noise-heavy fraction {}, missing rate {}, seed {})",
            spec.n_rows,
            spec.n_informative,
            spec.n_noise,
            spec.n_classes,
            spec.noise_heavy_row_fraction,
            missing_rate,
            spec.seed
        ),
    }
}

fn join_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none".to_string()
    } else {
        items.join(", ")
    }
}

/// The main human-readable report.
pub fn render_report(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> String {
    let mut out = String::new();
    out.push_str("Road Accident Severity: Two-Phase Ensemble Experiment\n");
    out.push_str("=====================================================\n\n");

    out.push_str("Configuration\n");
    out.push_str("-------------\n");
    writeln!(out, "source: {}", describe_source(&cfg.source)).unwrap();
    writeln!(out, "seed: {}", cfg.seed).unwrap();
    writeln!(out, "train fraction: {}", cfg.train_fraction).unwrap();
    writeln!(out, "significant features (k): {}", cfg.k_significant).unwrap();
    writeln!(out, "averaging: {}", averaging_name(cfg)).unwrap();
    writeln!(out, "paper-faithful importance: {}", cfg.paper_faithful).unwrap();
    writeln!(out, "missing-column threshold: {}", cfg.missing_threshold).unwrap();
    writeln!(
        out,
        "models: voting(lr {}, epochs {}, batch {}, l2 {}), rf({} trees), \
         adaboost({} rounds), extratrees({} trees), gbm({} rounds, shrinkage {})",
        cfg.models.sgd.learning_rate,
        cfg.models.sgd.epochs,
        cfg.models.sgd.batch_size,
        cfg.models.sgd.l2,
        cfg.models.rf.n_trees,
        cfg.models.adaboost_rounds,
        cfg.models.extratrees.n_trees,
        cfg.models.gbm.rounds,
        cfg.models.gbm.shrinkage,
    )
    .unwrap();
    out.push('\n');

    out.push_str("Data\n");
    out.push_str("----\n");
    writeln!(
        out,
        "rows: {} (train {}, test {})",
        outcome.n_rows, outcome.n_train, outcome.n_test
    )
    .unwrap();
    let classes: Vec<String> = outcome.class_values.iter().map(|c| c.to_string()).collect();
    writeln!(out, "classes: {}", classes.join(", ")).unwrap();
    writeln!(
        out,
        "dropped columns (missing fraction above threshold): {}",
        join_or_none(&outcome.dropped_columns)
    )
    .unwrap();
    writeln!(out, "dropped rows with missing cells: {}", outcome.dropped_rows).unwrap();
    out.push('\n');

    writeln!(
        out,
        "Phase 1: all features ({} encoded columns)",
        outcome.n_features_all
    )
    .unwrap();
    out.push_str(&render_table(&outcome.phase1));
    out.push('\n');

    writeln!(
        out,
        "Selected features (top {} by permutation importance)",
        outcome.selected.len()
    )
    .unwrap();
    for (rank, name) in outcome.selected.iter().enumerate() {
        writeln!(out, "{:>3}. {}", rank + 1, name).unwrap();
    }
    out.push('\n');

    writeln!(
        out,
        "Phase 2: selected features ({} encoded columns)",
        outcome.n_features_selected
    )
    .unwrap();
    out.push_str(&render_table(&outcome.phase2));
    out
}

/// Full-precision per-model results for downstream tooling.
pub fn render_results_csv(outcome: &ExperimentOutcome) -> String {
    let mut out = String::from("phase,model,accuracy,precision,recall,f_score\n");
    for (phase, results) in [(1, &outcome.phase1), (2, &outcome.phase2)] {
        for r in results {
            let s = &r.summary;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                phase,
                r.kind.key(),
                s.accuracy,
                s.precision,
                s.recall,
                s.f_score
            )
            .unwrap();
        }
    }
    out
}

/// Every feature's importance in rank order, full precision.
pub fn render_importance_csv(outcome: &ExperimentOutcome) -> String {
    let mut out = String::from("rank,feature,raw,normalized\n");
    for (rank, f) in outcome.importance.iter().enumerate() {
        writeln!(out, "{},{},{},{}", rank + 1, f.name, f.raw, f.normalized).unwrap();
    }
    out
}

pub fn render_selected(outcome: &ExperimentOutcome) -> String {
    let mut out = String::new();
    for name in &outcome.selected {
        out.push_str(name);
        out.push('\n');
    }
    out
}

/// Wall-clock timings; nondeterministic by nature, hence a separate file.
pub fn render_timings(outcome: &ExperimentOutcome) -> String {
    let mut out = String::from("step\tms\n");
    for (name, ms) in &outcome.stage_ms {
        writeln!(out, "{name}\t{ms}").unwrap();
    }
    for (phase, results) in [(1, &outcome.phase1), (2, &outcome.phase2)] {
        for r in results {
            writeln!(out, "phase-{} fit {}\t{}", phase, r.kind.key(), r.fit_ms).unwrap();
            writeln!(out, "phase-{} eval {}\t{}", phase, r.kind.key(), r.eval_ms).unwrap();
        }
    }
    out
}

/// Writes all report files, removing anything already written if a write
/// fails so the output directory never holds a partial report.
pub fn write_files(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, content) {
            for done in &written {
                let _ = fs::remove_file(done);
            }
            return Err(e).with_context(|| format!("writing {}", path.display()));
        }
        written.push(path);
    }
    Ok(written)
}

fn averaging_name(cfg: &ExperimentConfig) -> &'static str {
    match cfg.averaging {
        accsev_core::metrics::Averaging::Macro => "macro",
        accsev_core::metrics::Averaging::Weighted => "weighted",
    }
}
