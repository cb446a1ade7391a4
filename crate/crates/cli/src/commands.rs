//! The six subcommand implementations. Each runs its pipeline stages through
//! [`stage`] so a failure reports which stage died, and each computes every
//! output in memory before touching the filesystem.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use accsev_core::data::{encode, encode_with_map, train_test_split, ColumnKind, Dataset};
use accsev_core::ensemble::ModelKind;
use accsev_core::importance::select_top_k;
use accsev_core::metrics::{round_half_up, ConfusionMatrix};
use accsev_core::model_io::{load_model_file, save_model_file, ModelFile};
use accsev_core::seeding::derive_seed;
use accsev_core::synth::{self, SynthSpec};
use anyhow::{anyhow, bail, Context, Result};

use crate::config::{DataSource, ExperimentConfig};
use crate::pipeline::{
    compute_importance, fit_model, load_dataset, run_experiment, stage, STREAM_MISSING_INJECTION,
    STREAM_PHASE1_BASE, STREAM_SPLIT,
};
use crate::report::{
    render_importance_csv, render_report, render_results_csv, render_selected, render_table,
    render_timings, table_name, write_files,
};

/// `experiment`: the full two-phase protocol, reported to `--out`.
pub fn cmd_experiment(cfg: &ExperimentConfig) -> Result<()> {
    let outcome = run_experiment(cfg)?;
    let files = vec![
        ("report.txt", render_report(cfg, &outcome)),
        ("results.csv", render_results_csv(&outcome)),
        ("importance.csv", render_importance_csv(&outcome)),
        ("selected_features.txt", render_selected(&outcome)),
        ("timings.txt", render_timings(&outcome)),
    ];
    stage("report", || write_files(&cfg.out_dir, &files))?;

    println!(
        "Phase 1: all features ({} encoded columns)",
        outcome.n_features_all
    );
    print!("{}", render_table(&outcome.phase1));
    println!();
    println!(
        "Phase 2: selected features ({} encoded columns)",
        outcome.n_features_selected
    );
    print!("{}", render_table(&outcome.phase2));
    println!();
    println!("report files written to {}", cfg.out_dir.display());
    Ok(())
}

pub struct StatsArgs {
    pub source: DataSource,
    /// Categorical column for the top-5 value counts; `None` means the
    /// default, which is skipped with a note when the schema lacks it.
    pub column: Option<String>,
    pub out: PathBuf,
}

const DEFAULT_STATS_COLUMN: &str = "Weather_Condition";

/// `stats`: class counts, per-column missing ratios, and top-5 value counts
/// of a designated categorical column, as plot-ready TSV files.
pub fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let dataset = stage("ingest", || load_dataset(&args.source))?;

    let mut class_counts = String::from("class\tcount\n");
    for (class, count) in dataset.class_counts() {
        writeln!(class_counts, "{class}\t{count}").unwrap();
    }

    let mut missing = String::from("column\tmissing_fraction\n");
    for (name, fraction) in dataset.missing_fractions() {
        writeln!(missing, "{name}\t{fraction}").unwrap();
    }
    let target = &dataset.schema().target().name;
    let unlabeled = dataset.labels().iter().filter(|l| l.is_none()).count();
    writeln!(
        missing,
        "{target}\t{}",
        unlabeled as f64 / dataset.n_rows() as f64
    )
    .unwrap();

    let mut files = vec![
        ("class_counts.tsv", class_counts),
        ("missing_ratios.tsv", missing),
    ];
    let designated = args.column.as_deref().unwrap_or(DEFAULT_STATS_COLUMN);
    match top_categories(&dataset, designated) {
        Ok(table) => files.push(("top_categories.tsv", table)),
        // The built-in default column may simply not exist in this schema;
        // an explicitly requested column must.
        Err(e) if args.column.is_none() => {
            println!("note: skipping top_categories.tsv ({e})");
        }
        Err(e) => return Err(e).context("stage 'stats'"),
    }

    stage("report", || write_files(&args.out, &files))?;
    println!(
        "wrote {} stats files to {}",
        files.len(),
        args.out.display()
    );
    Ok(())
}

/// Top-5 value counts (count descending, then value ascending) of a
/// categorical column. Fewer than 5 distinct values yield fewer rows.
fn top_categories(dataset: &Dataset, name: &str) -> Result<String> {
    let column = dataset
        .column_by_name(name)
        .ok_or_else(|| anyhow!("column '{name}' is not a feature column of this dataset"))?;
    if column.spec.kind != ColumnKind::Categorical {
        bail!("column '{name}' is {}, not categorical", column.spec.kind);
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for row in 0..dataset.n_rows() {
        if !column.is_missing(row) {
            *counts.entry(column.render(row)).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(5);

    let mut out = String::from("value\tcount\n");
    for (value, count) in ranked {
        writeln!(out, "{value}\t{count}").unwrap();
    }
    Ok(out)
}

/// `train`: fit one named model on the full (preprocessed) dataset and
/// persist it with everything prediction needs.
pub fn cmd_train(kind: ModelKind, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let raw = stage("ingest", || load_dataset(&cfg.source))?;
    let pre = stage("preprocess", || Ok(raw.preprocess(cfg.missing_threshold)?))?;
    let matrix = stage("encode", || Ok(encode(&pre.dataset)?))?;

    let index = ModelKind::ALL
        .iter()
        .position(|k| *k == kind)
        .expect("kind comes from ALL");
    let seed = derive_seed(cfg.seed, STREAM_PHASE1_BASE + index as u64);
    let model = stage("fit", || {
        Ok(fit_model(kind, &matrix, &cfg.models, seed, cfg.parallel)?)
    })?;

    let accuracy = stage("evaluate", || {
        let rows: Vec<&[f64]> = (0..matrix.n_rows()).map(|i| matrix.row(i)).collect();
        let predicted = model.predict_rows(&rows)?;
        let cm = ConfusionMatrix::from_labels(matrix.labels(), &predicted, matrix.n_classes())?;
        Ok(cm.accuracy())
    })?;

    let file = ModelFile {
        model,
        schema: pre.dataset.schema().clone(),
        encoding: matrix.encoding().clone(),
        feature_names: matrix.feature_names().to_vec(),
        class_values: matrix.class_values().to_vec(),
    };
    stage("save", || Ok(save_model_file(out, &file)?))?;

    println!(
        "trained {} on {} rows x {} encoded features; training accuracy {}",
        table_name(kind),
        matrix.n_rows(),
        matrix.n_features(),
        round_half_up(accuracy, 3)
    );
    if !pre.dropped_columns.is_empty() {
        println!(
            "dropped columns over the missing threshold: {}",
            pre.dropped_columns.join(", ")
        );
    }
    println!("model written to {}", out.display());
    Ok(())
}

/// `predict`: load a model file, score a CSV, and write one predicted
/// severity per surviving row.
pub fn cmd_predict(model_path: &Path, data: &Path, out: &Path) -> Result<()> {
    let file = stage("load model", || Ok(load_model_file(model_path)?))?;

    let (complete, dropped) = stage("ingest", || {
        let raw = Dataset::load_csv_for_prediction(data, &file.schema)
            .with_context(|| format!("loading {}", data.display()))?;
        Ok(raw.complete_feature_rows()?)
    })?;
    if dropped > 0 {
        eprintln!("warning: skipped {dropped} rows with missing feature cells");
    }

    let predictions = stage("predict", || {
        let encoded = encode_with_map(&complete, &file.encoding)?;
        let positions = encoded.column_positions(&file.feature_names)?;
        let mut predictions = Vec::with_capacity(encoded.n_rows());
        for i in 0..encoded.n_rows() {
            let row = encoded.row(i);
            let x: Vec<f64> = positions.iter().map(|&p| row[p]).collect();
            let class_index = file.model.predict(&x)?;
            predictions.push(file.class_values[class_index]);
        }
        Ok(predictions)
    })?;

    let mut content = format!("row,{}\n", file.schema.target().name);
    for (row_id, prediction) in complete.row_ids().iter().zip(&predictions) {
        writeln!(content, "{row_id},{prediction}").unwrap();
    }
    stage("write", || {
        fs::write(out, &content).with_context(|| format!("writing {}", out.display()))
    })?;

    println!(
        "wrote {} predictions to {}",
        predictions.len(),
        out.display()
    );
    Ok(())
}

/// `importance`: rank features by permutation importance and report the
/// top-k set, without running phase-2 training.
pub fn cmd_importance(cfg: &ExperimentConfig) -> Result<()> {
    let raw = stage("ingest", || load_dataset(&cfg.source))?;
    let pre = stage("preprocess", || Ok(raw.preprocess(cfg.missing_threshold)?))?;
    let matrix = stage("encode", || Ok(encode(&pre.dataset)?))?;
    let (train, _test) = stage("split", || {
        Ok(train_test_split(
            &matrix,
            cfg.train_fraction,
            derive_seed(cfg.seed, STREAM_SPLIT),
        )?)
    })?;
    let scores = stage("importance", || compute_importance(cfg, &matrix, &train))?;
    let (ranked, selected) = stage("selection", || {
        let top = select_top_k(&scores, cfg.k_significant)?;
        let names: Vec<String> = top.iter().map(|f| f.name.clone()).collect();
        let mut ranked = scores.clone();
        ranked.sort_by(|a, b| {
            b.normalized
                .partial_cmp(&a.normalized)
                .expect("scores are finite")
                .then(a.feature_index.cmp(&b.feature_index))
        });
        Ok((ranked, names))
    })?;

    let mut importance_csv = String::from("rank,feature,raw,normalized\n");
    for (rank, f) in ranked.iter().enumerate() {
        writeln!(
            importance_csv,
            "{},{},{},{}",
            rank + 1,
            f.name,
            f.raw,
            f.normalized
        )
        .unwrap();
    }
    let mut selected_txt = String::new();
    for name in &selected {
        selected_txt.push_str(name);
        selected_txt.push('\n');
    }
    let files = vec![
        ("importance.csv", importance_csv),
        ("selected_features.txt", selected_txt),
    ];
    stage("report", || write_files(&cfg.out_dir, &files))?;

    println!("top {} features by permutation importance:", selected.len());
    for (rank, name) in selected.iter().enumerate() {
        println!("{:>3}. {}", rank + 1, name);
    }
    println!("importance files written to {}", cfg.out_dir.display());
    Ok(())
}

/// `synth`: generate a labeled dataset and write it in the same CSV format
/// the other commands ingest, plus its schema and the planted feature list.
pub fn cmd_synth(spec: &SynthSpec, missing_rate: f64, out: &Path) -> Result<()> {
    let generated = stage("generate", || {
        let generated = synth::generate(spec)?;
        if missing_rate > 0.0 {
            let rates: HashMap<String, f64> = generated
                .dataset
                .schema()
                .feature_columns()
                .map(|c| (c.name.clone(), missing_rate))
                .collect();
            let seed = derive_seed(spec.seed, STREAM_MISSING_INJECTION);
            let holed = synth::inject_missing(&generated.dataset, &rates, seed)?;
            Ok(synth::SynthData {
                dataset: holed,
                informative_columns: generated.informative_columns,
            })
        } else {
            Ok(generated)
        }
    })?;

    stage("write", || {
        fs::create_dir_all(out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        let data_path = out.join("data.csv");
        let schema_path = out.join("schema.txt");
        let features_path = out.join("informative_features.txt");
        let result = (|| -> Result<()> {
            generated.dataset.write_csv(&data_path)?;
            generated.dataset.schema().save(&schema_path)?;
            let mut informative = String::new();
            for name in &generated.informative_columns {
                informative.push_str(name);
                informative.push('\n');
            }
            fs::write(&features_path, informative)
                .with_context(|| format!("writing {}", features_path.display()))?;
            Ok(())
        })();
        if result.is_err() {
            for path in [&data_path, &schema_path, &features_path] {
                let _ = fs::remove_file(path);
            }
        }
        result
    })?;

    println!(
        "generated {} rows x {} features ({} classes) into {}",
        generated.dataset.n_rows(),
        generated.dataset.schema().columns().len() - 1,
        generated.dataset.classes().len(),
        out.display()
    );
    Ok(())
}
