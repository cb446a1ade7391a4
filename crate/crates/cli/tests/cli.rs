//! End-to-end tests of the `accsev` binary: command wiring, file outputs,
//! and user-facing error messages.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_accsev"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawn accsev");
    assert!(
        output.status.success(),
        "{cmd:?} failed; stderr:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn run_err(cmd: &mut Command) -> String {
    let output = cmd.output().expect("spawn accsev");
    assert!(
        !output.status.success(),
        "{cmd:?} unexpectedly succeeded; stdout:\n{}",
        String::from_utf8_lossy(&output.stdout)
    );
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).expect("write config");
    path
}

/// Generates a synthetic dataset on disk and returns (data.csv, schema.txt).
fn synth_dataset(dir: &Path, label: &str, config_body: &str) -> (PathBuf, PathBuf) {
    let config = write_config(dir, &format!("{label}.cfg"), config_body);
    let out = dir.join(label);
    run_ok(bin()
        .arg("synth")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    (out.join("data.csv"), out.join("schema.txt"))
}

const SEPARABLE: &str = "\
[experiment]
seed = 5

[synth]
rows = 200
informative = 6
noise = 2
classes = 2
class_weights = 0.5, 0.5
seed = 5
";

#[test]
fn train_then_predict_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (data, schema) = synth_dataset(dir.path(), "sep", SEPARABLE);
    let model = dir.path().join("model.txt");

    let out = run_ok(bin()
        .arg("train")
        .arg("rf")
        .arg("--data")
        .arg(&data)
        .arg("--schema")
        .arg(&schema)
        .arg("--seed")
        .arg("5")
        .arg("--out")
        .arg(&model));
    let text = stdout(&out);
    assert!(
        text.contains("training accuracy 1.000"),
        "separable data should train to accuracy 1.000; got:\n{text}"
    );

    let mut predictions = Vec::new();
    for name in ["p1.csv", "p2.csv"] {
        let path = dir.path().join(name);
        let out = run_ok(bin()
            .arg("predict")
            .arg(&model)
            .arg("--data")
            .arg(&data)
            .arg("--out")
            .arg(&path));
        assert!(stdout(&out).contains("wrote 200 predictions"));
        predictions.push(read(&path));
    }
    assert_eq!(
        predictions[0], predictions[1],
        "repeated predictions must be byte-identical"
    );

    // Training accuracy 1.000 means the predictions reproduce the labels.
    let data_text = read(&data);
    let labels: Vec<&str> = data_text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    let predicted: Vec<&str> = predictions[0]
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(predicted.len(), labels.len());
    assert_eq!(predicted, labels, "round-tripped predictions diverge from labels");
}

const WIDE: &str = "\
[experiment]
seed = 6

[synth]
rows = 80
informative = 5
noise = 5
classes = 2
class_weights = 0.5, 0.5
seed = 6

[models.rf]
trees = 5
";

const NARROW: &str = "\
[experiment]
seed = 6

[synth]
rows = 80
informative = 3
noise = 3
classes = 2
class_weights = 0.5, 0.5
seed = 6

[models.rf]
trees = 5
";

#[test]
fn predict_rejects_mismatched_features_naming_the_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (wide_data, wide_schema) = synth_dataset(dir.path(), "wide", WIDE);
    let (narrow_data, narrow_schema) = synth_dataset(dir.path(), "narrow", NARROW);

    let train = |data: &Path, schema: &Path, model: &Path, cfg: &Path| {
        run_ok(bin()
            .arg("train")
            .arg("rf")
            .arg("--data")
            .arg(data)
            .arg("--schema")
            .arg(schema)
            .arg("--config")
            .arg(cfg)
            .arg("--out")
            .arg(model));
    };
    let wide_cfg = write_config(dir.path(), "wide-train.cfg", WIDE);
    let narrow_cfg = write_config(dir.path(), "narrow-train.cfg", NARROW);
    let wide_model = dir.path().join("wide-model.txt");
    let narrow_model = dir.path().join("narrow-model.txt");
    train(&wide_data, &wide_schema, &wide_model, &wide_cfg);
    train(&narrow_data, &narrow_schema, &narrow_model, &narrow_cfg);

    // A model expecting more columns than the CSV has: missing columns named.
    let stderr = run_err(bin()
        .arg("predict")
        .arg(&wide_model)
        .arg("--data")
        .arg(&narrow_data)
        .arg("--out")
        .arg(dir.path().join("na.csv")));
    assert!(
        stderr.contains("header does not match schema"),
        "stderr: {stderr}"
    );
    assert!(
        stderr.contains("missing") && stderr.contains("sig_num_03"),
        "missing columns are not named: {stderr}"
    );

    // A CSV with more columns than the model consumes: extras named.
    let stderr = run_err(bin()
        .arg("predict")
        .arg(&narrow_model)
        .arg("--data")
        .arg(&wide_data)
        .arg("--out")
        .arg(dir.path().join("na.csv")));
    assert!(
        stderr.contains("header does not match schema"),
        "stderr: {stderr}"
    );
    assert!(
        stderr.contains("unexpected") && stderr.contains("sig_num_03"),
        "unexpected columns are not named: {stderr}"
    );
}

#[test]
fn unknown_model_name_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (data, schema) = synth_dataset(dir.path(), "narrow", NARROW);
    let stderr = run_err(bin()
        .arg("train")
        .arg("frobnicator")
        .arg("--data")
        .arg(&data)
        .arg("--schema")
        .arg(&schema));
    assert!(
        stderr.contains("unknown model 'frobnicator'"),
        "stderr: {stderr}"
    );
}

#[test]
fn config_mistakes_are_line_numbered_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_config(
        dir.path(),
        "bad-key.cfg",
        "[experiment]\nseed = 1\n\n[synth]\nscrambled_fraction = 0.3\n",
    );
    let stderr = run_err(bin().arg("experiment").arg("--config").arg(&bad_key));
    assert!(
        stderr.contains("unknown key 'scrambled_fraction'") && stderr.contains("line 5"),
        "stderr: {stderr}"
    );

    let bad_section = write_config(dir.path(), "bad-section.cfg", "[bogus]\nrows = 5\n");
    let stderr = run_err(bin().arg("experiment").arg("--config").arg(&bad_section));
    assert!(stderr.contains("unknown section"), "stderr: {stderr}");
}

const STATS_CSV: &str = "\
Severity,Weather,Load
1,Rain,
2,Rain,3.5
2,Sun,1.0
2,Sun,2.0
";

const STATS_SCHEMA: &str = "\
Severity,numeric,target
Weather,categorical,feature
Load,numeric,feature
";

fn stats_fixture(dir: &Path) -> PathBuf {
    let csv = dir.join("tiny.csv");
    let schema = dir.join("tiny.schema");
    std::fs::write(&csv, STATS_CSV).unwrap();
    std::fs::write(&schema, STATS_SCHEMA).unwrap();
    write_config(
        dir,
        "stats.cfg",
        &format!(
            "[experiment]\nseed = 1\n\n[data]\ncsv = {}\nschema = {}\nclasses = 1, 2, 3\n",
            csv.display(),
            schema.display()
        ),
    )
}

#[test]
fn stats_reports_declared_absent_classes_and_missing_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let config = stats_fixture(dir.path());
    let out = dir.path().join("stats");

    let output = run_ok(bin()
        .arg("stats")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    // The default top-value column is absent from this schema: note + skip.
    assert!(
        stdout(&output).contains("note: skipping top_categories.tsv"),
        "stdout: {}",
        stdout(&output)
    );
    assert!(!out.join("top_categories.tsv").exists());

    let counts = read(&out.join("class_counts.tsv"));
    assert_eq!(counts, "class\tcount\n1\t1\n2\t3\n3\t0\n");

    let missing = read(&out.join("missing_ratios.tsv"));
    assert!(missing.contains("Weather\t0\n"), "ratios: {missing}");
    assert!(missing.contains("Load\t0.25\n"), "ratios: {missing}");
    assert!(missing.contains("Severity\t0\n"), "ratios: {missing}");
}

#[test]
fn stats_top_values_table_shrinks_with_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let config = stats_fixture(dir.path());
    let out = dir.path().join("stats");

    run_ok(bin()
        .arg("stats")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("Weather"));
    // Two distinct values -> two rows (ties break by value ascending).
    let top = read(&out.join("top_categories.tsv"));
    assert_eq!(top, "value\tcount\nRain\t2\nSun\t2\n");

    let stderr = run_err(bin()
        .arg("stats")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("Nope"));
    assert!(
        stderr.contains("stage 'stats'") && stderr.contains("'Nope'"),
        "stderr: {stderr}"
    );
}

#[test]
fn synth_defaults_produce_the_standard_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    let output = run_ok(bin().arg("synth").arg("--seed").arg("9").arg("--out").arg(&out));
    assert!(
        stdout(&output).contains("generated 1000 rows x 48 features (4 classes)"),
        "stdout: {}",
        stdout(&output)
    );
    let informative = read(&out.join("informative_features.txt"));
    assert_eq!(informative.lines().count(), 20);

    // The emitted CSV and schema feed straight back into the other commands.
    let stats_out = dir.path().join("stats");
    run_ok(bin()
        .arg("stats")
        .arg("--data")
        .arg(out.join("data.csv"))
        .arg("--schema")
        .arg(out.join("schema.txt"))
        .arg("--out")
        .arg(&stats_out));
    let counts = read(&stats_out.join("class_counts.tsv"));
    assert_eq!(counts.lines().count(), 5, "header plus one row per class");
}

#[test]
fn paper_faithful_importance_warns_about_leakage() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "imp.cfg",
        "[experiment]\nseed = 2\nk_significant = 3\n\n\
         [synth]\nrows = 150\ninformative = 4\nnoise = 4\nclasses = 2\n\
         class_weights = 0.5, 0.5\nseed = 2\n\n[models.rf]\ntrees = 10\n",
    );
    let out = dir.path().join("imp");
    let output = bin()
        .arg("importance")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--paper-faithful")
        .output()
        .expect("spawn accsev");
    assert!(output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("warning") && stderr.contains("whole"),
        "expected a leakage warning on stderr, got: {stderr}"
    );
    let selected = read(&out.join("selected_features.txt"));
    assert_eq!(selected.lines().count(), 3);
}
