//! `accsev`: command-line harness for the road-accident severity toolkit.
//!
//! Subcommands: `stats`, `experiment`, `train`, `predict`, `importance`,
//! `synth`. Settings come from an optional `key = value` config file; the
//! flags below override it. Exit code 0 on success, 1 with a stage-named
//! diagnostic on any failure.

mod commands;
mod config;
mod pipeline;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use accsev_core::ensemble::ModelKind;
use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};

use config::{parse_averaging, DataSource, ExperimentConfig, SchemaSource};

#[derive(Parser)]
#[command(
    name = "accsev",
    version,
    about = "Ensemble-learning harness for road-accident severity classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every data-consuming subcommand.
#[derive(Args)]
struct SourceArgs {
    /// Input CSV (overrides the config's data source)
    #[arg(long)]
    data: Option<PathBuf>,

    /// Feature schema file; defaults to the built-in 49-column schema
    #[arg(long)]
    schema: Option<PathBuf>,

    /// Config file (line-oriented `key = value` with [section] headers)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master random seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    source: SourceArgs,

    /// How many top features phase 2 keeps (overrides the config)
    #[arg(long)]
    k: Option<usize>,

    /// Score averaging across classes
    #[arg(long, value_parser = ["macro", "weighted"])]
    averaging: Option<String>,

    /// Output directory for the report files
    #[arg(long)]
    out: Option<PathBuf>,

    /// Compute feature importance on the whole dataset (leaks test rows
    /// into the ranking; matches the published protocol)
    #[arg(long)]
    paper_faithful: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Emit class counts, missing ratios, and top-category counts as TSV
    Stats {
        #[command(flatten)]
        source: SourceArgs,

        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,

        /// Categorical column for the top-5 value counts
        /// [default: Weather_Condition]
        column: Option<String>,
    },

    /// Run the two-phase experiment (all features, then top-k) and report
    Experiment {
        #[command(flatten)]
        args: PipelineArgs,
    },

    /// Fit one model on the whole dataset and save it
    Train {
        /// Which model: voting | rf | adaboost | extratrees | gbm
        model: String,

        #[command(flatten)]
        source: SourceArgs,

        /// Model file to write
        #[arg(long, default_value = "model.txt")]
        out: PathBuf,
    },

    /// Score a CSV with a saved model, one predicted severity per row
    Predict {
        /// Saved model file
        model: PathBuf,

        /// Input CSV (the target column may be absent)
        #[arg(long)]
        data: PathBuf,

        /// Predictions CSV to write
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },

    /// Rank features by permutation importance and keep the top k
    Importance {
        #[command(flatten)]
        args: PipelineArgs,
    },

    /// Generate a synthetic severity dataset in the ingestible CSV format
    Synth {
        /// Config file with a [synth] section
        #[arg(long)]
        config: Option<PathBuf>,

        /// Generator seed (overrides the config)
        #[arg(long)]
        seed: Option<u64>,

        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Stats {
            source,
            out,
            column,
        } => {
            let cfg = resolve_config(&source)?;
            commands::cmd_stats(&commands::StatsArgs {
                source: cfg.source,
                column,
                out,
            })
        }
        Command::Experiment { args } => {
            let cfg = resolve_pipeline_config(&args)?;
            commands::cmd_experiment(&cfg)
        }
        Command::Train { model, source, out } => {
            let kind = ModelKind::from_key(&model).ok_or_else(|| {
                anyhow!("unknown model '{model}' (expected voting, rf, adaboost, extratrees, or gbm)")
            })?;
            let cfg = resolve_config(&source)?;
            commands::cmd_train(kind, &cfg, &out)
        }
        Command::Predict { model, data, out } => commands::cmd_predict(&model, &data, &out),
        Command::Importance { args } => {
            let cfg = resolve_pipeline_config(&args)?;
            commands::cmd_importance(&cfg)
        }
        Command::Synth { config, seed, out } => {
            let (mut spec, missing_rate) = match config {
                Some(path) => {
                    let cfg = ExperimentConfig::load(&path)?;
                    match cfg.source {
                        DataSource::Synth { spec, missing_rate } => (spec, missing_rate),
                        DataSource::Csv { .. } => {
                            bail!("synth needs a config with a [synth] section")
                        }
                    }
                }
                None => (accsev_core::synth::SynthSpec::default(), 0.0),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            commands::cmd_synth(&spec, missing_rate, &out)
        }
    }
}

/// Config file plus source/seed flag overrides.
fn resolve_config(args: &SourceArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let data = args.data.clone().ok_or_else(|| {
                anyhow!("no input: pass --data <csv> or --config <file> with a data source")
            })?;
            ExperimentConfig::with_source(DataSource::Csv {
                data,
                schema: SchemaSource::Builtin,
                classes: None,
            })
        }
    };
    if let Some(data) = &args.data {
        match &mut cfg.source {
            DataSource::Csv { data: d, .. } => *d = data.clone(),
            source @ DataSource::Synth { .. } => {
                *source = DataSource::Csv {
                    data: data.clone(),
                    schema: SchemaSource::Builtin,
                    classes: None,
                }
            }
        }
    }
    if let Some(schema) = &args.schema {
        match &mut cfg.source {
            DataSource::Csv { schema: s, .. } => *s = SchemaSource::Path(schema.clone()),
            DataSource::Synth { .. } => bail!("--schema applies only to CSV data sources"),
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn resolve_pipeline_config(args: &PipelineArgs) -> Result<ExperimentConfig> {
    let mut cfg = resolve_config(&args.source)?;
    if let Some(k) = args.k {
        cfg.k_significant = k;
    }
    if let Some(averaging) = &args.averaging {
        cfg.averaging = parse_averaging(averaging)?;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if args.paper_faithful {
        cfg.paper_faithful = true;
    }
    Ok(cfg)
}
