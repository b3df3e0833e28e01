//! `volnorm`: build phantom corpora, train slice generators, normalize
//! volumes, extract radiomic features and evaluate forest classifiers.
//!
//! Every command takes an optional `--config` file (see [`config`]); the
//! same config and inputs always produce the same outputs. Files are
//! written atomically and re-read to verify them, and the exit code is 0
//! only if every output was written and verified.

mod commands;
mod config;
mod corpus;

use anyhow::Result;
use clap::{Parser, Subcommand};
use commands::{ImputerKind, SelectMode, CACHE_DIR_ENV};
use config::Config;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "volnorm", version, about = "Slice-thickness normalization and radiomic classification of MRI volumes")]
struct Cli {
    /// Key-value config file; defaults apply to every key it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labelled corpus of synthetic subjects.
    Phantom {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Train an intermediate-slice generator on one modality of a corpus.
    TrainIsgen {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        modality: String,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch log; defaults to `<out>.log`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Normalize every volume of a raw corpus to a cube of `normalize.target`
    /// slices. Results are cached under $VOLNORM_CACHE_DIR, or the output
    /// directory, and reused while inputs and settings are unchanged.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Generator for one modality, as MODALITY=CHECKPOINT. Modalities
        /// without one use copy imputation.
        #[arg(long = "model", value_parser = commands::parse_model_arg)]
        models: Vec<(String, PathBuf)>,
    },
    /// Extract the radiomic feature table of a raw or normalized corpus.
    Radiomics {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Choose a window of `select.window` slices per subject.
    Select {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "enhanced")]
        mode: SelectMode,
        #[arg(long, default_value = "FLAIR")]
        modality: String,
        /// Foreground threshold for central selection.
        #[arg(long, default_value_t = 0.1)]
        threshold: f32,
    },
    /// Fit a random forest, optionally choosing settings by grid search.
    TrainRf {
        #[arg(long)]
        features: PathBuf,
        /// Forest JSON.
        #[arg(long)]
        out: PathBuf,
        /// Grid file holding `grid.*` keys.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Grid table path; defaults to `<out>.grid.csv`.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Cross-validate a saved forest's settings on a feature table.
    Evaluate {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Report JSON.
        #[arg(long)]
        out: PathBuf,
        /// Row label in the printed table.
        #[arg(long, default_value = "model")]
        name: String,
    },
    /// Two-way ANOVA (model × metric, folds as replicates) over reports.
    Anova {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Impute the slice midway between two single-slice NIfTI volumes.
    Impute {
        #[arg(long, num_args = 2, value_names = ["A", "B"], required = true)]
        single: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Generator checkpoint; without one the `--imputer` baseline is used.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "copy")]
        imputer: ImputerKind,
    },
}

fn run(cli: Cli) -> Result<String> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Phantom { out, n } => commands::phantom(&cfg, &out, n),
        Command::TrainIsgen { corpus, modality, out, log } => commands::train_isgen(&cfg, &corpus, &modality, &out, log.as_deref()),
        Command::Normalize { input, out, models } => {
            let cache = std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
            commands::normalize(&cfg, &input, &out, &models, cache.as_deref())
        }
        Command::Radiomics { input, out } => commands::radiomics(&input, &out),
        Command::Select { input, out, mode, modality, threshold } => commands::select(&cfg, &input, &out, mode, &modality, threshold),
        Command::TrainRf { features, out, grid, table } => commands::train_rf(&cfg, &features, &out, grid.as_deref(), table.as_deref()),
        Command::Evaluate { forest, features, out, name } => commands::evaluate(&cfg, &forest, &features, &out, &name),
        Command::Anova { reports, alpha, out } => commands::anova(&reports, alpha, out.as_deref()),
        Command::Impute { single, out, model, imputer } => commands::impute(&single[0], &single[1], &out, model.as_deref(), imputer),
    }
}

fn main() {
    match run(Cli::parse()) {
        Ok(summary) => {
            // a closed pipe only loses the summary; the outputs are already written
            let _ = writeln!(std::io::stdout(), "{summary}");
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
