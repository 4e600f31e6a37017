use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use clfq_cli::commands::{self, Builtin, EvaluateArgs, Split};
use clfq_cli::config::RunConfig;
use clfq_cli::{CliError, CliResult, OutputFormat};

/// Contactless fingerprint quality: preprocessing, features, random-forest
/// scoring and EDC evaluation.
#[derive(Parser, Debug)]
#[command(name = "clfq", version)]
struct Cli {
    /// TOML configuration; absent sections keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Encoding of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalizes captures into samples, masks and metadata.
    Preprocess {
        /// Image files or directories of PNG/PGM images.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scores captures with a trained model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also writes the extracted feature table.
        #[arg(long)]
        features_csv: Option<PathBuf>,
    },
    /// Trains a model; writes `<model>.report.json` and `<model>.relabel.csv`.
    Train {
        /// Corpus directory from `synth`; without it a corpus is generated.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Corpus directory for the label check.
        #[arg(long)]
        validate: Option<PathBuf>,
        /// `image_id,label` overrides applied before training.
        #[arg(long)]
        relabel: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generates a synthetic corpus.
    Synth {
        #[arg(long, value_enum, default_value_t = Split::Train)]
        split: Split,
        /// Overrides the samples per preset.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// AIT sharpness per image.
    Sharpness {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// DET, EDC curves and PAUC summary.
    Evaluate {
        /// Comparison score CSVs, one dataset each.
        #[arg(long)]
        scores: Vec<PathBuf>,
        /// Synthetic corpora compared with the built-in matcher.
        #[arg(long)]
        self_match: Vec<PathBuf>,
        /// NAME=PATH quality table; `{dataset}` in PATH expands per dataset.
        #[arg(long)]
        quality: Vec<String>,
        /// Model scored on the self-match corpora.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        builtin: Vec<Builtin>,
        #[arg(long)]
        out: PathBuf,
        /// Writes SVG plots under `<out>/plots`.
        #[arg(long)]
        plots: bool,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage(anyhow!("--jobs must be >= 1")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Failed(e.into()))?;
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .resolve(cli.seed)?;
    log::info!("resolved configuration:\n{}", cfg.to_toml());
    let format = cli.format;
    match cli.command {
        Command::Preprocess { inputs, out } => commands::preprocess(&cfg, &inputs, &out),
        Command::Score { model, inputs, out, features_csv } => {
            commands::score(&cfg, &model, &inputs, &out, features_csv.as_deref(), format)
        }
        Command::Train { corpus, validate, relabel, out } => {
            commands::train(&cfg, corpus.as_deref(), validate.as_deref(), relabel.as_deref(), &out).map(|_| ())
        }
        Command::Synth { split, n, out } => commands::synth(&cfg, split, n, &out),
        Command::Sharpness { inputs, out } => commands::sharpness(&cfg, &inputs, &out, format),
        Command::Evaluate { scores, self_match, quality, model, builtin, out, plots } => {
            let args = EvaluateArgs { scores, self_match, quality, model, builtin, out, plots };
            commands::evaluate(&cfg, &args, format)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
