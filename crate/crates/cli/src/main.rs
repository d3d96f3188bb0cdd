//! `transproc`: validate a corpus, export features, run the experiment grid,
//! and predict with saved models, all driven by one TOML config file.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "transproc", version, about = "Translation-process classification for English-French phrase pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Run configuration file.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace every experiment seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Only print errors.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check config, resources and bundle; print the class census.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Write the feature matrix of every phrase pair.
    Featurize {
        #[command(flatten)]
        common: Common,
        /// Take the feature mask and settings of this experiment.
        #[arg(long)]
        experiment: Option<String>,
    },
    /// Run experiments (all when none is named) and write reports.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        experiment: Vec<String>,
    },
    /// Run the feature ablation study of experiments.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        experiment: Vec<String>,
    },
    /// Label every phrase pair of a bundle with a saved model.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Bundle to label; defaults to the config's bundle.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Rebuild the report from saved results in the output directory.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

/// How a command failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad config, corpus, resources or arguments.
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Validation(e) | Failure::Runtime(e) => e,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { common } => commands::validate(&common),
        Command::Featurize { common, experiment } => commands::featurize(&common, experiment.as_deref()),
        Command::Run { common, experiment } => commands::run(&common, &experiment, false),
        Command::Ablate { common, experiment } => commands::run(&common, &experiment, true),
        Command::Predict { common, model, bundle } => commands::predict(&common, &model, bundle.as_deref()),
        Command::Report { common } => commands::report(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
