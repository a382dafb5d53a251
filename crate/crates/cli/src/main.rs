//! `kdistill`: generate, validate, distill and evaluate Kubernetes manifest
//! corpora.

mod config;
mod diag;
mod distill;
mod eval;
mod generate;
mod respond;
mod validate;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{FileConfig, PipelineConfig};

pub const EXIT_GATE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_FREEZE: u8 = 3;

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }
}

/// Success carries the exit code (0, or 1 for a failed gate).
pub type Outcome = Result<u8, Failure>;

pub trait OrInput<T> {
    /// Maps any error to exit code 2.
    fn or_input(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrInput<T> for Result<T, E> {
    fn or_input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(EXIT_INPUT, e))
    }
}

pub fn input_error(message: impl Display) -> Failure {
    Failure::new(EXIT_INPUT, anyhow::anyhow!("{message}"))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| Failure::new(EXIT_INPUT, anyhow::anyhow!("creating {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| Failure::new(EXIT_INPUT, anyhow::anyhow!("writing {}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::new(EXIT_INPUT, anyhow::anyhow!("creating {}: {e}", path.display())))
}

#[derive(Debug, Parser)]
#[command(name = "kdistill", version, about = "Distill, verify and evaluate Kubernetes manifest corpora")]
pub struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = "KDISTILL_CONFIG")]
    config: Option<PathBuf>,

    /// Directory of strict JSON schemas for the target Kubernetes version.
    #[arg(long, global = true, env = "KDISTILL_SCHEMA_CACHE")]
    schema_cache: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ask the teacher for candidate manifests.
    Generate(generate::Args),
    /// Run the L1-L4 circuit over manifests or candidate files.
    Validate(validate::Args),
    /// Filter, deduplicate and split candidates into corpus files.
    Distill(distill::Args),
    /// Score model generations against the frozen test split.
    Eval(eval::Args),
    /// Compare a corpus with a reference feature vector.
    Diag(diag::Args),
    /// Produce generations for a test split with the offline mock model.
    Respond(respond::Args),
}

impl Cli {
    fn pipeline_config(&self) -> Result<PipelineConfig, Failure> {
        let file = FileConfig::load(self.config.as_deref()).or_input()?;
        PipelineConfig::resolve(file, self.schema_cache.clone()).or_input()
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Generate(args) => generate::run(args, &cli.pipeline_config()?),
        Command::Validate(args) => validate::run(args, &cli.pipeline_config()?),
        Command::Distill(args) => distill::run(args, &cli.pipeline_config()?),
        Command::Eval(args) => eval::run(args, &cli.pipeline_config()?),
        Command::Diag(args) => diag::run(args),
        Command::Respond(args) => respond::run(args),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("KDISTILL_LOG").unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
