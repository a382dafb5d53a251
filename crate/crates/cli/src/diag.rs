use std::path::PathBuf;

use kdistill_core::corpus::read_corpus;
use kdistill_core::representativeness::{drift_report, feature_vector, FeatureVector, DEFAULT_THETA};

use crate::{input_error, write_file, OrInput, Outcome};

#[derive(Debug, clap::Args)]
#[command(group = clap::ArgGroup::new("action").required(true).multiple(true))]
pub struct Args {
    /// Corpus JSONL to describe.
    #[arg(long)]
    corpus: PathBuf,

    /// Reference feature vector (JSON) to compare against.
    #[arg(long, group = "action")]
    reference: Option<PathBuf>,

    /// Rare-class threshold.
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,

    /// Write the corpus feature vector here.
    #[arg(long, group = "action")]
    emit_vector: Option<PathBuf>,

    /// Write the drift report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: &Args) -> Outcome {
    let corpus = read_corpus(&args.corpus).or_input()?;
    let vector = feature_vector(&corpus).or_input()?;
    if let Some(path) = &args.emit_vector {
        write_file(path, serde_json::to_string_pretty(&vector).expect("serializable") + "\n")?;
    }
    let Some(reference_path) = &args.reference else { return Ok(0) };
    let text = std::fs::read_to_string(reference_path)
        .map_err(|e| input_error(format!("reading {}: {e}", reference_path.display())))?;
    let reference: FeatureVector = serde_json::from_str(&text)
        .map_err(|e| input_error(format!("{} is not a feature vector: {e}", reference_path.display())))?;
    let report = drift_report(&vector, &reference, args.theta).or_input()?;
    let json = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    match &args.out {
        Some(path) => write_file(path, json)?,
        None => print!("{json}"),
    }
    Ok(0)
}
