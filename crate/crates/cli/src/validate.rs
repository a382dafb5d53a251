use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use kdistill_core::corpus::read_candidates;
use kdistill_core::validate::run_circuit;
use kdistill_core::{Level, ValidationReport};
use serde::Serialize;
use walkdir::WalkDir;

use crate::config::PipelineConfig;
use crate::{input_error, write_file, Failure, OrInput, Outcome, EXIT_GATE};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// YAML files, directories (searched recursively) or candidate JSONL files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Exit 1 unless every artifact passes.
    #[arg(long)]
    gate: bool,

    /// Write reports here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReportLine<'a> {
    id: &'a str,
    report: &'a ValidationReport,
}

fn is_manifest(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "yaml" || e == "yml")
}

fn is_candidates(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

/// Expands inputs into (id, text) pairs in a stable order.
fn collect(inputs: &[PathBuf]) -> Result<Vec<(String, String)>, Failure> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = WalkDir::new(input)
                .into_iter()
                .map(|e| e.map(|e| e.into_path()).or_input())
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .filter(|p| p.is_file() && (is_manifest(p) || is_candidates(p)))
                .collect();
            found.sort();
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(input_error(format!("{} does not exist", input.display())));
        }
    }
    let mut items = Vec::new();
    for path in files {
        if is_candidates(&path) {
            let (_, candidates) = read_candidates(&path).or_input()?;
            items.extend(candidates.into_iter().map(|c| (c.id, c.artifact_text)));
        } else {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| input_error(format!("reading {}: {e}", path.display())))?;
            items.push((path.display().to_string(), text));
        }
    }
    Ok(items)
}

pub fn run(args: &Args, cfg: &PipelineConfig) -> Outcome {
    let items = collect(&args.inputs)?;
    let cm = cfg.context_model().or_input()?;
    let mut lines = String::new();
    let mut by_level: BTreeMap<Level, usize> = Level::ALL.into_iter().map(|l| (l, 0)).collect();
    let mut passed = 0;
    for (id, text) in &items {
        let report = run_circuit(text, &cm).or_input()?;
        match report.lowest_failing_level() {
            None => passed += 1,
            Some(level) => *by_level.entry(level).or_default() += 1,
        }
        lines.push_str(&serde_json::to_string(&ReportLine { id, report: &report }).expect("serializable"));
        lines.push('\n');
    }
    match &args.out {
        Some(path) => write_file(path, &lines)?,
        None => std::io::stdout().write_all(lines.as_bytes()).or_input()?,
    }
    let levels: Vec<String> = by_level.iter().map(|(l, n)| format!("{l} {n}")).collect();
    eprintln!("validated {}: {passed} passed; failing by lowest level: {}", items.len(), levels.join(", "));
    Ok(if args.gate && passed != items.len() { EXIT_GATE } else { 0 })
}
