use std::path::{Path, PathBuf};

use kdistill_core::corpus::read_corpus;
use kdistill_core::metrics::{
    analyze_failures, evaluate_outputs, read_generations, render_report, EvalMode, EvalRun, ReportFormat,
};
use kdistill_core::teacher::PromptStyle;

use crate::config::PipelineConfig;
use crate::distill::FREEZE_FILE;
use crate::{create_dir, input_error, write_file, Failure, OrInput, Outcome, EXIT_FREEZE};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Frozen test split written by `distill`.
    #[arg(long)]
    test: PathBuf,

    /// Generations JSONL ({id, output, tokens?, elapsed_ms?}).
    #[arg(long)]
    generations: PathBuf,

    /// Output directory; runs accumulate here into a trajectory.
    #[arg(long)]
    out: PathBuf,

    /// Run label for the report row (defaults to the generations file stem).
    #[arg(long)]
    name: Option<String>,

    /// Freeze marker of the test split (defaults to test.freeze next to it).
    #[arg(long)]
    freeze: Option<PathBuf>,

    /// Prompt style the generations were produced with [default: std].
    #[arg(long)]
    prompt_style: Option<PromptStyle>,
    /// Generation token budget [default: 512].
    #[arg(long)]
    max_new_tokens: Option<u32>,
    /// Sampling temperature recorded with the run.
    #[arg(long)]
    temperature: Option<f64>,
    /// Sampling seed recorded with the run.
    #[arg(long)]
    seed: Option<u64>,
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    let s = s.split('-').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("-");
    if s.is_empty() {
        "run".into()
    } else {
        s
    }
}

fn check_freeze(test_path: &Path, marker_path: &Path, actual: &str) -> Result<(), Failure> {
    let recorded = std::fs::read_to_string(marker_path)
        .map_err(|e| input_error(format!("reading freeze marker {}: {e}", marker_path.display())))?;
    if recorded.trim() != actual {
        return Err(Failure::new(
            EXIT_FREEZE,
            anyhow::anyhow!(
                "{} does not match its freeze marker {} (recorded {}, found {actual}); refusing to evaluate",
                test_path.display(),
                marker_path.display(),
                recorded.trim()
            ),
        ));
    }
    Ok(())
}

fn mode(args: &Args, cfg: &PipelineConfig) -> Result<EvalMode, Failure> {
    let base = cfg.eval;
    let mut mode = EvalMode::new(
        args.prompt_style.unwrap_or(base.prompt_style),
        args.max_new_tokens.unwrap_or(base.max_new_tokens),
    )
    .or_input()?;
    mode.temperature = args.temperature.unwrap_or(base.temperature);
    mode.seed = args.seed.unwrap_or(base.seed);
    Ok(mode)
}

/// Ordered run slugs recorded in `trajectory.json`.
fn update_trajectory(out: &Path, slug: &str) -> Result<Vec<String>, Failure> {
    let path = out.join("trajectory.json");
    let mut slugs: Vec<String> = match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).or_input()?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(input_error(format!("reading {}: {e}", path.display()))),
    };
    if !slugs.iter().any(|s| s == slug) {
        slugs.push(slug.to_string());
    }
    write_file(&path, serde_json::to_string_pretty(&slugs).expect("serializable") + "\n")?;
    Ok(slugs)
}

pub fn run(args: &Args, cfg: &PipelineConfig) -> Outcome {
    let test = read_corpus(&args.test).or_input()?;
    let marker_path = args.freeze.clone().unwrap_or_else(|| {
        args.test.parent().unwrap_or_else(|| Path::new(".")).join(FREEZE_FILE)
    });
    check_freeze(&args.test, &marker_path, &test.freeze_marker())?;

    let generations = read_generations(&args.generations).or_input()?;
    let name = args.name.clone().unwrap_or_else(|| {
        args.generations
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    });
    let cm = cfg.context_model().or_input()?;
    let run = evaluate_outputs(&test, &generations, &name, mode(args, cfg)?, &cm).or_input()?;

    let slug = slug(&name);
    create_dir(&args.out)?;
    write_file(
        &args.out.join("runs").join(format!("{slug}.json")),
        serde_json::to_string_pretty(&run).expect("serializable") + "\n",
    )?;
    write_file(
        &args.out.join("analysis").join(format!("{slug}.json")),
        serde_json::to_string_pretty(&analyze_failures(&run)).expect("serializable") + "\n",
    )?;

    let mut runs = Vec::new();
    for s in update_trajectory(&args.out, &slug)? {
        let path = args.out.join("runs").join(format!("{s}.json"));
        let text = std::fs::read_to_string(&path)
            .map_err(|e| input_error(format!("reading {}: {e}", path.display())))?;
        let r: EvalRun = serde_json::from_str(&text).or_input()?;
        runs.push(r);
    }
    let table = render_report(&runs, ReportFormat::Markdown);
    write_file(&args.out.join("report.md"), &table)?;
    write_file(&args.out.join("series.csv"), render_report(&runs, ReportFormat::Csv))?;
    write_file(&args.out.join("summary.json"), render_report(&runs, ReportFormat::Json))?;
    print!("{table}");
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::slug;

    #[test]
    fn slugs() {
        assert_eq!(slug("1.2K + resid. corr."), "1-2k-resid-corr");
        assert_eq!(slug("  "), "run");
    }
}
