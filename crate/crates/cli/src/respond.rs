use std::path::PathBuf;

use kdistill_core::corpus::read_corpus;
use kdistill_core::metrics::{tokenize, write_generations, GenerationLine};
use kdistill_core::teacher::{MockTeacher, Stream};

use crate::{OrInput, Outcome};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Test split JSONL.
    #[arg(long)]
    test: PathBuf,

    /// Generations JSONL to write.
    #[arg(long)]
    out: PathBuf,

    /// Every n-th example gets a broken answer (0 = never).
    #[arg(long, default_value_t = 12)]
    defect_every: u64,

    /// Mode label recorded on each line.
    #[arg(long)]
    mode: Option<String>,
}

/// Answers each test example with the mock model. Timing is synthetic:
/// a per-token cost derived from the example's sequence number.
pub fn run(args: &Args) -> Outcome {
    let test = read_corpus(&args.test).or_input()?;
    let model = MockTeacher::new(args.defect_every);
    let lines: Vec<GenerationLine> = test
        .records
        .iter()
        .map(|r| {
            let output = match &r.task {
                Some(task) if task.stream == Stream::SyntheticDirect => model.render_yaml(task),
                _ => r.yaml.clone(),
            };
            let seq = MockTeacher::sequence(&r.id);
            let tokens = tokenize(&output).len() as u64;
            GenerationLine {
                id: r.id.clone(),
                elapsed_ms: Some((tokens * (150 + seq % 40)) as f64),
                tokens: Some(tokens),
                mode: args.mode.clone(),
                output,
            }
        })
        .collect();
    write_generations(&args.out, &lines).or_input()?;
    eprintln!("wrote {} generations", lines.len());
    Ok(0)
}
