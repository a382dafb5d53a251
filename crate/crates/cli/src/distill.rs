use std::collections::BTreeMap;
use std::path::PathBuf;

use kdistill_core::corpus::{deduplicate, filter_corpus, read_candidates, split, write_corpus, Corpus, SplitSpec};
use kdistill_core::Level;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::{create_dir, write_file, OrInput, Outcome};

pub const FREEZE_FILE: &str = "test.freeze";

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Candidate JSONL written by `generate`.
    #[arg(long)]
    candidates: PathBuf,

    /// Output directory.
    #[arg(long)]
    out: PathBuf,

    /// Train split size [default: 1200].
    #[arg(long)]
    train: Option<usize>,
    /// Validation split size [default: 100].
    #[arg(long)]
    validation: Option<usize>,
    /// Test split size [default: 200].
    #[arg(long)]
    test: Option<usize>,
    /// Shuffle seed [default: 20240917].
    #[arg(long)]
    seed: Option<u64>,
    /// Keep family proportions in every split.
    #[arg(long)]
    stratified: bool,
}

#[derive(Serialize)]
struct SplitSizes {
    train: usize,
    validation: usize,
    test: usize,
    pool: usize,
}

#[derive(Serialize)]
struct Stats {
    candidates: usize,
    admitted: usize,
    rejected: usize,
    admission_rate: f64,
    rejected_by_lowest_level: BTreeMap<Level, usize>,
    after_dedup: usize,
    duplicates_removed: usize,
    dedup_rate: f64,
    split: SplitSpec,
    sizes: SplitSizes,
    test_freeze_marker: String,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn run(args: &Args, cfg: &PipelineConfig) -> Outcome {
    let spec = SplitSpec {
        train_size: args.train.unwrap_or(cfg.split.train_size),
        validation_size: args.validation.unwrap_or(cfg.split.validation_size),
        test_size: args.test.unwrap_or(cfg.split.test_size),
        seed: args.seed.unwrap_or(cfg.split.seed),
        stratified: args.stratified || cfg.split.stratified,
    };
    let (provenance, candidates) = read_candidates(&args.candidates).or_input()?;
    let cm = cfg.context_model().or_input()?;
    let (admitted, rejected) = filter_corpus(&candidates, &cm, provenance.clone()).or_input()?;
    let deduped = deduplicate(&admitted);
    let splits = split(&deduped, &spec).or_input()?;

    create_dir(&args.out)?;
    for (name, part) in [
        ("train", &splits.train),
        ("validation", &splits.validation),
        ("test", &splits.test),
        ("pool", &splits.pool),
    ] {
        write_corpus(&args.out.join(format!("{name}.jsonl")), part).or_input()?;
    }
    let mut rejected_sorted = rejected;
    rejected_sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut by_level: BTreeMap<Level, usize> = Level::ALL.into_iter().map(|l| (l, 0)).collect();
    for r in &rejected_sorted {
        if let Some(l) = r.report.lowest_failing_level() {
            *by_level.entry(l).or_default() += 1;
        }
    }
    write_corpus(&args.out.join("rejected.jsonl"), &Corpus::new(provenance, rejected_sorted)).or_input()?;
    write_file(&args.out.join(FREEZE_FILE), format!("{}\n", splits.test_freeze_marker))?;

    let stats = Stats {
        candidates: candidates.len(),
        admitted: admitted.len(),
        rejected: candidates.len() - admitted.len(),
        admission_rate: ratio(admitted.len(), candidates.len()),
        rejected_by_lowest_level: by_level,
        after_dedup: deduped.len(),
        duplicates_removed: admitted.len() - deduped.len(),
        dedup_rate: ratio(admitted.len() - deduped.len(), admitted.len()),
        split: spec,
        sizes: SplitSizes {
            train: splits.train.len(),
            validation: splits.validation.len(),
            test: splits.test.len(),
            pool: splits.pool.len(),
        },
        test_freeze_marker: splits.test_freeze_marker.clone(),
    };
    write_file(&args.out.join("stats.json"), serde_json::to_string_pretty(&stats).expect("serializable") + "\n")?;
    eprintln!(
        "admitted {}/{} candidates, {} after dedup; split {}/{}/{} with {} in pool",
        stats.admitted, stats.candidates, stats.after_dedup, stats.sizes.train, stats.sizes.validation, stats.sizes.test, stats.sizes.pool
    );
    Ok(0)
}
