use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kdistill_core::corpus::{correction_plan, plan_digest, stratified_plan, write_candidates, Provenance};
use kdistill_core::metrics::FailureAnalysis;
use kdistill_core::teacher::{
    AuditLog, CandidateRecord, Complexity, GenerationTask, HttpBackend, MockTeacher, TeacherBackend, TeacherClient,
};
use kdistill_core::Family;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::{create_dir, input_error, write_file, Failure, OrInput, Outcome, EXIT_GATE};

pub const API_KEY_ENV: &str = "TEACHER_API_KEY";

#[derive(Debug, clap::Args)]
#[command(group = clap::ArgGroup::new("tasks").required(true))]
pub struct Args {
    /// Output directory for candidates.jsonl, plan.jsonl and audit.jsonl.
    #[arg(long)]
    out: PathBuf,

    /// Answer from the built-in offline teacher instead of the endpoint.
    #[arg(long)]
    mock: bool,

    /// Mock only: every n-th task gets a deliberately broken reply (0 = never).
    #[arg(long, default_value_t = 10)]
    defect_every: u64,

    /// Same number of tasks for every family.
    #[arg(long, group = "tasks")]
    per_family: Option<usize>,

    /// TOML or JSON map of family to task count.
    #[arg(long, group = "tasks")]
    targets: Option<PathBuf>,

    /// JSONL file of generation tasks.
    #[arg(long, group = "tasks")]
    plan: Option<PathBuf>,

    /// Failure analysis JSON from `eval`; builds a correction batch.
    #[arg(long, group = "tasks", requires = "count")]
    corrections: Option<PathBuf>,

    /// Size of the correction batch.
    #[arg(long)]
    count: Option<usize>,

    /// Complexity levels to rotate through.
    #[arg(long, value_delimiter = ',', default_values_t = Complexity::ALL.map(|c| c.tag().to_string()))]
    complexity: Vec<String>,
}

/// `SOURCE_DATE_EPOCH` when set, otherwise the current time.
pub fn created_at() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn read_targets(path: &Path) -> Result<BTreeMap<String, usize>, Failure> {
    let text = std::fs::read_to_string(path).or_input()?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let mut table: BTreeMap<String, toml::Value> = if is_json {
        serde_json::from_str(&text).or_input()?
    } else {
        toml::from_str(&text).or_input()?
    };
    if let Some(toml::Value::Table(inner)) = table.remove("targets") {
        table = inner.into_iter().collect();
    }
    table
        .into_iter()
        .map(|(k, v)| match v.as_integer() {
            Some(n) if n >= 0 => Ok((k, n as usize)),
            _ => Err(input_error(format!("{}: count for {k:?} must be a non-negative integer", path.display()))),
        })
        .collect()
}

fn read_plan(path: &Path) -> Result<Vec<GenerationTask>, Failure> {
    let text = std::fs::read_to_string(path).or_input()?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| input_error(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn build_tasks(args: &Args, cfg: &PipelineConfig) -> Result<Vec<GenerationTask>, Failure> {
    let mix: Vec<Complexity> = args
        .complexity
        .iter()
        .map(|c| c.parse::<Complexity>().map_err(input_error))
        .collect::<Result<_, _>>()?;
    let version = cfg.kubernetes_version.as_str();
    let tasks = if let Some(n) = args.per_family {
        let targets = Family::ALL.iter().map(|f| (f.tag().to_string(), n)).collect();
        stratified_plan(&targets, &mix, version).or_input()?
    } else if let Some(path) = &args.targets {
        stratified_plan(&read_targets(path)?, &mix, version).or_input()?
    } else if let Some(path) = &args.plan {
        read_plan(path)?
    } else if let Some(path) = &args.corrections {
        let text = std::fs::read_to_string(path).or_input()?;
        let analysis: FailureAnalysis = serde_json::from_str(&text).or_input()?;
        correction_plan(&analysis, args.count.unwrap_or(0), version)
    } else {
        unreachable!("clap requires one task source")
    };
    if tasks.is_empty() {
        return Err(input_error("the plan contains no tasks"));
    }
    Ok(tasks)
}

#[derive(Serialize)]
struct FailedTask<'a> {
    id: &'a str,
    error: String,
    requeueable: bool,
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializable") + "\n")
        .collect()
}

pub fn run(args: &Args, cfg: &PipelineConfig) -> Outcome {
    let tasks = build_tasks(args, cfg)?;
    let cm = cfg.context_model().or_input()?;
    let mut teacher = cfg.teacher.clone();
    let backend: Box<dyn TeacherBackend> = if args.mock {
        teacher.rate_per_minute = 0;
        Box::new(MockTeacher::new(args.defect_every))
    } else {
        teacher.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        if teacher.api_key.is_none() {
            return Err(input_error(format!("{API_KEY_ENV} is not set; export it or pass --mock")));
        }
        Box::new(HttpBackend::new(&teacher).or_input()?)
    };

    create_dir(&args.out)?;
    write_file(&args.out.join("plan.jsonl"), jsonl(&tasks))?;
    let audit = AuditLog::open(&args.out.join("audit.jsonl")).or_input()?;
    let client = TeacherClient::new(backend, teacher, cm).with_audit(audit);

    let mut candidates: Vec<CandidateRecord> = Vec::new();
    let mut failed = Vec::new();
    for (task, result) in tasks.iter().zip(client.generate_batch(&tasks)) {
        match result {
            Ok(c) => candidates.push(c),
            Err(e) => {
                tracing::warn!(id = %task.id, error = %e, "generation failed");
                failed.push(FailedTask {
                    id: &task.id,
                    requeueable: e.requeueable(),
                    error: e.to_string(),
                });
            }
        }
    }
    let provenance = Provenance::new(plan_digest(&tasks), created_at());
    write_candidates(&args.out.join("candidates.jsonl"), &provenance, &candidates).or_input()?;
    write_file(&args.out.join("failed.jsonl"), jsonl(&failed))?;
    eprintln!("generated {} of {} candidates ({} failed)", candidates.len(), tasks.len(), failed.len());
    Ok(if candidates.is_empty() { EXIT_GATE } else { 0 })
}
