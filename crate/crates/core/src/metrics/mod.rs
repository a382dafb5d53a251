//! Evaluation of model generations against a frozen test split.

mod bleu;
mod report;
mod resource;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::context::{ContextModel, Family};
use crate::corpus::Corpus;
use crate::manifest::{strip_llm_wrapping, structural_exact_match};
use crate::teacher::PromptStyle;
use crate::validate::{run_circuit, ConfigError, FailureDetail, FieldPath, Level, ValidationReport};

pub use bleu::{bleu_aux, bleu_tokens, tokenize};
pub use report::{format_fraction, render_report, ReportFormat};
pub use resource::{peak_rss_kib, resource_probe, ResourceStats, Timing, TokenStats};

pub const MISSING_OUTPUT: &str = "missing-output";
const EXEMPLARS_PER_CELL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalMode {
    pub prompt_style: PromptStyle,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("max_new_tokens must be positive")]
pub struct ZeroTokenBudget;

impl EvalMode {
    pub fn new(prompt_style: PromptStyle, max_new_tokens: u32) -> Result<Self, ZeroTokenBudget> {
        if max_new_tokens == 0 {
            return Err(ZeroTokenBudget);
        }
        Ok(Self {
            prompt_style,
            max_new_tokens,
            temperature: 0.0,
            seed: 0,
        })
    }

    pub fn standard() -> Self {
        Self::new(PromptStyle::Std, 512).expect("nonzero budget")
    }

    pub fn strict() -> Self {
        Self::new(PromptStyle::Strict, 768).expect("nonzero budget")
    }

    /// Short form such as `std, 512`.
    pub fn label(&self) -> String {
        format!("{}, {}", self.prompt_style.tag(), self.max_new_tokens)
    }
}

impl Default for EvalMode {
    fn default() -> Self {
        Self::standard()
    }
}

/// One line of a generations file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLine {
    pub id: String,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

impl GenerationLine {
    pub fn new(id: impl Into<String>, output: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            output: output.into(),
            tokens: None,
            elapsed_ms: None,
            mode: None,
        }
    }

    pub fn timing(&self) -> Option<Timing> {
        Some(Timing {
            tokens: self.tokens?,
            elapsed_ms: self.elapsed_ms?,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenerationsIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

pub fn read_generations(path: &Path) -> Result<Vec<GenerationLine>, GenerationsIoError> {
    let io_err = |source| GenerationsIoError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| GenerationsIoError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_generations(path: &Path, lines: &[GenerationLine]) -> Result<(), GenerationsIoError> {
    let io_err = |source| GenerationsIoError::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for line in lines {
        serde_json::to_writer(&mut out, line).map_err(|e| io_err(io::Error::other(e)))?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub example_id: String,
    pub family: Family,
    pub output_text: String,
    pub report: ValidationReport,
    pub em: bool,
    pub bleu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    /// No generation was supplied for this example.
    #[serde(default)]
    pub missing: bool,
}

/// Pass counts behind the headline rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PassCounts {
    pub total: usize,
    pub syntax: usize,
    pub schema: usize,
    pub semantic: usize,
    pub policy: usize,
    pub full: usize,
    pub exact_match: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub counts: PassCounts,
    pub sc: f64,
    pub schema_pass_at_1: f64,
    pub semantic_pass_at_1: f64,
    pub policy_pass_at_1: f64,
    pub full_pass_at_1: f64,
    pub em_rate: f64,
    pub bleu_mean: f64,
}

impl Aggregates {
    pub fn from_outcomes(outcomes: &[GenerationOutcome]) -> Self {
        let mut c = PassCounts {
            total: outcomes.len(),
            ..PassCounts::default()
        };
        for o in outcomes {
            let r = &o.report;
            c.syntax += r.l1_pass as usize;
            c.schema += (r.l1_pass && r.l2_pass) as usize;
            c.semantic += (r.l1_pass && r.l2_pass && r.l3_pass) as usize;
            c.policy += (r.l1_pass && r.l2_pass && r.l4_pass) as usize;
            c.full += r.overall as usize;
            c.exact_match += o.em as usize;
        }
        let rate = |k: usize| if c.total == 0 { 0.0 } else { k as f64 / c.total as f64 };
        let bleu_mean = if outcomes.is_empty() {
            0.0
        } else {
            outcomes.iter().map(|o| o.bleu).sum::<f64>() / outcomes.len() as f64
        };
        Self {
            counts: c,
            sc: rate(c.syntax),
            schema_pass_at_1: rate(c.schema),
            semantic_pass_at_1: rate(c.semantic),
            policy_pass_at_1: rate(c.policy),
            full_pass_at_1: rate(c.full),
            em_rate: rate(c.exact_match),
            bleu_mean,
        }
    }

    /// Metric name to value, in a fixed order.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("sc", self.sc),
            ("schema_pass_at_1", self.schema_pass_at_1),
            ("semantic_pass_at_1", self.semantic_pass_at_1),
            ("policy_pass_at_1", self.policy_pass_at_1),
            ("full_pass_at_1", self.full_pass_at_1),
            ("em_rate", self.em_rate),
            ("bleu_mean", self.bleu_mean),
        ]
    }
}

/// Failing outcomes attributed to their lowest failing level.
pub fn level_breakdown(outcomes: &[GenerationOutcome]) -> BTreeMap<Level, usize> {
    let mut out: BTreeMap<Level, usize> = Level::ALL.into_iter().map(|l| (l, 0)).collect();
    for o in outcomes {
        if let Some(level) = o.report.lowest_failing_level() {
            *out.entry(level).or_default() += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub name: String,
    pub mode: EvalMode,
    pub outcomes: Vec<GenerationOutcome>,
    pub aggregates: Aggregates,
    pub breakdown: BTreeMap<Level, usize>,
    pub resource: ResourceStats,
}

impl EvalRun {
    /// Sorts outcomes by id and derives aggregates and breakdown.
    pub fn from_outcomes(name: impl Into<String>, mode: EvalMode, mut outcomes: Vec<GenerationOutcome>) -> Self {
        outcomes.sort_by(|a, b| a.example_id.cmp(&b.example_id));
        let timings: Vec<Timing> = outcomes.iter().filter_map(|o| o.timing).collect();
        Self {
            name: name.into(),
            mode,
            aggregates: Aggregates::from_outcomes(&outcomes),
            breakdown: level_breakdown(&outcomes),
            resource: ResourceStats {
                tokens: TokenStats::from_timings(&timings),
                ..ResourceStats::default()
            },
            outcomes,
        }
    }

    pub fn failing(&self) -> usize {
        self.aggregates.counts.total - self.aggregates.counts.full
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("generation id {0:?} appears more than once")]
    DuplicateId(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

fn evaluate_one(
    reference: &crate::corpus::CorpusRecord,
    line: Option<&GenerationLine>,
    cm: &ContextModel,
) -> Result<GenerationOutcome, ConfigError> {
    let reference_text = strip_llm_wrapping(&reference.yaml).unwrap_or_default();
    let Some(line) = line else {
        return Ok(GenerationOutcome {
            example_id: reference.id.clone(),
            family: reference.family,
            output_text: String::new(),
            report: ValidationReport::l1_failure(FailureDetail::new(
                Level::L1,
                MISSING_OUTPUT,
                FieldPath::package(),
                "no generation for this example",
            )),
            em: false,
            bleu: 0.0,
            timing: None,
            missing: true,
        });
    };
    let output = strip_llm_wrapping(&line.output).unwrap_or_default();
    let report = run_circuit(&output, cm)?;
    Ok(GenerationOutcome {
        example_id: reference.id.clone(),
        family: reference.family,
        em: report.l1_pass && structural_exact_match(&output, &reference_text),
        bleu: bleu_aux(&output, &reference_text),
        output_text: output,
        report,
        timing: line.timing(),
        missing: false,
    })
}

/// Scores generations against the test split. Generation ids absent from
/// the split are ignored; split ids without a generation become
/// `missing-output` L1 failures.
pub fn evaluate_outputs(
    test: &Corpus,
    generations: &[GenerationLine],
    name: &str,
    mode: EvalMode,
    cm: &ContextModel,
) -> Result<EvalRun, EvalError> {
    let mut by_id: BTreeMap<&str, &GenerationLine> = BTreeMap::new();
    for g in generations {
        if by_id.insert(g.id.as_str(), g).is_some() {
            return Err(EvalError::DuplicateId(g.id.clone()));
        }
        if g.mode.as_deref().is_some_and(|m| m != mode.label()) {
            tracing::warn!(id = %g.id, mode = ?g.mode, expected = %mode.label(), "generation mode differs from run mode");
        }
    }
    let known: BTreeSet<&str> = test.ids().collect();
    let extra = by_id.keys().filter(|id| !known.contains(*id)).count();
    if extra > 0 {
        tracing::warn!(extra, "generations without a test example were ignored");
    }

    let (outcomes, mut stats) = resource_probe(|| -> Result<Vec<GenerationOutcome>, ConfigError> {
        let workers = thread::available_parallelism().map(usize::from).unwrap_or(1).min(8);
        let chunk = test.records.len().div_ceil(workers).max(1);
        let by_id = &by_id;
        let parts: Vec<Result<Vec<GenerationOutcome>, ConfigError>> = thread::scope(|s| {
            let handles: Vec<_> = test
                .records
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || {
                        part.iter()
                            .map(|r| evaluate_one(r, by_id.get(r.id.as_str()).copied(), cm))
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
        });
        let mut all = Vec::new();
        for p in parts {
            all.extend(p?);
        }
        Ok(all)
    });
    let mut run = EvalRun::from_outcomes(name, mode, outcomes?);
    stats.tokens = run.resource.tokens;
    run.resource = stats;
    Ok(run)
}

/// One family × level × rule cell of the failure analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCell {
    pub family: Family,
    pub level: Level,
    pub rule_id: String,
    pub count: usize,
    /// Field name (last path segment, indices removed) to occurrences.
    pub fields: BTreeMap<String, usize>,
    pub exemplars: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FailureAnalysis {
    pub failing: usize,
    /// Sorted by count, descending.
    pub cells: Vec<FailureCell>,
}

impl FailureAnalysis {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn top(&self) -> Option<&FailureCell> {
        self.cells.first()
    }
}

fn field_name(path: &FieldPath) -> String {
    let last = path.field.rsplit('.').next().unwrap_or("");
    match last.find('[') {
        Some(i) => last[..i].to_string(),
        None => last.to_string(),
    }
}

/// Each failing outcome lands in exactly one cell, keyed by its lowest
/// failing level and the first rule reported there.
pub fn analyze_failures(run: &EvalRun) -> FailureAnalysis {
    let mut cells: BTreeMap<(Family, Level, String), FailureCell> = BTreeMap::new();
    let mut failing = 0;
    for o in &run.outcomes {
        let Some(level) = o.report.lowest_failing_level() else { continue };
        failing += 1;
        let at_level: Vec<&FailureDetail> = o.report.failures_at(level).collect();
        let rule_id = at_level.first().map(|f| f.rule_id.clone()).unwrap_or_default();
        let cell = cells.entry((o.family, level, rule_id.clone())).or_insert_with(|| FailureCell {
            family: o.family,
            level,
            rule_id,
            count: 0,
            fields: BTreeMap::new(),
            exemplars: Vec::new(),
        });
        cell.count += 1;
        for f in &at_level {
            let name = field_name(&f.path);
            if !name.is_empty() {
                *cell.fields.entry(name).or_default() += 1;
            }
        }
        if cell.exemplars.len() < EXEMPLARS_PER_CELL {
            cell.exemplars.push(o.example_id.clone());
        }
    }
    let mut cells: Vec<FailureCell> = cells.into_values().collect();
    cells.sort_by_key(|c| std::cmp::Reverse(c.count));
    FailureAnalysis { failing, cells }
}
