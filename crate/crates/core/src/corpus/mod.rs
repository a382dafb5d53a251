//! Corpus-level orchestration: planning, admission through the circuit,
//! deduplication, deterministic splits and persistence.

mod io;
mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::thread;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::context::{ContextModel, Family, UnknownFamily};
use crate::manifest::{content_hash, strip_llm_wrapping};
use crate::metrics::FailureAnalysis;
use crate::teacher::{CandidateRecord, Complexity, GenerationTask, Stream, TeacherMeta};
use crate::validate::{run_on_package, validate_l1, ConfigError, FailureDetail, FieldPath, Level, ValidationReport};

pub use io::{read_candidates, read_corpus, write_candidates, write_corpus, CorpusIoError, FileHeader};
pub use split::{freeze_marker, split, SplitError, SplitMix64, SplitSpec, Splits};

pub const TOOL_VERSION: &str = concat!("kdistill ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub plan_digest: String,
    pub created_at: String,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(plan_digest: impl Into<String>, created_at: impl Into<String>) -> Self {
        Self {
            plan_digest: plan_digest.into(),
            created_at: created_at.into(),
            tool_version: TOOL_VERSION.to_string(),
        }
    }
}

/// A candidate with its validation report and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub instruction: String,
    pub context: String,
    pub yaml: String,
    pub source: Stream,
    pub family: Family,
    pub complexity: Complexity,
    /// Content hash of the parsed artifact; present iff L1 passed.
    pub digest: Option<String>,
    pub report: ValidationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<GenerationTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<TeacherMeta>,
}

impl CorpusRecord {
    /// Validates a candidate and attaches report, digest and labels.
    pub fn assess(candidate: &CandidateRecord, cm: &ContextModel) -> Result<Self, ConfigError> {
        let (report, digest, complexity) = match strip_llm_wrapping(&candidate.artifact_text) {
            Err(_) => (
                ValidationReport::l1_failure(FailureDetail::new(
                    Level::L1,
                    "empty",
                    FieldPath::package(),
                    "artifact is empty",
                )),
                None,
                candidate.task.complexity,
            ),
            Ok(text) => match validate_l1(&text) {
                Err(detail) => (ValidationReport::l1_failure(detail), None, candidate.task.complexity),
                Ok(pkg) => (
                    run_on_package(&pkg, cm)?,
                    Some(content_hash(&pkg)),
                    Complexity::of_package(&pkg),
                ),
            },
        };
        Ok(Self {
            id: candidate.id.clone(),
            instruction: candidate.instruction.clone(),
            context: candidate.context_fragment.clone(),
            yaml: candidate.artifact_text.clone(),
            source: candidate.source,
            family: candidate.task.family,
            complexity,
            digest,
            report,
            task: Some(candidate.task.clone()),
            teacher: Some(candidate.teacher.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub provenance: Provenance,
    pub records: Vec<CorpusRecord>,
}

impl Corpus {
    pub fn new(provenance: Provenance, records: Vec<CorpusRecord>) -> Self {
        Self { provenance, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn freeze_marker(&self) -> String {
        freeze_marker(self.ids())
    }

    pub fn get(&self, id: &str) -> Option<&CorpusRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("generation targets are empty")]
    Empty,
    #[error(transparent)]
    UnknownFamily(#[from] UnknownFamily),
    #[error("complexity mix is empty")]
    EmptyMix,
}

/// Digest of a task list, recorded as corpus provenance.
pub fn plan_digest(tasks: &[GenerationTask]) -> String {
    let mut h = Sha256::new();
    for t in tasks {
        h.update(serde_json::to_vec(t).expect("tasks serialize"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Emits exactly `count` tasks per family, rotating complexities round-robin
/// within each family. Families follow the catalog order; ids carry a global
/// sequence number.
pub fn stratified_plan(
    targets: &BTreeMap<String, usize>,
    mix: &[Complexity],
    kubernetes_version: &str,
) -> Result<Vec<GenerationTask>, PlanError> {
    if targets.is_empty() {
        return Err(PlanError::Empty);
    }
    if mix.is_empty() {
        return Err(PlanError::EmptyMix);
    }
    let mut per_family: BTreeMap<Family, usize> = BTreeMap::new();
    for (key, count) in targets {
        *per_family.entry(key.parse::<Family>()?).or_default() += count;
    }
    let mut tasks = Vec::new();
    for family in Family::ALL {
        let count = per_family.get(&family).copied().unwrap_or(0);
        for i in 0..count {
            let id = format!("{}-{:05}", family.tag(), tasks.len());
            tasks.push(GenerationTask::direct(id, family, mix[i % mix.len()], kubernetes_version));
        }
    }
    Ok(tasks)
}

/// Partitions candidates by the circuit verdict. Every candidate lands in
/// exactly one side; both sides carry reports.
pub fn filter_corpus(
    candidates: &[CandidateRecord],
    cm: &ContextModel,
    provenance: Provenance,
) -> Result<(Corpus, Vec<CorpusRecord>), ConfigError> {
    let workers = thread::available_parallelism().map(usize::from).unwrap_or(1).min(8);
    let chunk = candidates.len().div_ceil(workers).max(1);
    let assessed: Vec<Result<Vec<CorpusRecord>, ConfigError>> = thread::scope(|s| {
        let handles: Vec<_> = candidates
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|c| CorpusRecord::assess(c, cm)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("validation worker panicked")).collect()
    });
    let mut admitted = Vec::new();
    let mut rejected = Vec::new();
    for batch in assessed {
        for record in batch? {
            if record.report.overall {
                admitted.push(record);
            } else {
                rejected.push(record);
            }
        }
    }
    Ok((Corpus::new(provenance, admitted), rejected))
}

/// Re-validates already-assessed records (used to re-filter a corpus).
pub fn refilter(corpus: &Corpus, cm: &ContextModel) -> Result<(Corpus, Vec<CorpusRecord>), ConfigError> {
    let mut admitted = Vec::new();
    let mut rejected = Vec::new();
    for r in &corpus.records {
        let mut r = r.clone();
        r.report = match validate_l1(&strip_llm_wrapping(&r.yaml).unwrap_or_default()) {
            Ok(pkg) => run_on_package(&pkg, cm)?,
            Err(d) => ValidationReport::l1_failure(d),
        };
        if r.report.overall {
            admitted.push(r);
        } else {
            rejected.push(r);
        }
    }
    Ok((Corpus::new(corpus.provenance.clone(), admitted), rejected))
}

/// Keeps the first record (by id) for each canonical digest. Records without
/// a digest are dropped. Output is sorted by id.
pub fn deduplicate(corpus: &Corpus) -> Corpus {
    let mut records: Vec<&CorpusRecord> = corpus.records.iter().collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let mut seen = BTreeSet::new();
    let kept = records
        .into_iter()
        .filter(|r| match &r.digest {
            Some(d) => seen.insert(d.clone()),
            None => {
                tracing::warn!(id = %r.id, "dropping record without digest during deduplication");
                false
            }
        })
        .cloned()
        .collect();
    Corpus::new(corpus.provenance.clone(), kept)
}

/// Splits `total` proportionally to `weights` (largest remainder, ties by
/// order).
fn apportion(weights: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut out: Vec<usize> = weights.iter().map(|w| w * total / sum).collect();
    let mut rema: Vec<(usize, usize)> = weights.iter().enumerate().map(|(i, w)| (w * total % sum, i)).collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = total - out.iter().sum::<usize>();
    for &(_, i) in rema.iter().take(short) {
        out[i] += 1;
    }
    out
}

fn field_hint(rule_id: &str, field: &str) -> String {
    match rule_id {
        "unknown-field" => format!("Place `{field}` only where the schema defines it"),
        "required-field" => format!("Always set the required field `{field}`"),
        "type-mismatch" => format!("Use the schema type for `{field}`"),
        "R1" => "Make Service selectors match the workload pod template labels".into(),
        "R2" => "Point every HPA scaleTargetRef at a workload included in the package".into(),
        id if id.starts_with('P') => format!("Avoid the insecure setting `{field}`"),
        id => format!("Avoid {id} errors at `{field}`"),
    }
}

/// Correction batch of `total` tasks weighted toward the families with the
/// most failures, each carrying constraints that name the dominant errors.
pub fn correction_plan(analysis: &FailureAnalysis, total: usize, kubernetes_version: &str) -> Vec<GenerationTask> {
    let mut by_family: BTreeMap<Family, usize> = BTreeMap::new();
    for cell in &analysis.cells {
        *by_family.entry(cell.family).or_default() += cell.count;
    }
    if by_family.is_empty() || total == 0 {
        return Vec::new();
    }
    let families: Vec<Family> = by_family.keys().copied().collect();
    let counts: Vec<usize> = families.iter().map(|f| by_family[f]).collect();
    let quota = apportion(&counts, total);

    let mut tasks = Vec::new();
    for (family, n) in families.into_iter().zip(quota) {
        let mut cells: Vec<_> = analysis.cells.iter().filter(|c| c.family == family).collect();
        cells.sort_by(|a, b| b.count.cmp(&a.count).then(a.level.cmp(&b.level)).then(a.rule_id.cmp(&b.rule_id)));
        let constraints: Vec<String> = cells
            .iter()
            .take(3)
            .map(|c| {
                let field = c
                    .fields
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(f, _)| f.as_str())
                    .unwrap_or("");
                field_hint(&c.rule_id, field)
            })
            .collect();
        for i in 0..n {
            let id = format!("fix-{}-{:05}", family.tag(), tasks.len());
            tasks.push(
                GenerationTask::direct(id, family, Complexity::ALL[i % 3], kubernetes_version)
                    .with_constraints(constraints.clone()),
            );
        }
    }
    tasks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_rotates_complexity() {
        let targets = BTreeMap::from([("Ingress".to_string(), 2)]);
        let plan = stratified_plan(&targets, &Complexity::ALL, "1.30.0").unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[0].complexity, Complexity::Simple);
        assert_eq!(plan[1].complexity, Complexity::Medium);
        assert!(plan.iter().all(|t| t.family == Family::Ingress));
    }

    #[test]
    fn plan_covers_all_families() {
        let targets: BTreeMap<String, usize> = Family::ALL.iter().map(|f| (f.tag().to_string(), 150)).collect();
        let plan = stratified_plan(&targets, &Complexity::ALL, "1.30.0").unwrap();
        assert_eq!(plan.len(), 1200);
        let ids: BTreeSet<&str> = plan.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids.len(), 1200);
    }

    #[test]
    fn plan_guards() {
        assert!(matches!(stratified_plan(&BTreeMap::new(), &Complexity::ALL, "1.30.0"), Err(PlanError::Empty)));
        let bad = BTreeMap::from([("Widget".to_string(), 1)]);
        assert!(matches!(stratified_plan(&bad, &Complexity::ALL, "1.30.0"), Err(PlanError::UnknownFamily(_))));
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(&[1, 1, 1], 200), vec![67, 67, 66]);
        assert_eq!(apportion(&[10, 0, 5], 3), vec![2, 0, 1]);
        assert_eq!(apportion(&[3, 1], 0), vec![0, 0]);
    }
}
