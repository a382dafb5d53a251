use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use kdistill_core::corpus::{
    correction_plan, deduplicate, filter_corpus, plan_digest, read_corpus, refilter, split, stratified_plan, write_corpus,
    Corpus, CorpusIoError, CorpusRecord, Provenance, SplitError, SplitSpec, Splits,
};
use kdistill_core::metrics::{analyze_failures, FailureAnalysis, FailureCell};
use kdistill_core::teacher::{CandidateRecord, Complexity, EndpointConfig, MockTeacher, TeacherClient};
use kdistill_core::{ContextModel, Family, Level};

const SCHEMAS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/kubernetes-1.30.0");

fn cm() -> &'static ContextModel {
    static CM: OnceLock<ContextModel> = OnceLock::new();
    CM.get_or_init(|| ContextModel::load_default(SCHEMAS).unwrap())
}

struct Pipeline {
    candidates: Vec<CandidateRecord>,
    admitted: Corpus,
    rejected: Vec<CorpusRecord>,
}

/// 1900 mock candidates, every tenth one defective.
fn pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| {
        let mut targets: BTreeMap<String, usize> = Family::ALL.iter().map(|f| (f.tag().to_string(), 238)).collect();
        targets.insert(Family::Composite.tag().to_string(), 234);
        let tasks = stratified_plan(&targets, &Complexity::ALL, "1.30.0").unwrap();
        assert_eq!(tasks.len(), 1900);
        let config = EndpointConfig {
            concurrency: 4,
            rate_per_minute: 0,
            ..EndpointConfig::default()
        };
        let client = TeacherClient::new(Box::new(MockTeacher::new(10)), config, cm().clone());
        let candidates: Vec<CandidateRecord> = client.generate_batch(&tasks).into_iter().map(Result::unwrap).collect();
        let provenance = Provenance::new(plan_digest(&tasks), "2026-01-01T00:00:00Z");
        let (admitted, rejected) = filter_corpus(&candidates, cm(), provenance).unwrap();
        Pipeline {
            candidates,
            admitted,
            rejected,
        }
    })
}

const PILOT: SplitSpec = SplitSpec {
    train_size: 1200,
    validation_size: 100,
    test_size: 200,
    seed: 20240917,
    stratified: false,
};

#[test]
fn filter_admits_exactly_the_clean_candidates() {
    let p = pipeline();
    assert_eq!(p.admitted.len() + p.rejected.len(), p.candidates.len());
    assert_eq!(p.admitted.len(), 1710);
    assert!(p.admitted.records.iter().all(|r| r.report.overall && r.digest.is_some()));
    let levels: BTreeSet<Level> = p.rejected.iter().filter_map(|r| r.report.lowest_failing_level()).collect();
    assert_eq!(levels, Level::ALL.into_iter().collect());
}

#[test]
fn admitted_records_revalidate() {
    let (again, dropped) = refilter(&pipeline().admitted, cm()).unwrap();
    assert!(dropped.is_empty());
    assert_eq!(again, pipeline().admitted);
}

#[test]
fn dedup_keeps_first_id_per_digest() {
    let mut corpus = pipeline().admitted.clone();
    let mut copy = corpus.records[5].clone();
    copy.id = "zz-duplicate".into();
    corpus.records.push(copy);
    let mut earlier = corpus.records[7].clone();
    earlier.id = "aa-duplicate".into();
    corpus.records.push(earlier);
    let mut undigested = corpus.records[9].clone();
    undigested.id = "no-digest".into();
    undigested.digest = None;
    corpus.records.push(undigested);

    let d = deduplicate(&corpus);
    assert_eq!(d.len(), 1710);
    let ids: BTreeSet<&str> = d.ids().collect();
    assert!(!ids.contains("zz-duplicate") && !ids.contains("no-digest"));
    assert!(ids.contains("aa-duplicate"));
    assert!(!ids.contains(corpus.records[7].id.as_str()));
    assert!(d.ids().zip(d.ids().skip(1)).all(|(a, b)| a < b));
}

fn id_set(c: &Corpus) -> BTreeSet<String> {
    c.ids().map(str::to_string).collect()
}

fn assert_partition(deduped: &Corpus, s: &Splits) {
    let parts = [&s.train, &s.validation, &s.test, &s.pool];
    let mut union = BTreeSet::new();
    let mut digests = BTreeSet::new();
    for part in parts {
        for r in &part.records {
            assert!(union.insert(r.id.clone()), "{} twice", r.id);
            assert!(digests.insert(r.digest.clone().unwrap()));
        }
    }
    assert_eq!(union, id_set(deduped));
}

#[test]
fn pilot_split_sizes_and_disjointness() {
    let deduped = deduplicate(&pipeline().admitted);
    let s = split(&deduped, &PILOT).unwrap();
    let sizes = [s.train.len(), s.validation.len(), s.test.len(), s.pool.len()];
    assert_eq!(sizes, [1200, 100, 200, 210]);
    assert_partition(&deduped, &s);
    assert_eq!(s.test_freeze_marker, s.test.freeze_marker());
}

#[test]
fn split_is_deterministic_and_seed_sensitive() {
    let deduped = deduplicate(&pipeline().admitted);
    let a = split(&deduped, &PILOT).unwrap();
    let mut shuffled = deduped.clone();
    shuffled.records.reverse();
    let b = split(&shuffled, &PILOT).unwrap();
    assert_eq!(a, b);
    let c = split(&deduped, &SplitSpec { seed: 7, ..PILOT }).unwrap();
    assert_ne!(a.test_freeze_marker, c.test_freeze_marker);
}

#[test]
fn stratified_split_tracks_family_shares() {
    let deduped = deduplicate(&pipeline().admitted);
    let s = split(&deduped, &SplitSpec { stratified: true, ..PILOT }).unwrap();
    assert_partition(&deduped, &s);
    let count = |c: &Corpus, f: Family| c.records.iter().filter(|r| r.family == f).count() as f64;
    for f in Family::ALL {
        let share = count(&deduped, f) / deduped.len() as f64;
        let test_share = count(&s.test, f) / s.test.len() as f64;
        assert!((share - test_share).abs() <= 1.0 / 200.0 + 1e-12, "{f}: {share} vs {test_share}");
    }
}

#[test]
fn split_guards() {
    let deduped = deduplicate(&pipeline().admitted);
    assert_eq!(
        split(&deduped, &SplitSpec { train_size: 2000, ..PILOT }),
        Err(SplitError::Infeasible { requested: 2300, available: 1710 })
    );
    assert!(matches!(split(&deduped, &SplitSpec { test_size: 0, ..PILOT }), Err(SplitError::NonPositive(..))));
    let mut dup = deduped.clone();
    dup.records.push(dup.records[0].clone());
    assert!(matches!(split(&dup, &PILOT), Err(SplitError::DuplicateId(_))));
    let mut same_digest = deduped.clone();
    let mut r = same_digest.records[0].clone();
    r.id = "other".into();
    same_digest.records.push(r);
    assert!(matches!(split(&same_digest, &PILOT), Err(SplitError::DuplicateDigest { .. })));
}

#[test]
fn corpus_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let small = Corpus::new(pipeline().admitted.provenance.clone(), pipeline().admitted.records[..40].to_vec());
    write_corpus(&path, &small).unwrap();
    assert_eq!(read_corpus(&path).unwrap(), small);

    let empty = Corpus::new(Provenance::new("p", "t"), Vec::new());
    write_corpus(&path, &empty).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
    assert_eq!(read_corpus(&path).unwrap(), empty);

    write_corpus(&path, &small).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let cut = text.lines().take(11).collect::<Vec<_>>().join("\n");
    std::fs::write(&path, &cut[..cut.len() - 15]).unwrap();
    match read_corpus(&path) {
        Err(CorpusIoError::Parse { line, .. }) => assert_eq!(line, 11),
        other => panic!("expected parse error, got {other:?}"),
    }
}

fn cell(family: Family, level: Level, rule: &str, field: &str, count: usize) -> FailureCell {
    FailureCell {
        family,
        level,
        rule_id: rule.into(),
        count,
        fields: BTreeMap::from([(field.to_string(), count)]),
        exemplars: Vec::new(),
    }
}

#[test]
fn correction_plan_targets_dominant_failures() {
    let analysis = FailureAnalysis {
        failing: 17,
        cells: vec![
            cell(Family::StatefulSet, Level::L2, "unknown-field", "volumeMounts", 12),
            cell(Family::Hpa, Level::L3, "R2", "name", 3),
            cell(Family::Rbac, Level::L4, "P05", "name", 2),
        ],
    };
    let plan = correction_plan(&analysis, 200, "1.30.0");
    assert_eq!(plan.len(), 200);
    let sts: Vec<_> = plan.iter().filter(|t| t.family == Family::StatefulSet).collect();
    assert!(sts.len() > 100);
    assert!(sts[0].constraints.iter().any(|c| c.contains("volumeMounts")));
    assert_eq!(plan, correction_plan(&analysis, 200, "1.30.0"));
    let ids: BTreeSet<&str> = plan.iter().map(|t| t.id.as_str()).collect();
    assert_eq!(ids.len(), 200);

    assert!(correction_plan(&FailureAnalysis::default(), 200, "1.30.0").is_empty());
}

#[test]
fn correction_plan_from_analyzed_rejects() {
    let p = pipeline();
    let outcomes = p
        .rejected
        .iter()
        .map(|r| kdistill_core::metrics::GenerationOutcome {
            example_id: r.id.clone(),
            family: r.family,
            output_text: r.yaml.clone(),
            report: r.report.clone(),
            em: false,
            bleu: 0.0,
            timing: None,
            missing: false,
        })
        .collect();
    let run = kdistill_core::metrics::EvalRun::from_outcomes("rejects", Default::default(), outcomes);
    let analysis = analyze_failures(&run);
    assert_eq!(analysis.failing, 190);
    let plan = correction_plan(&analysis, 50, "1.30.0");
    assert_eq!(plan.len(), 50);
}
