mod support;

use std::path::Path;
use std::sync::OnceLock;

use kdistill_core::corpus::{Corpus, CorpusRecord, Provenance};
use kdistill_core::manifest::{content_hash, parse_package};
use kdistill_core::metrics::{
    analyze_failures, evaluate_outputs, read_generations, render_report, resource_probe, write_generations, EvalError,
    EvalMode, EvalRun, GenerationLine, ReportFormat, Timing, TokenStats, MISSING_OUTPUT,
};
use kdistill_core::teacher::{Complexity, PromptStyle, Stream};
use kdistill_core::validate::run_circuit;
use kdistill_core::{ContextModel, Family, Level, ValidationReport};
use proptest::prelude::*;
use support::pilot;

const SCHEMAS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/kubernetes-1.30.0");

fn cm() -> &'static ContextModel {
    static CM: OnceLock<ContextModel> = OnceLock::new();
    CM.get_or_init(|| ContextModel::load_default(SCHEMAS).unwrap())
}

/// Every golden fixture as a test record, valid or not.
fn golden_split() -> Corpus {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".yaml"))
        .collect();
    names.sort();
    let records = names
        .iter()
        .map(|name| {
            let yaml = std::fs::read_to_string(dir.join(name)).unwrap();
            let pkg = parse_package(&yaml).ok();
            CorpusRecord {
                id: name.trim_end_matches(".yaml").to_string(),
                instruction: format!("Write {name}"),
                context: String::new(),
                source: Stream::RealReverse,
                family: Family::Composite,
                complexity: pkg.as_ref().map(Complexity::of_package).unwrap_or(Complexity::Simple),
                digest: pkg.as_ref().map(content_hash),
                report: run_circuit(&yaml, cm()).unwrap(),
                yaml,
                task: None,
                teacher: None,
            }
        })
        .collect();
    Corpus::new(Provenance::new("golden", "2026-01-01T00:00:00Z"), records)
}

fn identity_generations(split: &Corpus) -> Vec<GenerationLine> {
    split.records.iter().map(|r| GenerationLine::new(&r.id, &r.yaml)).collect()
}

#[test]
fn pilot_rows_render_exactly() {
    let runs: Vec<EvalRun> = pilot::rows().iter().map(pilot::run).collect();
    let table = render_report(&runs, ReportFormat::Markdown);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "| Run | Mode | full-pass | L1 | L2 | L3 | L4 | BLEU |");
    assert_eq!(&lines[2..], [
        "| 1K + diversity | std, 512 | 164/200 = 82.0% | 10 | 19 | 4 | 3 | 83.42 |",
        "| 2K + error corr. | std, 512 | 157/200 = 78.5% | 21 | 14 | 8 | 0 | 83.05 |",
        "| 1K + strict infer. | strict, 768 | 182/200 = 91.0% | 7 | 11 | 0 | 0 | 78.45 |",
        "| 1.2K + resid. corr. | strict, 768 | 183/200 = 91.5% | 1 | 10 | 2 | 4 | 81.08 |",
    ]);
}

#[test]
fn single_run_is_one_row() {
    let run = pilot::run(&pilot::rows()[3]);
    assert_eq!(render_report(&[run], ReportFormat::Markdown).lines().count(), 3);
}

#[test]
fn breakdown_conserves_failures() {
    for row in pilot::rows() {
        let run = pilot::run(&row);
        assert_eq!(run.breakdown.values().sum::<usize>(), run.failing());
        assert_eq!(run.breakdown.values().copied().collect::<Vec<_>>(), row.levels);
        assert_eq!(run.aggregates.full_pass_at_1, row.full as f64 / 200.0);
    }
}

#[test]
fn csv_and_json_series() {
    let runs: Vec<EvalRun> = pilot::rows().iter().map(pilot::run).collect();
    let csv = render_report(&runs, ReportFormat::Csv);
    assert!(csv.starts_with("run,metric,value\n"));
    assert!(csv.contains("1.2K + resid. corr.,full_pass_at_1,0.915\n"));
    assert!(csv.contains("2K + error corr.,failures_L1,21\n"));
    let json: serde_json::Value = serde_json::from_str(&render_report(&runs, ReportFormat::Json)).unwrap();
    assert_eq!(json[0]["full_pass"], "164/200 = 82.0%");
    assert_eq!(json[3]["breakdown"]["L2"], 10);
}

#[test]
fn identical_generations_score_perfectly_on_valid_references() {
    let mut split = golden_split();
    split.records.retain(|r| r.report.overall);
    let run = evaluate_outputs(&split, &identity_generations(&split), "identity", EvalMode::standard(), cm()).unwrap();
    let a = &run.aggregates;
    assert_eq!(a.counts.total, split.len());
    for rate in [a.sc, a.schema_pass_at_1, a.semantic_pass_at_1, a.policy_pass_at_1, a.full_pass_at_1, a.em_rate] {
        assert_eq!(rate, 1.0);
    }
    assert_eq!(a.bleu_mean, 100.0);
    assert!(analyze_failures(&run).is_empty());
}

#[test]
fn exact_match_implies_full_pass_when_reference_passes() {
    let split = golden_split();
    let run = evaluate_outputs(&split, &identity_generations(&split), "golden", EvalMode::standard(), cm()).unwrap();
    for (o, r) in run.outcomes.iter().zip(&split.records) {
        assert_eq!(o.example_id, r.id);
        if o.em && r.report.overall {
            assert!(o.report.overall, "{}", o.example_id);
        }
    }
}

#[test]
fn missing_output_is_an_l1_failure() {
    let mut split = golden_split();
    split.records.retain(|r| r.report.overall);
    let mut gens = identity_generations(&split);
    let dropped = gens.remove(0).id;
    let run = evaluate_outputs(&split, &gens, "gap", EvalMode::standard(), cm()).unwrap();
    assert_eq!(run.aggregates.counts.total, split.len());
    assert_eq!(run.aggregates.counts.full, split.len() - 1);
    let o = run.outcomes.iter().find(|o| o.example_id == dropped).unwrap();
    assert!(o.missing);
    assert_eq!(o.report.failures[0].rule_id, MISSING_OUTPUT);
    assert_eq!(run.breakdown[&Level::L1], 1);
}

#[test]
fn duplicate_generation_ids_are_rejected() {
    let split = golden_split();
    let mut gens = identity_generations(&split);
    gens.push(gens[0].clone());
    assert!(matches!(
        evaluate_outputs(&split, &gens, "dup", EvalMode::standard(), cm()),
        Err(EvalError::DuplicateId(_))
    ));
}

#[test]
fn evaluation_is_repeatable() {
    let split = golden_split();
    let mut gens = identity_generations(&split);
    gens[3].output = "Sure! Here is the manifest:\napiVersion: v1\nkind: Pod\n".into();
    let a = evaluate_outputs(&split, &gens, "r", EvalMode::strict(), cm()).unwrap();
    let b = evaluate_outputs(&split, &gens, "r", EvalMode::strict(), cm()).unwrap();
    assert_eq!(a.aggregates, b.aggregates);
    assert_eq!(a.outcomes, b.outcomes);
}

#[test]
fn best_run_residuals_concentrate_at_l2() {
    let run = pilot::run(&pilot::rows()[3]);
    let analysis = analyze_failures(&run);
    let top = analysis.top().unwrap();
    assert_eq!((top.level, top.family, top.rule_id.as_str()), (Level::L2, Family::StatefulSet, "unknown-field"));
    assert_eq!(top.count, 10);
    assert_eq!(top.fields["volumeMounts"], 10);
    assert_eq!(top.exemplars.len(), 3);
    assert_eq!(analysis.cells.iter().map(|c| c.count).sum::<usize>(), run.failing());
    assert_eq!(analysis.failing, 17);
}

#[test]
fn token_stats_mean_and_absence() {
    let timings: Vec<Timing> = (0..6).map(|_| Timing { tokens: 100, elapsed_ms: 16950.0 }).collect();
    let stats = TokenStats::from_timings(&timings).unwrap();
    assert_eq!(stats.total_tokens, 600);
    assert_eq!(stats.total_ms, 101700.0);
    assert_eq!(format!("{:.2}", stats.mean_ms_per_token), "169.50");
    assert_eq!(TokenStats::from_timings(&[]), None);

    let rates: Vec<Timing> = (1..=20).map(|i| Timing { tokens: 1, elapsed_ms: i as f64 }).collect();
    assert_eq!(TokenStats::from_timings(&rates).unwrap().p95_ms_per_token, 19.0);

    let split = golden_split();
    let run = evaluate_outputs(&split, &identity_generations(&split), "untimed", EvalMode::standard(), cm()).unwrap();
    assert!(run.resource.tokens.is_none());
}

#[test]
fn probe_reports_time_and_memory() {
    let ((), stats) = resource_probe(|| ());
    assert!(stats.wall_ms >= 0.0);
    assert!(stats.peak_rss_kib.unwrap() > 0);
}

#[test]
fn generations_round_trip_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.jsonl");
    let mut line = GenerationLine::new("a", "kind: Pod\n");
    line.tokens = Some(12);
    line.elapsed_ms = Some(2034.0);
    line.mode = Some("std, 512".into());
    write_generations(&path, &[line.clone(), GenerationLine::new("b", "")]).unwrap();
    let back = read_generations(&path).unwrap();
    assert_eq!(back[0], line);
    assert_eq!(back[0].timing(), Some(Timing { tokens: 12, elapsed_ms: 2034.0 }));
    assert_eq!(back[1].timing(), None);

    std::fs::write(&path, "{\"id\":\"a\",\"output\":\"x\"}\n{\"id\":\n").unwrap();
    let err = read_generations(&path).unwrap_err().to_string();
    assert!(err.contains(":2:"), "{err}");
}

#[test]
fn mode_labels_and_guard() {
    assert_eq!(EvalMode::standard().label(), "std, 512");
    assert_eq!(EvalMode::strict().label(), "strict, 768");
    assert!(EvalMode::new(PromptStyle::Std, 0).is_err());
}

fn report_strategy() -> impl Strategy<Value = ValidationReport> {
    (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(l1, l2, l3, l4)| {
        if !l1 {
            return pilot::failing_at(Level::L1, "syntax", "");
        }
        let mut r = pilot::passing();
        for (level, pass) in [(Level::L2, l2), (Level::L3, l3), (Level::L4, l4)] {
            if !pass {
                let f = pilot::failing_at(level, "x", "a.b");
                r.failures.extend(f.failures);
            }
        }
        r.l2_pass = l2;
        r.l3_pass = l3;
        r.l4_pass = l4;
        r.overall = l2 && l3 && l4;
        r
    })
}

proptest! {
    #[test]
    fn fuzzed_reports_keep_metric_order(reports in prop::collection::vec(report_strategy(), 1..60)) {
        let outcomes = reports
            .into_iter()
            .enumerate()
            .map(|(i, report)| kdistill_core::metrics::GenerationOutcome {
                example_id: format!("f{i}"),
                family: Family::Rbac,
                output_text: String::new(),
                report,
                em: false,
                bleu: 0.0,
                timing: None,
                missing: false,
            })
            .collect();
        let run = EvalRun::from_outcomes("fuzz", EvalMode::standard(), outcomes);
        let a = &run.aggregates;
        prop_assert!(a.full_pass_at_1 <= a.schema_pass_at_1.min(a.semantic_pass_at_1).min(a.policy_pass_at_1));
        prop_assert!(a.schema_pass_at_1.max(a.semantic_pass_at_1).max(a.policy_pass_at_1) <= a.sc);
        prop_assert!(a.semantic_pass_at_1 <= a.schema_pass_at_1 && a.policy_pass_at_1 <= a.schema_pass_at_1);
        prop_assert_eq!(run.breakdown.values().sum::<usize>(), run.failing());
        prop_assert_eq!(analyze_failures(&run).cells.iter().map(|c| c.count).sum::<usize>(), run.failing());
        for o in &run.outcomes {
            prop_assert!(o.report.is_consistent());
        }
    }
}
