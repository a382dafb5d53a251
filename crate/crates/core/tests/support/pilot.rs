//! Outcome fixtures shaped like the four pilot runs.

use kdistill_core::metrics::{EvalMode, EvalRun, GenerationOutcome};
use kdistill_core::validate::FieldPath;
use kdistill_core::{FailureDetail, Family, Level, ValidationReport};

pub struct PilotRow {
    pub name: &'static str,
    pub train: usize,
    pub mode: EvalMode,
    pub full: usize,
    /// Failures attributed to L1..L4.
    pub levels: [usize; 4],
    pub bleu: f64,
}

pub fn rows() -> [PilotRow; 4] {
    [
        PilotRow { name: "1K + diversity", train: 1000, mode: EvalMode::standard(), full: 164, levels: [10, 19, 4, 3], bleu: 83.42 },
        PilotRow { name: "2K + error corr.", train: 2000, mode: EvalMode::standard(), full: 157, levels: [21, 14, 8, 0], bleu: 83.05 },
        PilotRow { name: "1K + strict infer.", train: 1000, mode: EvalMode::strict(), full: 182, levels: [7, 11, 0, 0], bleu: 78.45 },
        PilotRow { name: "1.2K + resid. corr.", train: 1200, mode: EvalMode::strict(), full: 183, levels: [1, 10, 2, 4], bleu: 81.08 },
    ]
}

/// A report whose lowest failing level is `level`.
pub fn failing_at(level: Level, rule: &str, field: &str) -> ValidationReport {
    let detail = FailureDetail::new(level, rule, FieldPath::new(0, field), "fixture");
    if level == Level::L1 {
        return ValidationReport::l1_failure(detail);
    }
    ValidationReport {
        l1_pass: true,
        l2_pass: level != Level::L2,
        l3_pass: level != Level::L3,
        l4_pass: level != Level::L4,
        failures: vec![detail],
        warnings: Vec::new(),
        overall: false,
    }
}

pub fn passing() -> ValidationReport {
    ValidationReport::passing()
}

fn outcome(i: usize, family: Family, report: ValidationReport, bleu: f64) -> GenerationOutcome {
    GenerationOutcome {
        example_id: format!("ex-{i:03}"),
        family,
        output_text: String::new(),
        em: false,
        report,
        bleu,
        timing: None,
        missing: false,
    }
}

/// 200 outcomes: passes first, then failures per level. L2 failures are
/// StatefulSet volumeMounts placement errors.
pub fn run(row: &PilotRow) -> EvalRun {
    let mut outcomes = Vec::new();
    let mut i = 0;
    let mut push = |family, report| {
        outcomes.push(outcome(i, family, report, row.bleu));
        i += 1;
    };
    for k in 0..row.full {
        push(Family::ALL[k % Family::ALL.len()], passing());
    }
    let shapes = [
        (Level::L1, Family::Composite, "prose-outside-yaml", ""),
        (Level::L2, Family::StatefulSet, "unknown-field", "spec.template.spec.volumeMounts"),
        (Level::L3, Family::Hpa, "R2", "spec.scaleTargetRef.name"),
        (Level::L4, Family::Rbac, "P05", "roleRef.name"),
    ];
    for ((level, family, rule, field), n) in shapes.into_iter().zip(row.levels) {
        for _ in 0..n {
            push(family, failing_at(level, rule, field));
        }
    }
    assert_eq!(outcomes.len(), 200);
    EvalRun::from_outcomes(row.name, row.mode, outcomes)
}
