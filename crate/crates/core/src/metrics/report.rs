use std::fmt::Write as _;

use serde::Serialize;

use super::EvalRun;
use crate::validate::Level;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Json,
    /// Long-form `run,metric,value` series for plotting.
    Csv,
}

/// `k/n = p%` with the percentage rounded half-up to one decimal using
/// integer arithmetic.
pub fn format_fraction(k: usize, n: usize) -> String {
    if n == 0 {
        return format!("{k}/0 = n/a");
    }
    let permille = (2000 * k + n) / (2 * n);
    format!("{k}/{n} = {}.{}%", permille / 10, permille % 10)
}

fn level_count(run: &EvalRun, level: Level) -> usize {
    run.breakdown.get(&level).copied().unwrap_or(0)
}

fn markdown(runs: &[EvalRun]) -> String {
    let mut out = String::from("| Run | Mode | full-pass | L1 | L2 | L3 | L4 | BLEU |\n|---|---|---|---|---|---|---|---|\n");
    for run in runs {
        let c = run.aggregates.counts;
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} | {:.2} |",
            run.name,
            run.mode.label(),
            format_fraction(c.full, c.total),
            level_count(run, Level::L1),
            level_count(run, Level::L2),
            level_count(run, Level::L3),
            level_count(run, Level::L4),
            run.aggregates.bleu_mean,
        );
    }
    out
}

#[derive(Serialize)]
struct RunSummary<'a> {
    run: &'a str,
    mode: String,
    full_pass: String,
    aggregates: &'a super::Aggregates,
    breakdown: &'a std::collections::BTreeMap<Level, usize>,
    resource: &'a super::ResourceStats,
}

fn json(runs: &[EvalRun]) -> String {
    let rows: Vec<RunSummary> = runs
        .iter()
        .map(|r| RunSummary {
            run: &r.name,
            mode: r.mode.label(),
            full_pass: format_fraction(r.aggregates.counts.full, r.aggregates.counts.total),
            aggregates: &r.aggregates,
            breakdown: &r.breakdown,
            resource: &r.resource,
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("summary serializes") + "\n"
}

fn csv(runs: &[EvalRun]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "metric", "value"]).expect("in-memory write");
    for run in runs {
        let mut rows: Vec<(String, String)> = run
            .aggregates
            .metrics()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        for level in Level::ALL {
            rows.push((format!("failures_{level}"), level_count(run, level).to_string()));
        }
        if let Some(t) = run.resource.tokens {
            rows.push(("mean_ms_per_token".into(), t.mean_ms_per_token.to_string()));
            rows.push(("p95_ms_per_token".into(), t.p95_ms_per_token.to_string()));
        }
        for (metric, value) in rows {
            w.write_record([run.name.as_str(), metric.as_str(), value.as_str()])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Renders one row per run, in the given order.
pub fn render_report(runs: &[EvalRun], format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown(runs),
        ReportFormat::Json => json(runs),
        ReportFormat::Csv => csv(runs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_round_half_up() {
        assert_eq!(format_fraction(164, 200), "164/200 = 82.0%");
        assert_eq!(format_fraction(157, 200), "157/200 = 78.5%");
        assert_eq!(format_fraction(1, 3), "1/3 = 33.3%");
        assert_eq!(format_fraction(2, 3), "2/3 = 66.7%");
        assert_eq!(format_fraction(1, 2000), "1/2000 = 0.1%");
        assert_eq!(format_fraction(200, 200), "200/200 = 100.0%");
    }
}
