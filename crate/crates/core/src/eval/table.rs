use std::fmt::Write;

use super::metrics::EvalReport;
use super::per_decision::PerDecisionTable;

/// Aligned-column text rendering of a report.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let rows: Vec<(&str, String)> = [
        ("n", report.n.to_string()),
        ("answer accuracy", format!("{:.3}", report.answer_accuracy)),
        ("explanation accuracy", format!("{:.3}", report.explanation_accuracy)),
        ("alignment", format!("{:.3}", report.alignment_rate)),
        ("unparseable (answer)", format!("{:.3}", report.unparseable_rate_answer)),
        ("unparseable (explanation)", format!("{:.3}", report.unparseable_rate_explanation)),
    ]
    .into_iter()
    .chain(
        report
            .reasoning_answer_alignment
            .map(|r| ("reasoning/answer alignment", format!("{r:.3}"))),
    )
    .chain(
        (report.counts.failed_calls > 0).then(|| ("failed backend calls", report.counts.failed_calls.to_string())),
    )
    .collect();
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<width$}  {v:>6}");
    }
    if let Some(pd) = &report.per_decision {
        out.push('\n');
        out.push_str(&render_per_decision(pd));
    }
    out
}

/// Positions as columns, plus the final class.
pub fn render_per_decision(table: &PerDecisionTable) -> String {
    let mut out = String::new();
    let mut header = format!("{:<14}", "position");
    for p in &table.positions {
        let _ = write!(header, " {:>6}", p.position);
    }
    let _ = write!(header, " {:>6}", "final");
    out.push_str(header.trim_end());
    out.push('\n');
    let f = &table.final_class;
    let lines: [(&str, Vec<f64>, f64); 5] = [
        (
            "reasoning",
            table.positions.iter().map(|p| p.reasoning_accuracy).collect(),
            f.reasoning_accuracy,
        ),
        (
            "explanation",
            table.positions.iter().map(|p| p.explanation_accuracy).collect(),
            f.explanation_accuracy,
        ),
        (
            "alignment",
            table.positions.iter().map(|p| p.alignment_rate).collect(),
            f.alignment_rate,
        ),
        (
            "reasoning path",
            table.positions.iter().map(|p| p.reasoning_path_accuracy).collect(),
            f.reasoning_accuracy,
        ),
        (
            "expl. path",
            table.positions.iter().map(|p| p.explanation_path_accuracy).collect(),
            f.explanation_accuracy,
        ),
    ];
    for (name, cells, last) in lines {
        let mut line = format!("{name:<14}");
        for c in cells {
            let _ = write!(line, " {c:>6.3}");
        }
        let _ = write!(line, " {last:>6.3}");
        out.push_str(&line);
        out.push('\n');
    }
    if table.missing_reasoning_decisions + table.missing_explanation_decisions > 0 {
        let _ = writeln!(
            out,
            "missing decisions: reasoning {}, explanation {}",
            table.missing_reasoning_decisions, table.missing_explanation_decisions
        );
    }
    out
}
