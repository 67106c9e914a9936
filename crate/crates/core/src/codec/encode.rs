use super::numeral::format_numeral;
use super::{CodecError, SequenceKind};
use crate::oracle::{DecisionTrace, Domain, PartialDecision};

pub const ISSUED_ANSWER: &str = "The mortgage is issued.";
pub const NOT_ISSUED_ANSWER: &str = "The mortgage is not issued.";
pub const ISSUED_CONCLUSION: &str = "Therefore, the mortgage is issued.";
pub const NOT_ISSUED_CONCLUSION: &str = "Therefore, the mortgage is not issued.";

/// Renders `trace` as the requested sequence.
pub fn encode(trace: &DecisionTrace, kind: SequenceKind) -> Result<String, CodecError> {
    trace
        .check_consistency()
        .map_err(CodecError::InconsistentTrace)?;
    Ok(match kind {
        SequenceKind::Answer => encode_answer(trace.domain, trace.final_class),
        SequenceKind::Reasoning => encode_reasoning(trace),
        SequenceKind::Explanation => match trace.domain {
            Domain::LogReg => logreg_explanation(trace),
            Domain::Tree => tree_explanation(trace),
            Domain::NlTree => mortgage_explanation(trace),
        },
    })
}

/// The answer text for a bare class.
pub fn encode_answer(domain: Domain, class: u8) -> String {
    match domain {
        Domain::LogReg | Domain::Tree => class.to_string(),
        Domain::NlTree if class == 1 => ISSUED_ANSWER.to_string(),
        Domain::NlTree => NOT_ISSUED_ANSWER.to_string(),
    }
}

fn encode_reasoning(trace: &DecisionTrace) -> String {
    let separator = if trace.domain == Domain::LogReg { ";" } else { "," };
    let mut tokens: Vec<String> = trace
        .decisions
        .iter()
        .map(|d| match d {
            PartialDecision::Product {
                product, cumulative, ..
            } => format!("{} {}", format_numeral(*product), format_numeral(*cumulative)),
            PartialDecision::Comparison { truth, .. } | PartialDecision::Rule { truth, .. } => {
                bit(*truth).to_string()
            }
        })
        .collect();
    tokens.push(trace.final_class.to_string());
    tokens.join(separator)
}

fn bit(truth: bool) -> char {
    if truth {
        '1'
    } else {
        '0'
    }
}

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

fn output_row(class: u8) -> String {
    format!("[\"OUTPUT\", {class}]")
}

fn logreg_explanation(trace: &DecisionTrace) -> String {
    let mut rows: Vec<String> = trace
        .decisions
        .iter()
        .filter_map(|d| match d {
            PartialDecision::Product {
                index,
                product,
                cumulative,
            } => {
                let op = if *product >= 0.0 { '+' } else { '-' };
                let lhs = format!("w[{index}] * x[{index}] = {}", format_numeral(*product));
                let rhs = format!(
                    "y {op} {} = {}",
                    format_numeral(product.abs()),
                    format_numeral(*cumulative)
                );
                Some(format!("[{index}, {}, {}]", quoted(&lhs), quoted(&rhs)))
            }
            _ => None,
        })
        .collect();
    rows.push(output_row(trace.final_class));
    format!("[{}]", rows.join(", "))
}

fn tree_explanation(trace: &DecisionTrace) -> String {
    let mut rows: Vec<String> = trace
        .decisions
        .iter()
        .filter_map(|d| match d {
            PartialDecision::Comparison { predicate, truth } => {
                Some(format!("[{}, {truth}]", quoted(predicate)))
            }
            _ => None,
        })
        .collect();
    rows.push(output_row(trace.final_class));
    format!("[{}]", rows.join(", "))
}

fn mortgage_explanation(trace: &DecisionTrace) -> String {
    let mut sentences: Vec<&str> = trace
        .decisions
        .iter()
        .filter_map(|d| match d {
            PartialDecision::Rule { sentence, .. } => Some(sentence.as_str()),
            _ => None,
        })
        .collect();
    sentences.push(if trace.final_class == 1 {
        ISSUED_CONCLUSION
    } else {
        NOT_ISSUED_CONCLUSION
    });
    sentences.join(" ")
}
