use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::encode::{
    ISSUED_ANSWER, ISSUED_CONCLUSION, NOT_ISSUED_ANSWER, NOT_ISSUED_CONCLUSION,
};
use super::numeral::parse_numeral;
use super::{ParseOutcome, ParsedDecision, SequenceKind};
use crate::oracle::{eval_predicate_text, read_sentence, Domain};

/// Reads a model output. Never fails: off-grammar text is `Unparseable`.
pub fn parse(text: &str, domain: Domain, kind: SequenceKind) -> ParseOutcome {
    let text = text.trim();
    if text.is_empty() {
        return ParseOutcome::unparseable("empty output");
    }
    match (kind, domain) {
        (SequenceKind::Answer, _) => parse_answer(text, domain),
        (SequenceKind::Reasoning, Domain::LogReg) => parse_logreg_reasoning(text),
        (SequenceKind::Reasoning, _) => parse_bit_reasoning(text),
        (SequenceKind::Explanation, Domain::LogReg | Domain::Tree) => {
            parse_json_explanation(text, domain)
        }
        (SequenceKind::Explanation, Domain::NlTree) => parse_mortgage_explanation(text),
    }
}

fn class_token(token: &str) -> Option<u8> {
    match token.trim() {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    }
}

fn parse_answer(text: &str, domain: Domain) -> ParseOutcome {
    let class = match domain {
        Domain::LogReg | Domain::Tree => class_token(text),
        Domain::NlTree => match text {
            ISSUED_ANSWER => Some(1),
            NOT_ISSUED_ANSWER => Some(0),
            _ => None,
        },
    };
    match class {
        Some(c) => ParseOutcome::parsed(c, None, true),
        None => ParseOutcome::unparseable(format!("answer {text:?} is not a legal class")),
    }
}

/// Splits on `separator`, reads the trailing class token and the longest
/// well-formed prefix of decision tokens.
fn parse_tokens(
    text: &str,
    separator: char,
    read: impl Fn(&str) -> Option<ParsedDecision>,
) -> ParseOutcome {
    let tokens: Vec<&str> = text.split(separator).collect();
    let (last, body) = tokens.split_last().expect("split yields at least one token");
    let Some(class) = class_token(last) else {
        return ParseOutcome::unparseable(format!("final token {:?} is not a class", last.trim()));
    };
    let mut decisions = Vec::with_capacity(body.len());
    for token in body {
        match read(token.trim()) {
            Some(d) => decisions.push(d),
            None => {
                let mut out = ParseOutcome::parsed(class, Some(decisions), false);
                out.diagnostic = format!("malformed decision token {:?}", token.trim());
                return out;
            }
        }
    }
    ParseOutcome::parsed(class, Some(decisions), true)
}

fn parse_bit_reasoning(text: &str) -> ParseOutcome {
    parse_tokens(text, ',', |t| {
        class_token(t).map(|b| ParsedDecision::Bit {
            truth: b == 1,
            label: None,
        })
    })
}

fn parse_logreg_reasoning(text: &str) -> ParseOutcome {
    parse_tokens(text, ';', |t| {
        let mut parts = t.split(' ');
        let product = parse_numeral(parts.next()?)?;
        let cumulative = parse_numeral(parts.next()?)?;
        if parts.next().is_some() {
            return None;
        }
        Some(ParsedDecision::Step {
            product,
            cumulative,
        })
    })
}

fn output_tail_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"\[\s*"OUTPUT"\s*,\s*([01])\s*\]\s*\]$"#).expect("static regex")
    })
}

fn product_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^w\[(\d+)\] \* x\[(\d+)\] = (\S+)$").expect("static regex")
    })
}

fn update_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^y ([+-]) (\S+) = (\S+)$").expect("static regex"))
}

fn output_class(row: &Value) -> Option<u8> {
    let items = row.as_array()?;
    if items.len() != 2 || items[0].as_str()? != "OUTPUT" {
        return None;
    }
    match items[1].as_u64()? {
        0 => Some(0),
        1 => Some(1),
        _ => None,
    }
}

fn logreg_row(position: usize, row: &Value) -> Option<ParsedDecision> {
    let items = row.as_array()?;
    if items.len() != 3 || items[0].as_u64()? != position as u64 {
        return None;
    }
    let lhs = product_re().captures(items[1].as_str()?)?;
    if lhs[1].parse::<usize>().ok()? != position || lhs[2].parse::<usize>().ok()? != position {
        return None;
    }
    let product = parse_numeral(&lhs[3])?;
    let rhs = update_re().captures(items[2].as_str()?)?;
    let magnitude = parse_numeral(&rhs[2])?;
    let cumulative = parse_numeral(&rhs[3])?;
    let sign_ok = match &rhs[1] {
        "+" => product >= 0.0,
        _ => product <= 0.0,
    };
    if magnitude != product.abs() || !sign_ok {
        return None;
    }
    Some(ParsedDecision::Step {
        product,
        cumulative,
    })
}

fn tree_row(row: &Value) -> Option<ParsedDecision> {
    let items = row.as_array()?;
    if items.len() != 2 {
        return None;
    }
    let predicate = items[0].as_str()?;
    eval_predicate_text(predicate)?;
    Some(ParsedDecision::Bit {
        truth: items[1].as_bool()?,
        label: Some(predicate.to_string()),
    })
}

fn parse_json_explanation(text: &str, domain: Domain) -> ParseOutcome {
    let rows = match serde_json::from_str::<Value>(text) {
        Ok(Value::Array(rows)) if !rows.is_empty() => rows,
        _ => {
            // Recover the class from an intact terminal row even when the
            // body does not parse.
            return match output_tail_re().captures(text) {
                Some(c) => {
                    let mut out = ParseOutcome::parsed(c[1].parse().expect("0 or 1"), None, false);
                    out.diagnostic = "body is not valid JSON; class read from terminal row".into();
                    out
                }
                None => ParseOutcome::unparseable("explanation has no terminal OUTPUT row"),
            };
        }
    };
    let (last, body) = rows.split_last().expect("non-empty");
    let Some(class) = output_class(last) else {
        return ParseOutcome::unparseable("explanation does not end with [\"OUTPUT\", class]");
    };
    let mut decisions = Vec::with_capacity(body.len());
    for (position, row) in body.iter().enumerate() {
        let read = match domain {
            Domain::LogReg => logreg_row(position, row),
            _ => tree_row(row),
        };
        match read {
            Some(d) => decisions.push(d),
            None => {
                let mut out = ParseOutcome::parsed(class, Some(decisions), false);
                out.diagnostic = format!("malformed explanation row {position}");
                return out;
            }
        }
    }
    ParseOutcome::parsed(class, Some(decisions), true)
}

fn parse_mortgage_explanation(text: &str) -> ParseOutcome {
    let class = if text.ends_with(ISSUED_CONCLUSION) {
        1
    } else if text.ends_with(NOT_ISSUED_CONCLUSION) {
        0
    } else {
        return ParseOutcome::unparseable("explanation lacks a concluding sentence");
    };
    let conclusion = if class == 1 {
        ISSUED_CONCLUSION
    } else {
        NOT_ISSUED_CONCLUSION
    };
    let body = text[..text.len() - conclusion.len()].trim_end();
    if !body.is_empty() && !text[..text.len() - conclusion.len()].ends_with(' ') {
        return ParseOutcome::unparseable("concluding sentence is not a separate sentence");
    }
    let mut decisions = Vec::new();
    if !body.is_empty() {
        let pieces: Vec<&str> = body.split(". ").collect();
        let last = pieces.len() - 1;
        for (i, piece) in pieces.iter().enumerate() {
            let sentence = if i == last {
                piece.to_string()
            } else {
                format!("{piece}.")
            };
            match read_sentence(sentence.trim()) {
                Some(r) => decisions.push(ParsedDecision::Bit {
                    truth: r.truth,
                    label: Some(r.label),
                }),
                None => {
                    let mut out = ParseOutcome::parsed(class, Some(decisions), false);
                    out.diagnostic = format!("sentence {} is off-grammar", i + 1);
                    return out;
                }
            }
        }
    }
    ParseOutcome::parsed(class, Some(decisions), true)
}
