//! Question texts: how a classification input is shown to a model.
//!
//! Vectors render as `X: [a, b, ...]` using the numeral rule; loan records as
//! `Loan amount: $115000.0 Loan-to-value ratio: 92.266 ...` using float repr.

use std::sync::OnceLock;

use regex::Regex;

use super::numeral::{float_repr, format_numeral, parse_numeral};
use super::CodecError;
use crate::oracle::{AgeBracket, ClassifierInput, Domain, DtiBand, LoanRecord};

pub fn render_question(input: &ClassifierInput) -> String {
    match input {
        ClassifierInput::Vector(x) => {
            let items: Vec<String> = x.iter().map(|v| format_numeral(*v)).collect();
            format!("X: [{}]", items.join(", "))
        }
        ClassifierInput::Loan(r) => render_loan(r),
    }
}

fn render_loan(r: &LoanRecord) -> String {
    format!(
        "Loan amount: ${} Loan-to-value ratio: {} Debt-to-income ratio: {} Applicant's age: {} \
         Loan term: {} Income: ${} Property value: ${} Total loan costs: ${}",
        float_repr(r.loan_amount),
        float_repr(r.loan_to_value_ratio),
        r.debt_to_income_ratio,
        r.applicant_age,
        float_repr(r.loan_term),
        float_repr(r.income),
        float_repr(r.property_value),
        float_repr(r.total_loan_costs),
    )
}

fn vector_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^X: \[(.*)\]$").expect("static regex"))
}

fn loan_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(concat!(
            r"^Loan amount: \$(\S+)\s+Loan-to-value ratio: (\S+)\s+Debt-to-income ratio: (\S+)\s+",
            r"Applicant's age: (\S+)\s+Loan term: (\S+)\s+Income: \$(\S+)\s+",
            r"Property value: \$(\S+)\s+Total loan costs: \$(\S+)$"
        ))
        .expect("static regex")
    })
}

/// True when `line` starts like a question of any domain.
pub fn looks_like_question(line: &str) -> bool {
    line.starts_with("X: ") || line.starts_with("Loan amount: ")
}

pub fn parse_question(domain: Domain, text: &str) -> Result<ClassifierInput, CodecError> {
    let text = text.trim();
    let bad = |m: String| CodecError::Question(m);
    match domain {
        Domain::LogReg | Domain::Tree => {
            let caps = vector_re()
                .captures(text)
                .ok_or_else(|| bad(format!("{text:?} is not of the form X: [...]")))?;
            let body = &caps[1];
            if body.is_empty() {
                return Err(bad("empty vector".into()));
            }
            body.split(", ")
                .map(|item| {
                    parse_numeral(item).ok_or_else(|| bad(format!("{item:?} is not a numeral")))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(ClassifierInput::Vector)
        }
        Domain::NlTree => {
            let caps = loan_re()
                .captures(text)
                .ok_or_else(|| bad("loan record does not match the field layout".into()))?;
            let num = |i: usize| -> Result<f64, CodecError> {
                let s = &caps[i];
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("{s:?} is not a number")))
            };
            let record = LoanRecord {
                loan_amount: num(1)?,
                loan_to_value_ratio: num(2)?,
                debt_to_income_ratio: DtiBand::new(&caps[3]).map_err(|e| bad(e.to_string()))?,
                applicant_age: AgeBracket::new(&caps[4]).map_err(|e| bad(e.to_string()))?,
                loan_term: num(5)?,
                income: num(6)?,
                property_value: num(7)?,
                total_loan_costs: num(8)?,
            };
            record.validate().map_err(|e| bad(e.to_string()))?;
            Ok(ClassifierInput::Loan(record))
        }
    }
}
