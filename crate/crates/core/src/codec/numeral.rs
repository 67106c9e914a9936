//! Numeral rendering shared by every text format.
//!
//! Reals are rounded half away from zero to four decimal places, then trailing
//! zeros and a dangling decimal point are trimmed. Rounding operates on the
//! shortest round-trip decimal form of the value, so `0.12345` renders as
//! `0.1235` regardless of its binary expansion.

use std::sync::OnceLock;

use regex::Regex;

pub const DECIMALS: usize = 4;

pub fn format_numeral(value: f64) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    // `Display` for f64 never uses exponent notation.
    let text = format!("{}", value.abs());
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text.as_str(), ""),
    };
    let mut digits: Vec<u8> = int_part.bytes().map(|b| b - b'0').collect();
    let mut int_len = digits.len();
    let mut frac: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    let round_up = frac.len() > DECIMALS && frac[DECIMALS] >= 5;
    frac.truncate(DECIMALS);
    digits.extend_from_slice(&frac);
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                int_len += 1;
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let (int_digits, frac_digits) = digits.split_at(int_len);
    let mut frac_digits = frac_digits.to_vec();
    while frac_digits.last() == Some(&0) {
        frac_digits.pop();
    }
    let int_str: String = int_digits.iter().map(|d| char::from(b'0' + d)).collect();
    let int_str = {
        let trimmed = int_str.trim_start_matches('0');
        if trimmed.is_empty() {
            "0".to_string()
        } else {
            trimmed.to_string()
        }
    };
    let is_zero = int_str == "0" && frac_digits.is_empty();
    let mut out = String::new();
    if value < 0.0 && !is_zero {
        out.push('-');
    }
    out.push_str(&int_str);
    if !frac_digits.is_empty() {
        out.push('.');
        out.extend(frac_digits.iter().map(|d| char::from(b'0' + d)));
    }
    out
}

/// Rounds a value to what [`format_numeral`] would display.
pub fn quantize(value: f64) -> f64 {
    format_numeral(value).parse().unwrap_or(value)
}

fn numeral_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^-?[0-9]+(\.[0-9]+)?$").expect("static regex"))
}

/// Strict numeral reader: optional minus, digits, optional fraction.
pub fn parse_numeral(text: &str) -> Option<f64> {
    if numeral_re().is_match(text) {
        text.parse().ok()
    } else {
        None
    }
}

/// Python-style float repr used by loan-record fields (`115000.0`, `92.266`).
pub fn float_repr(value: f64) -> String {
    format!("{value:?}")
}
