//! Text formats for decision traces.
//!
//! Every trace renders to three texts: a compact reasoning sequence, a short
//! answer, and a step-by-step explanation. [`parse`] reads any of them back,
//! reporting off-grammar text as [`ParseStatus::Unparseable`] rather than as
//! an error. `docs/FORMATS.md` carries the grammar.

mod encode;
pub mod numeral;
mod parse;
mod perturb;
pub mod question;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::Domain;

pub use encode::{encode, encode_answer};
pub use parse::parse;
pub use perturb::perturb_reasoning;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("trace is inconsistent: {0}")]
    InconsistentTrace(String),
    #[error("perturbation needs a bit-encoded domain, got {0}")]
    NotBitEncoded(Domain),
    #[error("text is not a reasoning sequence: {0}")]
    NotReasoning(String),
    #[error("flip position {position} outside 1..={len}")]
    FlipOutOfRange { position: usize, len: usize },
    #[error("malformed question: {0}")]
    Question(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Reasoning,
    Answer,
    Explanation,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 3] = [
        SequenceKind::Reasoning,
        SequenceKind::Answer,
        SequenceKind::Explanation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SequenceKind::Reasoning => "reasoning",
            SequenceKind::Answer => "answer",
            SequenceKind::Explanation => "explanation",
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SequenceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SequenceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown sequence kind {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Parsed,
    Unparseable,
}

/// One partial decision recovered from text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParsedDecision {
    /// A truth bit. Explanations also carry the label of the node the bit
    /// belongs to (predicate text, or the sentence minus its comparison).
    Bit {
        truth: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    /// A linear-classifier step as displayed.
    Step { product: f64, cumulative: f64 },
}

impl ParsedDecision {
    pub fn truth(&self) -> Option<bool> {
        match self {
            ParsedDecision::Bit { truth, .. } => Some(*truth),
            ParsedDecision::Step { .. } => None,
        }
    }
}

/// Result of reading a model output. `Parsed` always carries a final class;
/// `Unparseable` never does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub status: ParseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_class: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decisions: Option<Vec<ParsedDecision>>,
    /// False when some decision entries were off-grammar and only the
    /// well-formed prefix was kept.
    pub complete: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub diagnostic: String,
}

impl ParseOutcome {
    pub fn parsed(final_class: u8, decisions: Option<Vec<ParsedDecision>>, complete: bool) -> Self {
        Self {
            status: ParseStatus::Parsed,
            final_class: Some(final_class),
            decisions,
            complete,
            diagnostic: String::new(),
        }
    }

    pub fn unparseable(diagnostic: impl Into<String>) -> Self {
        Self {
            status: ParseStatus::Unparseable,
            final_class: None,
            decisions: None,
            complete: false,
            diagnostic: diagnostic.into(),
        }
    }

    pub fn is_parsed(&self) -> bool {
        self.status == ParseStatus::Parsed
    }

    /// Truth bits of the recovered decisions, if they are bits.
    pub fn truths(&self) -> Option<Vec<bool>> {
        self.decisions
            .as_ref()
            .and_then(|ds| ds.iter().map(ParsedDecision::truth).collect())
    }
}

/// Which tokens of a bit-encoded reasoning sequence to invert. Positions are
/// 1-indexed partial decisions; `final_token` targets the trailing class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipSet {
    #[serde(default)]
    pub positions: BTreeSet<usize>,
    #[serde(default)]
    pub final_token: bool,
}

impl FlipSet {
    pub fn position(k: usize) -> Self {
        Self {
            positions: BTreeSet::from([k]),
            final_token: false,
        }
    }

    pub fn final_only() -> Self {
        Self {
            positions: BTreeSet::new(),
            final_token: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty() && !self.final_token
    }

    pub fn len(&self) -> usize {
        self.positions.len() + usize::from(self.final_token)
    }
}
