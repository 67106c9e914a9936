use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::codec::{parse, FlipSet, ParseOutcome, SequenceKind};
use crate::oracle::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Reasoning first, then ANSWER and EXPLAIN on independent contexts.
    TwoStep,
    /// ANSWER and EXPLAIN straight after the question.
    Direct,
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-step" | "two_step" => Ok(RunMode::TwoStep),
            "direct" => Ok(RunMode::Direct),
            other => Err(format!("unknown mode {other:?}; expected two-step or direct")),
        }
    }
}

/// A backend call that failed; recorded in place of text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchFailure {
    pub error: String,
}

/// One generated text and its parse. A failed call has no text and an
/// unparseable outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub parsed: ParseOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<BranchFailure>,
}

impl Branch {
    pub fn from_text(text: String, domain: Domain, kind: SequenceKind) -> Self {
        let parsed = parse(&text, domain, kind);
        Self {
            text: Some(text),
            parsed,
            failure: None,
        }
    }

    pub fn failed(error: impl Into<String>) -> Self {
        let error = error.into();
        Self {
            text: None,
            parsed: ParseOutcome::unparseable(format!("backend failure: {error}")),
            failure: Some(BranchFailure { error }),
        }
    }

    pub fn from_result(
        result: Result<String, String>,
        domain: Domain,
        kind: SequenceKind,
    ) -> Self {
        match result {
            Ok(text) => Self::from_text(text, domain, kind),
            Err(e) => Self::failed(e),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn class(&self) -> Option<u8> {
        self.parsed.final_class
    }
}

/// The edit applied to a reasoning sequence before the command turns re-ran.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    pub original_reasoning: String,
    pub flips: FlipSet,
}

/// Everything generated for one test input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendTranscript {
    pub input_id: String,
    pub domain: Domain,
    pub mode: RunMode,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<Branch>,
    pub answer: Branch,
    pub explanation: Branch,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    /// Wall-clock milliseconds; only recorded when timing is requested so
    /// that transcript files stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

impl BackendTranscript {
    pub fn branches(&self) -> impl Iterator<Item = &Branch> {
        self.reasoning.iter().chain([&self.answer, &self.explanation])
    }

    pub fn has_failure(&self) -> bool {
        self.branches().any(Branch::is_failed)
    }

    pub fn failures(&self) -> usize {
        self.branches().filter(|b| b.is_failed()).count()
    }

    pub fn reasoning_text(&self) -> Option<&str> {
        self.reasoning.as_ref().and_then(|b| b.text.as_deref())
    }
}

pub fn write_transcripts<W: Write>(mut out: W, transcripts: &[BackendTranscript]) -> std::io::Result<()> {
    for t in transcripts {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_transcripts<R: BufRead>(input: R) -> Result<Vec<BackendTranscript>, ProtocolError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|e| ProtocolError::Transcript {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}
