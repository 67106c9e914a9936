use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::per_decision::{per_decision_analysis, PerDecisionTable};
use super::{rate, EvalError, GroundTruth};
use crate::oracle::Domain;
use crate::protocol::BackendTranscript;

/// Integer tallies behind an [`EvalReport`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub answer_correct: usize,
    pub explanation_correct: usize,
    pub aligned: usize,
    pub answer_unparseable: usize,
    pub explanation_unparseable: usize,
    /// Backend calls that failed outright (a subset of the unparseables).
    pub failed_calls: usize,
    pub with_reasoning: usize,
    pub reasoning_answer_aligned: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub answer_accuracy: f64,
    pub explanation_accuracy: f64,
    pub alignment_rate: f64,
    pub unparseable_rate_answer: f64,
    pub unparseable_rate_explanation: f64,
    /// Share of reasoning runs whose answer repeats the reasoning's final
    /// class. Absent without reasoning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_answer_alignment: Option<f64>,
    pub counts: Counts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_decision: Option<PerDecisionTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

impl EvalReport {
    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.fingerprint = Some(fingerprint.into());
        self
    }

    /// `(metric, value)` pairs of the headline numbers.
    pub fn headline(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("answer_accuracy", self.answer_accuracy),
            ("explanation_accuracy", self.explanation_accuracy),
            ("alignment_rate", self.alignment_rate),
            ("unparseable_rate_answer", self.unparseable_rate_answer),
            ("unparseable_rate_explanation", self.unparseable_rate_explanation),
        ];
        if let Some(r) = self.reasoning_answer_alignment {
            out.push(("reasoning_answer_alignment", r));
        }
        out
    }
}

pub(crate) fn check_pairing(transcripts: &[BackendTranscript], truth: &GroundTruth) -> Result<Option<Domain>, EvalError> {
    let mut seen = BTreeSet::new();
    let mut domain = None;
    for t in transcripts {
        if !seen.insert(t.input_id.as_str()) {
            return Err(EvalError::Duplicate(t.input_id.clone()));
        }
        if !truth.contains_key(&t.input_id) {
            return Err(EvalError::MissingTruth(t.input_id.clone()));
        }
        match domain {
            None => domain = Some(t.domain),
            Some(d) if d != t.domain => return Err(EvalError::MixedDomains(d, t.domain)),
            _ => {}
        }
    }
    Ok(domain)
}

/// Headline metrics. Unparseable outputs (including failed calls) count as
/// incorrect, and an unparseable side makes the pair misaligned. Adds the
/// per-decision table when every transcript carries bit-encoded reasoning.
pub fn compute_metrics(transcripts: &[BackendTranscript], truth: &GroundTruth) -> Result<EvalReport, EvalError> {
    let domain = check_pairing(transcripts, truth)?;
    if transcripts.len() != truth.len() {
        let ids: BTreeSet<&str> = transcripts.iter().map(|t| t.input_id.as_str()).collect();
        if let Some(id) = truth.keys().find(|id| !ids.contains(id.as_str())) {
            return Err(EvalError::MissingTranscript(id.clone()));
        }
    }
    let mut c = Counts::default();
    for t in transcripts {
        let oracle = truth[&t.input_id].final_class;
        let a = t.answer.class();
        let e = t.explanation.class();
        c.answer_correct += usize::from(a == Some(oracle));
        c.explanation_correct += usize::from(e == Some(oracle));
        c.aligned += usize::from(a.is_some() && a == e);
        c.answer_unparseable += usize::from(a.is_none());
        c.explanation_unparseable += usize::from(e.is_none());
        c.failed_calls += t.failures();
        if let Some(r) = &t.reasoning {
            c.with_reasoning += 1;
            c.reasoning_answer_aligned += usize::from(r.class().is_some() && r.class() == a);
        }
    }
    let n = transcripts.len();
    let per_decision = match domain {
        Some(d) if d.is_bit_encoded() && c.with_reasoning == n => Some(per_decision_analysis(transcripts, truth)?),
        _ => None,
    };
    Ok(EvalReport {
        n,
        answer_accuracy: rate(c.answer_correct, n),
        explanation_accuracy: rate(c.explanation_correct, n),
        alignment_rate: rate(c.aligned, n),
        unparseable_rate_answer: rate(c.answer_unparseable, n),
        unparseable_rate_explanation: rate(c.explanation_unparseable, n),
        reasoning_answer_alignment: (c.with_reasoning > 0).then(|| rate(c.reasoning_answer_aligned, c.with_reasoning)),
        counts: c,
        per_decision,
        fingerprint: None,
    })
}
