use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::codec::{parse, perturb_reasoning, FlipSet, SequenceKind};
use crate::protocol::{rerun_commands, Backend, BackendTranscript, BatchOptions, Perturbation};
use crate::seed::{hash_str, rng_for, stream};

/// Which reasoning tokens to invert before re-running the command turns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipPlan {
    /// Independent per-position flip probability.
    #[serde(default)]
    pub rate: f64,
    /// Positions (1-based) flipped in every transcript whose reasoning is
    /// long enough.
    #[serde(default)]
    pub positions: Vec<usize>,
    /// Invert the final class token.
    #[serde(default)]
    pub final_token: bool,
    #[serde(default)]
    pub seed: u64,
}

impl FlipPlan {
    /// Flips for one reasoning of `len` decisions, keyed by `input_id`.
    pub fn flips_for(&self, input_id: &str, len: usize) -> FlipSet {
        let mut rng = rng_for(self.seed, &[stream::PERTURB, hash_str(input_id)]);
        let mut flips = FlipSet {
            final_token: self.final_token,
            ..FlipSet::default()
        };
        for k in 1..=len {
            let u: f64 = rng.gen();
            if u < self.rate {
                flips.positions.insert(k);
            }
        }
        flips.positions.extend(self.positions.iter().copied().filter(|&k| (1..=len).contains(&k)));
        flips
    }
}

/// Applies `plan` to each transcript's reasoning and re-runs only the
/// command turns. Transcripts without a complete bit-encoded reasoning, or
/// drawing no flips, are skipped.
pub fn perturb_transcripts<B: Backend + ?Sized>(
    backend: &B,
    transcripts: &[BackendTranscript],
    plan: &FlipPlan,
    options: BatchOptions,
) -> Vec<BackendTranscript> {
    rerun_commands(backend, transcripts, options, |t| {
        let original = t.reasoning_text()?;
        let parsed = parse(original, t.domain, SequenceKind::Reasoning);
        let len = parsed.truths().filter(|_| parsed.complete)?.len();
        let flips = plan.flips_for(&t.input_id, len);
        if flips.is_empty() {
            return None;
        }
        let edited = perturb_reasoning(original, t.domain, &flips).ok()?;
        Some((
            edited,
            Perturbation {
                original_reasoning: original.to_string(),
                flips,
            },
        ))
    })
}

/// What one flip did downstream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipOutcome {
    pub input_id: String,
    /// 1-based position; `None` for the final token.
    pub position: Option<usize>,
    /// The explanation's decision at `position` changed its truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_changed: Option<bool>,
    /// For final-token flips: the explanation's decisions stayed identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation_decisions_unchanged: Option<bool>,
    pub explanation_class_changed: bool,
    pub answer_changed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub transcripts: usize,
    pub position_flips: usize,
    pub final_flips: usize,
    /// Share of position flips whose explanation decision changed.
    pub decision_propagation_rate: f64,
    pub position_explanation_class_change_rate: f64,
    pub position_answer_change_rate: f64,
    pub final_answer_change_rate: f64,
    pub final_explanation_class_change_rate: f64,
    pub final_explanation_unchanged_rate: f64,
    pub flips: Vec<FlipOutcome>,
}

/// Share of `true` among `values`; 1.0 for an empty set.
fn share(values: impl Iterator<Item = bool>) -> f64 {
    let (hits, n) = values.fold((0usize, 0usize), |(h, n), v| (h + usize::from(v), n + 1));
    if n == 0 {
        1.0
    } else {
        hits as f64 / n as f64
    }
}

fn changed(a: Option<u8>, b: Option<u8>) -> bool {
    a.is_some() && b.is_some() && a != b
}

/// Pairs each perturbed transcript with its original by input id and
/// reports, per flip, which downstream outputs changed.
pub fn propagation_report(
    original: &[BackendTranscript],
    perturbed: &[BackendTranscript],
) -> Result<PropagationReport, EvalError> {
    let mut by_id = BTreeMap::new();
    for t in original {
        if by_id.insert(t.input_id.as_str(), t).is_some() {
            return Err(EvalError::Duplicate(t.input_id.clone()));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut flips = Vec::new();
    for p in perturbed {
        if !seen.insert(p.input_id.as_str()) {
            return Err(EvalError::Duplicate(p.input_id.clone()));
        }
        let o = by_id
            .get(p.input_id.as_str())
            .ok_or_else(|| EvalError::MissingTranscript(p.input_id.clone()))?;
        let record = p
            .perturbation
            .as_ref()
            .ok_or_else(|| EvalError::NoPerturbation(p.input_id.clone()))?;
        let explanation_class_changed = changed(o.explanation.class(), p.explanation.class());
        let answer_changed = changed(o.answer.class(), p.answer.class());
        let o_bits = o.explanation.parsed.truths().unwrap_or_default();
        let p_bits = p.explanation.parsed.truths().unwrap_or_default();
        for &k in &record.flips.positions {
            let decision_changed = match (o_bits.get(k - 1), p_bits.get(k - 1)) {
                (Some(a), Some(b)) => a != b,
                _ => false,
            };
            flips.push(FlipOutcome {
                input_id: p.input_id.clone(),
                position: Some(k),
                decision_changed: Some(decision_changed),
                explanation_decisions_unchanged: None,
                explanation_class_changed,
                answer_changed,
            });
        }
        if record.flips.final_token {
            let unchanged = o.explanation.parsed.decisions.is_some()
                && o.explanation.parsed.decisions == p.explanation.parsed.decisions;
            flips.push(FlipOutcome {
                input_id: p.input_id.clone(),
                position: None,
                decision_changed: None,
                explanation_decisions_unchanged: Some(unchanged),
                explanation_class_changed,
                answer_changed,
            });
        }
    }
    let pos = || flips.iter().filter(|f| f.position.is_some());
    let fin = || flips.iter().filter(|f| f.position.is_none());
    Ok(PropagationReport {
        transcripts: perturbed.len(),
        position_flips: pos().count(),
        final_flips: fin().count(),
        decision_propagation_rate: share(pos().map(|f| f.decision_changed == Some(true))),
        position_explanation_class_change_rate: share(pos().map(|f| f.explanation_class_changed)),
        position_answer_change_rate: share(pos().map(|f| f.answer_changed)),
        final_answer_change_rate: share(fin().map(|f| f.answer_changed)),
        final_explanation_class_change_rate: share(fin().map(|f| f.explanation_class_changed)),
        final_explanation_unchanged_rate: share(fin().map(|f| f.explanation_decisions_unchanged == Some(true))),
        flips,
    })
}
