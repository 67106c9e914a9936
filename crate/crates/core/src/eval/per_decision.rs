use serde::{Deserialize, Serialize};

use super::metrics::check_pairing;
use super::{rate, EvalError, GroundTruth};
use crate::codec::{encode, parse, ParsedDecision, SequenceKind};
use crate::protocol::BackendTranscript;

/// Scores at one decision position (1-based).
///
/// `reasoning_accuracy` and `explanation_accuracy` compare the bit at this
/// position with the oracle's. The `*_path_accuracy` columns also require
/// every earlier decision to match (bits for reasoning; bit and node for
/// explanations), so they never increase along the path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionStats {
    pub position: usize,
    /// Transcripts whose oracle path reaches this position.
    pub n: usize,
    pub reasoning_accuracy: f64,
    pub explanation_accuracy: f64,
    /// Reasoning bit equals explanation bit.
    pub alignment_rate: f64,
    pub reasoning_path_accuracy: f64,
    pub explanation_path_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalStats {
    pub n: usize,
    /// The reasoning's final token equals the oracle class.
    pub reasoning_accuracy: f64,
    pub explanation_accuracy: f64,
    pub answer_accuracy: f64,
    /// Answer class equals explanation class.
    pub alignment_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerDecisionTable {
    pub positions: Vec<PositionStats>,
    #[serde(rename = "final")]
    pub final_class: FinalStats,
    /// Oracle positions with no reasoning decision to compare (truncated or
    /// unparseable reasoning); scored incorrect and misaligned.
    pub missing_reasoning_decisions: usize,
    pub missing_explanation_decisions: usize,
}

#[derive(Default)]
struct Tally {
    n: usize,
    reasoning: usize,
    explanation: usize,
    aligned: usize,
    reasoning_path: usize,
    explanation_path: usize,
}

/// Table of per-position accuracies and alignment for two-step transcripts
/// of a bit-encoded domain.
pub fn per_decision_analysis(transcripts: &[BackendTranscript], truth: &GroundTruth) -> Result<PerDecisionTable, EvalError> {
    let domain = check_pairing(transcripts, truth)?;
    if let Some(d) = domain.filter(|d| !d.is_bit_encoded()) {
        return Err(EvalError::NotBitEncoded(d));
    }
    let depth = transcripts
        .iter()
        .map(|t| truth[&t.input_id].decisions.len())
        .max()
        .unwrap_or(0);
    let mut tallies: Vec<Tally> = (0..depth).map(|_| Tally::default()).collect();
    let (mut missing_r, mut missing_e) = (0, 0);
    let (mut fin_r, mut fin_e, mut fin_a, mut fin_al) = (0, 0, 0, 0);

    for t in transcripts {
        let reasoning = t.reasoning.as_ref().ok_or_else(|| EvalError::NoReasoning(t.input_id.clone()))?;
        let oracle = &truth[&t.input_id];
        let expected = oracle_decisions(oracle, t)?;
        let r_bits = reasoning.parsed.truths().unwrap_or_default();
        let e_decisions = t.explanation.parsed.decisions.clone().unwrap_or_default();

        let mut r_on_path = true;
        let mut e_on_path = true;
        for (k, want) in expected.iter().enumerate() {
            let tally = &mut tallies[k];
            tally.n += 1;
            let want_bit = want.truth();
            let r = r_bits.get(k).copied();
            let e = e_decisions.get(k);
            missing_r += usize::from(r.is_none());
            missing_e += usize::from(e.is_none());
            r_on_path &= r.is_some() && r == want_bit;
            e_on_path &= e == Some(want);
            tally.reasoning_path += usize::from(r_on_path);
            tally.explanation_path += usize::from(e_on_path);
            tally.reasoning += usize::from(r.is_some() && r == want_bit);
            tally.explanation += usize::from(e.is_some() && e.and_then(ParsedDecision::truth) == want_bit);
            tally.aligned += usize::from(r.is_some() && r == e.and_then(ParsedDecision::truth));
        }

        let class = Some(oracle.final_class);
        fin_r += usize::from(reasoning.class() == class);
        fin_e += usize::from(t.explanation.class() == class);
        fin_a += usize::from(t.answer.class() == class);
        fin_al += usize::from(t.answer.class().is_some() && t.answer.class() == t.explanation.class());
    }

    let n = transcripts.len();
    Ok(PerDecisionTable {
        positions: tallies
            .iter()
            .enumerate()
            .map(|(k, t)| PositionStats {
                position: k + 1,
                n: t.n,
                reasoning_accuracy: rate(t.reasoning, t.n),
                explanation_accuracy: rate(t.explanation, t.n),
                alignment_rate: rate(t.aligned, t.n),
                reasoning_path_accuracy: rate(t.reasoning_path, t.n),
                explanation_path_accuracy: rate(t.explanation_path, t.n),
            })
            .collect(),
        final_class: FinalStats {
            n,
            reasoning_accuracy: rate(fin_r, n),
            explanation_accuracy: rate(fin_e, n),
            answer_accuracy: rate(fin_a, n),
            alignment_rate: rate(fin_al, n),
        },
        missing_reasoning_decisions: missing_r,
        missing_explanation_decisions: missing_e,
    })
}

/// The oracle's explanation decisions as the parser reports them.
fn oracle_decisions(
    oracle: &crate::oracle::DecisionTrace,
    t: &BackendTranscript,
) -> Result<Vec<ParsedDecision>, EvalError> {
    let text = encode(oracle, SequenceKind::Explanation).map_err(|e| EvalError::Truth {
        id: t.input_id.clone(),
        message: e.to_string(),
    })?;
    Ok(parse(&text, oracle.domain, SequenceKind::Explanation)
        .decisions
        .unwrap_or_default())
}
