//! Metrics over transcript batches: accuracy, alignment, per-decision
//! tables, perturbation propagation and depth sweeps.

mod metrics;
mod per_decision;
mod propagation;
mod sweep;
mod table;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::codec::question::parse_question;
use crate::oracle::{classify, ClassifierSpec, DecisionTrace, Domain};

pub use metrics::{compute_metrics, Counts, EvalReport};
pub use per_decision::{per_decision_analysis, FinalStats, PerDecisionTable, PositionStats};
pub use propagation::{perturb_transcripts, propagation_report, FlipOutcome, FlipPlan, PropagationReport};
pub use sweep::{depth_sweep, BackendFactory, SweepConfig, SweepReport, SweepRow};
pub use table::{render_per_decision, render_report};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("duplicate input_id {0:?}")]
    Duplicate(String),
    #[error("no ground truth for input_id {0:?}")]
    MissingTruth(String),
    #[error("no transcript for input_id {0:?}")]
    MissingTranscript(String),
    #[error("transcripts mix domains {0} and {1}")]
    MixedDomains(Domain, Domain),
    #[error("per-decision analysis needs a bit-encoded domain, got {0}")]
    NotBitEncoded(Domain),
    #[error("transcript {0:?} has no reasoning")]
    NoReasoning(String),
    #[error("transcript {0:?} carries no perturbation record")]
    NoPerturbation(String),
    #[error("cannot derive ground truth for {id:?}: {message}")]
    Truth { id: String, message: String },
    #[error("sweep: {0}")]
    Sweep(String),
}

/// Oracle traces keyed by input id.
pub type GroundTruth = BTreeMap<String, DecisionTrace>;

/// Classifies each `(input_id, question)` pair under `spec`.
pub fn ground_truth<I, S1, S2>(spec: &ClassifierSpec, questions: I) -> Result<GroundTruth, EvalError>
where
    I: IntoIterator<Item = (S1, S2)>,
    S1: Into<String>,
    S2: AsRef<str>,
{
    let mut out = GroundTruth::new();
    for (id, q) in questions {
        let id = id.into();
        let truth = |message: String| EvalError::Truth {
            id: id.clone(),
            message,
        };
        let input = parse_question(spec.domain(), q.as_ref()).map_err(|e| truth(e.to_string()))?;
        let trace = classify(spec, &input).map_err(|e| truth(e.to_string()))?;
        if out.insert(id.clone(), trace).is_some() {
            return Err(EvalError::Duplicate(id));
        }
    }
    Ok(out)
}

pub(crate) fn rate(count: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        count as f64 / n as f64
    }
}
