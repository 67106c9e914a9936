//! Ground-truth classifiers.
//!
//! Three families are supported: a bias-free linear classifier, a complete
//! binary decision tree over `[0, 1]^d`, and a hand-written mortgage review
//! policy over loan records. Each classifier produces a [`DecisionTrace`]
//! holding every partial decision on the way to the final class.

mod logreg;
mod mortgage;
mod spec;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use logreg::{classify_logreg, LogRegModel};
pub use mortgage::{
    classify_mortgage, read_sentence, AgeBracket, BandValues, DtiBand, LoanField, LoanRecord, MortgageClass,
    MortgagePolicy, PolicyNode, PolicySplit, SentenceReading, AGE_BRACKETS, DTI_BANDS, FALSE_PHRASES,
    THRESHOLD_PLACEHOLDER, TRUE_PHRASES,
};
pub use spec::{ClassifierSpec, SPEC_SCHEMA_VERSION};
pub use tree::{classify_tree, eval_predicate_text, DecisionTreeModel, TreeNode, MAX_TREE_DEPTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("input[{index}] = {value} is not finite")]
    NonFinite { index: usize, value: f64 },
    #[error("input[{index}] = {value} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid loan record: {0}")]
    InvalidRecord(String),
    #[error("{field} value {value:?} is outside the known vocabulary")]
    Vocabulary { field: &'static str, value: String },
    #[error("expected a {expected} input, got a {found} input")]
    InputKind { expected: Domain, found: &'static str },
    #[error("spec parse error: {0}")]
    SpecFormat(String),
}

/// The three classifier families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "logreg")]
    LogReg,
    #[serde(rename = "tree")]
    Tree,
    #[serde(rename = "nl_tree")]
    NlTree,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::LogReg, Domain::Tree, Domain::NlTree];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::LogReg => "logreg",
            Domain::Tree => "tree",
            Domain::NlTree => "nl_tree",
        }
    }

    /// Domains whose reasoning is a sequence of truth bits.
    pub fn is_bit_encoded(self) -> bool {
        !matches!(self, Domain::LogReg)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logreg" => Ok(Domain::LogReg),
            "tree" => Ok(Domain::Tree),
            "nl_tree" => Ok(Domain::NlTree),
            other => Err(format!("unknown domain {other:?}")),
        }
    }
}

/// A single classification input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassifierInput {
    Vector(Vec<f64>),
    Loan(LoanRecord),
}

impl ClassifierInput {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ClassifierInput::Vector(_) => "vector",
            ClassifierInput::Loan(_) => "loan record",
        }
    }
}

/// One intermediate step of a classifier's computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PartialDecision {
    /// Linear classifier: `w[i] * x[i]` and the running sum through `i`.
    Product {
        index: usize,
        product: f64,
        cumulative: f64,
    },
    /// Tree node: the effective comparison (`x < t` or `x > t`) and its truth.
    Comparison { predicate: String, truth: bool },
    /// Mortgage policy node: canonical predicate, truth, and the sentence
    /// describing the branch taken.
    Rule {
        field: LoanField,
        predicate: String,
        truth: bool,
        sentence: String,
    },
}

impl PartialDecision {
    pub fn truth(&self) -> Option<bool> {
        match self {
            PartialDecision::Product { .. } => None,
            PartialDecision::Comparison { truth, .. } | PartialDecision::Rule { truth, .. } => {
                Some(*truth)
            }
        }
    }

    fn domain(&self) -> Domain {
        match self {
            PartialDecision::Product { .. } => Domain::LogReg,
            PartialDecision::Comparison { .. } => Domain::Tree,
            PartialDecision::Rule { .. } => Domain::NlTree,
        }
    }
}

/// Ordered partial decisions plus the final class. For the mortgage domain
/// class 1 means "issued".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub domain: Domain,
    pub decisions: Vec<PartialDecision>,
    pub final_class: u8,
}

/// Tolerance for the running-sum identity of linear traces.
pub const TELESCOPE_TOLERANCE: f64 = 1e-9;

impl DecisionTrace {
    /// Truth values of a bit-encoded trace; `None` for linear traces.
    pub fn truths(&self) -> Option<Vec<bool>> {
        self.decisions.iter().map(PartialDecision::truth).collect()
    }

    /// Checks that every decision belongs to the trace's domain, the class is
    /// binary, and linear traces telescope to a sum whose sign matches the
    /// class.
    pub fn check_consistency(&self) -> Result<(), String> {
        if self.final_class > 1 {
            return Err(format!("final class {} is not 0 or 1", self.final_class));
        }
        if let Some(bad) = self.decisions.iter().find(|d| d.domain() != self.domain) {
            return Err(format!(
                "{} trace holds a {} decision",
                self.domain,
                bad.domain()
            ));
        }
        if self.domain == Domain::LogReg {
            let mut running = 0.0;
            for (pos, d) in self.decisions.iter().enumerate() {
                if let PartialDecision::Product {
                    index,
                    product,
                    cumulative,
                } = d
                {
                    if *index != pos {
                        return Err(format!("product {pos} carries index {index}"));
                    }
                    running += product;
                    if (running - cumulative).abs() > TELESCOPE_TOLERANCE {
                        return Err(format!("cumulative at {pos} does not telescope"));
                    }
                }
            }
            let expected = u8::from(running > 0.0);
            if !self.decisions.is_empty() && expected != self.final_class {
                return Err("final class disagrees with the sign of the sum".into());
            }
        }
        Ok(())
    }
}

/// Runs the classifier matching `spec` on `input`.
pub fn classify(spec: &ClassifierSpec, input: &ClassifierInput) -> Result<DecisionTrace, OracleError> {
    match (spec, input) {
        (ClassifierSpec::LogReg(m), ClassifierInput::Vector(x)) => classify_logreg(m, x),
        (ClassifierSpec::Tree(m), ClassifierInput::Vector(x)) => classify_tree(m, x),
        (ClassifierSpec::NlTree(p), ClassifierInput::Loan(r)) => classify_mortgage(p, r),
        (spec, input) => Err(OracleError::InputKind {
            expected: spec.domain(),
            found: input.kind_name(),
        }),
    }
}

/// Re-evaluates the recorded predicates of `trace` against `input` and checks
/// that they reproduce the recorded truths and final class.
pub fn replay(spec: &ClassifierSpec, input: &ClassifierInput, trace: &DecisionTrace) -> bool {
    if trace.domain != spec.domain() || trace.check_consistency().is_err() {
        return false;
    }
    match (spec, input) {
        (ClassifierSpec::LogReg(m), ClassifierInput::Vector(x)) => {
            if x.len() != m.weights().len() || trace.decisions.len() != x.len() {
                return false;
            }
            trace.decisions.iter().zip(m.weights().iter().zip(x)).all(|(d, (w, xi))| {
                matches!(d, PartialDecision::Product { product, .. } if *product == w * xi)
            })
        }
        (ClassifierSpec::Tree(m), ClassifierInput::Vector(x)) => {
            let Some(bits) = trace.truths() else { return false };
            let mut ok = true;
            let walk = m.steer::<OracleError>(x, |pos, actual| {
                let recorded = bits.get(pos).copied().unwrap_or(!actual);
                ok &= recorded == actual;
                Ok(recorded)
            });
            ok && walk.map(|w| w == *trace).unwrap_or(false)
        }
        (ClassifierSpec::NlTree(p), ClassifierInput::Loan(r)) => {
            let Some(bits) = trace.truths() else { return false };
            let mut ok = true;
            let walk = p.steer::<OracleError>(|pos, split| {
                let actual = split.evaluate(p, r)?;
                let recorded = bits.get(pos).copied().unwrap_or(!actual);
                ok &= recorded == actual;
                Ok(recorded)
            });
            ok && walk.map(|w| w == *trace).unwrap_or(false)
        }
        _ => false,
    }
}
