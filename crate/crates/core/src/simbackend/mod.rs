//! Simulated model backends.
//!
//! * [`FaithfulBackend`] answers every turn with the oracle's encoding.
//! * [`CopyingBackend`] answers commands purely from the reasoning in its
//!   context: the answer repeats the reasoning's final token, the explanation
//!   follows the reasoning's bits down the classifier.
//! * [`CorruptingBackend`] reasons like the oracle but takes a wrong branch
//!   at position `k` with probability `p_k`, then answers like the copier.

mod context;

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::question::parse_question;
use crate::codec::{encode, encode_answer, parse, perturb_reasoning, FlipSet, SequenceKind};
use crate::oracle::{classify, ClassifierInput, ClassifierSpec, DecisionTrace, Domain, OracleError};
use crate::protocol::{Backend, BackendDescriptor, BackendError, BackendRequest, Command};
use crate::seed::{hash_str, rng_for, stream};

pub use context::{find_question, input_id_of, read_turn, Turn};

/// Emitted for requests a simulated model cannot serve; never parses.
pub const ERROR_OUTPUT: &str = "ERROR";

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("the {0} backend needs a bit-encoded domain, got {1}")]
    NotBitEncoded(&'static str, Domain),
    #[error("flip probability {value} at {what} outside [0, 1]")]
    Probability { what: String, value: f64 },
    #[error("unknown backend {0:?}; expected faithful, copying, corrupting or remote:ADDR")]
    UnknownBackend(String),
}

fn sim_descriptor(name: &str) -> BackendDescriptor {
    BackendDescriptor {
        name: name.to_string(),
        emits_reasoning: true,
        deterministic: true,
        concurrent_safe: true,
    }
}

fn kind_of(command: Command) -> SequenceKind {
    match command {
        Command::Answer => SequenceKind::Answer,
        Command::Explain => SequenceKind::Explanation,
    }
}

fn read_input(spec: &ClassifierSpec, question: &str) -> Option<ClassifierInput> {
    parse_question(spec.domain(), question).ok()
}

fn oracle_text(spec: &ClassifierSpec, question: &str, kind: SequenceKind) -> Option<String> {
    let input = read_input(spec, question)?;
    let trace = classify(spec, &input).ok()?;
    encode(&trace, kind).ok()
}

/// The ideal model.
#[derive(Clone, Debug)]
pub struct FaithfulBackend {
    spec: ClassifierSpec,
}

impl FaithfulBackend {
    pub fn new(spec: ClassifierSpec) -> Self {
        Self { spec }
    }
}

impl Backend for FaithfulBackend {
    fn descriptor(&self) -> BackendDescriptor {
        sim_descriptor("faithful")
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let text = match read_turn(&request.messages) {
            Some(Turn::Reasoning { question }) => oracle_text(&self.spec, question, SequenceKind::Reasoning),
            Some(Turn::Command { question, command, .. } | Turn::Direct { question, command }) => {
                oracle_text(&self.spec, question, kind_of(command))
            }
            None => None,
        };
        Ok(text.unwrap_or_else(|| ERROR_OUTPUT.to_string()))
    }
}

/// Walks `spec` for `input`, taking the truth `decide(position, holds)` at
/// each visited node.
fn steer(
    spec: &ClassifierSpec,
    input: &ClassifierInput,
    mut decide: impl FnMut(usize, bool) -> bool,
) -> Option<DecisionTrace> {
    match (spec, input) {
        (ClassifierSpec::Tree(m), ClassifierInput::Vector(x)) => m
            .steer::<OracleError>(x, |pos, holds| Ok(decide(pos, holds)))
            .ok(),
        (ClassifierSpec::NlTree(p), ClassifierInput::Loan(r)) => p
            .steer::<OracleError>(|pos, split| Ok(decide(pos, split.evaluate(p, r)?)))
            .ok(),
        _ => None,
    }
}

fn require_bits(name: &'static str, spec: &ClassifierSpec) -> Result<(), SimError> {
    if spec.domain().is_bit_encoded() {
        Ok(())
    } else {
        Err(SimError::NotBitEncoded(name, spec.domain()))
    }
}

/// Answers a command from the reasoning alone. Bits pick the branch at each
/// visited node; if the reasoning runs out before a leaf, the remaining
/// nodes are evaluated on the input. Extra bits are ignored.
fn copy_command(spec: &ClassifierSpec, question: &str, reasoning: &str, command: Command) -> Option<String> {
    let domain = spec.domain();
    let parsed = parse(reasoning, domain, SequenceKind::Reasoning);
    let class = parsed.final_class?;
    match command {
        Command::Answer => Some(encode_answer(domain, class)),
        Command::Explain => {
            let bits = parsed.truths()?;
            let input = read_input(spec, question)?;
            let trace = steer(spec, &input, |pos, holds| bits.get(pos).copied().unwrap_or(holds))?;
            encode(&trace, SequenceKind::Explanation).ok()
        }
    }
}

/// Decodes answers and explanations from the reasoning in context. Reasoning
/// turns are delegated to `reasoning_source`.
pub struct CopyingBackend {
    spec: ClassifierSpec,
    reasoning_source: Arc<dyn Backend>,
}

impl CopyingBackend {
    /// Reasons faithfully.
    pub fn new(spec: ClassifierSpec) -> Result<Self, SimError> {
        let source = Arc::new(FaithfulBackend::new(spec.clone()));
        Self::with_reasoning_source(spec, source)
    }

    pub fn with_reasoning_source(spec: ClassifierSpec, reasoning_source: Arc<dyn Backend>) -> Result<Self, SimError> {
        require_bits("copying", &spec)?;
        Ok(Self { spec, reasoning_source })
    }
}

impl Backend for CopyingBackend {
    fn descriptor(&self) -> BackendDescriptor {
        let source = self.reasoning_source.descriptor();
        BackendDescriptor {
            deterministic: source.deterministic,
            concurrent_safe: source.concurrent_safe,
            ..sim_descriptor("copying")
        }
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let text = match read_turn(&request.messages) {
            Some(Turn::Reasoning { .. }) => return self.reasoning_source.complete(request),
            Some(Turn::Command {
                question,
                reasoning,
                command,
            }) => copy_command(&self.spec, question, reasoning, command),
            Some(Turn::Direct { .. }) | None => None,
        };
        Ok(text.unwrap_or_else(|| ERROR_OUTPUT.to_string()))
    }
}

/// Per-position probabilities of taking the wrong branch while reasoning.
/// Positions past the end of `position_flip` never flip.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionProfile {
    #[serde(default)]
    pub position_flip: Vec<f64>,
    /// Probability of inverting the final class token after the walk.
    #[serde(default)]
    pub final_flip: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CorruptionProfile {
    /// The same rate at each of `depth` positions.
    pub fn uniform(rate: f64, depth: usize, seed: u64) -> Self {
        Self {
            position_flip: vec![rate; depth],
            final_flip: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |what: String, value: f64| Err(SimError::Probability { what, value });
        for (i, &p) in self.position_flip.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("position {}", i + 1), p);
            }
        }
        if !(0.0..=1.0).contains(&self.final_flip) {
            return bad("final".into(), self.final_flip);
        }
        Ok(())
    }

    pub fn at(&self, position: usize) -> f64 {
        self.position_flip.get(position).copied().unwrap_or(0.0)
    }
}

/// Reasoning with compounding path errors; commands answered by copying.
#[derive(Clone, Debug)]
pub struct CorruptingBackend {
    spec: ClassifierSpec,
    profile: CorruptionProfile,
}

impl CorruptingBackend {
    pub fn new(spec: ClassifierSpec, profile: CorruptionProfile) -> Result<Self, SimError> {
        require_bits("corrupting", &spec)?;
        profile.validate()?;
        Ok(Self { spec, profile })
    }

    pub fn profile(&self) -> &CorruptionProfile {
        &self.profile
    }

    /// The corrupted reasoning for `question`; randomness is keyed by
    /// `(profile.seed, input_id)`.
    pub fn reasoning(&self, input_id: &str, question: &str) -> Option<String> {
        let input = read_input(&self.spec, question)?;
        let mut rng = rng_for(self.profile.seed, &[stream::CORRUPTION, hash_str(input_id)]);
        let trace = steer(&self.spec, &input, |pos, holds| {
            let u: f64 = rng.gen();
            holds ^ (u < self.profile.at(pos))
        })?;
        let text = encode(&trace, SequenceKind::Reasoning).ok()?;
        let u: f64 = rng.gen();
        if u < self.profile.final_flip {
            perturb_reasoning(&text, self.spec.domain(), &FlipSet::final_only()).ok()
        } else {
            Some(text)
        }
    }
}

impl Backend for CorruptingBackend {
    fn descriptor(&self) -> BackendDescriptor {
        sim_descriptor("corrupting")
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let text = match read_turn(&request.messages) {
            Some(Turn::Reasoning { question }) => self.reasoning(input_id_of(&request.id), question),
            Some(Turn::Command {
                question,
                reasoning,
                command,
            }) => copy_command(&self.spec, question, reasoning, command),
            Some(Turn::Direct { .. }) | None => None,
        };
        Ok(text.unwrap_or_else(|| ERROR_OUTPUT.to_string()))
    }
}

/// Replies with the content of the last message.
#[derive(Clone, Copy, Debug, Default)]
pub struct EchoBackend;

impl Backend for EchoBackend {
    fn descriptor(&self) -> BackendDescriptor {
        sim_descriptor("echo")
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        Ok(request.messages.last().map(|m| m.content.clone()).unwrap_or_default())
    }
}

/// Fails every call whose input id is in `poisoned`; delegates the rest.
pub struct PoisonedBackend<B> {
    pub inner: B,
    pub poisoned: BTreeSet<String>,
}

impl<B: Backend> Backend for PoisonedBackend<B> {
    fn descriptor(&self) -> BackendDescriptor {
        self.inner.descriptor()
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        if self.poisoned.contains(input_id_of(&request.id)) {
            return Err(BackendError(format!("injected failure for {}", request.id)));
        }
        self.inner.complete(request)
    }
}

/// Delegates to `inner` and keeps a copy of every request.
pub struct RecordingBackend<B> {
    pub inner: B,
    requests: Mutex<Vec<BackendRequest>>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            requests: Mutex::new(Vec::new()),
        }
    }

    /// Requests seen so far, sorted by id.
    pub fn requests(&self) -> Vec<BackendRequest> {
        let mut out = self.requests.lock().expect("recorder lock").clone();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn descriptor(&self) -> BackendDescriptor {
        self.inner.descriptor()
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        self.requests.lock().expect("recorder lock").push(request.clone());
        self.inner.complete(request)
    }
}

/// The simulated backends by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimKind {
    Faithful,
    Copying,
    Corrupting,
}

impl std::str::FromStr for SimKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "faithful" => Ok(SimKind::Faithful),
            "copying" => Ok(SimKind::Copying),
            "corrupting" => Ok(SimKind::Corrupting),
            other => Err(SimError::UnknownBackend(other.to_string())),
        }
    }
}

/// Builds a simulated backend for `spec`.
pub fn make_backend(
    kind: SimKind,
    spec: &ClassifierSpec,
    profile: &CorruptionProfile,
) -> Result<Arc<dyn Backend>, SimError> {
    Ok(match kind {
        SimKind::Faithful => Arc::new(FaithfulBackend::new(spec.clone())),
        SimKind::Copying => Arc::new(CopyingBackend::new(spec.clone())?),
        SimKind::Corrupting => Arc::new(CorruptingBackend::new(spec.clone(), profile.clone())?),
    })
}
