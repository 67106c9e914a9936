use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use super::transcript::{BackendTranscript, Branch, RunMode};
use super::{Backend, BackendRequest, ChatMessage, Command, ConversationHistory, ProtocolError, Role};
use crate::codec::SequenceKind;
use crate::datagen::ConversationInstance;
use crate::oracle::Domain;

/// One test input ready for inference.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchItem {
    pub input_id: String,
    pub domain: Domain,
    pub history: ConversationHistory,
}

impl BatchItem {
    /// Collapses a test dataset to one query per input, in first-seen order.
    /// The question is the first user message with any command line removed.
    pub fn from_instances(instances: &[ConversationInstance]) -> Result<Vec<BatchItem>, ProtocolError> {
        let mut seen = BTreeMap::new();
        let mut items = Vec::new();
        for inst in instances {
            if seen.contains_key(&inst.meta.input_id) {
                continue;
            }
            let first = inst
                .messages
                .iter()
                .find(|m| m.role == Role::User)
                .ok_or_else(|| ProtocolError::MissingQuestion(inst.meta.input_id.clone()))?;
            let (question, _) = Command::split_suffix(&first.content);
            if question.is_empty() {
                return Err(ProtocolError::MissingQuestion(inst.meta.input_id.clone()));
            }
            seen.insert(inst.meta.input_id.clone(), ());
            items.push(BatchItem {
                input_id: inst.meta.input_id.clone(),
                domain: inst.meta.domain,
                history: ConversationHistory::single(question),
            });
        }
        Ok(items)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchOptions {
    /// Upper bound on concurrent backend calls. Ignored (treated as 1) for
    /// backends that are not concurrent-safe.
    pub workers: usize,
    /// Record wall-clock time per transcript.
    pub timing: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            timing: false,
        }
    }
}

fn call<B: Backend + ?Sized>(backend: &B, id: String, messages: Vec<ChatMessage>) -> Result<String, String> {
    let request = BackendRequest { id, messages };
    match catch_unwind(AssertUnwindSafe(|| backend.complete(&request))) {
        Ok(Ok(text)) => Ok(text),
        Ok(Err(e)) => Err(e.0),
        Err(panic) => Err(panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "backend panicked".into())),
    }
}

fn step_id(input_id: &str, step: &str) -> String {
    format!("{input_id}/{step}")
}

fn question_of(history: &ConversationHistory) -> String {
    history.messages().last().map(|m| m.content.clone()).unwrap_or_default()
}

fn both<A: Send, B: Send>(parallel: bool, a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B) {
    if parallel {
        rayon::join(a, b)
    } else {
        (a(), b())
    }
}

/// Step 2 only: ANSWER and EXPLAIN on `H R C`, each context holding just its
/// own command. Returns `(answer, explanation)`.
pub fn run_with_reasoning<B: Backend + ?Sized>(
    backend: &B,
    input_id: &str,
    history: &ConversationHistory,
    reasoning: &str,
    domain: Domain,
) -> (Branch, Branch) {
    let parallel = backend.descriptor().concurrent_safe;
    with_reasoning(backend, input_id, history, reasoning, domain, parallel)
}

fn with_reasoning<B: Backend + ?Sized>(
    backend: &B,
    input_id: &str,
    history: &ConversationHistory,
    reasoning: &str,
    domain: Domain,
    parallel: bool,
) -> (Branch, Branch) {
    let branch = |command: Command, kind: SequenceKind| {
        let ctx = history.with_reasoning(reasoning, command);
        let result = call(backend, step_id(input_id, kind.as_str()), ctx);
        Branch::from_result(result, domain, kind)
    };
    both(
        parallel,
        || branch(Command::Answer, SequenceKind::Answer),
        || branch(Command::Explain, SequenceKind::Explanation),
    )
}

/// The full two-step protocol for one input.
pub fn run_two_step<B: Backend + ?Sized>(
    backend: &B,
    input_id: &str,
    history: &ConversationHistory,
    domain: Domain,
) -> Result<BackendTranscript, ProtocolError> {
    let descriptor = backend.descriptor();
    if !descriptor.emits_reasoning {
        return Err(ProtocolError::NoReasoning(descriptor.name));
    }
    Ok(two_step(backend, input_id, history, domain, descriptor.concurrent_safe))
}

fn two_step<B: Backend + ?Sized>(
    backend: &B,
    input_id: &str,
    history: &ConversationHistory,
    domain: Domain,
    parallel: bool,
) -> BackendTranscript {
    let reasoning = Branch::from_result(
        call(backend, step_id(input_id, "reasoning"), history.messages().to_vec()),
        domain,
        SequenceKind::Reasoning,
    );
    let (answer, explanation) = match &reasoning.text {
        Some(r) => with_reasoning(backend, input_id, history, r, domain, parallel),
        None => {
            let why = "reasoning step failed";
            (Branch::failed(why), Branch::failed(why))
        }
    };
    BackendTranscript {
        input_id: input_id.to_string(),
        domain,
        mode: RunMode::TwoStep,
        question: question_of(history),
        reasoning: Some(reasoning),
        answer,
        explanation,
        perturbation: None,
        elapsed_ms: None,
    }
}

/// Output of a single direct command.
pub type DirectOutput = Branch;

/// One command on `H C`, no reasoning.
pub fn run_direct<B: Backend + ?Sized>(
    backend: &B,
    input_id: &str,
    history: &ConversationHistory,
    command: Command,
    domain: Domain,
) -> DirectOutput {
    let kind = match command {
        Command::Answer => SequenceKind::Answer,
        Command::Explain => SequenceKind::Explanation,
    };
    let result = call(backend, step_id(input_id, kind.as_str()), history.with_command(command));
    Branch::from_result(result, domain, kind)
}

fn direct<B: Backend + ?Sized>(
    backend: &B,
    input_id: &str,
    history: &ConversationHistory,
    domain: Domain,
    parallel: bool,
) -> BackendTranscript {
    let (answer, explanation) = both(
        parallel,
        || run_direct(backend, input_id, history, Command::Answer, domain),
        || run_direct(backend, input_id, history, Command::Explain, domain),
    );
    BackendTranscript {
        input_id: input_id.to_string(),
        domain,
        mode: RunMode::Direct,
        question: question_of(history),
        reasoning: None,
        answer,
        explanation,
        perturbation: None,
        elapsed_ms: None,
    }
}

/// Runs every item; the output order matches `items` whatever the
/// execution order. Backend failures are recorded in the transcripts.
pub fn run_batch<B: Backend + ?Sized>(
    backend: &B,
    items: &[BatchItem],
    mode: RunMode,
    options: BatchOptions,
) -> Result<Vec<BackendTranscript>, ProtocolError> {
    let descriptor = backend.descriptor();
    if mode == RunMode::TwoStep && !descriptor.emits_reasoning {
        return Err(ProtocolError::NoReasoning(descriptor.name));
    }
    let parallel = descriptor.concurrent_safe && options.workers > 1;
    let one = |item: &BatchItem| {
        let start = Instant::now();
        let mut t = match mode {
            RunMode::TwoStep => two_step(backend, &item.input_id, &item.history, item.domain, parallel),
            RunMode::Direct => direct(backend, &item.input_id, &item.history, item.domain, parallel),
        };
        if options.timing {
            t.elapsed_ms = Some(start.elapsed().as_millis() as u64);
        }
        t
    };
    if !parallel {
        return Ok(items.iter().map(one).collect());
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| ProtocolError::Io(std::io::Error::other(e.to_string())))?;
    Ok(pool.install(|| items.par_iter().map(one).collect()))
}

/// Re-runs the command turns of `transcripts` with each reasoning replaced
/// by `edit(transcript)`. Transcripts without reasoning text, or for which
/// `edit` returns `None`, are skipped.
pub fn rerun_commands<B: Backend + ?Sized>(
    backend: &B,
    transcripts: &[BackendTranscript],
    options: BatchOptions,
    edit: impl Fn(&BackendTranscript) -> Option<(String, super::transcript::Perturbation)> + Sync,
) -> Vec<BackendTranscript> {
    let parallel = backend.descriptor().concurrent_safe && options.workers > 1;
    let one = |t: &BackendTranscript| -> Option<BackendTranscript> {
        let (reasoning, perturbation) = edit(t)?;
        let history = ConversationHistory::single(t.question.clone());
        let (answer, explanation) = with_reasoning(backend, &t.input_id, &history, &reasoning, t.domain, parallel);
        Some(BackendTranscript {
            input_id: t.input_id.clone(),
            domain: t.domain,
            mode: RunMode::TwoStep,
            question: t.question.clone(),
            reasoning: Some(Branch::from_text(reasoning, t.domain, SequenceKind::Reasoning)),
            answer,
            explanation,
            perturbation: Some(perturbation),
            elapsed_ms: None,
        })
    };
    if parallel {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(options.workers).build() {
            return pool.install(|| transcripts.par_iter().filter_map(one).collect());
        }
    }
    transcripts.iter().filter_map(one).collect()
}
