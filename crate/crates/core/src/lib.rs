//! Reasoning-grounded explanation harness.
//!
//! Language models are trained to mimic small, fully known classifiers. Each
//! classification is paired with three texts derived from the classifier's
//! own decision trace: a compact reasoning sequence, a short answer, and a
//! detailed explanation. Inference runs in two steps: the model first emits
//! the reasoning, then answers `ANSWER` and `EXPLAIN` commands on two
//! independent contexts that share that reasoning. Because the ground truth
//! is a deterministic classifier, answers, explanations and every partial
//! decision can be scored exactly.
//!
//! Modules, bottom up:
//!
//! - [`oracle`]: the three classifier families and their decision traces
//! - [`codec`]: byte-exact text formats, parsing, and reasoning perturbation
//! - [`datagen`]: classifier/input sampling and conversational datasets
//! - [`protocol`]: backend abstraction and the two-step inference runner
//! - [`simbackend`]: simulated faithful, copying and corrupting models
//! - [`eval`]: accuracy, alignment, per-decision and propagation analyses
//! - [`cli`]: the `ccot` command line
//!
//! Runnable walkthroughs live in `examples/`.

pub mod cli;
pub mod codec;
pub mod datagen;
pub mod eval;
pub mod oracle;
pub mod protocol;
pub mod seed;
pub mod simbackend;

pub use codec::{ParseOutcome, SequenceKind};
pub use oracle::{ClassifierInput, ClassifierSpec, DecisionTrace, Domain};
