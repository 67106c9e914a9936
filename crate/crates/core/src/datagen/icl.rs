use rand::Rng;

use super::gen::{gen_classifier, gen_input};
use super::instance::OracleTexts;
use super::{ConversationInstance, DatagenError, DatasetConfig, InstanceKind, InstanceMeta, Split};
use crate::codec::question::render_question;
use crate::oracle::{ClassifierInput, ClassifierSpec};
use crate::protocol::{ChatMessage, Command};
use crate::seed::{derive_seed, rng_for, stream};
use crate::Domain;

fn check_domain(domain: Domain) -> Result<(), DatagenError> {
    if domain == Domain::NlTree {
        Err(DatagenError::IclDomain(domain))
    } else {
        Ok(())
    }
}

/// Few-shot blocks `{question}\nANSWER: {answer}\nEXPLAIN: {explanation}`,
/// separated by blank lines, followed by the query question.
pub fn icl_prompt_text(
    spec: &ClassifierSpec,
    examples: &[ClassifierInput],
    query: &ClassifierInput,
) -> Result<String, DatagenError> {
    check_domain(spec.domain())?;
    let mut blocks = Vec::with_capacity(examples.len() + 1);
    for x in examples {
        let t = OracleTexts::compute(spec, x)?;
        blocks.push(format!(
            "{}\n{}: {}\n{}: {}",
            t.question,
            Command::Answer,
            t.answer,
            Command::Explain,
            t.explanation
        ));
    }
    blocks.push(render_question(query));
    Ok(blocks.join("\n\n"))
}

/// A `k`-shot prompt over `spec` ending with `query` and `command`; the
/// target is the oracle's answer or explanation for the query. Example
/// inputs are drawn from `seed`.
pub fn build_icl_prompt(
    spec: &ClassifierSpec,
    k: usize,
    seed: u64,
    query: &ClassifierInput,
    command: Command,
    input_id: &str,
    split: Split,
) -> Result<ConversationInstance, DatagenError> {
    check_domain(spec.domain())?;
    if k == 0 {
        return Err(super::config_error("few_shot_k", "must be at least 1"));
    }
    let mut rng = rng_for(seed, &[stream::FEW_SHOT]);
    let examples: Vec<ClassifierInput> = (0..k).map(|_| gen_input(spec, &mut rng)).collect();
    let prompt = icl_prompt_text(spec, &examples, query)?;
    let target = OracleTexts::compute(spec, query)?;
    Ok(ConversationInstance {
        messages: vec![
            ChatMessage::user(command.suffix(&prompt)),
            ChatMessage::assistant(target.target(command)),
        ],
        meta: InstanceMeta {
            kind: InstanceKind::IclPrompt,
            domain: spec.domain(),
            input_id: input_id.to_string(),
            split,
        },
    })
}

/// `n` prompts, each over its own freshly drawn classifier (never equal to
/// `held_out`), with a seeded choice of ANSWER or EXPLAIN as the target.
pub fn build_icl_pretrain_dataset(
    config: &DatasetConfig,
    n: usize,
    seed: u64,
    held_out: &ClassifierSpec,
) -> Result<Vec<ConversationInstance>, DatagenError> {
    check_domain(config.domain)?;
    let held_out = held_out.to_json();
    (0..n)
        .map(|i| {
            let mut attempt = 0u64;
            let (spec, sub) = loop {
                let sub = derive_seed(seed, &[stream::PRETRAIN, i as u64, attempt]);
                let spec = gen_classifier(config, sub)?;
                if spec.to_json() != held_out {
                    break (spec, sub);
                }
                attempt += 1;
            };
            let mut rng = rng_for(sub, &[stream::TRAIN_INPUT]);
            let query = gen_input(&spec, &mut rng);
            let command = if rng.gen_bool(0.5) {
                Command::Answer
            } else {
                Command::Explain
            };
            build_icl_prompt(
                &spec,
                config.few_shot_k(),
                sub,
                &query,
                command,
                &format!("pretrain-{:06}", i + 1),
                Split::Train,
            )
        })
        .collect()
}
