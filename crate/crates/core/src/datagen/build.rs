use std::collections::HashSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::gen::{gen_input, RecordPool};
use super::hmda::ingest_hmda;
use super::icl::{build_icl_pretrain_dataset, build_icl_prompt};
use super::instance::{instance_for, OracleTexts};
use super::{
    config_error, ConversationInstance, DatagenError, DatasetConfig, InstanceKind, InstanceMeta, Mode, Split,
};
use crate::codec::question::render_question;
use crate::oracle::{ClassifierInput, ClassifierSpec};
use crate::protocol::Command;
use crate::seed::{derive_seed, rng_for, stream};

/// Attempts at drawing a test input unseen in train before giving up.
const MAX_RESAMPLES: u64 = 10_000;

/// A generated train/test pair plus bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub mode: Mode,
    pub train: Vec<ConversationInstance>,
    pub test: Vec<ConversationInstance>,
    pub summary: DatasetSummary,
}

/// Input and instance counts, recorded in run manifests.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub train_inputs: usize,
    pub test_inputs: usize,
    pub train_instances: usize,
    pub test_instances: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_records: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_dropped: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// One output file of a dataset.
#[derive(Clone, Debug)]
pub struct DatasetFile<'a> {
    pub name: &'static str,
    pub instances: Vec<&'a ConversationInstance>,
}

impl Dataset {
    /// Files to write. Every mode writes `test.jsonl`; `separate` splits
    /// each side by target kind instead of writing `train.jsonl`.
    pub fn files(&self) -> Vec<DatasetFile<'_>> {
        fn pick(set: &[ConversationInstance], kind: InstanceKind) -> Vec<&ConversationInstance> {
            set.iter().filter(|i| i.meta.kind == kind).collect()
        }
        fn all(set: &[ConversationInstance]) -> Vec<&ConversationInstance> {
            set.iter().collect()
        }
        let mut files = Vec::new();
        if self.mode == Mode::Separate {
            for (name, set, kind) in [
                ("train.answer.jsonl", &self.train, InstanceKind::InputCommandAnswer),
                ("train.explanation.jsonl", &self.train, InstanceKind::InputCommandExplanation),
                ("test.answer.jsonl", &self.test, InstanceKind::InputCommandAnswer),
                ("test.explanation.jsonl", &self.test, InstanceKind::InputCommandExplanation),
            ] {
                files.push(DatasetFile {
                    name,
                    instances: pick(set, kind),
                });
            }
        } else {
            files.push(DatasetFile {
                name: "train.jsonl",
                instances: all(&self.train),
            });
        }
        files.push(DatasetFile {
            name: "test.jsonl",
            instances: all(&self.test),
        });
        files
    }
}

fn draw_inputs(
    config: &DatasetConfig,
    spec: &ClassifierSpec,
    summary: &mut DatasetSummary,
) -> Result<(Vec<ClassifierInput>, Vec<ClassifierInput>), DatagenError> {
    let seed = config.seed;
    let n_train = if config.mode == Mode::Icl { 0 } else { config.train_inputs };
    let mut pool = match &config.hmda {
        Some(src) => {
            let report = ingest_hmda(&src.path, &src.column_map, src.income_scale)?;
            summary.pool_records = Some(report.records.len());
            summary.pool_dropped = Some(report.dropped);
            summary.warnings = report.warnings;
            Some(RecordPool::new(report.records, seed)?)
        }
        None => None,
    };

    let train: Vec<ClassifierInput> = match pool.as_mut() {
        Some(p) => (0..n_train)
            .map(|_| p.draw().map(ClassifierInput::Loan))
            .collect::<Result<_, _>>()?,
        None => (0..n_train)
            .into_par_iter()
            .map(|i| gen_input(spec, &mut rng_for(seed, &[stream::TRAIN_INPUT, i as u64])))
            .collect(),
    };
    let seen: HashSet<String> = train.iter().map(render_question).collect();

    let test = match pool.as_mut() {
        Some(p) => {
            let mut out = Vec::with_capacity(config.test_inputs);
            while out.len() < config.test_inputs {
                let r = ClassifierInput::Loan(p.draw()?);
                if !seen.contains(&render_question(&r)) {
                    out.push(r);
                }
            }
            out
        }
        None => (0..config.test_inputs)
            .into_par_iter()
            .map(|j| {
                (0..MAX_RESAMPLES)
                    .map(|a| gen_input(spec, &mut rng_for(seed, &[stream::TEST_INPUT, j as u64, a])))
                    .find(|x| !seen.contains(&render_question(x)))
                    .ok_or_else(|| config_error("test_inputs", "cannot draw test inputs disjoint from train"))
            })
            .collect::<Result<_, _>>()?,
    };
    Ok((train, test))
}

fn expand(
    config: &DatasetConfig,
    spec: &ClassifierSpec,
    inputs: &[ClassifierInput],
    split: Split,
) -> Result<Vec<ConversationInstance>, DatagenError> {
    let kinds: &[InstanceKind] = match config.mode {
        Mode::JointReasoning => &[
            InstanceKind::InputReasoning,
            InstanceKind::InputReasoningCommandAnswer,
            InstanceKind::InputReasoningCommandExplanation,
        ],
        _ => &[InstanceKind::InputCommandAnswer, InstanceKind::InputCommandExplanation],
    };
    let per_input: Vec<Vec<ConversationInstance>> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let input_id = split.input_id(i);
            if config.mode.is_icl() {
                let few_shot_seed = derive_seed(config.seed, &[stream::FEW_SHOT, i as u64]);
                return Command::ALL
                    .iter()
                    .map(|&c| build_icl_prompt(spec, config.few_shot_k(), few_shot_seed, x, c, &input_id, split))
                    .collect();
            }
            let texts = OracleTexts::compute(spec, x)?;
            let meta = InstanceMeta {
                kind: InstanceKind::InputReasoning,
                domain: spec.domain(),
                input_id,
                split,
            };
            Ok(kinds.iter().map(|&k| instance_for(k, &texts, meta.clone())).collect())
        })
        .collect::<Result<_, DatagenError>>()?;
    Ok(per_input.into_iter().flatten().collect())
}

/// Generates the train and test sets of `config.mode` for `spec`. Every
/// assistant message is an oracle encoding; train instances are shuffled
/// with a seeded permutation; test instances stay in input order.
pub fn build_dataset(config: &DatasetConfig, spec: &ClassifierSpec) -> Result<Dataset, DatagenError> {
    config.validate()?;
    if spec.domain() != config.domain {
        return Err(config_error(
            "domain",
            format!("config says {} but the spec is {}", config.domain, spec.domain()),
        ));
    }
    let mut summary = DatasetSummary::default();
    let (train_inputs, test_inputs) = draw_inputs(config, spec, &mut summary)?;

    let mut train = match config.mode {
        Mode::IclPretrain => build_icl_pretrain_dataset(
            config,
            config.pretrain_instances,
            derive_seed(config.seed, &[stream::PRETRAIN]),
            spec,
        )?,
        _ => expand(config, spec, &train_inputs, Split::Train)?,
    };
    let test = expand(config, spec, &test_inputs, Split::Test)?;

    let mut rng = rng_for(config.seed, &[stream::SHUFFLE]);
    if config.mode == Mode::Separate {
        let (mut answers, mut explanations): (Vec<_>, Vec<_>) = train
            .into_iter()
            .partition(|i| i.meta.kind == InstanceKind::InputCommandAnswer);
        answers.shuffle(&mut rng);
        explanations.shuffle(&mut rng);
        answers.extend(explanations);
        train = answers;
    } else {
        train.shuffle(&mut rng);
    }

    summary.train_inputs = if config.mode == Mode::IclPretrain {
        train.len()
    } else {
        train_inputs.len()
    };
    summary.test_inputs = test_inputs.len();
    summary.train_instances = train.len();
    summary.test_instances = test.len();
    Ok(Dataset {
        mode: config.mode,
        train,
        test,
        summary,
    })
}
