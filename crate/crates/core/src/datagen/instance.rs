use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::DatagenError;
use crate::codec::question::render_question;
use crate::codec::{encode, SequenceKind};
use crate::oracle::{classify, ClassifierInput, ClassifierSpec, Domain};
use crate::protocol::{check_alternation, ChatMessage, Command, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    InputReasoning,
    InputReasoningCommandAnswer,
    InputReasoningCommandExplanation,
    InputCommandAnswer,
    InputCommandExplanation,
    IclPrompt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Question,
    Reasoning,
    Command,
    Answer,
    Explanation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    /// `train-000001`, 1-based.
    pub fn input_id(self, index: usize) -> String {
        format!("{}-{:06}", self.as_str(), index + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub kind: InstanceKind,
    pub domain: Domain,
    pub input_id: String,
    pub split: Split,
}

/// One training or inference example. Message kinds are implied by
/// `meta.kind`; see [`ConversationInstance::message_kinds`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationInstance {
    pub messages: Vec<ChatMessage>,
    pub meta: InstanceMeta,
}

impl ConversationInstance {
    /// Kind of each message. Direct instances carry the command as the last
    /// line of the question message rather than as a turn of its own.
    pub fn message_kinds(&self) -> Vec<MessageKind> {
        use MessageKind::*;
        match self.meta.kind {
            InstanceKind::InputReasoning => vec![Question, Reasoning],
            InstanceKind::InputReasoningCommandAnswer => vec![Question, Reasoning, Command, Answer],
            InstanceKind::InputReasoningCommandExplanation => vec![Question, Reasoning, Command, Explanation],
            InstanceKind::InputCommandAnswer => vec![Question, Answer],
            InstanceKind::InputCommandExplanation => vec![Question, Explanation],
            InstanceKind::IclPrompt => match self.command() {
                Some(crate::protocol::Command::Explain) => vec![Question, Explanation],
                _ => vec![Question, Answer],
            },
        }
    }

    /// The command this instance trains or queries, if any.
    pub fn command(&self) -> Option<Command> {
        match self.meta.kind {
            InstanceKind::InputReasoning => None,
            InstanceKind::InputReasoningCommandAnswer => Some(Command::Answer),
            InstanceKind::InputReasoningCommandExplanation => Some(Command::Explain),
            InstanceKind::InputCommandAnswer | InstanceKind::InputCommandExplanation | InstanceKind::IclPrompt => self
                .messages
                .first()
                .and_then(|m| Command::split_suffix(&m.content).1),
        }
    }

    /// The question text, without any command line.
    pub fn question(&self) -> &str {
        self.messages
            .first()
            .map(|m| Command::split_suffix(&m.content).0)
            .unwrap_or("")
    }

    /// The final assistant message.
    pub fn target(&self) -> Option<&str> {
        self.messages
            .last()
            .filter(|m| m.role == Role::Assistant)
            .map(|m| m.content.as_str())
    }

    pub fn validate(&self) -> Result<(), String> {
        check_alternation(&self.messages).map_err(|e| e.to_string())?;
        if self.messages.last().map(|m| m.role) != Some(Role::Assistant) {
            return Err("instance must end with an assistant message".into());
        }
        let kinds = self.message_kinds();
        if kinds.len() != self.messages.len() {
            return Err(format!(
                "{:?} needs {} messages, found {}",
                self.meta.kind,
                kinds.len(),
                self.messages.len()
            ));
        }
        for (m, k) in self.messages.iter().zip(&kinds) {
            if *k == MessageKind::Command && m.content.parse::<Command>().is_err() {
                return Err(format!("command message {:?} is not ANSWER or EXPLAIN", m.content));
            }
        }
        let expected = match self.meta.kind {
            InstanceKind::InputReasoning => None,
            InstanceKind::InputReasoningCommandAnswer | InstanceKind::InputCommandAnswer => Some(Command::Answer),
            InstanceKind::InputReasoningCommandExplanation | InstanceKind::InputCommandExplanation => {
                Some(Command::Explain)
            }
            InstanceKind::IclPrompt => {
                self.command().ok_or("in-context prompt lacks a command line")?;
                self.command()
            }
        };
        let found = match self.meta.kind {
            InstanceKind::InputReasoningCommandAnswer | InstanceKind::InputReasoningCommandExplanation => {
                self.messages[2].content.parse::<Command>().ok()
            }
            _ => self.command(),
        };
        if expected != found {
            return Err(format!("{:?} carries command {found:?}", self.meta.kind));
        }
        Ok(())
    }
}

/// The oracle's three texts for one input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleTexts {
    pub question: String,
    pub reasoning: String,
    pub answer: String,
    pub explanation: String,
}

impl OracleTexts {
    pub fn compute(spec: &ClassifierSpec, input: &ClassifierInput) -> Result<Self, DatagenError> {
        let trace = classify(spec, input)?;
        Ok(Self {
            question: render_question(input),
            reasoning: encode(&trace, SequenceKind::Reasoning)?,
            answer: encode(&trace, SequenceKind::Answer)?,
            explanation: encode(&trace, SequenceKind::Explanation)?,
        })
    }

    pub fn target(&self, command: Command) -> &str {
        match command {
            Command::Answer => &self.answer,
            Command::Explain => &self.explanation,
        }
    }
}

/// Builds the instance of `kind` from oracle texts. For `IclPrompt` this is
/// the zero-shot EXPLAIN prompt; few-shot prompts come from
/// [`super::build_icl_prompt`].
pub fn instance_for(kind: InstanceKind, texts: &OracleTexts, meta: InstanceMeta) -> ConversationInstance {
    let q = || ChatMessage::user(texts.question.clone());
    let r = || ChatMessage::assistant(texts.reasoning.clone());
    let messages = match kind {
        InstanceKind::InputReasoning => vec![q(), r()],
        InstanceKind::InputReasoningCommandAnswer => vec![
            q(),
            r(),
            ChatMessage::user(Command::Answer.as_str()),
            ChatMessage::assistant(texts.answer.clone()),
        ],
        InstanceKind::InputReasoningCommandExplanation => vec![
            q(),
            r(),
            ChatMessage::user(Command::Explain.as_str()),
            ChatMessage::assistant(texts.explanation.clone()),
        ],
        InstanceKind::InputCommandAnswer => vec![
            ChatMessage::user(Command::Answer.suffix(&texts.question)),
            ChatMessage::assistant(texts.answer.clone()),
        ],
        InstanceKind::InputCommandExplanation | InstanceKind::IclPrompt => vec![
            ChatMessage::user(Command::Explain.suffix(&texts.question)),
            ChatMessage::assistant(texts.explanation.clone()),
        ],
    };
    ConversationInstance {
        messages,
        meta: InstanceMeta { kind, ..meta },
    }
}

pub fn write_jsonl<'a, W: Write>(
    mut out: W,
    instances: impl IntoIterator<Item = &'a ConversationInstance>,
) -> std::io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads and validates a dataset file.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<ConversationInstance>, DatagenError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| DatagenError::Instance { line: i + 1, message };
        let inst: ConversationInstance = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        inst.validate().map_err(bad)?;
        out.push(inst);
    }
    Ok(out)
}
