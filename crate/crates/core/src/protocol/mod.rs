//! Conversation model and the two-step inference protocol.
//!
//! A history `U_1 A_1 ... U_n` goes to a backend, which returns the reasoning
//! `R`. The answer and the explanation are then requested on two separate
//! contexts, `H R ANSWER` and `H R EXPLAIN`; neither branch ever sees the
//! other's output.

mod run;
mod transcript;
pub mod wire;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use run::{
    rerun_commands, run_batch, run_direct, run_two_step, run_with_reasoning, BatchItem, BatchOptions, DirectOutput,
};
pub use transcript::{
    read_transcripts, write_transcripts, BackendTranscript, Branch, BranchFailure, Perturbation, RunMode,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid conversation history: {0}")]
    History(String),
    #[error("unknown command {0:?}; expected ANSWER or EXPLAIN")]
    UnknownCommand(String),
    #[error("backend {0} does not emit reasoning")]
    NoReasoning(String),
    #[error("instance {0} has no question message")]
    MissingQuestion(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed transcript line {line}: {message}")]
    Transcript { line: usize, message: String },
}

/// A backend call that did not produce text.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct BackendError(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// The two interface commands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Command {
    #[serde(rename = "ANSWER")]
    Answer,
    #[serde(rename = "EXPLAIN")]
    Explain,
}

impl Command {
    pub const ALL: [Command; 2] = [Command::Answer, Command::Explain];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Answer => "ANSWER",
            Command::Explain => "EXPLAIN",
        }
    }

    /// Splits a user message whose last line is a command (`"X: [...]\nANSWER"`).
    pub fn split_suffix(content: &str) -> (&str, Option<Command>) {
        if let Ok(c) = content.parse::<Command>() {
            return ("", Some(c));
        }
        match content.rsplit_once('\n') {
            Some((head, tail)) => match tail.parse::<Command>() {
                Ok(c) => (head, Some(c)),
                Err(_) => (content, None),
            },
            None => (content, None),
        }
    }

    /// Appends this command as the final line of a user message.
    pub fn suffix(self, content: &str) -> String {
        format!("{content}\n{}", self.as_str())
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ANSWER" => Ok(Command::Answer),
            "EXPLAIN" => Ok(Command::Explain),
            other => Err(ProtocolError::UnknownCommand(other.to_string())),
        }
    }
}

/// `U_1 A_1 ... U_n`: strictly alternating, starting and ending with the user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ChatMessage>", into = "Vec<ChatMessage>")]
pub struct ConversationHistory {
    messages: Vec<ChatMessage>,
}

impl ConversationHistory {
    pub fn new(messages: Vec<ChatMessage>) -> Result<Self, ProtocolError> {
        check_alternation(&messages)?;
        if messages.last().map(|m| m.role) != Some(Role::User) {
            return Err(ProtocolError::History("history must end with a user message".into()));
        }
        Ok(Self { messages })
    }

    pub fn single(question: impl Into<String>) -> Self {
        Self {
            messages: vec![ChatMessage::user(question)],
        }
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    /// `H R C`: reasoning as an assistant turn, the command as a user turn.
    pub fn with_reasoning(&self, reasoning: &str, command: Command) -> Vec<ChatMessage> {
        let mut out = self.messages.clone();
        out.push(ChatMessage::assistant(reasoning));
        out.push(ChatMessage::user(command.as_str()));
        out
    }

    /// `H C` for runs without reasoning: the command becomes the last line of
    /// the final user turn, which keeps the roles alternating.
    pub fn with_command(&self, command: Command) -> Vec<ChatMessage> {
        let mut out = self.messages.clone();
        let last = out.last_mut().expect("history is non-empty");
        last.content = command.suffix(&last.content);
        out
    }
}

impl TryFrom<Vec<ChatMessage>> for ConversationHistory {
    type Error = ProtocolError;

    fn try_from(messages: Vec<ChatMessage>) -> Result<Self, Self::Error> {
        Self::new(messages)
    }
}

impl From<ConversationHistory> for Vec<ChatMessage> {
    fn from(h: ConversationHistory) -> Self {
        h.messages
    }
}

/// Non-empty, starts with the user, and alternates roles.
pub fn check_alternation(messages: &[ChatMessage]) -> Result<(), ProtocolError> {
    let Some(first) = messages.first() else {
        return Err(ProtocolError::History("history is empty".into()));
    };
    if first.role != Role::User {
        return Err(ProtocolError::History("history must start with a user message".into()));
    }
    if let Some(i) = messages.windows(2).position(|w| w[0].role == w[1].role) {
        return Err(ProtocolError::History(format!(
            "messages {i} and {} share a role",
            i + 1
        )));
    }
    Ok(())
}

/// What the orchestrator needs to know before dispatching.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub emits_reasoning: bool,
    pub deterministic: bool,
    pub concurrent_safe: bool,
}

/// One backend call. `id` is `"{input_id}/{step}"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub id: String,
    pub messages: Vec<ChatMessage>,
}

/// A text-generating model.
pub trait Backend: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn descriptor(&self) -> BackendDescriptor {
        (**self).descriptor()
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn descriptor(&self) -> BackendDescriptor {
        (**self).descriptor()
    }

    fn complete(&self, request: &BackendRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}
