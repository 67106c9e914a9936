use crate::codec::question::looks_like_question;
use crate::protocol::{ChatMessage, Command, Role};

/// What a request asks of a simulated model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Turn<'a> {
    /// `H`: produce the reasoning for `question`.
    Reasoning { question: &'a str },
    /// `H R C`: a command following a reasoning message.
    Command {
        question: &'a str,
        reasoning: &'a str,
        command: Command,
    },
    /// `H C`: a command on the question turn itself.
    Direct { question: &'a str, command: Command },
}

/// The last line of `text` that reads as a question; the whole text when
/// none does.
pub fn find_question(text: &str) -> &str {
    text.lines().rev().find(|l| looks_like_question(l)).unwrap_or(text)
}

pub fn read_turn(messages: &[ChatMessage]) -> Option<Turn<'_>> {
    let last = messages.last().filter(|m| m.role == Role::User)?;
    if let Ok(command) = last.content.parse::<Command>() {
        let n = messages.len();
        if n < 3 || messages[n - 2].role != Role::Assistant {
            return None;
        }
        let question = messages[..n - 2]
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| find_question(&m.content))?;
        return Some(Turn::Command {
            question,
            reasoning: &messages[n - 2].content,
            command,
        });
    }
    match Command::split_suffix(&last.content) {
        (head, Some(command)) => Some(Turn::Direct {
            question: find_question(head),
            command,
        }),
        (text, None) => Some(Turn::Reasoning {
            question: find_question(text),
        }),
    }
}

/// `input_id` part of a request id `"{input_id}/{step}"`.
pub fn input_id_of(request_id: &str) -> &str {
    request_id.split('/').next().unwrap_or(request_id)
}
