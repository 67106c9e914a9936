//! Random classifiers and inputs, and the conversational datasets built
//! from them.

mod build;
mod config;
mod gen;
mod hmda;
mod icl;
mod instance;

use thiserror::Error;

use crate::codec::CodecError;
use crate::oracle::OracleError;

pub use build::{build_dataset, Dataset, DatasetFile, DatasetSummary};
pub use config::{DatasetConfig, HmdaSource, Mode};
pub use gen::{gen_classifier, gen_input, gen_loan, gen_tree, RecordPool};
pub use hmda::{ingest_hmda, IngestReport};
pub use icl::{build_icl_pretrain_dataset, build_icl_prompt, icl_prompt_text};
pub use instance::{
    instance_for, read_jsonl, OracleTexts, write_jsonl, ConversationInstance, InstanceKind, InstanceMeta, MessageKind, Split,
};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("config field `{field}`: {message}")]
    Config { field: &'static str, message: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("record pool: {0}")]
    Pool(String),
    #[error("in-context prompts are not defined for the {0} domain")]
    IclDomain(crate::oracle::Domain),
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("column map names absent column(s): {0}")]
    MissingColumns(String),
    #[error("malformed instance on line {line}: {message}")]
    Instance { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn config_error(field: &'static str, message: impl Into<String>) -> DatagenError {
    DatagenError::Config {
        field,
        message: message.into(),
    }
}
