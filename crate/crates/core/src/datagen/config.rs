use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{config_error, DatagenError};
use crate::oracle::{Domain, LoanField, MAX_TREE_DEPTH};

/// Which instance kinds a dataset holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Answer and explanation instances, written to separate files.
    Separate,
    /// Answer and explanation instances, mixed in one shuffled file.
    Joint,
    /// Reasoning, reasoning+answer and reasoning+explanation instances, mixed.
    JointReasoning,
    /// In-context prompts over the test classifier; no training data.
    Icl,
    /// In-context prompts; training prompts each use a fresh classifier.
    IclPretrain,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Separate,
        Mode::Joint,
        Mode::JointReasoning,
        Mode::Icl,
        Mode::IclPretrain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Separate => "separate",
            Mode::Joint => "joint",
            Mode::JointReasoning => "joint_reasoning",
            Mode::Icl => "icl",
            Mode::IclPretrain => "icl_pretrain",
        }
    }

    pub fn is_icl(self) -> bool {
        matches!(self, Mode::Icl | Mode::IclPretrain)
    }

    /// Instances emitted per classification input.
    pub fn expansion(self) -> usize {
        match self {
            Mode::JointReasoning => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

/// Loan records read from an HMDA-style CSV instead of the synthetic sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmdaSource {
    pub path: PathBuf,
    /// Source column for every loan field.
    pub column_map: BTreeMap<LoanField, String>,
    /// Multiplier applied to the income column (HMDA reports thousands).
    #[serde(default = "one")]
    pub income_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub domain: Domain,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_train")]
    pub train_inputs: usize,
    #[serde(default = "default_test")]
    pub test_inputs: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Defaults to 8 for logreg and 2 for trees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
    /// Defaults to 5 for logreg and 20 for trees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub few_shot_k: Option<usize>,
    #[serde(default = "default_train")]
    pub pretrain_instances: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmda: Option<HmdaSource>,
}

fn default_mode() -> Mode {
    Mode::JointReasoning
}
fn default_train() -> usize {
    2000
}
fn default_test() -> usize {
    200
}
fn default_depth() -> usize {
    7
}

impl DatasetConfig {
    pub fn new(domain: Domain) -> Self {
        Self {
            domain,
            mode: default_mode(),
            train_inputs: default_train(),
            test_inputs: default_test(),
            depth: default_depth(),
            input_dim: None,
            few_shot_k: None,
            pretrain_instances: default_train(),
            seed: 0,
            hmda: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim.unwrap_or(match self.domain {
            Domain::LogReg => 8,
            _ => 2,
        })
    }

    pub fn few_shot_k(&self) -> usize {
        self.few_shot_k.unwrap_or(match self.domain {
            Domain::LogReg => 5,
            _ => 20,
        })
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        if self.test_inputs == 0 {
            return Err(config_error("test_inputs", "must be positive"));
        }
        let needs_train = !matches!(self.mode, Mode::Icl);
        if needs_train && self.train_inputs == 0 {
            return Err(config_error("train_inputs", "must be positive"));
        }
        if self.input_dim == Some(0) {
            return Err(config_error("input_dim", "must be positive"));
        }
        if self.domain == Domain::Tree {
            if self.depth == 0 || self.depth > MAX_TREE_DEPTH {
                return Err(config_error("depth", format!("must be in 1..={MAX_TREE_DEPTH}")));
            }
            if self.depth > 1 && self.input_dim() < 2 {
                return Err(config_error("input_dim", "trees deeper than 1 need at least 2 features"));
            }
        }
        if self.mode.is_icl() {
            if self.domain == Domain::NlTree {
                return Err(config_error("mode", "in-context modes are not available for nl_tree"));
            }
            if self.few_shot_k() == 0 {
                return Err(config_error("few_shot_k", "must be at least 1"));
            }
            if self.mode == Mode::IclPretrain && self.pretrain_instances == 0 {
                return Err(config_error("pretrain_instances", "must be positive"));
            }
        }
        if let Some(h) = &self.hmda {
            if self.domain != Domain::NlTree {
                return Err(config_error("hmda", "record pools apply to the nl_tree domain only"));
            }
            let missing: Vec<&str> = LoanField::ALL
                .iter()
                .filter(|f| !h.column_map.contains_key(f))
                .map(|f| f.as_str())
                .collect();
            if !missing.is_empty() {
                return Err(config_error("hmda.column_map", format!("no column for {}", missing.join(", "))));
            }
            if !(h.income_scale.is_finite() && h.income_scale > 0.0) {
                return Err(config_error("hmda.income_scale", "must be positive"));
            }
        }
        Ok(())
    }
}
