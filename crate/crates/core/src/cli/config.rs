use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::datagen::DatasetConfig;
use crate::eval::{FlipPlan, SweepConfig};
use crate::protocol::RunMode;
use crate::seed::{derive_seed, stream};
use crate::simbackend::CorruptionProfile;

/// Corruption settings; `position_flip` wins over `rate` when both are set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSection {
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub position_flip: Option<Vec<f64>>,
    #[serde(default)]
    pub final_flip: f64,
}

impl CorruptionSection {
    pub fn profile(&self, depth: usize, seed: u64) -> CorruptionProfile {
        let position_flip = match (&self.position_flip, self.rate) {
            (Some(p), _) => p.clone(),
            (None, Some(r)) => vec![r; depth],
            (None, None) => Vec::new(),
        };
        CorruptionProfile {
            position_flip,
            final_flip: self.final_flip,
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub mode: Option<RunMode>,
    /// Per-call timeout for remote backends.
    #[serde(default)]
    pub timeout_secs: Option<u64>,
    /// Record wall-clock time in transcripts (makes them non-reproducible).
    #[serde(default)]
    pub timing: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbSection {
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(flatten)]
    pub plan: FlipPlan,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(flatten)]
    pub sweep: SweepConfig,
}

/// One run's configuration. Every seed is derived from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub corruption: CorruptionSection,
    #[serde(default)]
    pub perturb: PerturbSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

/// Seeds handed to each stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub dataset: u64,
    pub corruption: u64,
    pub perturb: u64,
    pub sweep: u64,
}

impl Seeds {
    pub fn from_master(master: u64) -> Self {
        Self {
            master,
            dataset: master,
            corruption: derive_seed(master, &[stream::CORRUPTION]),
            perturb: derive_seed(master, &[stream::PERTURB]),
            sweep: derive_seed(master, &[stream::SWEEP]),
        }
    }
}

impl RunConfig {
    /// Reads TOML (`.toml`) or JSON (anything else).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e == "toml");
        let config: RunConfig = if is_toml {
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        };
        config.check_seeds()?;
        Ok(config)
    }

    fn check_seeds(&self) -> Result<(), CliError> {
        let sub = [
            ("dataset.seed", self.dataset.seed),
            ("perturb.seed", self.perturb.plan.seed),
            ("sweep.seed", self.sweep.as_ref().map_or(0, |s| s.sweep.seed)),
        ];
        if let Some((field, _)) = sub.iter().find(|(_, s)| *s != 0) {
            return Err(CliError::Usage(format!(
                "config field `{field}`: seeds are derived from the top-level `seed`; set that instead"
            )));
        }
        Ok(())
    }

    /// Applies the master seed to every section.
    pub fn seeded(mut self, master: u64) -> (Self, Seeds) {
        let seeds = Seeds::from_master(master);
        self.seed = master;
        self.dataset.seed = seeds.dataset;
        self.perturb.plan.seed = seeds.perturb;
        if let Some(s) = self.sweep.as_mut() {
            s.sweep.seed = seeds.sweep;
        }
        (self, seeds)
    }
}
