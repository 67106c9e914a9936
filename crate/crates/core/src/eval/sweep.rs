use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, EvalReport};
use super::{EvalError, GroundTruth};
use crate::codec::question::render_question;
use crate::datagen::{gen_classifier, gen_input, DatasetConfig};
use crate::oracle::{classify, ClassifierSpec, Domain};
use crate::protocol::{run_batch, Backend, BatchItem, BatchOptions, ConversationHistory, RunMode};
use crate::seed::{derive_seed, rng_for, stream};

/// Builds the backend evaluated on each generated tree.
pub type BackendFactory<'a> = dyn Fn(&ClassifierSpec) -> Result<Arc<dyn Backend>, String> + Sync + 'a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    /// Test inputs per tree.
    #[serde(default = "default_test")]
    pub test_inputs: usize,
    /// Independent trees per depth; their transcripts are pooled.
    #[serde(default = "default_trees")]
    pub trees_per_depth: usize,
    #[serde(default = "default_dim")]
    pub input_dim: usize,
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trees")]
    pub workers: usize,
}

fn default_depths() -> Vec<usize> {
    (1..=8).collect()
}
fn default_test() -> usize {
    200
}
fn default_trees() -> usize {
    1
}
fn default_dim() -> usize {
    2
}
fn default_mode() -> RunMode {
    RunMode::TwoStep
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            depths: default_depths(),
            test_inputs: default_test(),
            trees_per_depth: default_trees(),
            input_dim: default_dim(),
            mode: default_mode(),
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub depth: usize,
    pub specs: Vec<ClassifierSpec>,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// `(depth, metric, value)` rows.
    pub fn tidy(&self) -> Vec<(usize, &'static str, f64)> {
        let mut out = Vec::new();
        for row in &self.rows {
            for (metric, value) in row.report.headline() {
                out.push((row.depth, metric, value));
            }
            if let Some(pd) = &row.report.per_decision {
                out.push((row.depth, "reasoning_final_accuracy", pd.final_class.reasoning_accuracy));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["depth", "metric", "value"]).expect("in-memory write");
        for (depth, metric, value) in self.tidy() {
            w.write_record([depth.to_string(), metric.to_string(), value.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Answer accuracy per depth, in sweep order.
    pub fn answer_accuracy(&self) -> Vec<(usize, f64)> {
        self.rows.iter().map(|r| (r.depth, r.report.answer_accuracy)).collect()
    }
}

/// Evaluates a fresh seeded set of trees and test inputs at each depth.
pub fn depth_sweep(config: &SweepConfig, factory: &BackendFactory<'_>) -> Result<SweepReport, EvalError> {
    if config.depths.is_empty() || config.test_inputs == 0 || config.trees_per_depth == 0 {
        return Err(EvalError::Sweep("depths, test_inputs and trees_per_depth must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(config.depths.len());
    for &depth in &config.depths {
        let mut dc = DatasetConfig::new(Domain::Tree);
        dc.depth = depth;
        dc.input_dim = Some(config.input_dim);
        dc.test_inputs = config.test_inputs;
        let mut transcripts = Vec::new();
        let mut truth = GroundTruth::new();
        let mut specs = Vec::new();
        for tree in 0..config.trees_per_depth {
            let seed = derive_seed(config.seed, &[stream::SWEEP, depth as u64, tree as u64]);
            let spec = gen_classifier(&dc, seed).map_err(|e| EvalError::Sweep(e.to_string()))?;
            let mut items = Vec::with_capacity(config.test_inputs);
            for j in 0..config.test_inputs {
                let input = gen_input(&spec, &mut rng_for(seed, &[stream::TEST_INPUT, j as u64]));
                let input_id = format!("tree{:03}-test-{:06}", tree + 1, j + 1);
                let trace = classify(&spec, &input).map_err(|e| EvalError::Sweep(e.to_string()))?;
                truth.insert(input_id.clone(), trace);
                items.push(BatchItem {
                    input_id,
                    domain: Domain::Tree,
                    history: ConversationHistory::single(render_question(&input)),
                });
            }
            let backend = factory(&spec).map_err(EvalError::Sweep)?;
            let options = BatchOptions {
                workers: config.workers.max(1),
                timing: false,
            };
            transcripts.extend(
                run_batch(backend.as_ref(), &items, config.mode, options).map_err(|e| EvalError::Sweep(e.to_string()))?,
            );
            specs.push(spec);
        }
        let report = compute_metrics(&transcripts, &truth)?;
        rows.push(SweepRow { depth, specs, report });
    }
    Ok(SweepReport { rows })
}
