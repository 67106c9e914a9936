//! Answer accuracy across tree depths for a corrupting model.

use std::sync::Arc;

use ccot::eval::{depth_sweep, SweepConfig};
use ccot::protocol::Backend;
use ccot::simbackend::{CorruptingBackend, CorruptionProfile};
use ccot::ClassifierSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SweepConfig {
        depths: (1..=6).collect(),
        test_inputs: 200,
        trees_per_depth: 8,
        seed: 1,
        workers: 4,
        ..SweepConfig::default()
    };
    let factory = |spec: &ClassifierSpec| {
        let profile = CorruptionProfile::uniform(0.1, spec.max_path_len(), 1);
        CorruptingBackend::new(spec.clone(), profile)
            .map(|b| Arc::new(b) as Arc<dyn Backend>)
            .map_err(|e| e.to_string())
    };
    let report = depth_sweep(&config, &factory)?;
    for row in &report.rows {
        println!(
            "depth {}: answer {:.3} explanation {:.3} alignment {:.3}",
            row.depth, row.report.answer_accuracy, row.report.explanation_accuracy, row.report.alignment_rate
        );
    }
    print!("{}", report.to_csv());
    Ok(())
}
