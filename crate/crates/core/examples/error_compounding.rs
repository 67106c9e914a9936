//! Per-decision accuracy of a corrupting model on a depth-7 tree.

use ccot::datagen::{build_dataset, gen_classifier, DatasetConfig};
use ccot::eval::{compute_metrics, ground_truth, render_report};
use ccot::protocol::{run_batch, BatchItem, BatchOptions, RunMode};
use ccot::simbackend::{CorruptingBackend, CorruptionProfile};
use ccot::Domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = DatasetConfig::new(Domain::Tree);
    config.train_inputs = 1;
    config.test_inputs = 1000;
    let spec = gen_classifier(&config, 5)?;
    let items = BatchItem::from_instances(&build_dataset(&config, &spec)?.test)?;
    let truth = ground_truth(
        &spec,
        items.iter().map(|i| (i.input_id.clone(), i.history.messages()[0].content.clone())),
    )?;

    let backend = CorruptingBackend::new(spec, CorruptionProfile::uniform(0.04, 7, 11))?;
    let transcripts = run_batch(&backend, &items, RunMode::TwoStep, BatchOptions { workers: 4, timing: false })?;
    let report = compute_metrics(&transcripts, &truth)?;
    println!("{}", render_report(&report));
    if let Some(table) = &report.per_decision {
        let path: Vec<String> = table.positions.iter().map(|p| format!("{:.3}", p.reasoning_path_accuracy)).collect();
        println!("on-path accuracy by position: {}", path.join(" "));
    }
    Ok(())
}
