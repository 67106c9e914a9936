//! Serves a simulated model over the line-delimited TCP protocol and runs a
//! batch against it through `RemoteBackend`.

use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

use ccot::datagen::{build_dataset, gen_classifier, DatasetConfig};
use ccot::eval::{compute_metrics, ground_truth, render_report};
use ccot::protocol::wire::{serve, RemoteBackend};
use ccot::protocol::{run_batch, Backend, BatchItem, BatchOptions, RunMode};
use ccot::simbackend::FaithfulBackend;
use ccot::Domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = DatasetConfig::new(Domain::NlTree);
    config.train_inputs = 1;
    config.test_inputs = 50;
    let spec = gen_classifier(&config, 8)?;
    let items = BatchItem::from_instances(&build_dataset(&config, &spec)?.test)?;

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let server = Arc::new(FaithfulBackend::new(spec.clone()));
    std::thread::spawn(move || serve(listener, server));

    let remote = RemoteBackend::connect(&addr.to_string(), Duration::from_secs(5));
    println!("handshake: {:?}", remote.descriptor());
    let transcripts = run_batch(&remote, &items, RunMode::TwoStep, BatchOptions { workers: 4, timing: true })?;
    let truth = ground_truth(
        &spec,
        items.iter().map(|i| (i.input_id.clone(), i.history.messages()[0].content.clone())),
    )?;
    println!("{}", render_report(&compute_metrics(&transcripts, &truth)?));
    Ok(())
}
