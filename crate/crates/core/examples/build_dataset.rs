//! Builds a small tree dataset and writes it as JSONL to a temp directory.

use std::fs::File;
use std::io::BufWriter;

use ccot::datagen::{build_dataset, gen_classifier, write_jsonl, DatasetConfig, Mode};
use ccot::Domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = DatasetConfig::new(Domain::Tree);
    config.depth = 4;
    config.train_inputs = 100;
    config.test_inputs = 20;
    config.mode = Mode::JointReasoning;
    config.seed = 7;
    config.validate()?;

    let spec = gen_classifier(&config, config.seed)?;
    let dataset = build_dataset(&config, &spec)?;
    let dir = std::env::temp_dir().join("ccot-build-dataset");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("spec.json"), spec.to_json())?;
    for file in dataset.files() {
        let out = BufWriter::new(File::create(dir.join(file.name))?);
        write_jsonl(out, file.instances.iter().copied())?;
        println!("{}: {} instances", file.name, file.instances.len());
    }
    println!("{:?}", dataset.summary);
    println!("first test instance: {}", serde_json::to_string(&dataset.test[0])?);
    println!("written to {}", dir.display());
    Ok(())
}
