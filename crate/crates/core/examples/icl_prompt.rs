//! A 20-shot in-context prompt for a depth-3 tree.

use ccot::datagen::{build_icl_prompt, gen_classifier, gen_input, DatasetConfig, Split};
use ccot::protocol::Command;
use ccot::seed::rng_for;
use ccot::Domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = DatasetConfig::new(Domain::Tree);
    config.depth = 3;
    let spec = gen_classifier(&config, 2)?;
    let query = gen_input(&spec, &mut rng_for(2, &[9]));
    let instance = build_icl_prompt(&spec, 20, 2, &query, Command::Explain, "q0", Split::Test)?;
    for m in &instance.messages {
        println!("[{:?}]\n{}\n", m.role, m.content);
    }
    Ok(())
}
