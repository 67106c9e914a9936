//! Runs one input through the two-step protocol against a faithful
//! simulated model, showing every request the backend sees.

use ccot::codec::question::render_question;
use ccot::datagen::{gen_classifier, gen_input, DatasetConfig};
use ccot::protocol::{run_direct, run_two_step, Command, ConversationHistory};
use ccot::seed::rng_for;
use ccot::simbackend::{FaithfulBackend, RecordingBackend};
use ccot::Domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = DatasetConfig::new(Domain::Tree);
    config.depth = 3;
    let spec = gen_classifier(&config, 3)?;
    let input = gen_input(&spec, &mut rng_for(3, &[1]));
    let history = ConversationHistory::single(render_question(&input));

    let backend = RecordingBackend::new(FaithfulBackend::new(spec));
    let t = run_two_step(&backend, "demo", &history, Domain::Tree)?;
    for req in backend.requests() {
        println!("request {}", req.id);
        for m in &req.messages {
            println!("  {:?}: {:?}", m.role, m.content);
        }
    }
    println!("reasoning:   {:?}", t.reasoning.as_ref().and_then(|b| b.text.clone()));
    println!("answer:      {:?}", t.answer.text);
    println!("explanation: {:?}", t.explanation.text);

    let d = run_direct(&backend, "demo", &history, Command::Answer, Domain::Tree);
    println!("direct answer: {:?}", d.text);
    Ok(())
}
