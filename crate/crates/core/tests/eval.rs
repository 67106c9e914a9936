mod common;

use std::sync::Arc;

use ccot::codec::{perturb_reasoning, FlipSet};
use ccot::datagen::{build_dataset, gen_classifier, DatasetConfig};
use ccot::eval::{
    compute_metrics, depth_sweep, ground_truth, per_decision_analysis, perturb_transcripts, propagation_report,
    render_report, EvalError, FlipPlan, GroundTruth, SweepConfig,
};
use ccot::oracle::{ClassifierSpec, DecisionTrace, Domain};
use ccot::protocol::{run_batch, Backend, BackendTranscript, BatchItem, BatchOptions, Branch, RunMode};
use ccot::simbackend::{CopyingBackend, CorruptingBackend, CorruptionProfile, FaithfulBackend};
use ccot::SequenceKind;
use proptest::prelude::*;

fn bare_truth(classes: &[u8]) -> GroundTruth {
    classes
        .iter()
        .enumerate()
        .map(|(i, &c)| (format!("t{i}"), DecisionTrace { domain: Domain::Tree, decisions: vec![], final_class: c }))
        .collect()
}

fn out(c: u8) -> String {
    format!("[[\"OUTPUT\", {c}]]")
}

fn tree_run(depth: usize, n: usize, seed: u64) -> (ClassifierSpec, Vec<BatchItem>, GroundTruth) {
    let mut c = DatasetConfig::new(Domain::Tree);
    c.depth = depth;
    c.train_inputs = 1;
    c.test_inputs = n;
    c.seed = seed;
    let spec = gen_classifier(&c, seed).unwrap();
    let d = build_dataset(&c, &spec).unwrap();
    let items = BatchItem::from_instances(&d.test).unwrap();
    let truth = ground_truth(&spec, items.iter().map(|i| (i.input_id.clone(), i.history.messages()[0].content.clone()))).unwrap();
    (spec, items, truth)
}

#[test]
fn ten_transcript_fixture() {
    // 0..6 both right; 6 answer right, explanation wrong; 7..10 answer
    // wrong, explanation right.
    let classes = [1u8, 0, 1, 0, 1, 0, 1, 0, 1, 0];
    let truth = bare_truth(&classes);
    let batch: Vec<_> = classes
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let a = if i < 7 { c } else { 1 - c };
            let e = if i == 6 { 1 - c } else { c };
            common::transcript(&format!("t{i}"), Domain::Tree, None, &a.to_string(), &out(e))
        })
        .collect();
    let r = compute_metrics(&batch, &truth).unwrap();
    assert_eq!((r.answer_accuracy, r.explanation_accuracy, r.alignment_rate), (0.7, 0.9, 0.6));
    assert_eq!((r.unparseable_rate_answer, r.unparseable_rate_explanation), (0.0, 0.0));
    assert!(r.per_decision.is_none());
    assert!(r.reasoning_answer_alignment.is_none());
}

#[test]
fn unparseable_answer_counts_as_error_and_misalignment() {
    let truth = bare_truth(&[1]);
    let batch = vec![common::transcript("t0", Domain::Tree, None, "yes", &out(1))];
    let r = compute_metrics(&batch, &truth).unwrap();
    assert_eq!(r.answer_accuracy, 0.0);
    assert_eq!(r.explanation_accuracy, 1.0);
    assert_eq!(r.alignment_rate, 0.0);
    assert_eq!(r.unparseable_rate_answer, 1.0);
    assert_eq!(r.unparseable_rate_explanation, 0.0);
}

#[test]
fn both_sides_unparseable_are_misaligned() {
    let truth = bare_truth(&[0]);
    let batch = vec![common::transcript("t0", Domain::Tree, None, "?", "?")];
    assert_eq!(compute_metrics(&batch, &truth).unwrap().alignment_rate, 0.0);
}

#[test]
fn pairing_errors() {
    let truth = bare_truth(&[0, 1]);
    let a = common::transcript("t0", Domain::Tree, None, "0", &out(0));
    let b = common::transcript("t1", Domain::Tree, None, "1", &out(1));
    assert_eq!(compute_metrics(&[a.clone(), a.clone()], &truth), Err(EvalError::Duplicate("t0".into())));
    assert_eq!(compute_metrics(std::slice::from_ref(&a), &truth), Err(EvalError::MissingTranscript("t1".into())));
    let stray = common::transcript("t9", Domain::Tree, None, "0", &out(0));
    assert_eq!(compute_metrics(&[a.clone(), b.clone(), stray], &truth), Err(EvalError::MissingTruth("t9".into())));
    let mut c = b.clone();
    c.domain = Domain::LogReg;
    assert!(matches!(compute_metrics(&[a, c], &truth), Err(EvalError::MixedDomains(..))));
}

#[test]
fn faithful_per_decision_is_all_ones() {
    let (spec, items, truth) = tree_run(7, 50, 1);
    let ts = run_batch(&FaithfulBackend::new(spec), &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
    let r = compute_metrics(&ts, &truth).unwrap();
    let table = r.per_decision.as_ref().unwrap();
    assert_eq!(table.positions.len(), 7);
    for p in &table.positions {
        assert_eq!(p.n, 50);
        for v in [p.reasoning_accuracy, p.explanation_accuracy, p.alignment_rate, p.reasoning_path_accuracy, p.explanation_path_accuracy] {
            assert_eq!(v, 1.0);
        }
    }
    assert_eq!(table.final_class.answer_accuracy, 1.0);
    assert_eq!(r.reasoning_answer_alignment, Some(1.0));
    let text = render_report(&r);
    assert!(text.starts_with("n "));
    assert!(text.contains("answer accuracy              1.000\n"), "{text}");
    assert!(text.contains("\nreasoning       1.000  1.000"), "{text}");
}

#[test]
fn hand_flip_at_position_three_costs_one_over_n() {
    let n = 20;
    let (spec, items, truth) = tree_run(7, n, 2);
    let ts = run_batch(&FaithfulBackend::new(spec), &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
    let before = per_decision_analysis(&ts, &truth).unwrap();

    let mut edited = ts.clone();
    let t = &mut edited[4];
    let reasoning = perturb_reasoning(t.reasoning_text().unwrap(), Domain::Tree, &FlipSet::position(3)).unwrap();
    t.reasoning = Some(Branch::from_text(reasoning, Domain::Tree, SequenceKind::Reasoning));
    let expl = t.explanation.text.clone().unwrap();
    let flipped = flip_third_row(&expl);
    t.explanation = Branch::from_text(flipped, Domain::Tree, SequenceKind::Explanation);
    let after = per_decision_analysis(&edited, &truth).unwrap();

    for (b, a) in before.positions.iter().zip(&after.positions) {
        let drop = if b.position == 3 { 1.0 / n as f64 } else { 0.0 };
        assert!((b.reasoning_accuracy - a.reasoning_accuracy - drop).abs() < 1e-12, "{a:?}");
        assert!((b.explanation_accuracy - a.explanation_accuracy - drop).abs() < 1e-12, "{a:?}");
        assert_eq!(a.alignment_rate, 1.0);
        if b.position >= 3 {
            assert!((b.reasoning_path_accuracy - a.reasoning_path_accuracy - 1.0 / n as f64).abs() < 1e-12);
        }
    }
}

fn flip_third_row(explanation: &str) -> String {
    let mut rows: Vec<serde_json::Value> = serde_json::from_str(explanation).unwrap();
    let truth = rows[2][1].as_bool().unwrap();
    rows[2][1] = serde_json::Value::Bool(!truth);
    let items: Vec<String> = rows
        .iter()
        .map(|r| format!("[{}, {}]", r[0], r[1]))
        .collect();
    format!("[{}]", items.join(", "))
}

#[test]
fn missing_decisions_count_as_wrong() {
    let (spec, items, truth) = tree_run(4, 10, 3);
    let mut ts = run_batch(&FaithfulBackend::new(spec), &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
    let text = ts[0].reasoning_text().unwrap().to_string();
    let truncated = text.split(',').take(2).collect::<Vec<_>>().join(",");
    ts[0].reasoning = Some(Branch::from_text(truncated, Domain::Tree, SequenceKind::Reasoning));
    let table = per_decision_analysis(&ts, &truth).unwrap();
    assert_eq!(table.missing_reasoning_decisions, 3);
    assert_eq!(table.positions[0].reasoning_accuracy, 1.0);
    assert_eq!(table.positions[1].reasoning_accuracy, 0.9);
    assert_eq!(table.positions[3].alignment_rate, 0.9);
}

#[test]
fn per_decision_rejects_logreg() {
    let t = common::transcript("t0", Domain::LogReg, Some("1 1;1"), "1", "[[\"OUTPUT\", 1]]");
    let truth: GroundTruth = [("t0".to_string(), DecisionTrace { domain: Domain::LogReg, decisions: vec![], final_class: 1 })].into();
    assert_eq!(per_decision_analysis(&[t], &truth), Err(EvalError::NotBitEncoded(Domain::LogReg)));
}

#[test]
fn zero_flips_give_an_empty_report() {
    let (spec, items, _) = tree_run(5, 20, 4);
    let backend = CopyingBackend::new(spec).unwrap();
    let ts = run_batch(&backend, &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
    let perturbed = perturb_transcripts(&backend, &ts, &FlipPlan::default(), BatchOptions::default());
    assert!(perturbed.is_empty());
    let r = propagation_report(&ts, &perturbed).unwrap();
    assert_eq!((r.transcripts, r.position_flips, r.final_flips), (0, 0, 0));
    assert_eq!(r.decision_propagation_rate, 1.0);
    assert_eq!(r.final_answer_change_rate, 1.0);
}

#[test]
fn final_token_flips_change_answers_only() {
    let (spec, items, _) = tree_run(6, 60, 5);
    let backend = CopyingBackend::new(spec).unwrap();
    let ts = run_batch(&backend, &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
    let plan = FlipPlan { final_token: true, ..FlipPlan::default() };
    let perturbed = perturb_transcripts(&backend, &ts, &plan, BatchOptions::default());
    let r = propagation_report(&ts, &perturbed).unwrap();
    assert_eq!(r.final_flips, 60);
    assert_eq!(r.final_answer_change_rate, 1.0);
    assert_eq!(r.final_explanation_unchanged_rate, 1.0);
    assert_eq!(r.final_explanation_class_change_rate, 0.0);
}

#[test]
fn explicit_positions_and_determinism() {
    let (spec, items, _) = tree_run(7, 40, 6);
    let backend = CopyingBackend::new(spec).unwrap();
    let ts = run_batch(&backend, &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
    let plan = FlipPlan { positions: vec![2, 9], ..FlipPlan::default() };
    let perturbed = perturb_transcripts(&backend, &ts, &plan, BatchOptions::default());
    let r = propagation_report(&ts, &perturbed).unwrap();
    assert_eq!(r.position_flips, 40, "position 9 lies past the path and is skipped");
    assert_eq!(r.decision_propagation_rate, 1.0);

    let random = FlipPlan { rate: 0.1, seed: 77, ..FlipPlan::default() };
    let a = propagation_report(&ts, &perturb_transcripts(&backend, &ts, &random, BatchOptions::default())).unwrap();
    let b = propagation_report(&ts, &perturb_transcripts(&backend, &ts, &random, BatchOptions { workers: 4, timing: false })).unwrap();
    assert_eq!(a, b);
}

#[test]
fn propagation_pairing_errors() {
    let (spec, items, _) = tree_run(3, 5, 7);
    let backend = CopyingBackend::new(spec).unwrap();
    let ts = run_batch(&backend, &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
    assert!(matches!(propagation_report(&ts, &ts), Err(EvalError::NoPerturbation(_))));
    let perturbed = perturb_transcripts(&backend, &ts, &FlipPlan { final_token: true, ..FlipPlan::default() }, BatchOptions::default());
    assert!(matches!(propagation_report(&ts[1..], &perturbed), Err(EvalError::MissingTranscript(_))));
}

fn factory_for(kind: &'static str, rate: f64) -> impl Fn(&ClassifierSpec) -> Result<Arc<dyn Backend>, String> + Sync {
    move |spec: &ClassifierSpec| -> Result<Arc<dyn Backend>, String> {
        Ok(match kind {
            "faithful" => Arc::new(FaithfulBackend::new(spec.clone())),
            _ => Arc::new(
                CorruptingBackend::new(spec.clone(), CorruptionProfile::uniform(rate, spec.max_path_len(), 3))
                    .map_err(|e| e.to_string())?,
            ),
        })
    }
}

#[test]
fn faithful_sweep_is_perfect_everywhere() {
    let config = SweepConfig { test_inputs: 30, ..SweepConfig::default() };
    let report = depth_sweep(&config, &factory_for("faithful", 0.0)).unwrap();
    assert_eq!(report.rows.len(), 8);
    for row in &report.rows {
        assert_eq!(row.report.answer_accuracy, 1.0);
        assert_eq!(row.report.alignment_rate, 1.0);
        assert_eq!(row.report.n, 30);
    }
    let csv = report.to_csv();
    assert!(csv.starts_with("depth,metric,value\n1,answer_accuracy,1\n"));
}

#[test]
fn corrupting_sweep_three_depths() {
    let config = SweepConfig {
        depths: vec![3, 5, 7],
        test_inputs: 300,
        trees_per_depth: 16,
        workers: 4,
        ..SweepConfig::default()
    };
    let report = depth_sweep(&config, &factory_for("corrupting", 0.1)).unwrap();
    let acc: Vec<f64> = report.answer_accuracy().into_iter().map(|(_, a)| a).collect();
    assert!(acc[0] > acc[1] && acc[1] > acc[2], "{acc:?}");
    assert!(report.rows.iter().all(|r| r.report.alignment_rate == 1.0));
}

#[test]
fn single_depth_sweep_matches_compute_metrics() {
    let config = SweepConfig { depths: vec![7], test_inputs: 40, ..SweepConfig::default() };
    let report = depth_sweep(&config, &factory_for("corrupting", 0.05)).unwrap();
    let row = &report.rows[0];
    let spec = &row.specs[0];
    let backend = factory_for("corrupting", 0.05)(spec).unwrap();
    let items: Vec<BatchItem> = (0..40)
        .map(|j| {
            let input = ccot::datagen::gen_input(spec, &mut ccot::seed::rng_for(
                ccot::seed::derive_seed(0, &[ccot::seed::stream::SWEEP, 7, 0]),
                &[ccot::seed::stream::TEST_INPUT, j],
            ));
            BatchItem {
                input_id: format!("tree001-test-{:06}", j + 1),
                domain: Domain::Tree,
                history: ccot::protocol::ConversationHistory::single(ccot::codec::question::render_question(&input)),
            }
        })
        .collect();
    let truth = ground_truth(spec, items.iter().map(|i| (i.input_id.clone(), i.history.messages()[0].content.clone()))).unwrap();
    let ts = run_batch(backend.as_ref(), &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
    assert_eq!(compute_metrics(&ts, &truth).unwrap(), row.report);
}

#[test]
fn empty_sweep_is_rejected() {
    let config = SweepConfig { depths: vec![], ..SweepConfig::default() };
    assert!(matches!(depth_sweep(&config, &factory_for("faithful", 0.0)), Err(EvalError::Sweep(_))));
}

fn class_text(choice: u8) -> String {
    match choice {
        0 | 1 => choice.to_string(),
        _ => "unsure".to_string(),
    }
}

fn batch_strategy() -> impl Strategy<Value = (Vec<u8>, Vec<(u8, u8)>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec((0u8..3, 0u8..3), n),
        )
    })
}

fn build(classes: &[u8], outputs: &[(u8, u8)]) -> (GroundTruth, Vec<BackendTranscript>) {
    let truth = bare_truth(classes);
    let batch = outputs
        .iter()
        .enumerate()
        .map(|(i, &(a, e))| {
            let expl = if e < 2 { out(e) } else { "no idea".to_string() };
            common::transcript(&format!("t{i}"), Domain::Tree, None, &class_text(a), &expl)
        })
        .collect();
    (truth, batch)
}

proptest! {
    #[test]
    fn accounting_identity_and_bounds((classes, outputs) in batch_strategy(), rotate in 0usize..40) {
        let (truth, batch) = build(&classes, &outputs);
        let r = compute_metrics(&batch, &truth).unwrap();
        let n = r.n as f64;
        let wrong_a = outputs.iter().zip(&classes).filter(|((a, _), c)| a != *c).count();
        let wrong_e = outputs.iter().zip(&classes).filter(|((_, e), c)| e != *c).count();
        prop_assert_eq!(r.counts.answer_correct + wrong_a, r.n);
        prop_assert_eq!(r.counts.explanation_correct + wrong_e, r.n);
        prop_assert!(r.counts.answer_unparseable <= wrong_a);
        prop_assert!(r.counts.explanation_unparseable <= wrong_e);
        prop_assert!(r.alignment_rate + 1e-12 >= r.answer_accuracy + r.explanation_accuracy - 1.0);
        for v in [r.answer_accuracy, r.explanation_accuracy, r.alignment_rate, r.unparseable_rate_answer, r.unparseable_rate_explanation] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(r.answer_accuracy, r.counts.answer_correct as f64 / n);

        let mut shuffled = batch.clone();
        let k = rotate % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(compute_metrics(&shuffled, &truth).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn copying_rows_always_align(rate in 0.0f64..0.6, seed in any::<u64>(), depth in 1usize..9) {
        let (spec, items, truth) = tree_run(depth, 40, seed % 1000);
        let profile = CorruptionProfile { position_flip: vec![rate; depth], final_flip: 0.0, seed };
        let backend = CorruptingBackend::new(spec, profile).unwrap();
        let ts = run_batch(&backend, &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
        let r = compute_metrics(&ts, &truth).unwrap();
        prop_assert_eq!(r.alignment_rate, 1.0);
        let table = r.per_decision.unwrap();
        for p in &table.positions {
            prop_assert_eq!(p.alignment_rate, 1.0);
            prop_assert_eq!(p.reasoning_accuracy, p.explanation_accuracy);
            prop_assert_eq!(p.reasoning_path_accuracy, p.explanation_path_accuracy);
        }
        for w in table.positions.windows(2) {
            prop_assert!(w[1].reasoning_path_accuracy <= w[0].reasoning_path_accuracy);
        }
    }
}

#[test]
fn final_flips_misalign_answers_but_not_decisions() {
    let (spec, items, truth) = tree_run(5, 200, 8);
    let profile = CorruptionProfile { position_flip: vec![0.05; 5], final_flip: 0.2, seed: 1 };
    let backend = CorruptingBackend::new(spec, profile).unwrap();
    let ts = run_batch(&backend, &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
    let r = compute_metrics(&ts, &truth).unwrap();
    assert!(r.alignment_rate < 1.0);
    assert_eq!(r.reasoning_answer_alignment, Some(1.0));
    let table = r.per_decision.unwrap();
    assert!(table.positions.iter().all(|p| p.alignment_rate == 1.0));
    assert_eq!(table.final_class.alignment_rate, r.alignment_rate);
}

#[test]
fn emulated_error_accumulation_profile() {
    let (spec, items, truth) = tree_run(7, 200, 10);
    let profile = CorruptionProfile {
        position_flip: vec![0.005, 0.0, 0.01, 0.03, 0.07, 0.07, 0.10],
        final_flip: 0.0,
        seed: 2,
    };
    let backend = CorruptingBackend::new(spec, profile).unwrap();
    let ts = run_batch(&backend, &items, RunMode::TwoStep, BatchOptions::default()).unwrap();
    let r = compute_metrics(&ts, &truth).unwrap();
    assert_eq!(r.alignment_rate, 1.0);
    let table = r.per_decision.unwrap();
    for p in &table.positions {
        assert_eq!(p.reasoning_accuracy, p.explanation_accuracy);
        assert_eq!(p.alignment_rate, 1.0);
    }
    let path: Vec<f64> = table.positions.iter().map(|p| p.reasoning_path_accuracy).collect();
    assert!(path.windows(2).all(|w| w[1] <= w[0]), "{path:?}");
    assert!(path[6] < 1.0);
}
