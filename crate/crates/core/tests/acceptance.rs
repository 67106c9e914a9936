//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach the output.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use ccot::codec::{encode, SequenceKind};
use ccot::datagen::{build_dataset, gen_classifier, gen_input, write_jsonl, Dataset, DatasetConfig, Mode};
use ccot::eval::{
    compute_metrics, depth_sweep, ground_truth, perturb_transcripts, propagation_report, EvalReport, FlipPlan,
    GroundTruth, SweepConfig,
};
use ccot::oracle::{classify, classify_logreg, classify_tree, ClassifierSpec, DecisionTrace, Domain};
use ccot::protocol::{run_batch, BatchItem, BatchOptions, Branch, RunMode};
use ccot::seed::rng_for;
use ccot::simbackend::{CopyingBackend, CorruptingBackend, CorruptionProfile, FaithfulBackend};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn golden_fixtures() -> Check {
    for domain in Domain::ALL {
        let g = common::golden(domain);
        let (spec, input) = common::golden_case(domain);
        let trace = classify(&spec, &input).map_err(|e| e.to_string())?;
        for (kind, want) in [
            (SequenceKind::Reasoning, &g.reasoning),
            (SequenceKind::Answer, &g.answer),
            (SequenceKind::Explanation, &g.explanation),
        ] {
            let got = encode(&trace, kind).map_err(|e| e.to_string())?;
            ensure(&got == want, || format!("{domain} {kind}: {got:?} != {want:?}"))?;
        }
    }
    Ok("3 domains x 3 texts exact".into())
}

fn random_spec(domain: Domain, seed: u64) -> ClassifierSpec {
    let mut config = DatasetConfig::new(domain);
    let mut rng = rng_for(seed, &[99]);
    use rand::Rng;
    match domain {
        Domain::LogReg => config.input_dim = Some(rng.gen_range(1..=12)),
        Domain::Tree => {
            config.depth = rng.gen_range(1..=10);
            config.input_dim = Some(rng.gen_range(2..=6));
        }
        Domain::NlTree => {}
    }
    gen_classifier(&config, seed).expect("valid config")
}

fn codec_round_trip() -> Check {
    const N: usize = 10_000;
    for domain in Domain::ALL {
        let mut spec = random_spec(domain, 0);
        for i in 0..N {
            if i % 50 == 0 {
                spec = random_spec(domain, i as u64);
            }
            let input = gen_input(&spec, &mut rng_for(1_000_000 + i as u64, &[domain as u64]));
            let trace = classify(&spec, &input).map_err(|e| e.to_string())?;
            for kind in SequenceKind::ALL {
                let text = encode(&trace, kind).map_err(|e| e.to_string())?;
                common::parses_back(&text, &trace, kind).map_err(|e| format!("{domain} #{i}: {e}"))?;
            }
        }
    }
    Ok(format!("{N} instances x 3 kinds x 3 domains"))
}

fn oracle_equivalence() -> Check {
    const N: usize = 1000;
    for i in 0..N {
        let spec = random_spec(Domain::LogReg, 10 + i as u64);
        let ClassifierSpec::LogReg(model) = &spec else { unreachable!() };
        let ccot::oracle::ClassifierInput::Vector(x) = gen_input(&spec, &mut rng_for(i as u64, &[7])) else {
            unreachable!()
        };
        let trace = classify_logreg(model, &x).map_err(|e| e.to_string())?;
        let (steps, class) = common::brute_logreg(model.weights(), &x);
        let got: Vec<(f64, f64)> = trace
            .decisions
            .iter()
            .map(|d| match d {
                ccot::oracle::PartialDecision::Product { product, cumulative, .. } => (*product, *cumulative),
                _ => (f64::NAN, f64::NAN),
            })
            .collect();
        ensure(got == steps && trace.final_class == class, || format!("logreg case {i} disagrees"))?;
    }
    for i in 0..N {
        let spec = random_spec(Domain::Tree, 20_000 + i as u64);
        let ClassifierSpec::Tree(model) = &spec else { unreachable!() };
        let ccot::oracle::ClassifierInput::Vector(x) = gen_input(&spec, &mut rng_for(i as u64, &[8])) else {
            unreachable!()
        };
        let trace = classify_tree(model, &x).map_err(|e| e.to_string())?;
        let (truths, class) = common::brute_tree(model, &x);
        ensure(trace.truths() == Some(truths) && trace.final_class == class, || {
            format!("tree case {i} disagrees")
        })?;
    }
    Ok(format!("{N} logreg + {N} tree cases"))
}

fn test_set(domain: Domain, depth: usize, test_inputs: usize, seed: u64) -> (ClassifierSpec, Vec<BatchItem>, GroundTruth) {
    let mut config = DatasetConfig::new(domain);
    config.depth = depth;
    config.test_inputs = test_inputs;
    config.train_inputs = 1;
    config.seed = seed;
    let spec = gen_classifier(&config, seed).expect("classifier");
    let dataset = build_dataset(&config, &spec).expect("dataset");
    let items = BatchItem::from_instances(&dataset.test).expect("items");
    let truth = ground_truth(&spec, items.iter().map(|i| (i.input_id.clone(), question(i)))).expect("truth");
    (spec, items, truth)
}

fn question(item: &BatchItem) -> String {
    item.history.messages()[0].content.clone()
}

fn faithful_end_to_end() -> Check {
    let mut lines = Vec::new();
    for domain in Domain::ALL {
        let (spec, items, truth) = test_set(domain, 7, 200, 4);
        let backend = FaithfulBackend::new(spec);
        let transcripts =
            run_batch(&backend, &items, RunMode::TwoStep, BatchOptions::default()).map_err(|e| e.to_string())?;
        let r = compute_metrics(&transcripts, &truth).map_err(|e| e.to_string())?;
        ensure(
            r.n == 200
                && r.answer_accuracy == 1.0
                && r.explanation_accuracy == 1.0
                && r.alignment_rate == 1.0
                && r.unparseable_rate_answer == 0.0
                && r.unparseable_rate_explanation == 0.0,
            || format!("{domain}: {:?}", r.headline()),
        )?;
        lines.push(format!("{domain} 1.000/1.000/1.000"));
    }
    Ok(format!("n=200 each: {}", lines.join(", ")))
}

fn fmt_row(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")
}

fn copying_law() -> Check {
    const N: usize = 1000;
    let (spec, items, truth) = test_set(Domain::Tree, 7, N, 5);
    let backend = CorruptingBackend::new(spec, CorruptionProfile::uniform(0.04, 7, 11)).map_err(|e| e.to_string())?;
    let options = BatchOptions { workers: 4, timing: false };
    let transcripts = run_batch(&backend, &items, RunMode::TwoStep, options).map_err(|e| e.to_string())?;
    let report = compute_metrics(&transcripts, &truth).map_err(|e| e.to_string())?;
    let table = report.per_decision.ok_or("no per-decision table")?;
    ensure(table.positions.len() == 7, || format!("{} positions", table.positions.len()))?;
    for p in &table.positions {
        ensure(
            p.explanation_accuracy == p.reasoning_accuracy
                && p.explanation_path_accuracy == p.reasoning_path_accuracy,
            || format!("position {}: explanation row differs from reasoning row {p:?}", p.position),
        )?;
        ensure(p.alignment_rate == 1.0, || format!("position {} alignment {}", p.position, p.alignment_rate))?;
    }
    let f = &table.final_class;
    ensure(f.explanation_accuracy == f.reasoning_accuracy && f.alignment_rate == 1.0, || {
        format!("final column {f:?}")
    })?;
    // Per-bit accuracy can rise again once a path has left the oracle's;
    // compounding shows in the cumulative (on-path) row.
    let path: Vec<f64> = table.positions.iter().map(|p| p.reasoning_path_accuracy).collect();
    let bits: Vec<f64> = table.positions.iter().map(|p| p.reasoning_accuracy).collect();
    ensure(path.windows(2).all(|w| w[1] <= w[0]), || format!("path accuracy not non-increasing: {path:?}"))?;
    ensure(path[6] < path[0], || format!("no corruption visible: {path:?}"))?;
    Ok(format!(
        "n={N} rate=0.04 path {} | per-bit {} | final {:.3} | rows equal, alignment 1.000",
        fmt_row(path.into_iter()),
        fmt_row(bits.into_iter()),
        f.reasoning_accuracy
    ))
}

fn propagation() -> Check {
    let (spec, items, _) = test_set(Domain::Tree, 7, 1000, 6);
    let backend = CopyingBackend::new(spec).map_err(|e| e.to_string())?;
    let options = BatchOptions { workers: 4, timing: false };
    let original = run_batch(&backend, &items, RunMode::TwoStep, options).map_err(|e| e.to_string())?;

    let positions = FlipPlan { rate: 0.15, seed: 3, ..FlipPlan::default() };
    let perturbed = perturb_transcripts(&backend, &original, &positions, options);
    let p = propagation_report(&original, &perturbed).map_err(|e| e.to_string())?;
    ensure(p.position_flips >= 1000, || format!("only {} position flips", p.position_flips))?;
    ensure(p.decision_propagation_rate == 1.0, || format!("decision propagation {}", p.decision_propagation_rate))?;

    let finals = FlipPlan { final_token: true, ..FlipPlan::default() };
    let perturbed = perturb_transcripts(&backend, &original, &finals, options);
    let f = propagation_report(&original, &perturbed).map_err(|e| e.to_string())?;
    ensure(f.final_flips >= 1000, || format!("only {} final-token flips", f.final_flips))?;
    ensure(f.final_answer_change_rate == 1.0, || format!("final answer change {}", f.final_answer_change_rate))?;
    Ok(format!(
        "{} bit flips -> {:.3} decisions changed; {} final flips -> {:.3} answers changed",
        p.position_flips, p.decision_propagation_rate, f.final_flips, f.final_answer_change_rate
    ))
}

fn depth_sweep_shape() -> Check {
    let config = SweepConfig {
        depths: (1..=8).collect(),
        test_inputs: 500,
        trees_per_depth: 32,
        seed: 0,
        workers: 4,
        ..SweepConfig::default()
    };
    let factory = |spec: &ClassifierSpec| {
        let depth = spec.max_path_len();
        CorruptingBackend::new(spec.clone(), CorruptionProfile::uniform(0.1, depth, 1))
            .map(|b| std::sync::Arc::new(b) as std::sync::Arc<dyn ccot::protocol::Backend>)
            .map_err(|e| e.to_string())
    };
    let report = depth_sweep(&config, &factory).map_err(|e| e.to_string())?;
    for row in &report.rows {
        ensure(row.report.alignment_rate == 1.0, || format!("depth {} alignment {}", row.depth, row.report.alignment_rate))?;
    }
    let accs: Vec<f64> = report.answer_accuracy().into_iter().map(|(_, a)| a).collect();
    let inversions: Vec<f64> = accs.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
    ensure(inversions.len() <= 1 && inversions.iter().all(|d| *d <= 0.01), || {
        format!("accuracy by depth {accs:?}")
    })?;
    Ok(format!(
        "32 trees x 500 inputs per depth, accuracy {} alignment 1.000",
        fmt_row(accs.into_iter())
    ))
}

fn dataset_bytes(d: &Dataset) -> Vec<(String, Vec<u8>)> {
    d.files()
        .into_iter()
        .map(|f| {
            let mut buf = Vec::new();
            write_jsonl(&mut buf, f.instances.iter().copied()).expect("in-memory write");
            (f.name.to_string(), buf)
        })
        .collect()
}

fn dataset_contract() -> Check {
    for domain in Domain::ALL {
        let config = DatasetConfig::new(domain);
        ensure(config.mode == Mode::JointReasoning, || "default mode".into())?;
        let spec = gen_classifier(&config, config.seed).map_err(|e| e.to_string())?;
        let a = build_dataset(&config, &spec).map_err(|e| e.to_string())?;
        let s = &a.summary;
        ensure(
            s.train_inputs == 2000 && s.test_inputs == 200 && a.train.len() == 6000 && a.test.len() == 600,
            || format!("{domain}: {s:?}"),
        )?;
        let train_q: BTreeSet<&str> = a.train.iter().map(|i| i.question()).collect();
        let test_q: BTreeSet<&str> = a.test.iter().map(|i| i.question()).collect();
        ensure(train_q.len() <= 2000 && test_q.len() == 200, || format!("{domain}: distinct questions"))?;
        ensure(train_q.is_disjoint(&test_q), || format!("{domain}: train and test overlap"))?;
        let b = build_dataset(&config, &gen_classifier(&config, config.seed).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        ensure(dataset_bytes(&a) == dataset_bytes(&b), || format!("{domain}: regeneration differs"))?;
    }
    Ok("3 domains: 2000/200 inputs, 6000/600 instances, disjoint, byte-identical".into())
}

fn bare_truth(classes: &[u8]) -> GroundTruth {
    classes
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            (
                format!("t{i:02}"),
                DecisionTrace { domain: Domain::Tree, decisions: vec![], final_class: c },
            )
        })
        .collect()
}

fn metric_accounting() -> Check {
    let out = |c: u8| format!("[[\"OUTPUT\", {c}]]");
    // Ten inputs: answers 7 right, 2 wrong, 1 unparseable; explanations
    // 6 right, 2 wrong, 1 unparseable, 1 failed call.
    let classes = [0u8, 1, 0, 1, 0, 1, 0, 1, 0, 1];
    let truth = bare_truth(&classes);
    let mut batch = Vec::new();
    for (i, &c) in classes.iter().enumerate() {
        let id = format!("t{i:02}");
        let (answer, explanation) = match i {
            0..=5 => (c.to_string(), out(c)),
            6 => (c.to_string(), out(1 - c)),
            7 => ((1 - c).to_string(), out(1 - c)),
            8 => ((1 - c).to_string(), "I cannot say.".to_string()),
            _ => ("banana".to_string(), "unused".to_string()),
        };
        let mut t = common::transcript(&id, Domain::Tree, None, &answer, &explanation);
        if i == 9 {
            t.explanation = Branch::failed("timeout");
        }
        batch.push(t);
    }
    let r = compute_metrics(&batch, &truth).map_err(|e| e.to_string())?;
    let want = (0.7, 0.6, 0.7, 0.1, 0.2);
    let got = (
        r.answer_accuracy,
        r.explanation_accuracy,
        r.alignment_rate,
        r.unparseable_rate_answer,
        r.unparseable_rate_explanation,
    );
    ensure(got == want, || format!("batch A {got:?} != {want:?}"))?;
    ensure(r.counts.failed_calls == 1 && r.counts.answer_unparseable == 1 && r.counts.explanation_unparseable == 2, || {
        format!("batch A counts {:?}", r.counts)
    })?;
    check_identity(&r)?;

    // Four otherwise perfect inputs with one unparseable answer.
    let truth = bare_truth(&[1, 0, 1, 0]);
    let batch: Vec<_> = (0..4u8)
        .map(|i| {
            let c = 1 - i % 2;
            let answer = if i == 2 { "maybe".to_string() } else { c.to_string() };
            common::transcript(&format!("t{i:02}"), Domain::Tree, None, &answer, &out(c))
        })
        .collect();
    let r = compute_metrics(&batch, &truth).map_err(|e| e.to_string())?;
    let got = (r.answer_accuracy, r.explanation_accuracy, r.alignment_rate, r.unparseable_rate_answer);
    ensure(got == (0.75, 1.0, 0.75, 0.25), || format!("batch B {got:?}"))?;
    check_identity(&r)?;
    Ok("batch A 0.7/0.6/0.7 unparseable 0.1/0.2; batch B 0.75/1.0/0.75 unparseable 0.25".into())
}

/// Errors include unparseables: wrong-but-parsed + unparseable = n - correct.
fn check_identity(r: &EvalReport) -> Result<(), String> {
    let c = &r.counts;
    ensure(
        c.answer_correct + c.answer_unparseable <= r.n && c.explanation_correct + c.explanation_unparseable <= r.n,
        || format!("identity violated {c:?}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("golden fixtures", Duration::from_secs(1), golden_fixtures),
        ("codec round-trip", Duration::from_secs(30), codec_round_trip),
        ("oracle equivalence", Duration::from_secs(10), oracle_equivalence),
        ("faithful end-to-end", Duration::from_secs(10), faithful_end_to_end),
        ("copying law", Duration::from_secs(20), copying_law),
        ("propagation", Duration::from_secs(30), propagation),
        ("depth sweep", Duration::from_secs(60), depth_sweep_shape),
        ("dataset contract", Duration::from_secs(30), dataset_contract),
        ("metric accounting", Duration::from_secs(1), metric_accounting),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (status, detail) = match result {
            Ok(_) if elapsed > budget => ("FAIL", format!("took {elapsed:.2?}, budget {budget:?}")),
            Ok(detail) => ("PASS", detail),
            Err(e) => ("FAIL", e),
        };
        failed += usize::from(status == "FAIL");
        println!("criterion {} {name}: {status} [{:.2}s] {detail}", i + 1, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
