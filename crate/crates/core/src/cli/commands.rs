use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::config::{RunConfig, Seeds};
use super::manifest::{digest_file, now_unix, versions, FileDigest, ManifestEntry, RunManifest};
use super::{BackendChoice, CliError, CommonArgs, OUT_DIR_ENV};
use crate::datagen::{build_dataset, gen_classifier, read_jsonl, write_jsonl, ConversationInstance, DatagenError};
use crate::eval::{
    compute_metrics, depth_sweep, ground_truth, perturb_transcripts, propagation_report, render_report, EvalError,
};
use crate::oracle::ClassifierSpec;
use crate::protocol::wire::{RemoteBackend, DEFAULT_TIMEOUT};
use crate::protocol::{read_transcripts, run_batch, write_transcripts, Backend, BackendTranscript, BatchItem, BatchOptions, RunMode};
use crate::simbackend::{make_backend, SimKind};

struct Ctx {
    config: RunConfig,
    seeds: Seeds,
    out: PathBuf,
    workers: usize,
    snapshot: serde_json::Value,
    started: u64,
}

fn out_dir(args: &CommonArgs, config: &RunConfig) -> PathBuf {
    if let Some(o) = &args.out {
        return o.clone();
    }
    if let Some(o) = &config.out_dir {
        return o.clone();
    }
    let stem = args
        .config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let root = std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(stem)
}

fn context(args: &CommonArgs) -> Result<Ctx, CliError> {
    let started = now_unix();
    let mut loaded = RunConfig::load(&args.config)?;
    let master = args.seed.unwrap_or(loaded.seed);
    loaded.seed = master;
    let snapshot = serde_json::to_value(&loaded).expect("config serializes");
    let (config, seeds) = loaded.seeded(master);
    let workers = args.workers.or(config.workers).unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let out = out_dir(args, &config);
    std::fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
    Ok(Ctx {
        config,
        seeds,
        out,
        workers,
        snapshot,
        started,
    })
}

fn datagen_error(e: DatagenError) -> CliError {
    match e {
        DatagenError::Config { .. } | DatagenError::IclDomain(_) => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn eval_error(e: EvalError) -> CliError {
    CliError::Data(e.to_string())
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>, CliError> {
    File::open(dir.join(name))
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", dir.join(name).display())))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    File::create(dir.join(name))
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", dir.join(name).display())))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text).map_err(|e| CliError::Data(format!("cannot write {name}: {e}")))
}

fn io_error(name: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("cannot write {name}: {e}"))
}

fn read_spec(dir: &Path) -> Result<ClassifierSpec, CliError> {
    let text = std::fs::read_to_string(dir.join("spec.json"))
        .map_err(|e| CliError::Data(format!("cannot read spec.json: {e}")))?;
    ClassifierSpec::from_json(&text).map_err(|e| CliError::Data(format!("spec.json: {e}")))
}

fn read_test(dir: &Path) -> Result<Vec<ConversationInstance>, CliError> {
    read_jsonl(open(dir, "test.jsonl")?).map_err(|e| CliError::Data(format!("test.jsonl: {e}")))
}

fn read_transcript_file(dir: &Path, name: &str) -> Result<Vec<BackendTranscript>, CliError> {
    read_transcripts(open(dir, name)?).map_err(|e| CliError::Data(format!("{name}: {e}")))
}

fn write_transcript_file(dir: &Path, name: &str, ts: &[BackendTranscript]) -> Result<(), CliError> {
    write_transcripts(create(dir, name)?, ts).map_err(io_error(name))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_text(dir, name, &(text + "\n"))
}

fn backend_choice(explicit: Option<&BackendChoice>, fallbacks: &[Option<&String>], default: SimKind) -> Result<BackendChoice, CliError> {
    if let Some(c) = explicit {
        return Ok(c.clone());
    }
    match fallbacks.iter().flatten().next() {
        Some(s) => s.parse().map_err(CliError::Usage),
        None => Ok(BackendChoice::Sim(default)),
    }
}

fn build_backend(ctx: &Ctx, choice: &BackendChoice, spec: &ClassifierSpec) -> Result<Arc<dyn Backend>, CliError> {
    match choice {
        BackendChoice::Sim(kind) => {
            let profile = ctx
                .config
                .corruption
                .profile(spec.max_path_len(), ctx.seeds.corruption);
            make_backend(*kind, spec, &profile).map_err(|e| CliError::Usage(e.to_string()))
        }
        BackendChoice::Remote(addr) => {
            let timeout = ctx
                .config
                .simulate
                .timeout_secs
                .map(Duration::from_secs)
                .unwrap_or(DEFAULT_TIMEOUT);
            Ok(Arc::new(RemoteBackend::connect(addr, timeout)))
        }
    }
}

fn record(
    ctx: &Ctx,
    command: &str,
    backend: Option<String>,
    summary: Option<serde_json::Value>,
    inputs: Vec<FileDigest>,
    outputs: &[&str],
) -> Result<(), CliError> {
    let outputs = outputs
        .iter()
        .map(|n| digest_file(&ctx.out, n))
        .collect::<Result<Vec<_>, _>>()?;
    RunManifest::record(
        &ctx.out,
        ManifestEntry {
            command: command.to_string(),
            config: ctx.snapshot.clone(),
            seeds: ctx.seeds,
            versions: versions(),
            backend,
            summary,
            inputs,
            outputs,
            started_unix: ctx.started,
            finished_unix: now_unix(),
        },
    )
}

fn inputs(ctx: &Ctx, names: &[&str]) -> Result<Vec<FileDigest>, CliError> {
    names.iter().map(|n| digest_file(&ctx.out, n)).collect()
}

fn failures(ts: &[BackendTranscript]) -> usize {
    ts.iter().map(BackendTranscript::failures).sum()
}

pub fn gen(args: &CommonArgs) -> Result<Vec<String>, CliError> {
    let ctx = context(args)?;
    let dc = &ctx.config.dataset;
    dc.validate().map_err(datagen_error)?;
    let spec = gen_classifier(dc, ctx.seeds.dataset).map_err(datagen_error)?;
    let dataset = build_dataset(dc, &spec).map_err(datagen_error)?;

    write_text(&ctx.out, "spec.json", &(spec.to_json() + "\n"))?;
    let mut outputs = vec!["spec.json"];
    for file in dataset.files() {
        write_jsonl(create(&ctx.out, file.name)?, file.instances.iter().copied()).map_err(io_error(file.name))?;
        outputs.push(file.name);
    }
    let mut ins = Vec::new();
    if let Some(h) = &dc.hmda {
        let bytes = std::fs::read(&h.path).map_err(|e| CliError::Data(format!("{}: {e}", h.path.display())))?;
        ins.push(FileDigest {
            path: h.path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let summary = serde_json::to_value(&dataset.summary).expect("summary serializes");
    record(&ctx, "gen", None, Some(summary), ins, &outputs)?;
    let mut lines = vec![format!(
        "{} {}: {} train / {} test instances from {} / {} inputs in {}",
        dc.domain,
        dc.mode,
        dataset.summary.train_instances,
        dataset.summary.test_instances,
        dataset.summary.train_inputs,
        dataset.summary.test_inputs,
        ctx.out.display()
    )];
    lines.extend(dataset.summary.warnings.iter().map(|w| format!("warning: {w}")));
    Ok(lines)
}

pub fn simulate(args: &CommonArgs) -> Result<Vec<String>, CliError> {
    let ctx = context(args)?;
    let spec = read_spec(&ctx.out)?;
    let test = read_test(&ctx.out)?;
    let items = BatchItem::from_instances(&test).map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(i) = items.iter().find(|i| i.domain != spec.domain()) {
        return Err(CliError::Data(format!("{} is a {} input but spec.json is {}", i.input_id, i.domain, spec.domain())));
    }
    let sim = &ctx.config.simulate;
    let choice = backend_choice(args.backend.as_ref(), &[sim.backend.as_ref()], SimKind::Faithful)?;
    let mode = args.mode.or(sim.mode).unwrap_or(RunMode::TwoStep);
    let backend = build_backend(&ctx, &choice, &spec)?;
    let options = BatchOptions {
        workers: ctx.workers,
        timing: sim.timing,
    };
    let transcripts = run_batch(backend.as_ref(), &items, mode, options).map_err(|e| CliError::Usage(e.to_string()))?;
    write_transcript_file(&ctx.out, "transcripts.jsonl", &transcripts)?;
    let failed = failures(&transcripts);
    let summary = serde_json::json!({ "transcripts": transcripts.len(), "failed_calls": failed, "mode": mode });
    record(
        &ctx,
        "simulate",
        Some(choice.to_string()),
        Some(summary),
        inputs(&ctx, &["spec.json", "test.jsonl"])?,
        &["transcripts.jsonl"],
    )?;
    if failed > 0 {
        return Err(CliError::Failures(failed));
    }
    Ok(vec![format!("{} transcripts ({choice}, {mode:?}) in {}", transcripts.len(), ctx.out.display())])
}

pub fn eval(args: &CommonArgs) -> Result<Vec<String>, CliError> {
    let ctx = context(args)?;
    let spec = read_spec(&ctx.out)?;
    let test = read_test(&ctx.out)?;
    let transcripts = read_transcript_file(&ctx.out, "transcripts.jsonl")?;
    let items = BatchItem::from_instances(&test).map_err(|e| CliError::Data(e.to_string()))?;
    let questions = items.iter().map(|i| {
        let q = i.history.messages().last().map(|m| m.content.clone()).unwrap_or_default();
        (i.input_id.clone(), q)
    });
    let truth = ground_truth(&spec, questions).map_err(eval_error)?;
    let fingerprint = {
        let mut h = Sha256::new();
        h.update(spec.to_json().as_bytes());
        h.update(ctx.snapshot.to_string().as_bytes());
        hex::encode(h.finalize())
    };
    let report = compute_metrics(&transcripts, &truth)
        .map_err(eval_error)?
        .with_fingerprint(fingerprint);
    write_json(&ctx.out, "report.json", &report)?;
    let text = render_report(&report);
    write_text(&ctx.out, "report.txt", &text)?;
    record(
        &ctx,
        "eval",
        None,
        None,
        inputs(&ctx, &["spec.json", "test.jsonl", "transcripts.jsonl"])?,
        &["report.json", "report.txt"],
    )?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn perturb(args: &CommonArgs) -> Result<Vec<String>, CliError> {
    let ctx = context(args)?;
    let spec = read_spec(&ctx.out)?;
    if !spec.domain().is_bit_encoded() {
        return Err(CliError::Usage(format!(
            "perturbation needs a bit-encoded domain (tree, nl_tree), got {}",
            spec.domain()
        )));
    }
    let plan = &ctx.config.perturb.plan;
    if !(0.0..=1.0).contains(&plan.rate) {
        return Err(CliError::Usage(format!("config field `perturb.rate`: {} outside [0, 1]", plan.rate)));
    }
    let original = read_transcript_file(&ctx.out, "transcripts.jsonl")?;
    let choice = backend_choice(args.backend.as_ref(), &[ctx.config.perturb.backend.as_ref()], SimKind::Copying)?;
    let backend = build_backend(&ctx, &choice, &spec)?;
    let options = BatchOptions {
        workers: ctx.workers,
        timing: false,
    };
    let perturbed = perturb_transcripts(backend.as_ref(), &original, plan, options);
    let report = propagation_report(&original, &perturbed).map_err(eval_error)?;
    write_transcript_file(&ctx.out, "perturbed_transcripts.jsonl", &perturbed)?;
    write_json(&ctx.out, "propagation.json", &report)?;
    record(
        &ctx,
        "perturb",
        Some(choice.to_string()),
        None,
        inputs(&ctx, &["spec.json", "transcripts.jsonl"])?,
        &["perturbed_transcripts.jsonl", "propagation.json"],
    )?;
    let failed = failures(&perturbed);
    if failed > 0 {
        return Err(CliError::Failures(failed));
    }
    Ok(vec![
        format!(
            "{} position flips: decision propagation {:.3}, answer change {:.3}",
            report.position_flips, report.decision_propagation_rate, report.position_answer_change_rate
        ),
        format!(
            "{} final-token flips: answer change {:.3}, explanation unchanged {:.3}",
            report.final_flips, report.final_answer_change_rate, report.final_explanation_unchanged_rate
        ),
    ])
}

pub fn sweep(args: &CommonArgs) -> Result<Vec<String>, CliError> {
    let ctx = context(args)?;
    let section = ctx.config.sweep.clone().unwrap_or_else(|| {
        let mut s = super::config::SweepSection::default();
        s.sweep.seed = ctx.seeds.sweep;
        s
    });
    let mut sweep = section.sweep.clone();
    if let Some(mode) = args.mode {
        sweep.mode = mode;
    }
    sweep.workers = ctx.workers;
    let choice = backend_choice(
        args.backend.as_ref(),
        &[section.backend.as_ref(), ctx.config.simulate.backend.as_ref()],
        SimKind::Faithful,
    )?;
    let factory = |spec: &ClassifierSpec| build_backend(&ctx, &choice, spec).map_err(|e| e.to_string());
    let report = depth_sweep(&sweep, &factory).map_err(|e| match e {
        EvalError::Sweep(m) => CliError::Usage(m),
        other => eval_error(other),
    })?;
    write_text(&ctx.out, "sweep.csv", &report.to_csv())?;
    write_json(&ctx.out, "sweep_reports.json", &report)?;
    record(
        &ctx,
        "sweep",
        Some(choice.to_string()),
        None,
        Vec::new(),
        &["sweep.csv", "sweep_reports.json"],
    )?;
    let failed: usize = report.rows.iter().map(|r| r.report.counts.failed_calls).sum();
    if failed > 0 {
        return Err(CliError::Failures(failed));
    }
    Ok(report
        .rows
        .iter()
        .map(|r| {
            format!(
                "depth {}: answer {:.3} explanation {:.3} alignment {:.3}",
                r.depth, r.report.answer_accuracy, r.report.explanation_accuracy, r.report.alignment_rate
            )
        })
        .collect())
}
