//! `gridner` — train, run and inspect the word-pair grid DNER engine.
//!
//! Subcommands: `convert` (inline <-> JSON), `stats`, `train`, `eval`,
//! `predict`, `mine`. Exit codes: 0 success, 1 validation error,
//! 2 runtime error. Log verbosity comes from `RUST_LOG`.

mod manifest;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gridner_core::corpus::{
    collect_labels, collect_vocab, compute_stats, from_json, parse_inline, to_inline, to_json,
    Dataset, Entity, Sentence,
};
use gridner_core::eval::evaluate;
use gridner_core::model::checkpoint::Checkpoint;
use gridner_core::model::{forward, init_params, ModelConfig, Vocab};
use gridner_core::trainer::{predict_entities, train, TrainConfig};
use gridner_core::triplet::{
    build_candidates, mine, select_source, FeatureSource, MiningConfig, MiningStrategy,
};

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "gridner",
    version,
    about = "Discontinuous NER via word-pair grid tagging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between the inline line-pair format and corpus JSON.
    Convert(ConvertArgs),
    /// Corpus statistics: entity counts, discontinuity, token gaps.
    Stats(StatsArgs),
    /// Train a model; writes checkpoint, history and manifest.
    Train(Box<TrainArgs>),
    /// Exact-match evaluation of predictions against gold annotations.
    Eval(EvalArgs),
    /// Decode entities for a corpus with a trained checkpoint.
    Predict(PredictArgs),
    /// Dump candidate sets and mined triplets for inspection.
    Mine(MineArgs),
}

#[derive(Clone, Copy)]
struct WindowOpt(Option<usize>);

fn parse_window(s: &str) -> Result<WindowOpt, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(WindowOpt(None));
    }
    match s.parse::<usize>() {
        Ok(0) => Err("window must be a positive integer or `none`".to_string()),
        Ok(w) => Ok(WindowOpt(Some(w))),
        Err(_) => Err(format!("`{s}` is not a positive integer or `none`")),
    }
}

fn parse_strategy(s: &str) -> Result<MiningStrategy, String> {
    s.parse()
}

fn parse_source(s: &str) -> Result<FeatureSource, String> {
    s.parse()
}

#[derive(Args)]
struct MiningFlags {
    /// Candidate window radius (Chebyshev) or `none`.
    #[arg(long, value_parser = parse_window)]
    window: Option<WindowOpt>,
    /// Triplet selection strategy: hn, sn, ce or nc.
    #[arg(long, value_parser = parse_strategy)]
    mining: Option<MiningStrategy>,
    /// Triplet margin.
    #[arg(long)]
    margin: Option<f64>,
    /// Feature source: hbi or logits.
    #[arg(long, value_parser = parse_source)]
    source: Option<FeatureSource>,
    /// Restrict anchor-positive pairs to the upper triangle.
    #[arg(long, action = clap::ArgAction::Set)]
    unique_pairs: Option<bool>,
}

impl MiningFlags {
    fn apply(&self, cfg: &mut MiningConfig) {
        if let Some(w) = self.window {
            cfg.window = w.0;
        }
        if let Some(s) = self.mining {
            cfg.strategy = s;
        }
        if let Some(m) = self.margin {
            cfg.margin = m;
        }
        if let Some(s) = self.source {
            cfg.source = s;
        }
        if let Some(u) = self.unique_pairs {
            cfg.unique_pairs = u;
        }
    }
}

#[derive(Args)]
struct ConvertArgs {
    /// Target format: json or inline.
    #[arg(long)]
    to: String,
    /// Input path (stdin when omitted).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Input path (stdin when omitted).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input format: auto, json or inline.
    #[arg(long, default_value = "auto")]
    format: String,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Train split (corpus JSON).
    #[arg(long)]
    train: PathBuf,
    /// Dev split (corpus JSON).
    #[arg(long)]
    dev: PathBuf,
    /// Optional JSON config file; CLI flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint output path.
    #[arg(long, default_value = "checkpoint.json")]
    checkpoint: PathBuf,
    /// Per-epoch history output (JSON lines); defaults next to the
    /// checkpoint.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Manifest output; defaults next to the checkpoint.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    early_stop: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    grad_clip: Option<f64>,
    /// Worker threads (1 guarantees bit-reproducibility; higher counts
    /// reduce in a fixed order and stay deterministic).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    d_embed: Option<usize>,
    #[arg(long)]
    d_context: Option<usize>,
    #[arg(long)]
    d_bi: Option<usize>,
    #[arg(long)]
    d_co: Option<usize>,
    #[arg(long)]
    conv_kernel: Option<usize>,
    #[command(flatten)]
    mining: MiningFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Predictions (corpus JSON, aligned with gold by position).
    #[arg(long)]
    pred: PathBuf,
    /// Gold annotations (corpus JSON).
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Input corpus JSON.
    #[arg(long)]
    input: PathBuf,
    /// Output corpus JSON (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Decoded entity length cap.
    #[arg(long)]
    max_entity_tokens: Option<usize>,
    /// Decoded entities-per-sentence cap.
    #[arg(long)]
    max_entities: Option<usize>,
}

#[derive(Args)]
struct MineArgs {
    /// Input corpus JSON.
    #[arg(long)]
    input: PathBuf,
    /// Feature checkpoint; a fresh seeded model is used when omitted.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    mining: MiningFlags,
}

enum Failure {
    Validation(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn validation(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit 2 on usage errors; the contract is 1
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Convert(args) => cmd_convert(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Train(args) => cmd_train(*args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Mine(args) => cmd_mine(args),
    }
}

fn read_input(path: &Option<PathBuf>) -> Result<String, Failure> {
    match path {
        Some(p) => Ok(std::fs::read_to_string(p)
            .map_err(|e| anyhow::anyhow!("reading {}: {e}", p.display()))?),
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(anyhow::Error::from)?;
            Ok(buf)
        }
    }
}

fn write_output(path: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", p.display()).into()),
        None => {
            println!("{}", content.trim_end_matches('\n'));
            Ok(())
        }
    }
}

/// Writes the manifest when a path was resolved, stamping the run's
/// inputs and outputs.
fn finish_manifest(
    manifest_path: Option<&Path>,
    mut manifest: RunManifest,
    inputs: &[&Path],
    outputs: &[Option<&Path>],
) -> Result<(), Failure> {
    let Some(path) = manifest_path else {
        return Ok(());
    };
    for input in inputs {
        manifest.stamp_input(input)?;
    }
    for output in outputs.iter().flatten() {
        manifest.stamp_output(output)?;
    }
    manifest.write(path)?;
    Ok(())
}

fn cmd_convert(args: ConvertArgs) -> Result<(), Failure> {
    let text = read_input(&args.input)?;
    let rendered = match args.to.as_str() {
        "json" => to_json(&parse_inline(&text)?)?,
        "inline" => to_inline(&from_json(&text)?),
        other => {
            return Err(validation(format!(
                "--to must be json or inline, got `{other}`"
            )))
        }
    };
    write_output(&args.output, &rendered)?;
    let manifest = RunManifest::new("convert", serde_json::json!({ "to": args.to }), None);
    let inputs: Vec<&Path> = args.input.iter().map(PathBuf::as_path).collect();
    finish_manifest(
        args.manifest.as_deref(),
        manifest,
        &inputs,
        &[args.output.as_deref()],
    )
}

fn sniff_sentences(text: &str, format: &str) -> Result<Vec<Sentence>, Failure> {
    let looks_json = text.trim_start().starts_with('[');
    match format {
        "json" => Ok(from_json(text)?),
        "inline" => Ok(parse_inline(text)?),
        "auto" if looks_json => Ok(from_json(text)?),
        "auto" => Ok(parse_inline(text)?),
        other => Err(validation(format!(
            "--format must be auto, json or inline, got `{other}`"
        ))),
    }
}

fn cmd_stats(args: StatsArgs) -> Result<(), Failure> {
    let text = read_input(&args.input)?;
    let sentences = sniff_sentences(&text, &args.format)?;
    let stats = compute_stats(&sentences);
    let rendered = serde_json::to_string_pretty(&stats).map_err(anyhow::Error::from)?;
    write_output(&args.output, &rendered)?;
    let manifest = RunManifest::new("stats", serde_json::json!({ "format": args.format }), None);
    let inputs: Vec<&Path> = args.input.iter().map(PathBuf::as_path).collect();
    finish_manifest(
        args.manifest.as_deref(),
        manifest,
        &inputs,
        &[args.output.as_deref()],
    )
}

/// Optional JSON config mirroring the train settings; unknown keys are
/// rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    learning_rate: Option<f64>,
    max_epochs: Option<usize>,
    early_stop_patience: Option<usize>,
    batch_size: Option<usize>,
    seed: Option<u64>,
    weight_decay: Option<f64>,
    grad_clip_norm: Option<f64>,
    threads: Option<usize>,
    mining: Option<FileMining>,
    decode: Option<FileDecode>,
    model: Option<FileModel>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMining {
    strategy: Option<String>,
    window: Option<serde_json::Value>,
    margin: Option<f64>,
    unique_pairs: Option<bool>,
    source: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDecode {
    max_entity_tokens: Option<usize>,
    max_entities_per_sentence: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileModel {
    d_embed: Option<usize>,
    d_context: Option<usize>,
    d_bi: Option<usize>,
    d_co: Option<usize>,
    conv_kernel: Option<usize>,
}

macro_rules! set_if_some {
    ($target:expr, $source:expr) => {
        if let Some(v) = $source {
            $target = v;
        }
    };
}

fn apply_file_config(
    cfg: &mut TrainConfig,
    model: &mut ModelConfig,
    file: &FileConfig,
) -> Result<(), Failure> {
    set_if_some!(cfg.learning_rate, file.learning_rate);
    set_if_some!(cfg.max_epochs, file.max_epochs);
    set_if_some!(cfg.early_stop_patience, file.early_stop_patience);
    set_if_some!(cfg.batch_size, file.batch_size);
    set_if_some!(cfg.seed, file.seed);
    set_if_some!(cfg.weight_decay, file.weight_decay);
    set_if_some!(cfg.threads, file.threads);
    if file.grad_clip_norm.is_some() {
        cfg.grad_clip_norm = file.grad_clip_norm;
    }
    if let Some(m) = &file.mining {
        if let Some(s) = &m.strategy {
            cfg.mining.strategy = s.parse().map_err(validation)?;
        }
        if let Some(w) = &m.window {
            cfg.mining.window = match w {
                serde_json::Value::Null => None,
                serde_json::Value::String(s) if s.eq_ignore_ascii_case("none") => None,
                serde_json::Value::Number(n) => match n.as_u64() {
                    Some(0) | None => {
                        return Err(validation(
                            "mining.window must be a positive integer or \"none\"",
                        ))
                    }
                    Some(v) => Some(v as usize),
                },
                _ => {
                    return Err(validation(
                        "mining.window must be a positive integer or \"none\"",
                    ))
                }
            };
        }
        set_if_some!(cfg.mining.margin, m.margin);
        set_if_some!(cfg.mining.unique_pairs, m.unique_pairs);
        if let Some(s) = &m.source {
            cfg.mining.source = s.parse().map_err(validation)?;
        }
    }
    if let Some(d) = &file.decode {
        set_if_some!(cfg.decode.max_entity_tokens, d.max_entity_tokens);
        set_if_some!(
            cfg.decode.max_entities_per_sentence,
            d.max_entities_per_sentence
        );
    }
    if let Some(m) = &file.model {
        set_if_some!(model.d_embed, m.d_embed);
        set_if_some!(model.d_context, m.d_context);
        set_if_some!(model.d_bi, m.d_bi);
        set_if_some!(model.d_co, m.d_co);
        set_if_some!(model.conv_kernel, m.conv_kernel);
    }
    Ok(())
}

fn load_split(path: &Path) -> Result<Vec<Sentence>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    Ok(from_json(&text)?)
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let mut cfg = TrainConfig::default();
    let mut model_cfg = ModelConfig::with_dims(0, 0, cfg.seed);

    if let Some(config_path) = &args.config {
        let text = std::fs::read_to_string(config_path)
            .map_err(|e| anyhow::anyhow!("reading {}: {e}", config_path.display()))?;
        let file: FileConfig =
            serde_json::from_str(&text).map_err(|e| validation(format!("config file: {e}")))?;
        apply_file_config(&mut cfg, &mut model_cfg, &file)?;
    }

    set_if_some!(cfg.learning_rate, args.lr);
    set_if_some!(cfg.max_epochs, args.epochs);
    set_if_some!(cfg.early_stop_patience, args.early_stop);
    set_if_some!(cfg.batch_size, args.batch_size);
    set_if_some!(cfg.seed, args.seed);
    set_if_some!(cfg.weight_decay, args.weight_decay);
    if args.grad_clip.is_some() {
        cfg.grad_clip_norm = args.grad_clip;
    }
    set_if_some!(cfg.threads, args.threads);
    args.mining.apply(&mut cfg.mining);
    set_if_some!(model_cfg.d_embed, args.d_embed);
    set_if_some!(model_cfg.d_context, args.d_context);
    set_if_some!(model_cfg.d_bi, args.d_bi);
    set_if_some!(model_cfg.d_co, args.d_co);
    set_if_some!(model_cfg.conv_kernel, args.conv_kernel);
    model_cfg.seed = cfg.seed;

    cfg.validate().map_err(|e| validation(e.to_string()))?;

    let train_split = load_split(&args.train)?;
    let dev_split = load_split(&args.dev)?;
    let name = args
        .train
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let dataset = Dataset::from_splits(name, vec![("train", train_split), ("dev", dev_split)])?;

    let outcome = train(&dataset, &model_cfg, &cfg)?;

    let checkpoint = Checkpoint::new(
        outcome.model_cfg.clone(),
        &outcome.vocab,
        outcome.labels.clone(),
        &outcome.params,
    );
    std::fs::write(&args.checkpoint, checkpoint.to_json()?)
        .map_err(|e| anyhow::anyhow!("writing {}: {e}", args.checkpoint.display()))?;

    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| args.checkpoint.with_extension("history.jsonl"));
    let mut lines = String::new();
    for record in &outcome.history.epochs {
        lines.push_str(&serde_json::to_string(record).map_err(anyhow::Error::from)?);
        lines.push('\n');
    }
    lines.push_str(
        &serde_json::to_string(&serde_json::json!({
            "best_epoch": outcome.history.best_epoch,
            "best_val_f1": outcome.history.best_val_f1,
            "initial_violation_rate": outcome.history.initial_violation_rate,
            "final_violation_rate": outcome.history.final_violation_rate,
        }))
        .map_err(anyhow::Error::from)?,
    );
    lines.push('\n');
    std::fs::write(&history_path, &lines)
        .map_err(|e| anyhow::anyhow!("writing {}: {e}", history_path.display()))?;

    let resolved = serde_json::json!({
        "train": cfg,
        "model": outcome.model_cfg,
        "best_epoch": outcome.history.best_epoch,
        "best_val_f1": outcome.history.best_val_f1,
    });
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.checkpoint.with_extension("manifest.json"));
    let manifest = RunManifest::new("train", resolved, Some(cfg.seed));
    let mut inputs: Vec<&Path> = vec![args.train.as_path(), args.dev.as_path()];
    if let Some(c) = &args.config {
        inputs.push(c.as_path());
    }
    finish_manifest(
        Some(&manifest_path),
        manifest,
        &inputs,
        &[
            Some(args.checkpoint.as_path()),
            Some(history_path.as_path()),
        ],
    )?;
    log::info!(
        "best epoch {} with dev micro-F1 {:.4}",
        outcome.history.best_epoch,
        outcome.history.best_val_f1
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let pred: Vec<Vec<Entity>> = load_split(&args.pred)?
        .into_iter()
        .map(|s| s.entities)
        .collect();
    let gold: Vec<Vec<Entity>> = load_split(&args.gold)?
        .into_iter()
        .map(|s| s.entities)
        .collect();
    let report = evaluate(&pred, &gold)?;
    let rendered = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    write_output(&args.output, &rendered)?;
    let manifest = RunManifest::new(
        "eval",
        serde_json::to_value(&report).map_err(anyhow::Error::from)?,
        None,
    );
    finish_manifest(
        args.manifest.as_deref(),
        manifest,
        &[args.pred.as_path(), args.gold.as_path()],
        &[args.output.as_deref()],
    )
}

type CheckpointParts = (ModelConfig, Vocab, Vec<String>, gridner_core::Parameters);

fn load_checkpoint(path: &Path) -> Result<CheckpointParts, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    Ok(Checkpoint::from_json(&text)?.into_parts()?)
}

fn cmd_predict(args: PredictArgs) -> Result<(), Failure> {
    let (model_cfg, vocab, labels, params) = load_checkpoint(&args.checkpoint)?;
    let sentences = load_split(&args.input)?;
    let mut decode_cfg = gridner_core::DecodeConfig::default();
    if let Some(v) = args.max_entity_tokens {
        decode_cfg.max_entity_tokens = v;
    }
    if let Some(v) = args.max_entities {
        decode_cfg.max_entities_per_sentence = v;
    }
    let predictions = predict_entities(
        &params,
        &model_cfg,
        &vocab,
        &labels,
        &decode_cfg,
        &sentences,
    )?;
    let predicted: Vec<Sentence> = sentences
        .iter()
        .zip(predictions)
        .map(|(s, entities)| Sentence::new(s.tokens.clone(), entities))
        .collect::<Result<_, _>>()?;
    let rendered = to_json(&predicted)?;
    write_output(&args.output, &rendered)?;
    let manifest_path = args.manifest.clone().or_else(|| {
        args.output
            .as_ref()
            .map(|o| o.with_extension("manifest.json"))
    });
    let manifest = RunManifest::new(
        "predict",
        serde_json::json!({ "decode": decode_cfg, "model": model_cfg }),
        None,
    );
    finish_manifest(
        manifest_path.as_deref(),
        manifest,
        &[args.checkpoint.as_path(), args.input.as_path()],
        &[args.output.as_deref()],
    )
}

fn cmd_mine(args: MineArgs) -> Result<(), Failure> {
    let mut mining = MiningConfig::default();
    args.mining.apply(&mut mining);
    mining.validate().map_err(|e| validation(e.to_string()))?;

    let sentences = load_split(&args.input)?;
    let (model_cfg, vocab, _labels, params) = match &args.checkpoint {
        Some(path) => load_checkpoint(path)?,
        None => {
            // fresh seeded model over the input's own vocabulary
            let vocab = Vocab::from_tokens(collect_vocab(&sentences));
            let labels = collect_labels(&sentences);
            let model_cfg = ModelConfig::with_dims(
                vocab.size(),
                2 + labels.len().max(1),
                args.seed.unwrap_or(42),
            );
            let params = init_params(&model_cfg)?;
            (model_cfg, vocab, labels, params)
        }
    };

    let mut dump = Vec::new();
    for (index, sentence) in sentences.iter().enumerate() {
        let candidates = build_candidates(sentence, mining.window, mining.unique_pairs);
        let token_ids = vocab.encode(&sentence.tokens)?;
        let trace = forward(&params, &model_cfg, &token_ids)?;
        let features = select_source(&trace, mining.source);
        let triplets = mine(&candidates, features, &mining)?;

        let sets: Vec<serde_json::Value> = candidates
            .iter()
            .map(|set| {
                let mined: Vec<serde_json::Value> = triplets
                    .iter()
                    .filter(|t| t.anchor.cells.as_slice() == [set.anchor])
                    .map(|t| {
                        serde_json::json!({
                            "positive": t.positive.cells,
                            "negative": t.negative.cells,
                        })
                    })
                    .collect();
                serde_json::json!({
                    "anchor": set.anchor,
                    "positives": set.positives,
                    "negatives": set.negatives,
                    "mined": mined,
                })
            })
            .collect();
        dump.push(serde_json::json!({ "sentence_index": index, "candidates": sets }));
    }
    let rendered = serde_json::to_string_pretty(&dump).map_err(anyhow::Error::from)?;
    write_output(&args.output, &rendered)?;
    let manifest = RunManifest::new(
        "mine",
        serde_json::json!({ "mining": mining, "checkpoint": args.checkpoint.is_some() }),
        args.seed,
    );
    finish_manifest(
        args.manifest.as_deref(),
        manifest,
        &[args.input.as_path()],
        &[args.output.as_deref()],
    )
}
