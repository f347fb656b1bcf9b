//! `mcqa-carto`: synthesize, score, diagnose and refine multiple-choice QA
//! datasets from the command line.
//!
//! Exit codes: 0 success, 2 malformed input or invalid configuration,
//! 3 incomplete checkpoint coverage, 1 anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde_json::{json, Value};

use mcqa_cartography::config::{ConfigError, PipelineConfig};
use mcqa_cartography::dynamics::{aggregate_dynamics, confidence_gap_density, DynamicsError};
use mcqa_cartography::format::{self, FileKind, FormatError, Ingestion};
use mcqa_cartography::report;
use mcqa_cartography::scorer::{evaluate_accuracy, train_toy_model, MarginSign, ScoreError, ToyModel};
use mcqa_cartography::selection::{apply_selection, preset, preset_names, RegionChoice, SelectionError};
use mcqa_cartography::synthesis::{build_dataset, SynthesisError, TemplateRegistry};

#[derive(Parser)]
#[command(name = "mcqa-carto", version, about = "Training-dynamics diagnostics for multiple-choice QA datasets")]
struct Cli {
    /// TOML pipeline config; flags override its keys.
    #[arg(long, global = true, env = "MCQA_CARTO_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build QA pairs from knowledge triples.
    Synth(SynthArgs),
    /// Train the built-in unigram scorer and write a checkpoint score log.
    TrainToy(TrainArgs),
    /// Aggregate a score log into per-pair confidence records.
    Dynamics(DynamicsArgs),
    /// Refine a dataset with Difficult Choice, pair removal and regions.
    Select(SelectArgs),
    /// Write data-map and confidence-gap tables (and optionally an SVG).
    Report(ReportArgs),
    /// Check a file against its record schema.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    triples: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Relation templates (TOML); built-in set when omitted.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    options: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Score log destination.
    #[arg(long)]
    out: PathBuf,
    /// Also save the final model as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    smoothing: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_margin_sign)]
    margin_sign: Option<MarginSign>,
}

#[derive(Args)]
struct DynamicsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Data-map CSV (pair id, mean, std, region).
    #[arg(long)]
    data_map: Option<PathBuf>,
    #[arg(long)]
    region_fraction: Option<f64>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    dynamics: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Named configuration; see `--list-presets`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    list_presets: bool,
    /// JSON report destination; the table always goes to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    mislabeled_threshold: Option<f64>,
    #[arg(long)]
    false_negative_threshold: Option<f64>,
    #[arg(long, value_parser = parse_region)]
    region: Option<RegionChoice>,
    #[arg(long)]
    region_fraction: Option<f64>,
    #[arg(long)]
    difficult_choice: bool,
    #[arg(long)]
    mislabeled: bool,
    #[arg(long)]
    false_negative: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dynamics: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    region_fraction: Option<f64>,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct ValidateArgs {
    file: PathBuf,
    /// dataset, score-log, triples or dynamics; detected when omitted.
    #[arg(long)]
    kind: Option<FileKind>,
    /// Check a score log against this dataset's pairs and arities.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// With --dataset: list coverage gaps instead of stopping at them.
    #[arg(long)]
    lenient: bool,
}

fn parse_margin_sign(s: &str) -> Result<MarginSign, String> {
    match s {
        "answer-below" => Ok(MarginSign::AnswerBelow),
        "answer-above" => Ok(MarginSign::AnswerAbove),
        _ => Err(format!("expected answer-below or answer-above, got '{s}'")),
    }
}

fn parse_region(s: &str) -> Result<RegionChoice, String> {
    match s {
        "none" => Ok(RegionChoice::None),
        "easy" | "easy-to-learn" => Ok(RegionChoice::Easy),
        "ambiguous" => Ok(RegionChoice::Ambiguous),
        "hard" | "hard-to-learn" => Ok(RegionChoice::Hard),
        _ => Err(format!("unknown region '{s}'")),
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(PipelineConfig::load(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn provenance(command: &str, section: &impl serde::Serialize) -> Value {
    json!({ "command": command, "config": section })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn synth(cfg: &mut PipelineConfig, args: SynthArgs) -> Result<()> {
    let s = &mut cfg.synthesis;
    if let Some(m) = args.options {
        s.options = m;
    }
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    let registry = match &args.templates {
        Some(p) => TemplateRegistry::load(p)?,
        None => TemplateRegistry::default(),
    };
    cfg.validate()?;
    let s = &cfg.synthesis;
    let triples = format::read_triples(&args.triples)?;
    if triples.is_empty() {
        warn!("{} holds no triples; writing an empty dataset", args.triples.display());
    }
    let outcome = build_dataset(&triples, &registry, s)?;
    for skip in &outcome.skipped {
        warn!("triple {} ({}) skipped: {}", skip.index, skip.source_id, skip.error);
    }
    let mut dataset = outcome.dataset;
    dataset.meta.config = Some(provenance("synth", s));
    format::write_dataset(&args.out, &dataset)?;
    info!("{} pairs from {} triples", dataset.len(), triples.len());
    println!("pairs: {}, skipped: {}", dataset.len(), outcome.skipped.len());
    Ok(())
}

fn train_toy(cfg: &mut PipelineConfig, args: TrainArgs) -> Result<()> {
    let t = &mut cfg.train;
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.margin {
        t.margin = v;
    }
    if let Some(v) = args.smoothing {
        t.smoothing = v;
    }
    if let Some(v) = args.seed {
        t.seed = v;
    }
    if let Some(v) = args.margin_sign {
        t.margin_sign = v;
    }
    cfg.validate()?;
    let t = &cfg.train;
    let dataset = format::read_dataset(&args.dataset)?;
    let model = ToyModel::from_dataset(&dataset, t.smoothing, t.learning_rate);
    let outcome = train_toy_model(&dataset, &t.run(), model)?;
    let meta = provenance("train-toy", t);
    format::write_score_log(&args.out, &outcome.checkpoints, Some(&meta))?;
    if let Some(path) = &args.model_out {
        let text = serde_json::to_string_pretty(&outcome.model)?;
        write_text(path, &(text + "\n"))?;
    }
    for (m, loss) in outcome.checkpoints.iter().zip(&outcome.epoch_loss) {
        let acc = evaluate_accuracy(m, &dataset)?;
        println!("checkpoint {}: loss {loss:.6} accuracy {acc:.4}", m.checkpoint);
    }
    Ok(())
}

fn dynamics(cfg: &mut PipelineConfig, args: DynamicsArgs) -> Result<()> {
    if let Some(f) = args.region_fraction {
        cfg.report.region_fraction = f;
    }
    cfg.validate()?;
    let dataset = format::read_dataset(&args.dataset)?;
    let matrices = format::read_score_log(&args.scores, &dataset)?;
    let records = aggregate_dynamics(&matrices, &dataset)?;
    let meta = json!({ "command": "dynamics", "checkpoints": matrices.len() });
    format::write_dynamics(&args.out, &records, Some(&meta))?;
    if let Some(path) = &args.data_map {
        write_text(path, &report::data_map_csv(&records, cfg.report.region_fraction)?)?;
    }
    let fallback = records.iter().filter(|r| r.softmax_fallback).count();
    if fallback > 0 {
        warn!("{fallback} two-option pairs scored with the softmax baseline");
    }
    println!("records: {}, checkpoints: {}", records.len(), matrices.len());
    Ok(())
}

fn select(cfg: &mut PipelineConfig, args: SelectArgs) -> Result<()> {
    if args.list_presets {
        for name in preset_names() {
            println!("{name}");
        }
        return Ok(());
    }
    let s = &mut cfg.selection;
    if let Some(name) = &args.preset {
        let p = preset(name)?;
        s.region = p.region;
        s.region_fraction = p.region_fraction;
        s.difficult_choice = p.difficult_choice;
        s.mislabeled = p.mislabeled;
        s.false_negative = p.false_negative;
    }
    if let Some(v) = args.mislabeled_threshold {
        s.mislabeled_threshold = v;
    }
    if let Some(v) = args.false_negative_threshold {
        s.false_negative_threshold = v;
    }
    if let Some(v) = args.region {
        s.region = v;
    }
    if let Some(v) = args.region_fraction {
        s.region_fraction = v;
    }
    s.difficult_choice |= args.difficult_choice;
    s.mislabeled |= args.mislabeled;
    s.false_negative |= args.false_negative;

    cfg.validate()?;
    let s = &cfg.selection;
    let dataset = format::read_dataset(&args.dataset)?;
    let records = format::read_dynamics(&args.dynamics)?;
    let (mut refined, rep) = apply_selection(&dataset, &records, s)?;
    refined.meta.config = Some(provenance("select", s));
    format::write_dataset(&args.out, &refined)?;
    if let Some(path) = &args.report {
        write_text(path, &(serde_json::to_string_pretty(&rep)? + "\n"))?;
    }
    print!("{}", rep.table());
    Ok(())
}

fn report_cmd(cfg: &mut PipelineConfig, args: ReportArgs) -> Result<()> {
    let r = &mut cfg.report;
    if let Some(b) = args.bins {
        r.bins = b;
    }
    if let Some(f) = args.region_fraction {
        r.region_fraction = f;
    }
    cfg.validate()?;
    let records = format::read_dynamics(&args.dynamics)?;
    let density = confidence_gap_density(&records, cfg.report.bins)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    write_text(&args.out_dir.join("data_map.csv"), &report::data_map_csv(&records, cfg.report.region_fraction)?)?;
    write_text(&args.out_dir.join("gap_histogram.csv"), &report::histogram_csv(&density))?;
    if args.svg {
        write_text(&args.out_dir.join("gap_histogram.svg"), &report::histogram_svg(&density))?;
    }
    let (pairwise, softmax) = mcqa_cartography::dynamics::confidence_gaps(&records);
    println!(
        "pairs: {}, gaps: {}, |gap| <= 0.25 mass: pairwise {:.4} softmax {:.4}",
        records.len(),
        density.samples,
        mcqa_cartography::dynamics::band_mass(&pairwise, 0.25),
        mcqa_cartography::dynamics::band_mass(&softmax, 0.25)
    );
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    if let Some(ds_path) = &args.dataset {
        let dataset = format::read_dataset(ds_path)?;
        let mode = if args.lenient { Ingestion::Lenient } else { Ingestion::Strict };
        let log = format::read_score_log_with(&args.file, &dataset, mode)?;
        println!(
            "score-log: {} checkpoints, {} pairs",
            log.matrices.len(),
            dataset.len()
        );
        if !log.is_complete() {
            for c in &log.missing_checkpoints {
                println!("missing checkpoint {c}");
            }
            for (p, c) in &log.missing {
                println!("missing {p} at checkpoint {c}");
            }
            return Err(FormatError::IncompleteCoverage { missing: log.missing }.into());
        }
        return Ok(());
    }
    let summary = format::validate_file(&args.file, args.kind)?;
    match summary.checkpoints {
        Some(c) => println!("{}: {} records, {} checkpoints", summary.kind, summary.records, c),
        None => println!("{}: {} records", summary.kind, summary.records),
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<FormatError>() {
            return match e {
                _ if e.is_coverage() => 3,
                FormatError::Io { .. } => 1,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<DynamicsError>() {
            return match e {
                DynamicsError::Incomplete { .. } | DynamicsError::EmptySeries => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<SelectionError>() {
            return match e {
                SelectionError::Coverage { .. } => 3,
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<ConfigError>() {
            return match e {
                ConfigError::Io { .. } => 1,
                _ => 2,
            };
        }
        if cause.is::<ScoreError>() || cause.is::<SynthesisError>() {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => synth(&mut cfg, a),
        Command::TrainToy(a) => train_toy(&mut cfg, a),
        Command::Dynamics(a) => dynamics(&mut cfg, a),
        Command::Select(a) => select(&mut cfg, a),
        Command::Report(a) => report_cmd(&mut cfg, a),
        Command::Validate(a) => validate(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
