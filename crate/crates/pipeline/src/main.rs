use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use medcurate::eval::{
    bench_tabulate, corpus_stats, distortion_report, draw_qa_sample, kappa_matrix, pairwise_tally,
    qa_gate, QaSample, RaterLabels, RatingKind, RatingRecord, RatingValue,
};
use medcurate::manifest::{read_jsonl, read_manifest, to_canonical_line, write_atomic, write_jsonl, write_manifest};
use medcurate::synthetic::video_corpus;
use medcurate::{ClipRecord, PipelineConfig, Stage, VideoRecord};
use medcurate_pipeline::adapters::AdapterChoice;
use medcurate_pipeline::review::{self, store::Session, AppState, Store};
use medcurate_pipeline::stages::{
    caption_stage, filter_stage, relevance_stage, resolution_stage, segment_stage, StageError,
    StageOutput,
};
use medcurate_pipeline::{run_pipeline, RunError, RunOptions, Workspace};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "medcurate", version, about = "Medical video corpus curation and evaluation")]
struct Cli {
    /// Pipeline config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `workspace_dir` from the config.
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,
    /// Precomputed frame analyses (JSONL) for the classifier and embedder roles.
    #[arg(long, global = true)]
    precomputed_frames: Option<PathBuf>,
    /// Precomputed clip scores (JSONL) for the OCR, aesthetic, technical and border roles.
    #[arg(long, global = true)]
    precomputed_clips: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a video manifest (or generate a synthetic one) into the workspace.
    Ingest {
        #[arg(long, conflicts_with = "synthetic")]
        videos: Option<PathBuf>,
        /// Generate this many synthetic videos instead.
        #[arg(long)]
        synthetic: Option<usize>,
    },
    /// Keyword + classifier gating with channel expansion.
    GateRelevance(StageIo),
    /// Split videos into clips.
    Segment(StageIo),
    /// Run one filter stage (resolution, border, ocr, aesthetic, technical, joint).
    Filter {
        stage: Stage,
        #[command(flatten)]
        io: StageIo,
    },
    /// Generate detailed and brief captions.
    Caption {
        #[command(flatten)]
        io: StageIo,
        /// Video manifest holding the clips' parent videos.
        #[arg(long)]
        videos: PathBuf,
    },
    /// Per-stage QA sampling and gating.
    #[command(subcommand)]
    Qa(QaCommand),
    /// Distribution report over a clip manifest.
    Stats {
        #[arg(long)]
        clips: PathBuf,
        #[arg(long)]
        videos: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluation protocols.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run the full stage DAG in the workspace, resuming from checkpoints.
    Run {
        /// Video manifest; defaults to the ingested one.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        stop_after: Option<Stage>,
        /// Ignore existing checkpoints.
        #[arg(long)]
        fresh: bool,
    },
    /// Serve the review API.
    ServeReview {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Clip manifest for resolving clip media; defaults to the final run manifest.
        #[arg(long)]
        clips: Option<PathBuf>,
        /// Video manifest for resolving clip media; defaults to the ingested one.
        #[arg(long)]
        videos: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StageIo {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Defaults to `<output>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum QaCommand {
    /// Draw the QA sample for a stage's output manifest.
    Sample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        stage: Stage,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Gate a sample against stage-QA ratings; exits 2 when the gate fails.
    Gate {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        ratings: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Pairwise Cohen's kappa between raters of one rating kind.
    Kappa {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: RatingKind,
        #[arg(long)]
        session: Option<String>,
    },
    /// Three-rater distortion verdicts and the warping error.
    Distortion {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        session: Option<String>,
    },
    /// Blinded pairwise tally, resolved through a stored session.
    Pairwise {
        #[arg(long)]
        ratings: PathBuf,
        /// Session file holding the blinding map.
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Benchmark-dimension table from a JSON map model -> dimension -> score.
    Bench {
        #[arg(long)]
        scores: PathBuf,
        /// JSON map dimension -> weight; adds a total column.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> Result<RatingKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown rating kind `{s}` (stage_qa, distortion, pairwise)"))
}

/// A run that reached a stage and could not finish it, or a failed gate.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct StageFailure(String);

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", render_error(&err));
            let stage_failure = err.downcast_ref::<StageFailure>().is_some()
                || err.downcast_ref::<StageError>().is_some()
                || err
                    .downcast_ref::<RunError>()
                    .is_some_and(|e| e.exit_code() == 2);
            ExitCode::from(if stage_failure { 2 } else { 1 })
        }
    }
}

struct Env {
    config: PipelineConfig,
    workspace: Workspace,
    adapters: AdapterChoice,
}

fn load_context(cli: &Cli) -> Result<Env> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let root = cli
        .workspace
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.workspace_dir));
    let adapters = AdapterChoice {
        seed: config.seed,
        frames: cli.precomputed_frames.clone(),
        clip_scores: cli.precomputed_clips.clone(),
    };
    Ok(Env {
        config,
        workspace: Workspace::new(root),
        adapters,
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut line = to_canonical_line(value)?;
    line.push('\n');
    write_atomic(path, line.as_bytes())?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn emit<R, E>(io: &StageIo, out: StageOutput<R, E>) -> Result<()>
where
    R: medcurate::ManifestRecord,
    E: Serialize,
{
    write_manifest(&out.records, &io.output)?;
    write_jsonl(with_suffix(&io.output, ".errors.jsonl"), &out.errors)?;
    let report_path = io
        .report
        .clone()
        .unwrap_or_else(|| with_suffix(&io.output, ".report.json"));
    write_json(&report_path, &out.report)?;
    print_json(&out.report)
}

fn execute(cli: Cli) -> Result<()> {
    let ctx = load_context(&cli)?;
    let cfg = &ctx.config;
    match cli.command {
        Command::Ingest { videos, synthetic } => {
            let records: Vec<VideoRecord> = match (videos, synthetic) {
                (Some(path), None) => read_manifest(&path)?,
                (None, Some(n)) => video_corpus(cfg.seed, n),
                _ => bail!("pass either --videos or --synthetic"),
            };
            let dest = ctx.workspace.input_videos();
            let n = write_manifest(&records, &dest)?;
            println!("ingested {n} videos into {}", dest.display());
        }
        Command::GateRelevance(io) => {
            let (scorers, _) = ctx.adapters.build()?;
            let videos: Vec<VideoRecord> = read_manifest(&io.input)?;
            emit(&io, relevance_stage(&videos, cfg, &scorers)?)?;
        }
        Command::Segment(io) => {
            let (scorers, _) = ctx.adapters.build()?;
            let videos: Vec<VideoRecord> = read_manifest(&io.input)?;
            emit(&io, segment_stage(&videos, cfg, &scorers)?)?;
        }
        Command::Filter { stage, io } => {
            let clips: Vec<ClipRecord> = read_manifest(&io.input)?;
            let out = match stage {
                Stage::Resolution => resolution_stage(clips, cfg),
                s if s.is_filter() => {
                    let (scorers, _) = ctx.adapters.build()?;
                    filter_stage(clips, s, cfg, &scorers)?
                }
                other => bail!("`{other}` is not a filter stage"),
            };
            emit(&io, out)?;
        }
        Command::Caption { io, videos } => {
            let (scorers, _) = ctx.adapters.build()?;
            let clips: Vec<ClipRecord> = read_manifest(&io.input)?;
            let videos: Vec<VideoRecord> = read_manifest(&videos)?;
            emit(&io, caption_stage(clips, &videos, cfg, &scorers)?)?;
        }
        Command::Qa(QaCommand::Sample { input, stage, output }) => {
            let population = active_ids(&input)?;
            let sample = draw_qa_sample(&population, stage.as_str(), cfg.qa.sample_size, cfg.seed)?;
            match output {
                Some(path) => write_json(&path, &sample)?,
                None => print_json(&sample)?,
            }
        }
        Command::Qa(QaCommand::Gate { sample, ratings }) => {
            let sample: QaSample = serde_json::from_str(
                &std::fs::read_to_string(&sample).with_context(|| sample.display().to_string())?,
            )?;
            let ratings: Vec<RatingRecord> = read_jsonl(&ratings)?;
            let result = qa_gate(&sample, &ratings, &cfg.qa)?;
            print_json(&result)?;
            if !result.passed {
                return Err(StageFailure(format!(
                    "QA gate for {} failed: pass rate {:.3} below {}",
                    result.stage, result.pass_rate, cfg.qa.min_pass_rate
                ))
                .into());
            }
        }
        Command::Stats { clips, videos, output } => {
            let clips: Vec<ClipRecord> = read_manifest(&clips)?;
            let videos: Vec<VideoRecord> = read_manifest(&videos)?;
            let report = corpus_stats(&clips, &videos, &cfg.stats)?;
            if let Some(path) = output {
                write_json(&path, &report)?;
            }
            print_json(&report)?;
        }
        Command::Eval(cmd) => eval(cmd)?,
        Command::Run { input, stop_after, fresh } => {
            let (scorers, adapter_id) = ctx.adapters.build()?;
            let input = input.unwrap_or_else(|| ctx.workspace.input_videos());
            let opts = RunOptions {
                config: ctx.config.clone(),
                workspace: ctx.workspace.clone(),
                input,
                scorers,
                adapter_id,
                stop_after,
                fresh,
            };
            let (summary, runs) = run_pipeline(&opts)?;
            for run in &runs {
                let r = &run.report;
                println!(
                    "{:<11} input {:>6}  removed {:>6}  retained {:>6}  errored {:>4}  output {:>6}{}",
                    r.stage.as_str(),
                    r.input_count,
                    r.removed,
                    r.retained,
                    r.errored,
                    r.output_count,
                    if run.resumed { "  (checkpoint)" } else { "" }
                );
            }
            println!(
                "{} -> {}",
                if summary.complete { "complete" } else { "stopped" },
                summary.final_manifest
            );
        }
        Command::ServeReview { addr, clips, videos } => {
            let clips_path = clips.unwrap_or_else(|| ctx.workspace.final_manifest(cfg));
            let videos_path = videos.unwrap_or_else(|| ctx.workspace.input_videos());
            let clips: Vec<ClipRecord> = if clips_path.exists() {
                read_manifest(&clips_path)?
            } else {
                Vec::new()
            };
            let videos: Vec<VideoRecord> = if videos_path.exists() {
                read_manifest(&videos_path)?
            } else {
                Vec::new()
            };
            let store = Store::open(ctx.workspace.review_dir())?;
            let state = AppState::new(
                store,
                ctx.workspace.root(),
                review::clip_media_index(&clips, &videos),
                cfg.qa.clone(),
            );
            tokio::runtime::Runtime::new()?.block_on(review::serve(addr, state))?;
        }
    }
    Ok(())
}

fn active_ids(path: &Path) -> Result<Vec<String>> {
    // Stage manifests hold either videos or clips.
    if let Ok(clips) = read_manifest::<ClipRecord>(path) {
        return Ok(clips
            .into_iter()
            .filter(|c| c.is_active())
            .map(|c| c.clip_id)
            .collect());
    }
    let videos: Vec<VideoRecord> = read_manifest(path)?;
    Ok(videos.into_iter().map(|v| v.video_id).collect())
}

fn filter_ratings(path: &Path, kind: RatingKind, session: Option<&str>) -> Result<Vec<RatingRecord>> {
    let ratings: Vec<RatingRecord> = read_jsonl(path)?;
    Ok(ratings
        .into_iter()
        .filter(|r| r.value.kind() == kind && session.is_none_or(|s| r.session_id == s))
        .collect())
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    serde_json::from_str(&text).with_context(|| path.display().to_string())
}

fn eval(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Kappa { ratings, kind, session } => {
            if kind == RatingKind::Pairwise {
                bail!("kappa over pairwise choices is computed per dimension; use stage_qa or distortion");
            }
            let ratings = filter_ratings(&ratings, kind, session.as_deref())?;
            let mut by_rater: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
            for r in ratings {
                let label = match r.value {
                    RatingValue::StageQa { value } => serde_json::to_string(&value)?,
                    RatingValue::Distortion { value } => serde_json::to_string(&value)?,
                    RatingValue::Pairwise { .. } => unreachable!("filtered by kind"),
                };
                by_rater.entry(r.rater_id).or_default().insert(r.item_id, label);
            }
            let raters: Vec<RaterLabels<String>> = by_rater
                .into_iter()
                .map(|(rater_id, labels)| RaterLabels { rater_id, labels })
                .collect();
            print_json(&kappa_matrix(&raters)?)?;
        }
        EvalCommand::Distortion { ratings, session } => {
            let ratings = filter_ratings(&ratings, RatingKind::Distortion, session.as_deref())?;
            let mut items: Vec<String> = ratings.iter().map(|r| r.item_id.clone()).collect();
            items.sort();
            items.dedup();
            let report = distortion_report(&items, &ratings)?;
            print_json(&report)?;
            if let Some(we) = report.warping_error {
                eprintln!("warping error: {we}");
            }
        }
        EvalCommand::Pairwise { ratings, session, csv } => {
            let session: Session = read_json_file(&session)?;
            let map = session
                .blinding
                .as_ref()
                .context("session has no blinding map (not a pairwise session)")?;
            let ratings = filter_ratings(&ratings, RatingKind::Pairwise, Some(&session.session_id))?;
            let tally = pairwise_tally(&ratings, map)?;
            if let Some(path) = csv {
                write_atomic(&path, tally.to_csv()?.as_bytes())?;
            }
            print_json(&tally)?;
        }
        EvalCommand::Bench { scores, weights, csv } => {
            let scores: BTreeMap<String, BTreeMap<String, f64>> = read_json_file(&scores)?;
            let weights: Option<BTreeMap<String, f64>> =
                weights.map(|p| read_json_file(&p)).transpose()?;
            let table = bench_tabulate(&scores, weights.as_ref())?;
            if let Some(path) = csv {
                write_atomic(&path, table.to_csv()?.as_bytes())?;
            }
            print_json(&table)?;
        }
    }
    Ok(())
}

/// Error chain joined with `: `, skipping causes whose text an outer
/// message already embeds.
fn render_error(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}
