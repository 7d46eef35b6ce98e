//! Full-DAG execution with per-stage checkpoints in a workspace directory.
//!
//! Stage `N` writes `stages/NN_<stage>.jsonl` (records), `.report.json`,
//! `.errors.jsonl` and finally `.checkpoint.json`. The checkpoint carries a
//! key chained from the input manifest, the adapter identity and every
//! upstream stage's config fingerprint; a later run skips a stage only when
//! its key matches and no earlier stage had to run.

use std::fs;
use std::path::{Path, PathBuf};

use medcurate::adapters::Scorers;
use medcurate::eval::{draw_qa_sample, EvalError};
use medcurate::fingerprint::fingerprint;
use medcurate::manifest::{
    read_jsonl, read_manifest, to_canonical_line, write_atomic, write_jsonl, write_manifest,
    ManifestError, ManifestRecord,
};
use medcurate::{ClipRecord, ConfigError, PipelineConfig, Stage, StageReport, VideoRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stages::{
    caption_stage, filter_stage, relevance_stage, resolution_stage, segment_stage, StageError,
    StageOutput,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// 2 for a stage that could not complete, 1 for invalid input or config.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Stage(_) => 2,
            _ => 1,
        }
    }
}

/// Execution order for a config: relevance, segment, resolution, the filters
/// in configured order, caption.
pub fn stage_order(cfg: &PipelineConfig) -> Vec<Stage> {
    let mut order = vec![Stage::Relevance, Stage::Segment, Stage::Resolution];
    order.extend(cfg.filter.stage_order.iter().copied());
    order.push(Stage::Caption);
    order
}

/// File locations inside a workspace.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn input_videos(&self) -> PathBuf {
        self.root.join("input").join("videos.jsonl")
    }

    pub fn stage_stem(position: usize, stage: Stage) -> String {
        format!("{:02}_{}", position + 1, stage.as_str())
    }

    fn stage_file(&self, position: usize, stage: Stage, suffix: &str) -> PathBuf {
        self.root
            .join("stages")
            .join(format!("{}{suffix}", Self::stage_stem(position, stage)))
    }

    pub fn manifest(&self, position: usize, stage: Stage) -> PathBuf {
        self.stage_file(position, stage, ".jsonl")
    }

    pub fn report(&self, position: usize, stage: Stage) -> PathBuf {
        self.stage_file(position, stage, ".report.json")
    }

    pub fn errors(&self, position: usize, stage: Stage) -> PathBuf {
        self.stage_file(position, stage, ".errors.jsonl")
    }

    pub fn checkpoint(&self, position: usize, stage: Stage) -> PathBuf {
        self.stage_file(position, stage, ".checkpoint.json")
    }

    pub fn qa_sample(&self, position: usize, stage: Stage) -> PathBuf {
        self.root
            .join("qa")
            .join(format!("{}.sample.json", Self::stage_stem(position, stage)))
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("run.json")
    }

    pub fn review_dir(&self) -> PathBuf {
        self.root.join("review")
    }

    /// Manifest of the last stage of a completed run.
    pub fn final_manifest(&self, cfg: &PipelineConfig) -> PathBuf {
        let order = stage_order(cfg);
        self.manifest(order.len() - 1, Stage::Caption)
    }
}

pub struct RunOptions {
    pub config: PipelineConfig,
    pub workspace: Workspace,
    pub input: PathBuf,
    pub scorers: Scorers,
    /// Identifies the adapter set in checkpoint keys.
    pub adapter_id: String,
    pub stop_after: Option<Stage>,
    /// Ignore existing checkpoints.
    pub fresh: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub stage: Stage,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRun {
    pub report: StageReport,
    pub resumed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_fingerprint: String,
    pub reports: Vec<StageReport>,
    /// Manifest of the last stage executed, relative to the workspace.
    pub final_manifest: String,
    pub complete: bool,
}

struct Runner<'a> {
    opts: &'a RunOptions,
    key: String,
    must_run: bool,
    runs: Vec<StageRun>,
    last_manifest: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut line = to_canonical_line(value).map_err(|e| ManifestError::Unserializable {
        id: path.display().to_string(),
        reason: e.to_string(),
    })?;
    line.push('\n');
    write_atomic(path, line.as_bytes())?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Option<T> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn remove_if_present(path: &Path) -> Result<(), RunError> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io_err(path)(e)),
        _ => Ok(()),
    }
}

trait Keyed {
    fn key(&self) -> &str;
    fn active(&self) -> bool;
}

impl Keyed for VideoRecord {
    fn key(&self) -> &str {
        &self.video_id
    }
    fn active(&self) -> bool {
        true
    }
}

impl Keyed for ClipRecord {
    fn key(&self) -> &str {
        &self.clip_id
    }
    fn active(&self) -> bool {
        self.is_active()
    }
}

impl Runner<'_> {
    fn cfg(&self) -> &PipelineConfig {
        &self.opts.config
    }

    fn ws(&self) -> &Workspace {
        &self.opts.workspace
    }

    /// Runs or resumes one stage and returns its records.
    fn step<R, E>(
        &mut self,
        position: usize,
        stage: Stage,
        run: impl FnOnce() -> Result<StageOutput<R, E>, StageError>,
    ) -> Result<Vec<R>, RunError>
    where
        R: ManifestRecord + Keyed,
        E: Serialize,
    {
        self.key = fingerprint(&serde_json::json!({
            "upstream": self.key,
            "position": position,
            "stage": self.cfg().stage_fingerprint(stage),
        }));
        let ws = self.ws().clone();
        let manifest = ws.manifest(position, stage);
        let checkpoint_path = ws.checkpoint(position, stage);
        self.last_manifest = manifest.clone();

        if !self.must_run {
            let checkpoint: Option<Checkpoint> = read_json(&checkpoint_path);
            let report: Option<StageReport> = read_json(&ws.report(position, stage));
            if let (Some(cp), Some(report)) = (checkpoint, report) {
                if cp.key == self.key && cp.stage == stage {
                    if let Ok(records) = read_manifest::<R>(&manifest) {
                        tracing::info!(stage = %stage, "resumed from checkpoint");
                        self.runs.push(StageRun {
                            report,
                            resumed: true,
                        });
                        return Ok(records);
                    }
                }
            }
        }
        self.must_run = true;
        remove_if_present(&checkpoint_path)?;

        tracing::info!(stage = %stage, "running");
        let out = run()?;
        write_manifest(&out.records, &manifest)?;
        write_jsonl(ws.errors(position, stage), &out.errors)?;
        write_json(&ws.report(position, stage), &out.report)?;
        self.write_qa_sample(position, stage, &out.records)?;
        write_json(
            &checkpoint_path,
            &Checkpoint {
                stage,
                key: self.key.clone(),
            },
        )?;
        tracing::info!(
            stage = %stage,
            input = out.report.input_count,
            removed = out.report.removed,
            retained = out.report.retained,
            errored = out.report.errored,
            "stage complete"
        );
        self.runs.push(StageRun {
            report: out.report,
            resumed: false,
        });
        Ok(out.records)
    }

    fn write_qa_sample<R: Keyed>(
        &self,
        position: usize,
        stage: Stage,
        records: &[R],
    ) -> Result<(), RunError> {
        let path = self.ws().qa_sample(position, stage);
        let population: Vec<String> = records
            .iter()
            .filter(|r| r.active())
            .map(|r| r.key().to_string())
            .collect();
        if population.is_empty() {
            return remove_if_present(&path);
        }
        let sample = draw_qa_sample(
            &population,
            stage.as_str(),
            self.cfg().qa.sample_size,
            self.cfg().seed,
        )?;
        write_json(&path, &sample)
    }
}

/// Executes the stage DAG, resuming from valid checkpoints.
pub fn run_pipeline(opts: &RunOptions) -> Result<(RunSummary, Vec<StageRun>), RunError> {
    let cfg = &opts.config;
    cfg.validate()?;
    let input_text = fs::read_to_string(&opts.input).map_err(io_err(&opts.input))?;
    let videos: Vec<VideoRecord> = read_manifest(&opts.input)?;

    let mut runner = Runner {
        opts,
        key: fingerprint(&serde_json::json!({
            "input": fingerprint(&input_text),
            "adapters": opts.adapter_id,
            "seed": cfg.seed,
        })),
        must_run: opts.fresh,
        runs: Vec::new(),
        last_manifest: PathBuf::new(),
    };
    remove_if_present(&opts.workspace.summary())?;

    let order = stage_order(cfg);
    let stop = |stage: Stage| opts.stop_after == Some(stage);
    let scorers = &opts.scorers;
    let mut complete = false;

    'run: {
        let accepted = runner.step(0, Stage::Relevance, || relevance_stage(&videos, cfg, scorers))?;
        if stop(Stage::Relevance) {
            break 'run;
        }
        let mut clips = runner.step(1, Stage::Segment, || segment_stage(&accepted, cfg, scorers))?;
        if stop(Stage::Segment) {
            break 'run;
        }
        for (position, &stage) in order.iter().enumerate().skip(2) {
            let input = std::mem::take(&mut clips);
            clips = match stage {
                Stage::Resolution => {
                    runner.step(position, stage, || Ok(resolution_stage(input, cfg)))?
                }
                Stage::Caption => runner.step(position, stage, || {
                    caption_stage(input, &accepted, cfg, scorers)
                })?,
                filter => runner.step(position, filter, || {
                    filter_stage(input, filter, cfg, scorers)
                })?,
            };
            if stop(stage) {
                break 'run;
            }
        }
        complete = true;
    }

    let final_manifest = runner
        .last_manifest
        .strip_prefix(opts.workspace.root())
        .unwrap_or(&runner.last_manifest)
        .to_string_lossy()
        .replace('\\', "/");
    let summary = RunSummary {
        config_fingerprint: cfg.fingerprint(),
        reports: runner.runs.iter().map(|r| r.report.clone()).collect(),
        final_manifest,
        complete,
    };
    if complete {
        write_json(&opts.workspace.summary(), &summary)?;
    }
    Ok((summary, runner.runs))
}

/// Reads a stage error file written by a previous run.
pub fn read_errors<E: DeserializeOwned>(path: &Path) -> Result<Vec<E>, RunError> {
    Ok(read_jsonl(path)?)
}
