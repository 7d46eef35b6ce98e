//! One function per pipeline stage. Each takes the previous stage's records
//! and returns the next records, a report and the entries routed to the
//! stage's error queue.

use std::collections::HashMap;

use medcurate::adapters::{AdapterError, Scorers};
use medcurate::caption::{generate_captions, CaptionError, CaptionRequest};
use medcurate::filter::{run_stage, FilterError};
use medcurate::model::{frame_sequence, ErrorQueueEntry, RetryEntry};
use medcurate::relevance::gate_corpus;
use medcurate::segment::{frame_bounds, resolution_gate, segment};
use medcurate::{ClipRecord, PipelineConfig, Stage, StageReport, VideoRecord};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StageError {
    #[error("stage {stage} halted: {source}")]
    Halted {
        stage: Stage,
        #[source]
        source: AdapterError,
    },
    #[error("stage {stage}: {message}")]
    Invalid { stage: Stage, message: String },
}

#[derive(Debug, Clone)]
pub struct StageOutput<R, E> {
    pub records: Vec<R>,
    pub report: StageReport,
    pub errors: Vec<E>,
}

pub type VideoStage = StageOutput<VideoRecord, RetryEntry>;
pub type ClipStage = StageOutput<ClipRecord, ErrorQueueEntry>;

fn halted(stage: Stage) -> impl Fn(AdapterError) -> StageError {
    move |source| StageError::Halted { stage, source }
}

/// Keyword and classifier gating with channel expansion. Videos whose score
/// could not be computed go to the retry list and are not counted as input.
pub fn relevance_stage(
    videos: &[VideoRecord],
    cfg: &PipelineConfig,
    scorers: &Scorers,
) -> Result<VideoStage, StageError> {
    let stage = Stage::Relevance;
    let dict = cfg.relevance.dictionary().map_err(|e| StageError::Invalid {
        stage,
        message: e.to_string(),
    })?;
    let outcome = gate_corpus(videos, &dict, scorers.text.as_ref(), &cfg.relevance);
    if let Some(err) = outcome.fatal {
        return Err(halted(stage)(err));
    }
    let mut report = StageReport::empty(stage, cfg.stage_fingerprint(stage));
    report.input_count = outcome.verdicts.len();
    report.retained = outcome.retained.len();
    report.removed = report.input_count - report.retained;
    report.errored = outcome.retry.len();
    report.output_count = report.retained;
    Ok(StageOutput {
        records: outcome.retained,
        report,
        errors: outcome.retry,
    })
}

fn segment_video(
    video: &VideoRecord,
    cfg: &PipelineConfig,
    scorers: &Scorers,
) -> Result<Vec<ClipRecord>, AdapterError> {
    let labels = scorers.frame_classifier.labels(video)?;
    let sims = scorers.frame_embedder.adjacent_similarities(video)?;
    if sims.len() != labels.len().saturating_sub(1) {
        return Err(AdapterError::invalid_output(format!(
            "{} labels but {} adjacent similarities",
            labels.len(),
            sims.len()
        )));
    }
    let frames = frame_sequence(&labels, &sims);
    for (k, frame) in frames.iter().enumerate() {
        frame
            .validate(k == 0)
            .map_err(|e| AdapterError::invalid_output(e.to_string()))?;
    }
    Ok(segment(&frames, &cfg.segmenter)
        .into_iter()
        .map(|span| {
            let (start, end) = frame_bounds(&frames, span);
            ClipRecord::new(video, start, end)
        })
        .collect())
}

/// Splits each video into maximal valid clips. The report counts videos:
/// `retained` are videos yielding at least one clip, `output_count` is the
/// number of clips produced.
pub fn segment_stage(
    videos: &[VideoRecord],
    cfg: &PipelineConfig,
    scorers: &Scorers,
) -> Result<StageOutput<ClipRecord, RetryEntry>, StageError> {
    let stage = Stage::Segment;
    let results: Vec<_> = videos
        .par_iter()
        .map(|v| (v, segment_video(v, cfg, scorers)))
        .collect();
    let mut report = StageReport::empty(stage, cfg.stage_fingerprint(stage));
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (video, result) in results {
        match result {
            Ok(clips) => {
                report.input_count += 1;
                if clips.is_empty() {
                    report.removed += 1;
                } else {
                    report.retained += 1;
                }
                records.extend(clips);
            }
            Err(e) if e.is_fatal() => return Err(halted(stage)(e)),
            Err(e) => {
                report.errored += 1;
                errors.push(RetryEntry {
                    video_id: video.video_id.clone(),
                    stage,
                    error: e.to_string(),
                });
            }
        }
    }
    report.output_count = records.len();
    Ok(StageOutput {
        records,
        report,
        errors,
    })
}

/// Marks clips whose shorter side is below the configured minimum.
pub fn resolution_stage(clips: Vec<ClipRecord>, cfg: &PipelineConfig) -> ClipStage {
    let stage = Stage::Resolution;
    let mut report = StageReport::empty(stage, cfg.stage_fingerprint(stage));
    let records = clips
        .into_iter()
        .map(|mut clip| {
            if clip.is_active() {
                report.input_count += 1;
                if resolution_gate(&clip, &cfg.segmenter) {
                    report.retained += 1;
                } else {
                    report.removed += 1;
                    clip.mark_removed(stage);
                }
            }
            clip
        })
        .collect();
    report.output_count = report.retained;
    StageOutput {
        records,
        report,
        errors: Vec::new(),
    }
}

pub fn filter_stage(
    clips: Vec<ClipRecord>,
    stage: Stage,
    cfg: &PipelineConfig,
    scorers: &Scorers,
) -> Result<ClipStage, StageError> {
    let outcome = run_stage(clips, stage, scorers, &cfg.filter).map_err(|e| match e {
        FilterError::Adapter(source) => StageError::Halted { stage, source },
        other => StageError::Invalid {
            stage,
            message: other.to_string(),
        },
    })?;
    let mut report = outcome.report;
    report.config_fingerprint = cfg.stage_fingerprint(stage);
    Ok(StageOutput {
        records: outcome.clips,
        report,
        errors: outcome.errors,
    })
}

/// Captions every active clip. Clips whose retries are exhausted go to the
/// error queue and are withheld from the output.
pub fn caption_stage(
    clips: Vec<ClipRecord>,
    videos: &[VideoRecord],
    cfg: &PipelineConfig,
    scorers: &Scorers,
) -> Result<ClipStage, StageError> {
    let stage = Stage::Caption;
    let parents: HashMap<&str, &VideoRecord> =
        videos.iter().map(|v| (v.video_id.as_str(), v)).collect();
    let results: Vec<Result<ClipRecord, Result<ErrorQueueEntry, AdapterError>>> = clips
        .into_par_iter()
        .map(|mut clip| {
            if !clip.is_active() {
                return Ok(clip);
            }
            let Some(video) = parents.get(clip.video_id.as_str()) else {
                return Err(Ok(ErrorQueueEntry {
                    clip_id: clip.clip_id.clone(),
                    stage,
                    error: format!("parent video {} not found", clip.video_id),
                }));
            };
            let request = CaptionRequest::for_clip(&clip, video);
            match generate_captions(&request, scorers.mllm.as_ref(), cfg.caption.retries) {
                Ok(result) => {
                    clip.detailed_caption = Some(result.detailed_caption);
                    clip.brief_caption = Some(result.brief_caption);
                    Ok(clip)
                }
                Err(CaptionError::Halted(e)) => Err(Err(e)),
                Err(CaptionError::Exhausted(failure)) => Err(Ok(ErrorQueueEntry {
                    clip_id: failure.clip_id.clone(),
                    stage,
                    error: failure.to_string(),
                })),
            }
        })
        .collect();

    let mut report = StageReport::empty(stage, cfg.stage_fingerprint(stage));
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for result in results {
        match result {
            Ok(clip) => {
                if clip.is_active() {
                    report.input_count += 1;
                    report.retained += 1;
                }
                records.push(clip);
            }
            Err(Ok(entry)) => {
                report.errored += 1;
                errors.push(entry);
            }
            Err(Err(e)) => return Err(halted(stage)(e)),
        }
    }
    report.output_count = report.retained;
    Ok(StageOutput {
        records,
        report,
        errors,
    })
}
