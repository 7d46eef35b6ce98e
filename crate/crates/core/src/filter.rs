//! Fine-grained quality filters: black border, subtitle OCR, aesthetic,
//! technical quality and the joint aesthetic/technical rule.
//!
//! Each filter is an independent per-clip predicate over adapter scores, so
//! the set of clips surviving the whole chain does not depend on stage order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{AdapterError, AdapterResult, BorderProbe, Scorers};
use crate::fingerprint::fingerprint;
use crate::model::{ClipRecord, ErrorQueueEntry, Stage, StageReport};
use crate::sampling::uniform_indices;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("expected {expected} per-frame values, got {got}")]
    FrameCount { expected: usize, got: usize },
    #[error("every sampled frame failed to decode")]
    AllFramesFailed,
    #[error("luma grid is {got} bytes, expected {width}x{height}")]
    GridSize { width: usize, height: usize, got: usize },
    #[error("`{0}` is not a filter stage")]
    NotAFilter(Stage),
    #[error("invalid filter config: {0}")]
    Config(String),
    #[error("stage halted: {0}")]
    Adapter(#[from] AdapterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Keep,
    Remove,
}

impl Verdict {
    fn remove_if(cond: bool) -> Self {
        if cond {
            Verdict::Remove
        } else {
            Verdict::Keep
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub ocr_frames: usize,
    pub ocr_word_cap: u32,
    pub aesthetic_frames: usize,
    pub aesthetic_min: f64,
    pub technical_max: f64,
    pub joint_technical: f64,
    pub joint_aesthetic: f64,
    pub border_frames: usize,
    pub border_luma_max: u8,
    pub border_min_thickness_px: u32,
    pub border_persistence: f64,
    pub stage_order: Vec<Stage>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            ocr_frames: 5,
            ocr_word_cap: 20,
            aesthetic_frames: 5,
            aesthetic_min: 3.0,
            technical_max: 0.0,
            joint_technical: 0.3,
            joint_aesthetic: 4.0,
            border_frames: 10,
            border_luma_max: 16,
            border_min_thickness_px: 8,
            border_persistence: 0.9,
            stage_order: Stage::FILTERS.to_vec(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        let bad = |msg: String| Err(FilterError::Config(msg));
        if self.ocr_frames < 1 || self.aesthetic_frames < 1 || self.border_frames < 1 {
            return bad("frame sample counts must be at least 1".into());
        }
        if !(self.border_persistence > 0.0 && self.border_persistence <= 1.0) {
            return bad(format!(
                "border_persistence {} outside (0, 1]",
                self.border_persistence
            ));
        }
        for v in [
            self.aesthetic_min,
            self.technical_max,
            self.joint_technical,
            self.joint_aesthetic,
        ] {
            if !v.is_finite() {
                return bad(format!("threshold {v} is not finite"));
            }
        }
        let mut order = self.stage_order.clone();
        order.sort();
        let mut registered = Stage::FILTERS.to_vec();
        registered.sort();
        if order != registered {
            return bad(format!(
                "stage_order {:?} is not a permutation of the filter stages",
                self.stage_order
            ));
        }
        Ok(())
    }

    /// Fingerprint of the parameters one stage depends on.
    pub fn stage_fingerprint(&self, stage: Stage) -> String {
        let params = match stage {
            Stage::Border => serde_json::json!({
                "frames": self.border_frames,
                "luma_max": self.border_luma_max,
                "min_thickness_px": self.border_min_thickness_px,
                "persistence": self.border_persistence,
            }),
            Stage::Ocr => serde_json::json!({
                "frames": self.ocr_frames,
                "word_cap": self.ocr_word_cap,
            }),
            Stage::Aesthetic => serde_json::json!({
                "frames": self.aesthetic_frames,
                "min": self.aesthetic_min,
            }),
            Stage::Technical => serde_json::json!({ "max": self.technical_max }),
            Stage::Joint => serde_json::json!({
                "aesthetic_frames": self.aesthetic_frames,
                "technical": self.joint_technical,
                "aesthetic": self.joint_aesthetic,
            }),
            _ => serde_json::Value::Null,
        };
        fingerprint(&serde_json::json!({ "stage": stage, "params": params }))
    }
}

/// Per-side border thickness in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BorderThickness {
    pub top: u32,
    pub bottom: u32,
    pub left: u32,
    pub right: u32,
}

impl BorderThickness {
    /// From `[top, bottom, left, right]`.
    pub fn from_array([top, bottom, left, right]: [u32; 4]) -> Self {
        Self {
            top,
            bottom,
            left,
            right,
        }
    }

    pub fn sides(&self) -> [u32; 4] {
        [self.top, self.bottom, self.left, self.right]
    }
}

/// A single-channel 8-bit frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LumaFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LumaFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, FilterError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(FilterError::GridSize {
                width,
                height,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    fn row_sum(&self, y: usize) -> u64 {
        self.data[y * self.width..(y + 1) * self.width]
            .iter()
            .map(|&v| u64::from(v))
            .sum()
    }

    fn col_sum(&self, x: usize) -> u64 {
        (0..self.height)
            .map(|y| u64::from(self.data[y * self.width + x]))
            .sum()
    }
}

/// Contiguous dark rows/columns from each edge; a line is dark when its mean
/// luma is below `border_luma_max`. An all-dark frame reports its full
/// dimensions on every side.
pub fn detect_border(frame: &LumaFrame, cfg: &FilterConfig) -> BorderThickness {
    let limit = u64::from(cfg.border_luma_max);
    let (w, h) = (frame.width as u64, frame.height as u64);
    let dark_row = |y: usize| frame.row_sum(y) < limit * w;
    let dark_col = |x: usize| frame.col_sum(x) < limit * h;
    let count = |it: &mut dyn Iterator<Item = bool>| it.take_while(|&d| d).count() as u32;
    BorderThickness {
        top: count(&mut (0..frame.height).map(dark_row)),
        bottom: count(&mut (0..frame.height).rev().map(dark_row)),
        left: count(&mut (0..frame.width).map(dark_col)),
        right: count(&mut (0..frame.width).rev().map(dark_col)),
    }
}

/// Largest fraction, over the four sides, of decoded frames whose border on
/// that side is at least `border_min_thickness_px`.
pub fn border_persistence(
    thicknesses: &[Option<BorderThickness>],
    cfg: &FilterConfig,
) -> Result<f64, FilterError> {
    let decoded: Vec<&BorderThickness> = thicknesses.iter().flatten().collect();
    if decoded.is_empty() {
        return Err(FilterError::AllFramesFailed);
    }
    let n = decoded.len() as f64;
    Ok((0..4)
        .map(|side| {
            decoded
                .iter()
                .filter(|t| t.sides()[side] >= cfg.border_min_thickness_px)
                .count() as f64
                / n
        })
        .fold(0.0, f64::max))
}

/// Remove when some side is bordered in at least `border_persistence` of the
/// decoded frames. Undecodable frames (`None`) are skipped.
pub fn border_filter(
    thicknesses: &[Option<BorderThickness>],
    cfg: &FilterConfig,
) -> Result<Verdict, FilterError> {
    let persistence = border_persistence(thicknesses, cfg)?;
    Ok(Verdict::remove_if(persistence >= cfg.border_persistence))
}

fn expect_len(expected: usize, got: usize) -> Result<(), FilterError> {
    if expected == got {
        Ok(())
    } else {
        Err(FilterError::FrameCount { expected, got })
    }
}

/// Remove when the total word count exceeds the cap.
pub fn ocr_filter(word_counts: &[u32], cfg: &FilterConfig) -> Result<Verdict, FilterError> {
    expect_len(cfg.ocr_frames, word_counts.len())?;
    let total: u64 = word_counts.iter().map(|&c| u64::from(c)).sum();
    Ok(Verdict::remove_if(total > u64::from(cfg.ocr_word_cap)))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Remove when the mean frame score is below `aesthetic_min`.
pub fn aesthetic_filter(scores: &[f64], cfg: &FilterConfig) -> Result<Verdict, FilterError> {
    expect_len(cfg.aesthetic_frames, scores.len())?;
    Ok(Verdict::remove_if(mean(scores) < cfg.aesthetic_min))
}

/// Remove when the technical score exceeds `technical_max`.
pub fn technical_filter(technical_score: f64, cfg: &FilterConfig) -> Verdict {
    Verdict::remove_if(technical_score > cfg.technical_max)
}

/// Remove when the technical score exceeds `joint_technical` and the
/// aesthetic mean is below `joint_aesthetic`.
pub fn joint_filter(technical_score: f64, aesthetic_mean: f64, cfg: &FilterConfig) -> Verdict {
    Verdict::remove_if(
        technical_score > cfg.joint_technical && aesthetic_mean < cfg.joint_aesthetic,
    )
}

/// Supplies decoded luma frames for intensity-based border detection.
pub trait LumaSource: Send + Sync {
    /// `Ok(None)` marks a frame that could not be decoded.
    fn luma(&self, clip: &ClipRecord, frame_index: u32) -> AdapterResult<Option<LumaFrame>>;
}

/// Border probe that runs [`detect_border`] over frames from a [`LumaSource`].
pub struct IntensityBorderProbe<S> {
    source: S,
    cfg: FilterConfig,
}

impl<S: LumaSource> IntensityBorderProbe<S> {
    pub fn new(source: S, cfg: FilterConfig) -> Self {
        Self { source, cfg }
    }
}

impl<S: LumaSource> BorderProbe for IntensityBorderProbe<S> {
    fn thicknesses(
        &self,
        clip: &ClipRecord,
        frames: &[u32],
    ) -> AdapterResult<Vec<Option<BorderThickness>>> {
        frames
            .iter()
            .map(|&f| {
                Ok(self
                    .source
                    .luma(clip, f)?
                    .map(|frame| detect_border(&frame, &self.cfg)))
            })
            .collect()
    }
}

/// Result of one filter stage over a clip list.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    /// Input clips in order, minus the ones routed to the error queue.
    pub clips: Vec<ClipRecord>,
    pub report: StageReport,
    pub errors: Vec<ErrorQueueEntry>,
}

enum ClipResult {
    Skipped(ClipRecord),
    Judged(ClipRecord, Verdict),
    Failed(ErrorQueueEntry),
}

/// Evaluates one stage's predicate on a clip, returning the verdict and the
/// score to record.
pub fn evaluate(
    stage: Stage,
    clip: &ClipRecord,
    scorers: &Scorers,
    cfg: &FilterConfig,
) -> Result<(Verdict, f64), ClipFailure> {
    let sample = |n: usize| uniform_indices(clip.start_index, clip.end_index, n);
    let aesthetic_mean = || -> Result<f64, ClipFailure> {
        let scores = scorers
            .aesthetic
            .frame_scores(clip, &sample(cfg.aesthetic_frames))?;
        expect_len(cfg.aesthetic_frames, scores.len())?;
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(ClipFailure::Adapter(AdapterError::invalid_output(
                "non-finite aesthetic score",
            )));
        }
        Ok(mean(&scores))
    };
    let technical = || -> Result<f64, ClipFailure> {
        let score = scorers.technical.score(clip)?;
        if !score.is_finite() {
            return Err(ClipFailure::Adapter(AdapterError::invalid_output(
                "non-finite technical score",
            )));
        }
        Ok(score)
    };
    match stage {
        Stage::Border => {
            let t = scorers.border.thicknesses(clip, &sample(cfg.border_frames))?;
            let p = border_persistence(&t, cfg)?;
            Ok((Verdict::remove_if(p >= cfg.border_persistence), p))
        }
        Stage::Ocr => {
            let counts = scorers.ocr.word_counts(clip, &sample(cfg.ocr_frames))?;
            let verdict = ocr_filter(&counts, cfg)?;
            Ok((verdict, counts.iter().map(|&c| f64::from(c)).sum()))
        }
        Stage::Aesthetic => {
            let m = aesthetic_mean()?;
            Ok((Verdict::remove_if(m < cfg.aesthetic_min), m))
        }
        Stage::Technical => {
            let t = technical()?;
            Ok((technical_filter(t, cfg), t))
        }
        Stage::Joint => {
            let t = technical()?;
            let m = aesthetic_mean()?;
            // Positive exactly when both conjuncts fire.
            let margin = (t - cfg.joint_technical).min(cfg.joint_aesthetic - m);
            Ok((joint_filter(t, m, cfg), margin))
        }
        other => Err(ClipFailure::Filter(FilterError::NotAFilter(other))),
    }
}

/// Why a single clip could not be judged.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClipFailure {
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// Runs one filter stage. Clips already removed pass through untouched;
/// clips whose scoring fails go to the error queue and are withheld from the
/// output. An adapter reporting itself unavailable halts the stage.
pub fn run_stage(
    clips: Vec<ClipRecord>,
    stage: Stage,
    scorers: &Scorers,
    cfg: &FilterConfig,
) -> Result<StageOutcome, FilterError> {
    if !stage.is_filter() {
        return Err(FilterError::NotAFilter(stage));
    }
    let results: Vec<Result<ClipResult, AdapterError>> = clips
        .into_par_iter()
        .map(|clip| {
            if !clip.is_active() {
                return Ok(ClipResult::Skipped(clip));
            }
            match evaluate(stage, &clip, scorers, cfg) {
                Ok((verdict, score)) => {
                    let mut clip = clip;
                    clip.scores.insert(stage, score);
                    Ok(ClipResult::Judged(clip, verdict))
                }
                Err(ClipFailure::Adapter(e)) if e.is_fatal() => Err(e),
                Err(failure) => Ok(ClipResult::Failed(ErrorQueueEntry {
                    clip_id: clip.clip_id,
                    stage,
                    error: failure.to_string(),
                })),
            }
        })
        .collect();

    let mut report = StageReport::empty(stage, cfg.stage_fingerprint(stage));
    let mut out = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for result in results {
        match result? {
            ClipResult::Skipped(clip) => out.push(clip),
            ClipResult::Judged(mut clip, verdict) => {
                report.input_count += 1;
                match verdict {
                    Verdict::Keep => report.retained += 1,
                    Verdict::Remove => {
                        report.removed += 1;
                        clip.mark_removed(stage);
                    }
                }
                out.push(clip);
            }
            ClipResult::Failed(entry) => {
                report.errored += 1;
                errors.push(entry);
            }
        }
    }
    report.output_count = report.retained;
    Ok(StageOutcome {
        clips: out,
        report,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FilterConfig {
        FilterConfig::default()
    }

    #[test]
    fn gray_frame_has_no_border() {
        let f = LumaFrame::filled(64, 48, 128);
        assert_eq!(detect_border(&f, &cfg()), BorderThickness::default());
    }

    #[test]
    fn black_top_rows_detected() {
        let mut f = LumaFrame::filled(64, 48, 128);
        for y in 0..10 {
            for x in 0..64 {
                f.set(x, y, 0);
            }
        }
        let t = detect_border(&f, &cfg());
        assert_eq!(t.top, 10);
        assert_eq!((t.bottom, t.left, t.right), (0, 0, 0));
    }

    #[test]
    fn all_black_frame_reports_full_dimensions() {
        let f = LumaFrame::filled(64, 48, 0);
        let t = detect_border(&f, &cfg());
        assert_eq!(t.sides(), [48, 48, 64, 64]);
    }

    #[test]
    fn mean_luma_threshold_is_strict() {
        // a row at mean 16 is not dark
        let mut f = LumaFrame::filled(4, 4, 128);
        for x in 0..4 {
            f.set(x, 0, 16);
        }
        assert_eq!(detect_border(&f, &cfg()).top, 0);
        for x in 0..4 {
            f.set(x, 0, 15);
        }
        assert_eq!(detect_border(&f, &cfg()).top, 1);
    }

    #[test]
    fn grid_size_checked() {
        assert!(LumaFrame::new(4, 4, vec![0; 15]).is_err());
        assert!(LumaFrame::new(0, 4, vec![]).is_err());
    }

    fn top(px: u32) -> Option<BorderThickness> {
        Some(BorderThickness {
            top: px,
            ..Default::default()
        })
    }

    #[test]
    fn border_persistence_rules() {
        let clean = vec![top(0); 10];
        assert_eq!(border_filter(&clean, &cfg()).unwrap(), Verdict::Keep);
        let always = vec![top(10); 10];
        assert_eq!(border_filter(&always, &cfg()).unwrap(), Verdict::Remove);
        let mut mostly = vec![top(10); 8];
        mostly.extend([top(0), top(0)]);
        assert_eq!(border_filter(&mostly, &cfg()).unwrap(), Verdict::Keep);
        let mut nine = vec![top(10); 9];
        nine.push(top(0));
        assert_eq!(border_filter(&nine, &cfg()).unwrap(), Verdict::Remove);
    }

    #[test]
    fn undecodable_frames_are_skipped() {
        let mut frames = vec![top(10); 9];
        frames.push(None);
        assert_eq!(border_filter(&frames, &cfg()).unwrap(), Verdict::Remove);
        assert_eq!(
            border_filter(&[None, None], &cfg()).unwrap_err(),
            FilterError::AllFramesFailed
        );
    }

    #[test]
    fn thin_border_does_not_count() {
        assert_eq!(border_filter(&[top(7); 10], &cfg()).unwrap(), Verdict::Keep);
        assert_eq!(border_filter(&[top(8); 10], &cfg()).unwrap(), Verdict::Remove);
    }

    #[test]
    fn ocr_boundaries() {
        assert_eq!(ocr_filter(&[4, 4, 4, 4, 4], &cfg()).unwrap(), Verdict::Keep);
        assert_eq!(ocr_filter(&[3, 4, 5, 4, 5], &cfg()).unwrap(), Verdict::Remove);
        assert_eq!(ocr_filter(&[0; 5], &cfg()).unwrap(), Verdict::Keep);
        assert!(ocr_filter(&[1, 2], &cfg()).is_err());
    }

    #[test]
    fn aesthetic_boundaries() {
        assert_eq!(aesthetic_filter(&[3.0; 5], &cfg()).unwrap(), Verdict::Keep);
        assert_eq!(
            aesthetic_filter(&[2.9, 3.0, 3.1, 2.8, 3.0], &cfg()).unwrap(),
            Verdict::Remove
        );
        assert_eq!(aesthetic_filter(&[10.0; 5], &cfg()).unwrap(), Verdict::Keep);
    }

    #[test]
    fn technical_boundaries() {
        assert_eq!(technical_filter(0.0, &cfg()), Verdict::Keep);
        assert_eq!(technical_filter(0.01, &cfg()), Verdict::Remove);
        assert_eq!(technical_filter(-0.5, &cfg()), Verdict::Keep);
    }

    #[test]
    fn joint_needs_both_conjuncts() {
        assert_eq!(joint_filter(0.35, 3.9, &cfg()), Verdict::Remove);
        assert_eq!(joint_filter(0.35, 4.1, &cfg()), Verdict::Keep);
        assert_eq!(joint_filter(0.2, 3.0, &cfg()), Verdict::Keep);
        assert_eq!(joint_filter(0.3, 3.0, &cfg()), Verdict::Keep);
    }

    #[test]
    fn stage_order_must_be_permutation() {
        let mut c = cfg();
        assert!(c.validate().is_ok());
        c.stage_order = vec![Stage::Ocr, Stage::Ocr, Stage::Border, Stage::Joint, Stage::Technical];
        assert!(c.validate().is_err());
        c.stage_order = vec![Stage::Caption];
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_stage_reports_zero() {
        let out = run_stage(Vec::new(), Stage::Ocr, &Scorers::synthetic(0), &cfg()).unwrap();
        assert_eq!((out.report.input_count, out.report.removed, out.report.retained), (0, 0, 0));
    }

    #[test]
    fn non_filter_stage_rejected() {
        assert!(run_stage(Vec::new(), Stage::Caption, &Scorers::synthetic(0), &cfg()).is_err());
    }

    #[test]
    fn fingerprints_differ_per_stage_and_threshold() {
        let a = cfg();
        let mut b = cfg();
        b.ocr_word_cap = 21;
        assert_ne!(a.stage_fingerprint(Stage::Ocr), b.stage_fingerprint(Stage::Ocr));
        assert_eq!(a.stage_fingerprint(Stage::Border), b.stage_fingerprint(Stage::Border));
    }
}
