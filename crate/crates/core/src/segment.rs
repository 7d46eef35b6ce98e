//! Clip segmentation over 1-FPS frame analyses.
//!
//! A window `[i, j]` is a valid clip when it spans at least `min_span` grid
//! steps, every frame in it is labelled medical, and every adjacent
//! similarity inside it exceeds `tau`. [`segment`] returns the maximal valid
//! windows; [`segment_oracle`] recomputes them by brute force.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClipRecord, FrameAnalysis};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("window [{i}, {j}] is out of range for {len} frames")]
    OutOfRange { i: usize, j: usize, len: usize },
    #[error("invalid segmenter config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterConfig {
    /// Adjacent-frame similarity must be strictly above this.
    pub tau: f64,
    /// Minimum `j - i`, in seconds on the 1-FPS grid.
    pub min_span: u32,
    /// Minimum shorter side, in pixels.
    pub min_short_side: u32,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            tau: 0.85,
            min_span: 6,
            min_short_side: 480,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if !(-1.0..=1.0).contains(&self.tau) {
            return Err(SegmentError::Config(format!("tau {} outside [-1, 1]", self.tau)));
        }
        if self.min_span < 1 {
            return Err(SegmentError::Config("min_span must be at least 1".into()));
        }
        if self.min_short_side < 1 {
            return Err(SegmentError::Config("min_short_side must be at least 1".into()));
        }
        Ok(())
    }
}

/// Inclusive window of positions in a frame sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClipSpan {
    pub start: usize,
    pub end: usize,
}

impl ClipSpan {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn span(&self) -> usize {
        self.end - self.start
    }

    pub fn contains(&self, other: &ClipSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

fn coherent(frame: &FrameAnalysis, tau: f64) -> bool {
    frame.similarity_prev.is_some_and(|s| s > tau)
}

/// The validity predicate for window `[i, j]`.
pub fn valid_clip(
    frames: &[FrameAnalysis],
    i: usize,
    j: usize,
    cfg: &SegmenterConfig,
) -> Result<bool, SegmentError> {
    if i > j || j >= frames.len() {
        return Err(SegmentError::OutOfRange {
            i,
            j,
            len: frames.len(),
        });
    }
    let long_enough = j - i >= cfg.min_span as usize;
    let all_medical = frames[i..=j].iter().all(FrameAnalysis::is_medical);
    let all_coherent = frames[i + 1..=j].iter().all(|f| coherent(f, cfg.tau));
    Ok(long_enough && all_medical && all_coherent)
}

/// Maximal valid windows in one left-to-right pass.
///
/// Runs of medical, mutually coherent frames are split at every predicate
/// failure; runs spanning at least `min_span` are kept whole.
pub fn segment(frames: &[FrameAnalysis], cfg: &SegmenterConfig) -> Vec<ClipSpan> {
    let min_span = cfg.min_span as usize;
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    let close = |start: usize, end: usize, out: &mut Vec<ClipSpan>| {
        if end - start >= min_span {
            out.push(ClipSpan::new(start, end));
        }
    };
    for (k, frame) in frames.iter().enumerate() {
        if !frame.is_medical() {
            if let Some(start) = run_start.take() {
                close(start, k - 1, &mut out);
            }
            continue;
        }
        match run_start {
            Some(start) if !coherent(frame, cfg.tau) => {
                close(start, k - 1, &mut out);
                run_start = Some(k);
            }
            Some(_) => {}
            None => run_start = Some(k),
        }
    }
    if let Some(start) = run_start {
        close(start, frames.len() - 1, &mut out);
    }
    out
}

/// Brute-force reference: enumerate every window, keep the valid ones that
/// cannot be extended by one frame on either side. Cubic time; for tests.
pub fn segment_oracle(frames: &[FrameAnalysis], cfg: &SegmenterConfig) -> Vec<ClipSpan> {
    let n = frames.len();
    let valid = |i: usize, j: usize| valid_clip(frames, i, j, cfg).unwrap_or(false);
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            if !valid(i, j) {
                continue;
            }
            let left = i > 0 && valid(i - 1, j);
            let right = j + 1 < n && valid(i, j + 1);
            if !left && !right {
                out.push(ClipSpan::new(i, j));
            }
        }
    }
    out.sort();
    out
}

/// Frame-index bounds of a window, for building clip records.
pub fn frame_bounds(frames: &[FrameAnalysis], span: ClipSpan) -> (u32, u32) {
    (frames[span.start].frame_index, frames[span.end].frame_index)
}

/// Shorter side at least `min_short_side` pixels.
pub fn resolution_gate(clip: &ClipRecord, cfg: &SegmenterConfig) -> bool {
    clip.width.min(clip.height) >= cfg.min_short_side
}
