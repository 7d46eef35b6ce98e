//! Canonical record types shared by every pipeline stage.
//!
//! Clips live on the 1-FPS sampling grid: `start_index` and `end_index` are
//! inclusive frame indices, so a clip spans `end_index - start_index` seconds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum span (in grid steps) a stored clip must cover.
pub const MIN_CLIP_SPAN: u32 = 6;

/// A violated record invariant, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {reason}")]
pub struct InvariantError {
    pub field: &'static str,
    pub reason: String,
}

impl InvariantError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

/// Every stage name the pipeline knows about, in default execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Relevance,
    Segment,
    Resolution,
    Border,
    Ocr,
    Aesthetic,
    Technical,
    Joint,
    Caption,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Relevance,
        Stage::Segment,
        Stage::Resolution,
        Stage::Border,
        Stage::Ocr,
        Stage::Aesthetic,
        Stage::Technical,
        Stage::Joint,
        Stage::Caption,
    ];

    /// The quality filters, in the default chain order.
    pub const FILTERS: [Stage; 5] = [
        Stage::Border,
        Stage::Ocr,
        Stage::Aesthetic,
        Stage::Technical,
        Stage::Joint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Relevance => "relevance",
            Stage::Segment => "segment",
            Stage::Resolution => "resolution",
            Stage::Border => "border",
            Stage::Ocr => "ocr",
            Stage::Aesthetic => "aesthetic",
            Stage::Technical => "technical",
            Stage::Joint => "joint",
            Stage::Caption => "caption",
        }
    }

    pub fn is_filter(self) -> bool {
        Self::FILTERS.contains(&self)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|stage| stage.as_str() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ClinicalPractice,
    MedicalScience,
    MedicalTeaching,
    MedicalImaging,
    MedicalAnimation,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::ClinicalPractice,
        Category::MedicalScience,
        Category::MedicalTeaching,
        Category::MedicalImaging,
        Category::MedicalAnimation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ClinicalPractice => "clinical_practice",
            Category::MedicalScience => "medical_science",
            Category::MedicalTeaching => "medical_teaching",
            Category::MedicalImaging => "medical_imaging",
            Category::MedicalAnimation => "medical_animation",
        }
    }
}

/// Source video metadata plus a reference to its media.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoRecord {
    pub video_id: String,
    pub title: String,
    pub description: String,
    pub channel_id: String,
    pub duration_s: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    pub media_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

impl VideoRecord {
    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.video_id.is_empty() {
            return Err(InvariantError::new("video_id", "must not be empty"));
        }
        if !self.duration_s.is_finite() || self.duration_s < 0.0 {
            return Err(InvariantError::new(
                "duration_s",
                format!("must be a finite non-negative number, got {}", self.duration_s),
            ));
        }
        if self.width == 0 {
            return Err(InvariantError::new("width", "must be at least 1"));
        }
        if self.height == 0 {
            return Err(InvariantError::new("height", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of frames on the 1-FPS grid, sampled from t = 0.
    pub fn grid_frames(&self) -> u32 {
        self.duration_s.floor() as u32 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipStatus {
    Active,
    Removed,
}

/// A segmented clip and everything later stages learn about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipRecord {
    pub clip_id: String,
    pub video_id: String,
    pub start_index: u32,
    pub end_index: u32,
    pub width: u32,
    pub height: u32,
    pub status: ClipStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_by: Option<Stage>,
    #[serde(default)]
    pub scores: BTreeMap<Stage, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brief_caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detailed_caption: Option<String>,
}

/// `video_id#start-end`
pub fn clip_id(video_id: &str, start_index: u32, end_index: u32) -> String {
    format!("{video_id}#{start_index}-{end_index}")
}

impl ClipRecord {
    /// A fresh active clip with a derived identifier.
    pub fn new(video: &VideoRecord, start_index: u32, end_index: u32) -> Self {
        Self {
            clip_id: clip_id(&video.video_id, start_index, end_index),
            video_id: video.video_id.clone(),
            start_index,
            end_index,
            width: video.width,
            height: video.height,
            status: ClipStatus::Active,
            removed_by: None,
            scores: BTreeMap::new(),
            brief_caption: None,
            detailed_caption: None,
        }
    }

    /// Duration in seconds on the 1-FPS grid.
    pub fn span(&self) -> u32 {
        self.end_index.saturating_sub(self.start_index)
    }

    pub fn is_active(&self) -> bool {
        self.status == ClipStatus::Active
    }

    pub fn mark_removed(&mut self, stage: Stage) {
        self.status = ClipStatus::Removed;
        self.removed_by = Some(stage);
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.clip_id.is_empty() {
            return Err(InvariantError::new("clip_id", "must not be empty"));
        }
        if self.end_index < self.start_index {
            return Err(InvariantError::new(
                "end_index",
                format!(
                    "end_index {} precedes start_index {}",
                    self.end_index, self.start_index
                ),
            ));
        }
        if self.span() < MIN_CLIP_SPAN {
            return Err(InvariantError::new(
                "end_index",
                format!(
                    "span end_index - start_index = {} is below the minimum of {MIN_CLIP_SPAN}",
                    self.span()
                ),
            ));
        }
        if self.width == 0 {
            return Err(InvariantError::new("width", "must be at least 1"));
        }
        if self.height == 0 {
            return Err(InvariantError::new("height", "must be at least 1"));
        }
        match (self.status, self.removed_by) {
            (ClipStatus::Removed, None) => {
                return Err(InvariantError::new(
                    "removed_by",
                    "removed clips must name the removing stage",
                ))
            }
            (ClipStatus::Active, Some(stage)) => {
                return Err(InvariantError::new(
                    "removed_by",
                    format!("active clip carries removed_by = {stage}"),
                ))
            }
            _ => {}
        }
        if let Some((stage, value)) = self.scores.iter().find(|(_, v)| !v.is_finite()) {
            return Err(InvariantError::new(
                "scores",
                format!("score for stage {stage} is not finite ({value})"),
            ));
        }
        Ok(())
    }
}

/// Per-frame classifier label and adjacent-frame similarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameAnalysis {
    pub frame_index: u32,
    pub medical_label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_prev: Option<f64>,
}

impl FrameAnalysis {
    pub fn is_medical(&self) -> bool {
        self.medical_label == 1
    }

    /// Checks one frame; `first` says whether it opens its sequence.
    pub fn validate(&self, first: bool) -> Result<(), InvariantError> {
        if self.medical_label > 1 {
            return Err(InvariantError::new(
                "medical_label",
                format!("must be 0 or 1, got {}", self.medical_label),
            ));
        }
        match (first, self.similarity_prev) {
            (true, Some(_)) => Err(InvariantError::new(
                "similarity_prev",
                "the first frame has no predecessor",
            )),
            (false, None) => Err(InvariantError::new(
                "similarity_prev",
                format!("frame {} is missing its similarity", self.frame_index),
            )),
            (false, Some(s)) if !(-1.0..=1.0).contains(&s) => Err(InvariantError::new(
                "similarity_prev",
                format!("{s} is outside [-1, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

/// Builds the frame sequence from labels and the `n - 1` adjacent similarities.
pub fn frame_sequence(labels: &[u8], similarities: &[f64]) -> Vec<FrameAnalysis> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &label)| FrameAnalysis {
            frame_index: i as u32,
            medical_label: label,
            similarity_prev: if i == 0 {
                None
            } else {
                similarities.get(i - 1).copied()
            },
        })
        .collect()
}

/// Removed/retained accounting for one stage.
///
/// `input_count` covers the records the stage evaluated. Records routed to the
/// error queue are reported in `errored` and are not part of `input_count`.
/// `output_count` is the number of active records handed to the next stage;
/// it equals `retained` except where the unit changes (videos become clips
/// in the segment stage).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub input_count: usize,
    pub removed: usize,
    pub retained: usize,
    #[serde(default)]
    pub errored: usize,
    pub output_count: usize,
    pub config_fingerprint: String,
}

impl StageReport {
    pub fn empty(stage: Stage, config_fingerprint: impl Into<String>) -> Self {
        Self {
            stage,
            input_count: 0,
            removed: 0,
            retained: 0,
            errored: 0,
            output_count: 0,
            config_fingerprint: config_fingerprint.into(),
        }
    }

    pub fn reconciles(&self) -> bool {
        self.removed + self.retained == self.input_count
    }
}

/// One entry in a stage's error queue file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorQueueEntry {
    pub clip_id: String,
    pub stage: Stage,
    pub error: String,
}

/// A video whose relevance verdict could not be computed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryEntry {
    pub video_id: String,
    pub stage: Stage,
    pub error: String,
}
