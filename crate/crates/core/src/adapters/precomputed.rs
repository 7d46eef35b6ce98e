//! Adapters backed by scores computed elsewhere and stored as JSONL.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapters::{
    AdapterError, AdapterResult, AestheticScorer, BorderProbe, FrameClassifier, FrameEmbedder,
    OcrScorer, TechnicalScorer,
};
use crate::filter::BorderThickness;
use crate::manifest::{read_jsonl, ManifestError};
use crate::model::{ClipRecord, FrameAnalysis, VideoRecord};

/// One row of a frame-analysis file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecomputedFrames {
    pub video_id: String,
    pub frames: Vec<FrameAnalysis>,
}

/// One row of a clip-score file. Per-frame vectors must already match the
/// configured sample counts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrecomputedClipScores {
    pub clip_id: String,
    #[serde(default)]
    pub ocr_words: Option<Vec<u32>>,
    #[serde(default)]
    pub aesthetic: Option<Vec<f64>>,
    #[serde(default)]
    pub technical: Option<f64>,
    /// `[top, bottom, left, right]` per frame; `null` for undecodable frames.
    #[serde(default)]
    pub border: Option<Vec<Option<[u32; 4]>>>,
}

#[derive(Debug, Clone, Default)]
pub struct PrecomputedScorers {
    frames: HashMap<String, Vec<FrameAnalysis>>,
    clips: HashMap<String, PrecomputedClipScores>,
}

impl PrecomputedScorers {
    pub fn new(frames: Vec<PrecomputedFrames>, clips: Vec<PrecomputedClipScores>) -> Self {
        Self {
            frames: frames.into_iter().map(|r| (r.video_id, r.frames)).collect(),
            clips: clips.into_iter().map(|r| (r.clip_id.clone(), r)).collect(),
        }
    }

    pub fn load_frames(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        Ok(Self::new(read_jsonl(path)?, Vec::new()))
    }

    pub fn load_clip_scores(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        Ok(Self::new(Vec::new(), read_jsonl(path)?))
    }

    fn frames_for(&self, video: &VideoRecord) -> AdapterResult<&[FrameAnalysis]> {
        self.frames
            .get(&video.video_id)
            .map(Vec::as_slice)
            .ok_or_else(|| {
                AdapterError::invalid_output(format!("no frame analysis for {}", video.video_id))
            })
    }

    fn clip(&self, clip: &ClipRecord) -> AdapterResult<&PrecomputedClipScores> {
        self.clips
            .get(&clip.clip_id)
            .ok_or_else(|| AdapterError::invalid_output(format!("no scores for {}", clip.clip_id)))
    }
}

fn missing(what: &str, clip: &ClipRecord) -> AdapterError {
    AdapterError::invalid_output(format!("no {what} scores for {}", clip.clip_id))
}

impl FrameClassifier for PrecomputedScorers {
    fn labels(&self, video: &VideoRecord) -> AdapterResult<Vec<u8>> {
        Ok(self.frames_for(video)?.iter().map(|f| f.medical_label).collect())
    }
}

impl FrameEmbedder for PrecomputedScorers {
    fn adjacent_similarities(&self, video: &VideoRecord) -> AdapterResult<Vec<f64>> {
        self.frames_for(video)?
            .iter()
            .skip(1)
            .map(|f| {
                f.similarity_prev.ok_or_else(|| {
                    AdapterError::invalid_output(format!(
                        "frame {} of {} lacks a similarity",
                        f.frame_index, video.video_id
                    ))
                })
            })
            .collect()
    }
}

impl OcrScorer for PrecomputedScorers {
    fn word_counts(&self, clip: &ClipRecord, _frames: &[u32]) -> AdapterResult<Vec<u32>> {
        self.clip(clip)?.ocr_words.clone().ok_or_else(|| missing("ocr", clip))
    }
}

impl AestheticScorer for PrecomputedScorers {
    fn frame_scores(&self, clip: &ClipRecord, _frames: &[u32]) -> AdapterResult<Vec<f64>> {
        self.clip(clip)?.aesthetic.clone().ok_or_else(|| missing("aesthetic", clip))
    }
}

impl TechnicalScorer for PrecomputedScorers {
    fn score(&self, clip: &ClipRecord) -> AdapterResult<f64> {
        self.clip(clip)?.technical.ok_or_else(|| missing("technical", clip))
    }
}

impl BorderProbe for PrecomputedScorers {
    fn thicknesses(
        &self,
        clip: &ClipRecord,
        _frames: &[u32],
    ) -> AdapterResult<Vec<Option<BorderThickness>>> {
        let rows = self.clip(clip)?.border.as_ref().ok_or_else(|| missing("border", clip))?;
        Ok(rows.iter().map(|r| r.map(BorderThickness::from_array)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::frame_sequence;
    use crate::synthetic::video_corpus;

    #[test]
    fn frames_split_into_labels_and_similarities() {
        let video = video_corpus(0, 1).remove(0);
        let seq = frame_sequence(&[1, 1, 0], &[0.9, 0.2]);
        let scorers = PrecomputedScorers::new(
            vec![PrecomputedFrames {
                video_id: video.video_id.clone(),
                frames: seq,
            }],
            vec![],
        );
        assert_eq!(scorers.labels(&video).unwrap(), vec![1, 1, 0]);
        assert_eq!(scorers.adjacent_similarities(&video).unwrap(), vec![0.9, 0.2]);
    }

    #[test]
    fn missing_clip_is_invalid_output() {
        let video = video_corpus(0, 1).remove(0);
        let clip = ClipRecord::new(&video, 0, 6);
        let err = PrecomputedScorers::default().score(&clip).unwrap_err();
        assert_eq!(err.kind, crate::adapters::AdapterErrorKind::InvalidOutput);
    }
}
