//! Pluggable scorers that supply ML-derived signals to the pure pipeline
//! logic. Every adapter must be deterministic for a fixed input and
//! configuration.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::BorderThickness;
use crate::model::{ClipRecord, VideoRecord};

pub mod precomputed;
pub mod synthetic;

pub use precomputed::{PrecomputedClipScores, PrecomputedFrames, PrecomputedScorers};
pub use synthetic::SyntheticScorers;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterErrorKind {
    /// The call did not complete (network, process, timeout).
    Transport,
    /// The call completed but returned unusable output.
    InvalidOutput,
    /// The adapter cannot serve any request; the stage must halt.
    Unavailable,
}

impl fmt::Display for AdapterErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdapterErrorKind::Transport => "transport",
            AdapterErrorKind::InvalidOutput => "invalid_output",
            AdapterErrorKind::Unavailable => "unavailable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind}: {message}")]
pub struct AdapterError {
    pub kind: AdapterErrorKind,
    pub message: String,
}

impl AdapterError {
    pub fn transport(message: impl Into<String>) -> Self {
        Self {
            kind: AdapterErrorKind::Transport,
            message: message.into(),
        }
    }

    pub fn invalid_output(message: impl Into<String>) -> Self {
        Self {
            kind: AdapterErrorKind::InvalidOutput,
            message: message.into(),
        }
    }

    pub fn unavailable(message: impl Into<String>) -> Self {
        Self {
            kind: AdapterErrorKind::Unavailable,
            message: message.into(),
        }
    }

    pub fn is_fatal(&self) -> bool {
        self.kind == AdapterErrorKind::Unavailable
    }
}

pub type AdapterResult<T> = Result<T, AdapterError>;

/// Probability that a video's metadata text is medical.
pub trait TextScorer: Send + Sync {
    fn score(&self, video: &VideoRecord) -> AdapterResult<f64>;
}

/// Medical / non-medical label for every 1-FPS frame of a video.
pub trait FrameClassifier: Send + Sync {
    fn labels(&self, video: &VideoRecord) -> AdapterResult<Vec<u8>>;
}

/// Similarity of each frame to its predecessor; `n - 1` values for `n` frames.
pub trait FrameEmbedder: Send + Sync {
    fn adjacent_similarities(&self, video: &VideoRecord) -> AdapterResult<Vec<f64>>;
}

/// Detected word count for each requested frame.
pub trait OcrScorer: Send + Sync {
    fn word_counts(&self, clip: &ClipRecord, frames: &[u32]) -> AdapterResult<Vec<u32>>;
}

/// Aesthetic score in `[0, 10]` for each requested frame.
pub trait AestheticScorer: Send + Sync {
    fn frame_scores(&self, clip: &ClipRecord, frames: &[u32]) -> AdapterResult<Vec<f64>>;
}

/// Clip-level technical-quality score; higher is treated as worse.
pub trait TechnicalScorer: Send + Sync {
    fn score(&self, clip: &ClipRecord) -> AdapterResult<f64>;
}

/// Per-frame border thicknesses; `None` marks a frame that failed to decode.
pub trait BorderProbe: Send + Sync {
    fn thicknesses(
        &self,
        clip: &ClipRecord,
        frames: &[u32],
    ) -> AdapterResult<Vec<Option<BorderThickness>>>;
}

/// A frame handed to the captioning model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub media_path: String,
    pub frame_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub text: String,
}

/// Multimodal LLM: images plus a conversation in, text out.
pub trait MllmAdapter: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, frames: &[FrameRef], turns: &[ChatTurn]) -> AdapterResult<String>;
}

/// The full adapter set a pipeline run needs.
#[derive(Clone)]
pub struct Scorers {
    pub text: Arc<dyn TextScorer>,
    pub frame_classifier: Arc<dyn FrameClassifier>,
    pub frame_embedder: Arc<dyn FrameEmbedder>,
    pub ocr: Arc<dyn OcrScorer>,
    pub aesthetic: Arc<dyn AestheticScorer>,
    pub technical: Arc<dyn TechnicalScorer>,
    pub border: Arc<dyn BorderProbe>,
    pub mllm: Arc<dyn MllmAdapter>,
}

impl Scorers {
    /// Every role served by seeded synthetic adapters.
    pub fn synthetic(seed: u64) -> Self {
        let s = Arc::new(SyntheticScorers::new(seed));
        Self {
            text: s.clone(),
            frame_classifier: s.clone(),
            frame_embedder: s.clone(),
            ocr: s.clone(),
            aesthetic: s.clone(),
            technical: s.clone(),
            border: s.clone(),
            mllm: s,
        }
    }
}

impl fmt::Debug for Scorers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scorers")
            .field("mllm", &self.mllm.model_id())
            .finish_non_exhaustive()
    }
}
