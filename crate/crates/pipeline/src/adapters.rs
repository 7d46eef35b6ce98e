//! Adapter selection for CLI runs.

use std::path::PathBuf;
use std::sync::Arc;

use medcurate::adapters::precomputed::PrecomputedScorers;
use medcurate::adapters::Scorers;
use medcurate::fingerprint::fingerprint;
use medcurate::manifest::ManifestError;

/// Seeded synthetic adapters, optionally overridden by precomputed frame
/// analyses (classifier and embedder roles) and clip scores (OCR,
/// aesthetic, technical and border roles).
#[derive(Debug, Clone, Default)]
pub struct AdapterChoice {
    pub seed: u64,
    pub frames: Option<PathBuf>,
    pub clip_scores: Option<PathBuf>,
}

impl AdapterChoice {
    /// The scorer set plus a string identifying it in checkpoint keys.
    pub fn build(&self) -> Result<(Scorers, String), ManifestError> {
        let mut scorers = Scorers::synthetic(self.seed);
        let mut id = format!("synthetic:{}", self.seed);
        let digest = |path: &PathBuf| -> Result<String, ManifestError> {
            let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(fingerprint(&text))
        };
        if let Some(path) = &self.frames {
            let p = Arc::new(PrecomputedScorers::load_frames(path)?);
            scorers.frame_classifier = p.clone();
            scorers.frame_embedder = p;
            id.push_str(&format!(";frames:{}", digest(path)?));
        }
        if let Some(path) = &self.clip_scores {
            let p = Arc::new(PrecomputedScorers::load_clip_scores(path)?);
            scorers.ocr = p.clone();
            scorers.aesthetic = p.clone();
            scorers.technical = p.clone();
            scorers.border = p;
            id.push_str(&format!(";clips:{}", digest(path)?));
        }
        Ok((scorers, id))
    }
}
