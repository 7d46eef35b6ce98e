//! Seeded synthetic adapters. Every output is a pure function of the seed and
//! the record identifiers, so runs are reproducible without any model.

use crate::adapters::{
    AdapterError, AdapterResult, AestheticScorer, BorderProbe, ChatTurn, FrameClassifier,
    FrameEmbedder, FrameRef, MllmAdapter, OcrScorer, TechnicalScorer, TextScorer,
};
use crate::filter::BorderThickness;
use crate::fingerprint::{derive_u64, derive_unit};
use crate::model::{ClipRecord, VideoRecord};

const VOCAB: &[&str] = &[
    "the", "surgeon", "patient", "incision", "retractor", "laparoscopic", "camera", "tissue",
    "gloved", "hands", "instrument", "sterile", "field", "suture", "needle", "anatomy",
    "organ", "vessel", "clinician", "demonstrates", "monitor", "displays", "ultrasound",
    "probe", "image", "cross-section", "animation", "shows", "heart", "valve", "blood",
    "flow", "lecture", "slide", "diagram", "nurse", "prepares", "syringe", "dose", "of",
    "and", "with", "a", "in", "on", "while", "carefully", "scene", "operating", "room",
];

#[derive(Debug, Clone, Copy)]
pub struct SyntheticScorers {
    seed: u64,
}

impl SyntheticScorers {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn unit(&self, parts: &[&str]) -> f64 {
        derive_unit(self.seed, parts)
    }

    fn words(&self, key: &str, count: usize) -> String {
        (0..count)
            .map(|j| {
                let pick = derive_u64(self.seed, &["word", key, &j.to_string()]);
                VOCAB[(pick % VOCAB.len() as u64) as usize]
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl TextScorer for SyntheticScorers {
    fn score(&self, video: &VideoRecord) -> AdapterResult<f64> {
        Ok(0.25 + 0.75 * self.unit(&["text", &video.video_id]))
    }
}

impl FrameClassifier for SyntheticScorers {
    fn labels(&self, video: &VideoRecord) -> AdapterResult<Vec<u8>> {
        Ok((0..video.grid_frames())
            .map(|i| {
                let u = self.unit(&["label", &video.video_id, &i.to_string()]);
                u8::from(u >= 0.05)
            })
            .collect())
    }
}

impl FrameEmbedder for SyntheticScorers {
    fn adjacent_similarities(&self, video: &VideoRecord) -> AdapterResult<Vec<f64>> {
        Ok((1..video.grid_frames())
            .map(|i| {
                let i = i.to_string();
                let cut = self.unit(&["cut", &video.video_id, &i]);
                let u = self.unit(&["sim", &video.video_id, &i]);
                if cut < 0.05 {
                    0.3 + 0.3 * u
                } else {
                    0.97 - 0.1 * u
                }
            })
            .collect())
    }
}

impl OcrScorer for SyntheticScorers {
    fn word_counts(&self, clip: &ClipRecord, frames: &[u32]) -> AdapterResult<Vec<u32>> {
        let subtitled = self.unit(&["subs", &clip.clip_id]) < 0.12;
        Ok(frames
            .iter()
            .map(|f| {
                let u = self.unit(&["ocr", &clip.clip_id, &f.to_string()]);
                if subtitled {
                    3 + (u * 6.0) as u32
                } else if u < 0.85 {
                    (u / 0.85 * 3.0) as u32
                } else {
                    (u * 6.0) as u32
                }
            })
            .collect())
    }
}

impl AestheticScorer for SyntheticScorers {
    fn frame_scores(&self, clip: &ClipRecord, frames: &[u32]) -> AdapterResult<Vec<f64>> {
        let base = 2.0 + 5.5 * self.unit(&["aesthetic", &clip.clip_id]);
        Ok(frames
            .iter()
            .map(|f| {
                let jitter = self.unit(&["aesthetic", &clip.clip_id, &f.to_string()]) - 0.5;
                (base + jitter).clamp(0.0, 10.0)
            })
            .collect())
    }
}

impl TechnicalScorer for SyntheticScorers {
    fn score(&self, clip: &ClipRecord) -> AdapterResult<f64> {
        Ok(-0.9 + 1.3 * self.unit(&["technical", &clip.clip_id]))
    }
}

impl BorderProbe for SyntheticScorers {
    fn thicknesses(
        &self,
        clip: &ClipRecord,
        frames: &[u32],
    ) -> AdapterResult<Vec<Option<BorderThickness>>> {
        let persistent = self.unit(&["border", &clip.clip_id]) < 0.1;
        let side = (self.unit(&["border-side", &clip.clip_id]) * 4.0) as usize;
        let thickness = 10 + (self.unit(&["border-px", &clip.clip_id]) * 30.0) as u32;
        Ok(frames
            .iter()
            .map(|f| {
                let f = f.to_string();
                if self.unit(&["decode", &clip.clip_id, &f]) < 0.01 {
                    return None;
                }
                let transient = self.unit(&["border-frame", &clip.clip_id, &f]) < 0.05;
                let mut sides = [0u32; 4];
                if persistent {
                    sides[side] = thickness;
                } else if transient {
                    sides[side] = 10;
                }
                Some(BorderThickness::from_array(sides))
            })
            .collect())
    }
}

impl MllmAdapter for SyntheticScorers {
    fn model_id(&self) -> &str {
        "synthetic-mllm"
    }

    fn complete(&self, frames: &[FrameRef], turns: &[ChatTurn]) -> AdapterResult<String> {
        let first = turns
            .first()
            .ok_or_else(|| AdapterError::invalid_output("empty conversation"))?;
        let mut key = first.text.clone();
        for f in frames {
            key.push_str(&format!("|{}@{}", f.media_path, f.frame_index));
        }
        let key = hex_key(&key);
        if turns.len() >= 3 {
            let n = 15 + (self.unit(&["brief", &key]) * 25.0) as usize;
            Ok(self.words(&format!("brief:{key}"), n))
        } else {
            let n = 120 + (self.unit(&["detailed", &key]) * 110.0) as usize;
            Ok(self.words(&format!("detailed:{key}"), n))
        }
    }
}

fn hex_key(text: &str) -> String {
    format!("{:016x}", derive_u64(0, &[text]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::Role;
    use crate::synthetic::video_corpus;

    #[test]
    fn deterministic_per_seed() {
        let video = &video_corpus(1, 1)[0];
        let a = SyntheticScorers::new(5);
        let b = SyntheticScorers::new(5);
        let c = SyntheticScorers::new(6);
        assert_eq!(a.labels(video).unwrap(), b.labels(video).unwrap());
        assert_ne!(
            a.adjacent_similarities(video).unwrap(),
            c.adjacent_similarities(video).unwrap()
        );
    }

    #[test]
    fn similarities_have_one_fewer_entry() {
        let video = &video_corpus(3, 1)[0];
        let s = SyntheticScorers::new(0);
        let labels = s.labels(video).unwrap();
        let sims = s.adjacent_similarities(video).unwrap();
        assert_eq!(sims.len() + 1, labels.len());
        assert!(sims.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn brief_is_shorter_than_detailed() {
        let s = SyntheticScorers::new(0);
        let frames = vec![
            FrameRef {
                media_path: "a.mp4".into(),
                frame_index: 0
            };
            8
        ];
        let mut turns = vec![ChatTurn {
            role: Role::User,
            text: "describe".into(),
        }];
        let detailed = s.complete(&frames, &turns).unwrap();
        turns.push(ChatTurn {
            role: Role::Assistant,
            text: detailed.clone(),
        });
        turns.push(ChatTurn {
            role: Role::User,
            text: "summarize".into(),
        });
        let brief = s.complete(&frames, &turns).unwrap();
        assert!(brief.split_whitespace().count() < detailed.split_whitespace().count());
    }
}
