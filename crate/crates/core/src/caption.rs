//! Caption generation: the fixed two-turn MLLM exchange over 8 uniformly
//! sampled frames, producing a detailed and a brief caption.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{AdapterError, AdapterErrorKind, ChatTurn, FrameRef, MllmAdapter, Role};
use crate::model::{ClipRecord, VideoRecord};
use crate::sampling::uniform_indices;

/// Detailed-caption prompt with `{Video Title}`, `{Video Description}` and
/// `{Clip Transcript}` placeholders.
pub const DETAILED_TEMPLATE: &str = include_str!("../prompts/detailed.txt");

/// Follow-up turn that asks for the brief caption.
pub const BRIEF_INSTRUCTION: &str = include_str!("../prompts/brief.txt");

pub const CAPTION_FRAMES: usize = 8;

const TITLE: &str = "{Video Title}";
const DESCRIPTION: &str = "{Video Description}";
const TRANSCRIPT: &str = "{Clip Transcript}";

#[derive(Clone, Copy)]
enum Slot {
    Title,
    Description,
    Transcript,
}

// Template split into (literal, slot) pairs plus a trailing literal.
struct Template {
    parts: Vec<(&'static str, Slot)>,
    tail: &'static str,
}

fn template() -> &'static Template {
    static PARSED: OnceLock<Template> = OnceLock::new();
    PARSED.get_or_init(|| {
        let mut slots: Vec<(usize, &str, Slot)> = [
            (TITLE, Slot::Title),
            (DESCRIPTION, Slot::Description),
            (TRANSCRIPT, Slot::Transcript),
        ]
        .into_iter()
        .map(|(ph, slot)| {
            let at = DETAILED_TEMPLATE
                .find(ph)
                .unwrap_or_else(|| panic!("template lacks {ph}"));
            (at, ph, slot)
        })
        .collect();
        slots.sort_by_key(|(at, _, _)| *at);
        let mut parts = Vec::new();
        let mut cursor = 0;
        for (at, ph, slot) in slots {
            parts.push((&DETAILED_TEMPLATE[cursor..at], slot));
            cursor = at + ph.len();
        }
        Template {
            parts,
            tail: &DETAILED_TEMPLATE[cursor..],
        }
    })
}

/// Fills the detailed-caption template. Each placeholder is substituted
/// exactly once; placeholder text inside the values is left as is.
pub fn build_prompt(title: &str, description: &str, transcript: &str) -> String {
    let t = template();
    let mut out = String::with_capacity(
        DETAILED_TEMPLATE.len() + title.len() + description.len() + transcript.len(),
    );
    for (literal, slot) in &t.parts {
        out.push_str(literal);
        out.push_str(match slot {
            Slot::Title => title,
            Slot::Description => description,
            Slot::Transcript => transcript,
        });
    }
    out.push_str(t.tail);
    out
}

/// Eight grid indices spread uniformly over the clip, endpoints included.
pub fn sample_caption_frames(clip: &ClipRecord) -> Vec<u32> {
    uniform_indices(clip.start_index, clip.end_index, CAPTION_FRAMES)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub clip_id: String,
    pub frame_refs: Vec<FrameRef>,
    pub title: String,
    pub description: String,
    pub transcript: String,
    pub prompt_text: String,
}

impl CaptionRequest {
    pub fn for_clip(clip: &ClipRecord, video: &VideoRecord) -> Self {
        let transcript = video.transcript.clone().unwrap_or_default();
        Self {
            clip_id: clip.clip_id.clone(),
            frame_refs: sample_caption_frames(clip)
                .into_iter()
                .map(|frame_index| FrameRef {
                    media_path: video.media_path.clone(),
                    frame_index,
                })
                .collect(),
            prompt_text: build_prompt(&video.title, &video.description, &transcript),
            title: video.title.clone(),
            description: video.description.clone(),
            transcript,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionResult {
    pub clip_id: String,
    pub detailed_caption: String,
    pub brief_caption: String,
    pub model_id: String,
    pub attempt: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionFailureKind {
    Transport,
    InvalidOutput,
}

/// A clip whose captioning exhausted its attempts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("clip {clip_id}: captioning failed after {attempts} attempts ({kind:?}): {message}")]
pub struct CaptionFailure {
    pub clip_id: String,
    pub attempts: u32,
    pub kind: CaptionFailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CaptionError {
    #[error(transparent)]
    Exhausted(#[from] CaptionFailure),
    #[error("captioning halted: {0}")]
    Halted(AdapterError),
}

fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn check_pair(detailed: &str, brief: &str) -> Result<(), String> {
    let (d, b) = (word_count(detailed), word_count(brief));
    if d == 0 {
        return Err("empty detailed caption".into());
    }
    if b == 0 {
        return Err("empty brief caption".into());
    }
    if b >= d {
        return Err(format!("brief caption ({b} words) not shorter than detailed ({d} words)"));
    }
    Ok(())
}

/// Runs the detailed turn then the brief follow-up, retrying the whole
/// exchange up to `retries` more times on transport failures or invalid
/// output.
pub fn generate_captions(
    request: &CaptionRequest,
    mllm: &dyn MllmAdapter,
    retries: u32,
) -> Result<CaptionResult, CaptionError> {
    let mut last = (CaptionFailureKind::InvalidOutput, String::new());
    for attempt in 1..=retries + 1 {
        match exchange(request, mllm) {
            Ok((detailed, brief)) => match check_pair(&detailed, &brief) {
                Ok(()) => {
                    return Ok(CaptionResult {
                        clip_id: request.clip_id.clone(),
                        detailed_caption: detailed.trim().to_string(),
                        brief_caption: brief.trim().to_string(),
                        model_id: mllm.model_id().to_string(),
                        attempt,
                    })
                }
                Err(msg) => last = (CaptionFailureKind::InvalidOutput, msg),
            },
            Err(e) if e.is_fatal() => return Err(CaptionError::Halted(e)),
            Err(e) => {
                let kind = match e.kind {
                    AdapterErrorKind::Transport => CaptionFailureKind::Transport,
                    _ => CaptionFailureKind::InvalidOutput,
                };
                last = (kind, e.message);
            }
        }
    }
    Err(CaptionError::Exhausted(CaptionFailure {
        clip_id: request.clip_id.clone(),
        attempts: retries + 1,
        kind: last.0,
        message: last.1,
    }))
}

fn exchange(request: &CaptionRequest, mllm: &dyn MllmAdapter) -> Result<(String, String), AdapterError> {
    let mut turns = vec![ChatTurn {
        role: Role::User,
        text: request.prompt_text.clone(),
    }];
    let detailed = mllm.complete(&request.frame_refs, &turns)?;
    turns.push(ChatTurn {
        role: Role::Assistant,
        text: detailed.clone(),
    });
    turns.push(ChatTurn {
        role: Role::User,
        text: BRIEF_INSTRUCTION.to_string(),
    });
    let brief = mllm.complete(&request.frame_refs, &turns)?;
    Ok((detailed, brief))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptionConfig {
    pub retries: u32,
}

impl Default for CaptionConfig {
    fn default() -> Self {
        Self { retries: 2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::AdapterResult;
    use std::sync::Mutex;

    #[test]
    fn empty_substitutions_leave_template_intact() {
        let expected = DETAILED_TEMPLATE
            .replace(TITLE, "")
            .replace(DESCRIPTION, "")
            .replace(TRANSCRIPT, "");
        assert_eq!(build_prompt("", "", ""), expected);
    }

    #[test]
    fn values_land_at_anchors() {
        let p = build_prompt("X", "Y", "Z");
        assert!(p.contains("Video Title: X\n"));
        assert!(p.contains("Video Description: Y\n"));
        assert!(p.contains("as follows:\n\nZ\n\nUsing the visual content"));
    }

    #[test]
    fn no_recursive_substitution() {
        let p = build_prompt("{Video Title}", "{Clip Transcript}", "t");
        assert!(p.contains("Video Title: {Video Title}\n"));
        assert!(p.contains("Video Description: {Clip Transcript}\n"));
        assert_eq!(p.matches("{Video Title}").count(), 1);
    }

    #[test]
    fn caption_frames() {
        let video = crate::synthetic::video_corpus(0, 1).remove(0);
        let clip = ClipRecord::new(&video, 0, 14);
        assert_eq!(sample_caption_frames(&clip), vec![0, 2, 4, 6, 8, 10, 12, 14]);
        let short = ClipRecord::new(&video, 0, 6);
        let idx = sample_caption_frames(&short);
        assert_eq!(idx.len(), 8);
        assert_eq!(idx.windows(2).filter(|w| w[0] == w[1]).count(), 1);
    }

    /// Detailed turn returns `detailed`; brief turns pop from a script.
    struct Scripted {
        detailed: String,
        briefs: Mutex<Vec<AdapterResult<String>>>,
    }

    impl Scripted {
        fn new(briefs: Vec<AdapterResult<String>>) -> Self {
            Self {
                detailed: "a surgeon closes the incision with interrupted sutures".into(),
                briefs: Mutex::new(briefs.into_iter().rev().collect()),
            }
        }
    }

    impl MllmAdapter for Scripted {
        fn model_id(&self) -> &str {
            "scripted"
        }

        fn complete(&self, frames: &[FrameRef], turns: &[ChatTurn]) -> AdapterResult<String> {
            assert_eq!(frames.len(), CAPTION_FRAMES);
            if turns.len() == 1 {
                return Ok(self.detailed.clone());
            }
            assert_eq!(turns[2].text, BRIEF_INSTRUCTION);
            self.briefs.lock().unwrap().pop().unwrap_or(Ok(String::new()))
        }
    }

    fn request() -> CaptionRequest {
        let video = crate::synthetic::video_corpus(0, 1).remove(0);
        CaptionRequest::for_clip(&ClipRecord::new(&video, 0, 10), &video)
    }

    #[test]
    fn echo_adapter_succeeds_first_try() {
        let adapter = Scripted::new(vec![Ok("wound closure".into())]);
        let r = generate_captions(&request(), &adapter, 2).unwrap();
        assert_eq!(r.attempt, 1);
        assert_eq!(r.brief_caption, "wound closure");
        assert_eq!(r.model_id, "scripted");
    }

    #[test]
    fn retries_until_valid() {
        let adapter = Scripted::new(vec![Ok("".into()), Ok(" ".into()), Ok("closure".into())]);
        let r = generate_captions(&request(), &adapter, 2).unwrap();
        assert_eq!(r.attempt, 3);
    }

    #[test]
    fn exhausted_retries_report_failure() {
        let adapter = Scripted::new(vec![]);
        match generate_captions(&request(), &adapter, 2).unwrap_err() {
            CaptionError::Exhausted(f) => {
                assert_eq!(f.attempts, 3);
                assert_eq!(f.kind, CaptionFailureKind::InvalidOutput);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn transport_failures_are_distinguished() {
        let adapter = Scripted::new(vec![Err(AdapterError::transport("reset")); 3]);
        match generate_captions(&request(), &adapter, 2).unwrap_err() {
            CaptionError::Exhausted(f) => assert_eq!(f.kind, CaptionFailureKind::Transport),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn brief_not_shorter_is_invalid() {
        let adapter = Scripted::new(vec![Ok(
            "a surgeon closes the incision with interrupted sutures again".into(),
        )]);
        assert!(generate_captions(&request(), &adapter, 0).is_err());
    }

    #[test]
    fn unavailable_adapter_halts() {
        let adapter = Scripted::new(vec![Err(AdapterError::unavailable("down"))]);
        assert!(matches!(
            generate_captions(&request(), &adapter, 5),
            Err(CaptionError::Halted(_))
        ));
    }
}
