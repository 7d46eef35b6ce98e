//! Metadata-level medical relevance gating: keyword flagging, text
//! classification and channel expansion.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{AdapterError, TextScorer};
use crate::model::{RetryEntry, Stage, VideoRecord};

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("keyword dictionary is empty")]
    Empty,
    #[error("term {term:?} is not in canonical form (lowercase, trimmed)")]
    NotCanonical { term: String },
    #[error("term {term:?} has no alphanumeric tokens")]
    NoTokens { term: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercase alphanumeric tokens; everything else separates.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// A set of single- or multi-word medical terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordDictionary {
    terms: BTreeSet<String>,
    tokenized: Vec<Vec<String>>,
}

impl KeywordDictionary {
    pub fn new<I, S>(terms: I) -> Result<Self, DictionaryError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        for term in terms {
            let term = term.into();
            if term.trim() != term || term.to_lowercase() != term || term.is_empty() {
                return Err(DictionaryError::NotCanonical { term });
            }
            if tokenize(&term).is_empty() {
                return Err(DictionaryError::NoTokens { term });
            }
            set.insert(term);
        }
        if set.is_empty() {
            return Err(DictionaryError::Empty);
        }
        let tokenized = set.iter().map(|t| tokenize(t)).collect();
        Ok(Self {
            terms: set,
            tokenized,
        })
    }

    /// Parses the dictionary file format: one term per line, `#` comments.
    /// Lines are trimmed and lowercased.
    pub fn parse(text: &str) -> Result<Self, DictionaryError> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DictionaryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DictionaryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of terms occurring in `text` as contiguous token runs.
    pub fn count_matches(&self, text: &str) -> usize {
        let tokens = tokenize(text);
        self.tokenized
            .iter()
            .filter(|term| contains_run(&tokens, term))
            .count()
    }

    pub fn matches(&self, text: &str) -> bool {
        let tokens = tokenize(text);
        self.tokenized.iter().any(|term| contains_run(&tokens, term))
    }
}

fn contains_run(tokens: &[String], term: &[String]) -> bool {
    !term.is_empty() && tokens.windows(term.len()).any(|w| w == term)
}

/// Metadata text the gate looks at.
pub fn metadata_text(video: &VideoRecord) -> String {
    format!("{}\n{}", video.title, video.description)
}

/// True iff any dictionary term occurs in the title or description.
pub fn keyword_flag(video: &VideoRecord, dict: &KeywordDictionary) -> bool {
    dict.matches(&video.title) || dict.matches(&video.description)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// Keyword hit and classifier score both required.
    #[default]
    Conjunction,
    /// Classifier score alone decides.
    ClassifierOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelevanceConfig {
    pub threshold: f64,
    pub mode: GateMode,
    /// Send channel-expanded videos back through the classifier.
    pub regate_expanded: bool,
    /// Inline dictionary terms, used when no dictionary file is given.
    pub terms: Vec<String>,
    pub dictionary_path: Option<String>,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            mode: GateMode::Conjunction,
            regate_expanded: false,
            terms: crate::synthetic::MEDICAL_TERMS
                .iter()
                .map(|t| t.to_string())
                .collect(),
            dictionary_path: None,
        }
    }
}

impl RelevanceConfig {
    pub fn dictionary(&self) -> Result<KeywordDictionary, DictionaryError> {
        match &self.dictionary_path {
            Some(path) => KeywordDictionary::load(path),
            None => KeywordDictionary::new(self.terms.iter().cloned()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceVerdict {
    pub video_id: String,
    pub keyword_hit: bool,
    pub classifier_score: f64,
    pub accepted: bool,
}

/// Scores one video. Adapter failures are returned, never turned into a
/// rejection.
pub fn classify_relevance(
    video: &VideoRecord,
    dict: &KeywordDictionary,
    classifier: &dyn TextScorer,
    cfg: &RelevanceConfig,
) -> Result<RelevanceVerdict, AdapterError> {
    let keyword_hit = keyword_flag(video, dict);
    let classifier_score = classifier.score(video)?;
    if !(0.0..=1.0).contains(&classifier_score) {
        return Err(AdapterError::invalid_output(format!(
            "classifier score {classifier_score} outside [0, 1]"
        )));
    }
    let passes = classifier_score >= cfg.threshold;
    let accepted = match cfg.mode {
        GateMode::Conjunction => keyword_hit && passes,
        GateMode::ClassifierOnly => passes,
    };
    Ok(RelevanceVerdict {
        video_id: video.video_id.clone(),
        keyword_hit,
        classifier_score,
        accepted,
    })
}

/// All universe videos sharing a channel with an accepted video, plus the
/// accepted videos themselves. Output follows universe order, then any
/// accepted videos absent from the universe.
pub fn expand_channels(accepted: &[VideoRecord], universe: &[VideoRecord]) -> Vec<VideoRecord> {
    let channels: HashSet<&str> = accepted.iter().map(|v| v.channel_id.as_str()).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for video in universe {
        if channels.contains(video.channel_id.as_str()) && seen.insert(video.video_id.clone()) {
            out.push(video.clone());
        }
    }
    for video in accepted {
        if seen.insert(video.video_id.clone()) {
            out.push(video.clone());
        }
    }
    out
}

/// Outcome of gating a whole corpus.
#[derive(Debug, Clone, Default)]
pub struct GateOutcome {
    pub verdicts: Vec<RelevanceVerdict>,
    /// Accepted videos after channel expansion (and optional re-gating).
    pub retained: Vec<VideoRecord>,
    pub retry: Vec<RetryEntry>,
    /// Set when an adapter reported itself unavailable.
    pub fatal: Option<AdapterError>,
}

/// Keyword + classifier gating followed by channel expansion.
pub fn gate_corpus(
    videos: &[VideoRecord],
    dict: &KeywordDictionary,
    classifier: &dyn TextScorer,
    cfg: &RelevanceConfig,
) -> GateOutcome {
    let mut outcome = GateOutcome::default();
    let mut scored = Vec::new();
    for video in videos {
        match classify_relevance(video, dict, classifier, cfg) {
            Ok(verdict) => {
                scored.push((video, verdict.accepted));
                outcome.verdicts.push(verdict);
            }
            Err(err) if err.is_fatal() => {
                outcome.fatal = Some(err);
                return outcome;
            }
            Err(err) => outcome.retry.push(RetryEntry {
                video_id: video.video_id.clone(),
                stage: Stage::Relevance,
                error: err.to_string(),
            }),
        }
    }
    let universe: Vec<VideoRecord> = scored.iter().map(|(v, _)| (*v).clone()).collect();
    let accepted: Vec<VideoRecord> = scored
        .iter()
        .filter(|(_, ok)| *ok)
        .map(|(v, _)| (*v).clone())
        .collect();
    let expanded = expand_channels(&accepted, &universe);
    outcome.retained = if cfg.regate_expanded {
        let accepted_ids: HashSet<&str> = accepted.iter().map(|v| v.video_id.as_str()).collect();
        let by_id: std::collections::HashMap<&str, &RelevanceVerdict> = outcome
            .verdicts
            .iter()
            .map(|v| (v.video_id.as_str(), v))
            .collect();
        expanded
            .into_iter()
            .filter(|v| {
                accepted_ids.contains(v.video_id.as_str())
                    || by_id
                        .get(v.video_id.as_str())
                        .is_some_and(|verdict| verdict.classifier_score >= cfg.threshold)
            })
            .collect()
    } else {
        expanded
    };
    outcome
}
