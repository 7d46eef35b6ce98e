//! Sessions and the append-only rating store behind the review service.
//!
//! All mutations go through [`Store`] methods, which the service calls with
//! the store lock held, so ratings are written by a single writer in arrival
//! order.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use medcurate::eval::{
    distortion_report, pairwise_tally, qa_gate, BlindingMap, Dimension, DistortionLevel,
    DistortionReport, EvalError, GateResult, PairChoice, PairwiseTally, QaConfig, QaLevel,
    QaSample, RatingKind, RatingRecord, RatingValue,
};
use medcurate::fingerprint::fingerprint;
use medcurate::manifest::{append_jsonl, read_jsonl, to_canonical_line, write_atomic, ManifestError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DISTORTION_RATERS: usize = 3;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn invalid(field: &str, message: impl Into<String>) -> StoreError {
    StoreError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionItem {
    pub item_id: String,
    /// Media file for single-clip items; defaults to the clip's source video.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<String>,
    /// Generation prompt shown with pairwise items.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_y: Option<String>,
}

/// Body of `POST /api/sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub session_id: Option<String>,
    pub kind: RatingKind,
    pub items: Vec<SessionItem>,
    #[serde(default)]
    pub seed: u64,
    /// Pipeline stage a QA session covers.
    #[serde(default)]
    pub stage: Option<String>,
    #[serde(default)]
    pub model_x: Option<String>,
    #[serde(default)]
    pub model_y: Option<String>,
    #[serde(default)]
    pub required_raters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub kind: RatingKind,
    pub items: Vec<SessionItem>,
    pub seed: u64,
    #[serde(default)]
    pub stage: Option<String>,
    pub required_raters: usize,
    #[serde(default)]
    pub blinding: Option<BlindingMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Complete,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '#'))
}

impl Session {
    pub fn create(req: CreateSession) -> Result<Self, StoreError> {
        if req.items.is_empty() {
            return Err(invalid("items", "a session needs at least one item"));
        }
        let mut seen = HashSet::new();
        for item in &req.items {
            if !valid_id(&item.item_id) {
                return Err(invalid("items.item_id", format!("invalid item id {:?}", item.item_id)));
            }
            if !seen.insert(item.item_id.as_str()) {
                return Err(invalid("items.item_id", format!("duplicate item {}", item.item_id)));
            }
        }
        let required_raters = match (req.kind, req.required_raters) {
            (RatingKind::Distortion, None | Some(DISTORTION_RATERS)) => DISTORTION_RATERS,
            (RatingKind::Distortion, Some(n)) => {
                return Err(invalid(
                    "required_raters",
                    format!("distortion sessions use exactly {DISTORTION_RATERS} raters, got {n}"),
                ))
            }
            (_, Some(0)) => return Err(invalid("required_raters", "must be at least 1")),
            (_, Some(n)) => n,
            (_, None) => 1,
        };
        let blinding = if req.kind == RatingKind::Pairwise {
            let (Some(x), Some(y)) = (&req.model_x, &req.model_y) else {
                return Err(invalid("model_x", "pairwise sessions name model_x and model_y"));
            };
            if x.is_empty() || x == y {
                return Err(invalid("model_y", "the two models must be distinct and named"));
            }
            for item in &req.items {
                if item.media_x.is_none() || item.media_y.is_none() {
                    return Err(invalid(
                        "items.media_x",
                        format!("item {} needs media_x and media_y", item.item_id),
                    ));
                }
                if item.media.is_some() {
                    return Err(invalid("items.media", "pairwise items use media_x/media_y"));
                }
            }
            let ids: Vec<String> = req.items.iter().map(|i| i.item_id.clone()).collect();
            Some(BlindingMap::randomized(x, y, &ids, req.seed))
        } else {
            if req.model_x.is_some() || req.model_y.is_some() {
                return Err(invalid("model_x", "only pairwise sessions name models"));
            }
            if let Some(item) = req.items.iter().find(|i| i.media_x.is_some() || i.media_y.is_some()) {
                return Err(invalid(
                    "items.media_x",
                    format!("item {} is not a pairwise item", item.item_id),
                ));
            }
            None
        };
        let session_id = match &req.session_id {
            Some(id) if valid_id(id) && !id.contains('#') => id.clone(),
            Some(id) => return Err(invalid("session_id", format!("invalid session id {id:?}"))),
            None => format!("s{}", fingerprint(&req)),
        };
        Ok(Self {
            session_id,
            kind: req.kind,
            items: req.items,
            seed: req.seed,
            stage: req.stage,
            required_raters,
            blinding,
        })
    }

    pub fn item(&self, index: usize) -> Option<&SessionItem> {
        self.items.get(index)
    }

    pub fn item_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.item_id.clone()).collect()
    }

    /// Opaque media token for one media slot (`A`, `B` or `clip`) of an item.
    pub fn alias(&self, item_id: &str, slot: &str) -> String {
        format!("m{}", fingerprint(&[&self.session_id, item_id, slot, "media"]))
    }

    /// Media paths shown on side A and side B of a pairwise item.
    pub fn sides<'a>(&self, item: &'a SessionItem) -> Option<(&'a str, &'a str)> {
        let map = self.blinding.as_ref()?;
        let (x, y) = (item.media_x.as_deref()?, item.media_y.as_deref()?);
        let (on_a, _) = map.models_for(&item.item_id)?;
        Some(if on_a == map.model_x { (x, y) } else { (y, x) })
    }

    /// Alias token to media path for every explicit media reference.
    pub fn media_aliases(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for item in &self.items {
            if let Some((a, b)) = self.sides(item) {
                out.push((self.alias(&item.item_id, "A"), a.to_string()));
                out.push((self.alias(&item.item_id, "B"), b.to_string()));
            } else if let Some(media) = &item.media {
                out.push((self.alias(&item.item_id, "clip"), media.clone()));
            }
        }
        out
    }
}

/// A rater's submission for one item.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingSubmission {
    #[serde(default)]
    pub value: Option<serde_json::Value>,
    #[serde(default)]
    pub choices: Option<BTreeMap<String, serde_json::Value>>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(
    field: &str,
    value: &serde_json::Value,
    allowed: &str,
) -> Result<T, StoreError> {
    serde_json::from_value(value.clone())
        .map_err(|_| invalid(field, format!("{value} is not one of {allowed}")))
}

impl RatingSubmission {
    /// Rating values for a session kind; pairwise yields one per dimension.
    pub fn values(&self, kind: RatingKind) -> Result<Vec<RatingValue>, StoreError> {
        match kind {
            RatingKind::StageQa | RatingKind::Distortion => {
                if self.choices.is_some() {
                    return Err(invalid("choices", "only pairwise ratings carry choices"));
                }
                let value = self.value.as_ref().ok_or_else(|| invalid("value", "missing"))?;
                Ok(vec![if kind == RatingKind::StageQa {
                    RatingValue::StageQa {
                        value: parse_enum::<QaLevel>("value", value, "clean, slightly_noisy, noisy")?,
                    }
                } else {
                    RatingValue::Distortion {
                        value: parse_enum::<DistortionLevel>(
                            "value",
                            value,
                            "none, minor, moderate, severe",
                        )?,
                    }
                }])
            }
            RatingKind::Pairwise => {
                if self.value.is_some() {
                    return Err(invalid("value", "pairwise ratings use choices"));
                }
                let choices = self.choices.as_ref().ok_or_else(|| invalid("choices", "missing"))?;
                for key in choices.keys() {
                    if !Dimension::ALL.iter().any(|d| d.as_str() == key) {
                        return Err(invalid(&format!("choices.{key}"), "unknown dimension"));
                    }
                }
                Dimension::ALL
                    .iter()
                    .map(|&dimension| {
                        let field = format!("choices.{}", dimension.as_str());
                        let raw = choices.get(dimension.as_str()).ok_or_else(|| invalid(&field, "missing"))?;
                        let value = parse_enum::<PairChoice>(&field, raw, "A, B, both_loss")?;
                        Ok(RatingValue::Pairwise { dimension, value })
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionReport {
    StageQa {
        status: SessionStatus,
        gate: Option<GateResult>,
        unrated: Vec<String>,
    },
    Distortion {
        status: SessionStatus,
        report: DistortionReport,
    },
    Pairwise {
        status: SessionStatus,
        tally: PairwiseTally,
    },
}

pub struct Store {
    dir: PathBuf,
    sessions: BTreeMap<String, Session>,
    ratings: Vec<RatingRecord>,
    rated: HashSet<(String, String, String)>,
}

impl Store {
    /// Opens (or initializes) a store under `dir`: `sessions/*.json` and
    /// `ratings.jsonl`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        let mut store = Self {
            dir,
            sessions: BTreeMap::new(),
            ratings: Vec::new(),
            rated: HashSet::new(),
        };
        let session_dir = store.dir.join("sessions");
        if let Ok(entries) = fs::read_dir(&session_dir) {
            let mut paths: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            for path in paths {
                let text = fs::read_to_string(&path).map_err(|source| ManifestError::Io {
                    path: path.clone(),
                    source,
                })?;
                let session: Session = serde_json::from_str(&text).map_err(|source| {
                    ManifestError::Parse {
                        path: path.clone(),
                        line: 1,
                        source,
                    }
                })?;
                store.sessions.insert(session.session_id.clone(), session);
            }
        }
        let ratings_path = store.ratings_path();
        if ratings_path.exists() {
            for record in read_jsonl::<RatingRecord>(&ratings_path)? {
                store.rated.insert(Self::rated_key(&record));
                store.ratings.push(record);
            }
        }
        Ok(store)
    }

    pub fn ratings_path(&self) -> PathBuf {
        self.dir.join("ratings.jsonl")
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.dir.join("sessions").join(format!("{id}.json"))
    }

    fn rated_key(r: &RatingRecord) -> (String, String, String) {
        (r.session_id.clone(), r.item_id.clone(), r.rater_id.clone())
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn session(&self, id: &str) -> Result<&Session, StoreError> {
        self.sessions
            .get(id)
            .ok_or_else(|| StoreError::NotFound(format!("unknown session {id}")))
    }

    pub fn create_session(&mut self, req: CreateSession) -> Result<&Session, StoreError> {
        let session = Session::create(req)?;
        let id = session.session_id.clone();
        if self.sessions.contains_key(&id) {
            return Err(StoreError::Conflict(format!("session {id} already exists")));
        }
        let mut text = to_canonical_line(&session).map_err(|e| ManifestError::Unserializable {
            id: id.clone(),
            reason: e.to_string(),
        })?;
        text.push('\n');
        write_atomic(&self.session_path(&id), text.as_bytes())?;
        Ok(self.sessions.entry(id).or_insert(session))
    }

    pub fn session_ratings(&self, id: &str) -> Vec<RatingRecord> {
        self.ratings
            .iter()
            .filter(|r| r.session_id == id)
            .cloned()
            .collect()
    }

    /// Distinct raters who have rated each item.
    pub fn raters_per_item(&self, session: &Session) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = session
            .items
            .iter()
            .map(|i| (i.item_id.clone(), BTreeSet::new()))
            .collect();
        for r in self.ratings.iter().filter(|r| r.session_id == session.session_id) {
            if let Some(set) = out.get_mut(&r.item_id) {
                set.insert(r.rater_id.clone());
            }
        }
        out
    }

    pub fn status(&self, session: &Session) -> SessionStatus {
        let complete = self
            .raters_per_item(session)
            .values()
            .all(|raters| raters.len() >= session.required_raters);
        if complete {
            SessionStatus::Complete
        } else {
            SessionStatus::Open
        }
    }

    /// Items rated per rater.
    pub fn progress(&self, session: &Session) -> BTreeMap<String, usize> {
        let mut out: BTreeMap<String, usize> = BTreeMap::new();
        for raters in self.raters_per_item(session).values() {
            for rater in raters {
                *out.entry(rater.clone()).or_default() += 1;
            }
        }
        out
    }

    /// First item index this rater has not rated.
    pub fn next_unrated(&self, session: &Session, rater: &str) -> Option<usize> {
        session.items.iter().position(|item| {
            !self.rated.contains(&(
                session.session_id.clone(),
                item.item_id.clone(),
                rater.to_string(),
            ))
        })
    }

    pub fn has_rated(&self, session: &Session, item: &str, rater: &str) -> bool {
        self.rated.contains(&(
            session.session_id.clone(),
            item.to_string(),
            rater.to_string(),
        ))
    }

    /// Validates and appends one submission; returns the stored records.
    pub fn add_rating(
        &mut self,
        session_id: &str,
        index: usize,
        rater_id: &str,
        submission: &RatingSubmission,
        timestamp: u64,
    ) -> Result<Vec<RatingRecord>, StoreError> {
        let session = self.session(session_id)?;
        let item = session
            .item(index)
            .ok_or_else(|| StoreError::NotFound(format!("session {session_id} has no item {index}")))?;
        if rater_id.is_empty() || rater_id.len() > 64 || !valid_id(rater_id) {
            return Err(invalid("x-rater-id", "rater id must be 1-64 id characters"));
        }
        let values = submission.values(session.kind)?;
        let key = (session_id.to_string(), item.item_id.clone(), rater_id.to_string());
        if self.rated.contains(&key) {
            return Err(StoreError::Conflict(format!(
                "rater {rater_id} already rated item {index} of session {session_id}"
            )));
        }
        if session.kind == RatingKind::Distortion {
            let count = self.raters_per_item(session)[&item.item_id].len();
            if count >= DISTORTION_RATERS {
                return Err(StoreError::Conflict(format!(
                    "item {index} already has {DISTORTION_RATERS} distortion ratings"
                )));
            }
        }
        let records: Vec<RatingRecord> = values
            .into_iter()
            .map(|value| RatingRecord {
                session_id: session_id.to_string(),
                item_id: item.item_id.clone(),
                rater_id: rater_id.to_string(),
                value,
                timestamp,
            })
            .collect();
        append_jsonl(self.ratings_path(), &records)?;
        self.rated.insert(key);
        self.ratings.extend(records.iter().cloned());
        Ok(records)
    }

    pub fn report(&self, session_id: &str, qa: &QaConfig) -> Result<SessionReport, StoreError> {
        let session = self.session(session_id)?;
        let status = self.status(session);
        let ratings = self.session_ratings(session_id);
        Ok(match session.kind {
            RatingKind::StageQa => {
                let sample = QaSample {
                    stage: session.stage.clone().unwrap_or_default(),
                    item_ids: session.item_ids(),
                    sample_size: session.items.len(),
                    seed: session.seed,
                };
                match qa_gate(&sample, &ratings, qa) {
                    Ok(gate) => SessionReport::StageQa {
                        status,
                        gate: Some(gate),
                        unrated: Vec::new(),
                    },
                    Err(EvalError::Unrated(unrated)) => SessionReport::StageQa {
                        status,
                        gate: None,
                        unrated,
                    },
                    Err(e) => return Err(e.into()),
                }
            }
            RatingKind::Distortion => SessionReport::Distortion {
                status,
                report: distortion_report(&session.item_ids(), &ratings)?,
            },
            RatingKind::Pairwise => {
                if status != SessionStatus::Complete {
                    return Err(StoreError::Conflict(
                        "pairwise reports are available once the session is complete".into(),
                    ));
                }
                let map = session.blinding.as_ref().expect("pairwise sessions carry a map");
                SessionReport::Pairwise {
                    status,
                    tally: pairwise_tally(&ratings, map)?,
                }
            }
        })
    }
}

/// Resolves a media reference against the media root; absolute paths are
/// used as given.
pub fn resolve_media(root: &Path, media: &str) -> PathBuf {
    let p = Path::new(media);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}
