//! JSONL manifests: one canonical JSON object per line.
//!
//! Keys are written in sorted order and floats through serde_json's shortest
//! round-trip formatting, so identical records always produce identical bytes.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{ClipRecord, InvariantError, VideoRecord};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("record {id}: cannot serialize: {reason}")]
    Unserializable { id: String, reason: String },
    #[error("duplicate record id `{id}`")]
    DuplicateId { id: String, line: Option<usize> },
    #[error("{path}:{line}: malformed record: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: record {id}: invalid field {}", .source)]
    Invalid {
        path: PathBuf,
        line: usize,
        id: String,
        #[source]
        source: InvariantError,
    },
    #[error("record {id}: invalid field {source}")]
    InvalidRecord {
        id: String,
        #[source]
        source: InvariantError,
    },
}

/// A record type that can live in a manifest.
pub trait ManifestRecord: Serialize + DeserializeOwned {
    fn record_id(&self) -> &str;

    fn validate(&self) -> Result<(), InvariantError> {
        Ok(())
    }
}

impl ManifestRecord for VideoRecord {
    fn record_id(&self) -> &str {
        &self.video_id
    }

    fn validate(&self) -> Result<(), InvariantError> {
        VideoRecord::validate(self)
    }
}

impl ManifestRecord for ClipRecord {
    fn record_id(&self) -> &str {
        &self.clip_id
    }

    fn validate(&self) -> Result<(), InvariantError> {
        ClipRecord::validate(self)
    }
}

/// Either record kind, for manifests that mix videos and clips.
///
/// Lines carrying a `clip_id` key are clips; everything else is a video.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Video(VideoRecord),
    Clip(ClipRecord),
}

impl Serialize for Record {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Record::Video(v) => v.serialize(serializer),
            Record::Clip(c) => c.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Record {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let value = serde_json::Value::deserialize(deserializer)?;
        let is_clip = value.get("clip_id").is_some();
        if is_clip {
            serde_json::from_value(value).map(Record::Clip).map_err(D::Error::custom)
        } else {
            serde_json::from_value(value).map(Record::Video).map_err(D::Error::custom)
        }
    }
}

impl ManifestRecord for Record {
    fn record_id(&self) -> &str {
        match self {
            Record::Video(v) => &v.video_id,
            Record::Clip(c) => &c.clip_id,
        }
    }

    fn validate(&self) -> Result<(), InvariantError> {
        match self {
            Record::Video(v) => v.validate(),
            Record::Clip(c) => c.validate(),
        }
    }
}

/// Serializes one value as a canonical JSON line (sorted keys, no newline).
pub fn to_canonical_line<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    // serde_json::Value keeps object keys in a BTreeMap.
    let value = serde_json::to_value(value)?;
    serde_json::to_string(&value)
}

fn canonical_record_line<R: ManifestRecord>(record: &R) -> Result<String, ManifestError> {
    record
        .validate()
        .map_err(|source| ManifestError::InvalidRecord {
            id: record.record_id().to_string(),
            source,
        })?;
    let value = serde_json::to_value(record).map_err(|e| ManifestError::Unserializable {
        id: record.record_id().to_string(),
        reason: e.to_string(),
    })?;
    if let Some(path) = first_null_float(&value) {
        return Err(ManifestError::Unserializable {
            id: record.record_id().to_string(),
            reason: format!("non-finite number at {path}"),
        });
    }
    serde_json::to_string(&value).map_err(|e| ManifestError::Unserializable {
        id: record.record_id().to_string(),
        reason: e.to_string(),
    })
}

// serde_json turns NaN and infinities into `null`; inside a score map that
// can only come from a non-finite float.
fn first_null_float(value: &serde_json::Value) -> Option<String> {
    let scores = value.get("scores")?.as_object()?;
    scores
        .iter()
        .find(|(_, v)| v.is_null())
        .map(|(k, _)| format!("scores.{k}"))
}

/// Renders records to canonical JSONL text, rejecting duplicate ids.
pub fn render_manifest<R: ManifestRecord>(records: &[R]) -> Result<String, ManifestError> {
    let mut seen = HashSet::with_capacity(records.len());
    let mut out = String::new();
    for record in records {
        if !seen.insert(record.record_id()) {
            return Err(ManifestError::DuplicateId {
                id: record.record_id().to_string(),
                line: None,
            });
        }
        out.push_str(&canonical_record_line(record)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes `records` to `path` and returns the number of lines written.
///
/// The file is written to a sibling temporary and renamed into place, so a
/// reader never observes a half-written manifest.
pub fn write_manifest<R: ManifestRecord>(
    records: &[R],
    path: impl AsRef<Path>,
) -> Result<usize, ManifestError> {
    let path = path.as_ref();
    let text = render_manifest(records)?;
    write_atomic(path, text.as_bytes())?;
    Ok(records.len())
}

/// Writes bytes to a sibling temporary and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ManifestError> {
    let io_err = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut writer = BufWriter::new(File::create(&tmp).map_err(io_err)?);
        writer.write_all(bytes).map_err(io_err)?;
        writer.flush().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

/// Reads and validates every record in a manifest.
pub fn read_manifest<R: ManifestRecord>(path: impl AsRef<Path>) -> Result<Vec<R>, ManifestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records: Vec<R> = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: R = serde_json::from_str(&line).map_err(|source| ManifestError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            source,
        })?;
        record.validate().map_err(|source| ManifestError::Invalid {
            path: path.to_path_buf(),
            line: line_no,
            id: record.record_id().to_string(),
            source,
        })?;
        if !seen.insert(record.record_id().to_string()) {
            return Err(ManifestError::DuplicateId {
                id: record.record_id().to_string(),
                line: Some(line_no),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Appends serializable rows to a JSONL file (error queues, rating stores).
pub fn append_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let io_err = |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for row in rows {
        let line = to_canonical_line(row).map_err(|e| ManifestError::Unserializable {
            id: path.display().to_string(),
            reason: e.to_string(),
        })?;
        writeln!(writer, "{line}").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

/// Writes plain JSONL rows (no id or invariant checks), replacing the file.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut text = String::new();
    for row in rows {
        let line = to_canonical_line(row).map_err(|e| ManifestError::Unserializable {
            id: path.display().to_string(),
            reason: e.to_string(),
        })?;
        text.push_str(&line);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Reads plain JSONL rows; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, ManifestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| ManifestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(&line).map_err(|source| ManifestError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                source,
            })?,
        );
    }
    Ok(rows)
}
