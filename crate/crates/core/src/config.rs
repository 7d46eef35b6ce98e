//! The single pipeline configuration document and per-stage fingerprints.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caption::{CaptionConfig, BRIEF_INSTRUCTION, DETAILED_TEMPLATE};
use crate::eval::{QaConfig, StatsConfig};
use crate::filter::FilterConfig;
use crate::fingerprint::fingerprint;
use crate::model::{Stage, MIN_CLIP_SPAN};
use crate::relevance::RelevanceConfig;
use crate::segment::SegmenterConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workspace_dir: String,
    pub relevance: RelevanceConfig,
    pub segmenter: SegmenterConfig,
    pub filter: FilterConfig,
    pub caption: CaptionConfig,
    pub qa: QaConfig,
    pub stats: StatsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workspace_dir: "workspace".into(),
            relevance: RelevanceConfig::default(),
            segmenter: SegmenterConfig::default(),
            filter: FilterConfig::default(),
            caption: CaptionConfig::default(),
            qa: QaConfig::default(),
            stats: StatsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        let t = self.relevance.threshold;
        if !(0.0..=1.0).contains(&t) {
            return Err(ConfigError::Invalid(format!(
                "relevance.threshold {t} outside [0, 1]"
            )));
        }
        self.relevance.dictionary().map_err(|e| invalid(&e))?;
        self.segmenter.validate().map_err(|e| invalid(&e))?;
        if self.segmenter.min_span < MIN_CLIP_SPAN {
            return Err(ConfigError::Invalid(format!(
                "segmenter.min_span {} is below the clip record minimum of {MIN_CLIP_SPAN}",
                self.segmenter.min_span
            )));
        }
        self.filter.validate().map_err(|e| invalid(&e))?;
        self.stats.validate().map_err(|e| invalid(&e))?;
        if self.qa.sample_size == 0 {
            return Err(ConfigError::Invalid("qa.sample_size must be positive".into()));
        }
        if !(self.qa.min_pass_rate > 0.0 && self.qa.min_pass_rate <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "qa.min_pass_rate {} outside (0, 1]",
                self.qa.min_pass_rate
            )));
        }
        Ok(())
    }

    /// Fingerprint of everything a single stage's output depends on, other
    /// than its input manifest.
    pub fn stage_fingerprint(&self, stage: Stage) -> String {
        let params = match stage {
            Stage::Relevance => {
                let terms: Vec<String> = self
                    .relevance
                    .dictionary()
                    .map(|d| d.terms().map(str::to_string).collect())
                    .unwrap_or_default();
                serde_json::json!({
                    "threshold": self.relevance.threshold,
                    "mode": self.relevance.mode,
                    "regate_expanded": self.relevance.regate_expanded,
                    "terms": terms,
                })
            }
            Stage::Segment => serde_json::json!({
                "tau": self.segmenter.tau,
                "min_span": self.segmenter.min_span,
            }),
            Stage::Resolution => serde_json::json!({
                "min_short_side": self.segmenter.min_short_side,
            }),
            Stage::Caption => serde_json::json!({
                "retries": self.caption.retries,
                "template": fingerprint(&DETAILED_TEMPLATE),
                "brief": fingerprint(&BRIEF_INSTRUCTION),
            }),
            filter => serde_json::json!(self.filter.stage_fingerprint(filter)),
        };
        fingerprint(&serde_json::json!({
            "stage": stage.as_str(),
            "seed": self.seed,
            "params": params,
        }))
    }

    /// Fingerprint of the whole document.
    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }
}
