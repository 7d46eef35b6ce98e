//! Distribution report over the active clips of a manifest.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model::{ClipRecord, Stage, VideoRecord};

/// Histogram bin edges per metric. Bins are `[e_i, e_{i+1})` except the last,
/// which also includes its upper edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub duration_bins: Vec<f64>,
    pub caption_word_bins: Vec<f64>,
    pub aesthetic_bins: Vec<f64>,
    pub technical_bins: Vec<f64>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            duration_bins: vec![0.0, 5.0, 10.0, 15.0, 20.0, 30.0, 60.0, 120.0, 600.0],
            caption_word_bins: vec![0.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 500.0],
            aesthetic_bins: (0..=10).map(f64::from).collect(),
            technical_bins: vec![-1.0, -0.5, 0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl StatsConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (metric, edges) in self.metrics() {
            check_edges(metric, edges)?;
        }
        Ok(())
    }

    fn metrics(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("duration_s", &self.duration_bins),
            ("caption_words", &self.caption_word_bins),
            ("aesthetic", &self.aesthetic_bins),
            ("technical", &self.technical_bins),
        ]
    }
}

fn check_edges(metric: &str, edges: &[f64]) -> Result<(), EvalError> {
    let fail = |reason: &str| EvalError::Bins {
        metric: metric.to_string(),
        reason: reason.to_string(),
    };
    if edges.len() < 2 {
        return Err(fail("need at least two edges"));
    }
    if edges.iter().any(|e| !e.is_finite()) {
        return Err(fail("edges must be finite"));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(fail("edges must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub underflow: usize,
    pub overflow: usize,
}

impl Histogram {
    pub fn new(edges: Vec<f64>) -> Self {
        let bins = edges.len().saturating_sub(1);
        Self {
            edges,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn add(&mut self, value: f64) {
        let (first, last) = (self.edges[0], self.edges[self.edges.len() - 1]);
        if value < first {
            self.underflow += 1;
        } else if value > last {
            self.overflow += 1;
        } else {
            // Count of edges <= value, minus one, is the bin; the top edge folds into the last bin.
            let last_bin = self.counts.len() - 1;
            let idx = self.edges.partition_point(|e| *e <= value) - 1;
            self.counts[idx.min(last_bin)] += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    /// Active clips lacking this metric.
    pub excluded: usize,
    pub mean: Option<f64>,
    pub histogram: Histogram,
}

impl MetricSummary {
    fn collect(edges: &[f64], values: &[Option<f64>]) -> Self {
        let mut histogram = Histogram::new(edges.to_vec());
        let mut sum = 0.0;
        let mut count = 0;
        for value in values.iter().flatten() {
            histogram.add(*value);
            sum += value;
            count += 1;
        }
        Self {
            count,
            excluded: values.len() - count,
            mean: (count > 0).then(|| sum / count as f64),
            histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub clips: usize,
    pub duration_s: MetricSummary,
    pub caption_words: MetricSummary,
    pub aesthetic: MetricSummary,
    pub technical: MetricSummary,
    pub categories: BTreeMap<String, usize>,
    pub uncategorized: usize,
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Summarizes active clips. Durations come from the clip span on the 1-FPS
/// grid; categories come from the parent video.
pub fn corpus_stats(
    clips: &[ClipRecord],
    videos: &[VideoRecord],
    cfg: &StatsConfig,
) -> Result<StatsReport, EvalError> {
    cfg.validate()?;
    let parents: HashMap<&str, &VideoRecord> =
        videos.iter().map(|v| (v.video_id.as_str(), v)).collect();
    let active: Vec<&ClipRecord> = clips.iter().filter(|c| c.is_active()).collect();

    let durations: Vec<Option<f64>> = active.iter().map(|c| Some(f64::from(c.span()))).collect();
    let words: Vec<Option<f64>> = active
        .iter()
        .map(|c| c.detailed_caption.as_deref().map(|t| word_count(t) as f64))
        .collect();
    let score = |stage: Stage| -> Vec<Option<f64>> {
        active.iter().map(|c| c.scores.get(&stage).copied()).collect()
    };

    let mut categories: BTreeMap<String, usize> = BTreeMap::new();
    let mut uncategorized = 0;
    for clip in &active {
        match parents.get(clip.video_id.as_str()).and_then(|v| v.category) {
            Some(cat) => *categories.entry(cat.as_str().to_string()).or_default() += 1,
            None => uncategorized += 1,
        }
    }

    Ok(StatsReport {
        clips: active.len(),
        duration_s: MetricSummary::collect(&cfg.duration_bins, &durations),
        caption_words: MetricSummary::collect(&cfg.caption_word_bins, &words),
        aesthetic: MetricSummary::collect(&cfg.aesthetic_bins, &score(Stage::Aesthetic)),
        technical: MetricSummary::collect(&cfg.technical_bins, &score(Stage::Technical)),
        categories,
        uncategorized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::video_corpus;

    #[test]
    fn empty_manifest() {
        let r = corpus_stats(&[], &[], &StatsConfig::default()).unwrap();
        assert_eq!(r.clips, 0);
        assert_eq!(r.duration_s.mean, None);
        assert!(r.caption_words.histogram.counts.iter().all(|c| *c == 0));
    }

    #[test]
    fn single_clip_means() {
        let video = &video_corpus(1, 1)[0];
        let mut clip = ClipRecord::new(video, 10, 18);
        clip.detailed_caption = Some(vec!["word"; 174].join(" "));
        let r = corpus_stats(&[clip], std::slice::from_ref(video), &StatsConfig::default())
            .unwrap();
        assert_eq!(r.duration_s.mean, Some(8.0));
        assert_eq!(r.caption_words.mean, Some(174.0));
        assert_eq!(r.aesthetic.excluded, 1);
    }

    #[test]
    fn histogram_edges() {
        let mut h = Histogram::new(vec![0.0, 1.0, 2.0]);
        for v in [-0.5, 0.0, 0.99, 1.0, 2.0, 2.5] {
            h.add(v);
        }
        assert_eq!(h.counts, vec![2, 2]);
        assert_eq!((h.underflow, h.overflow), (1, 1));
    }

    #[test]
    fn bad_edges_rejected() {
        let cfg = StatsConfig {
            aesthetic_bins: vec![1.0, 1.0],
            ..StatsConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(EvalError::Bins { .. })));
    }
}
