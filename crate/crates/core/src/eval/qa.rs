//! Per-stage QA: random sample draw and the pass-rate gate.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ratings::{RatingRecord, RatingValue};
use super::EvalError;
use crate::fingerprint::derive_u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaConfig {
    pub sample_size: usize,
    pub min_pass_rate: f64,
}

impl Default for QaConfig {
    fn default() -> Self {
        Self {
            sample_size: 200,
            min_pass_rate: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSample {
    pub stage: String,
    pub item_ids: Vec<String>,
    pub sample_size: usize,
    pub seed: u64,
}

/// Draws `sample_size` distinct ids without replacement, or the whole
/// population when it is smaller. The draw depends only on the set of ids,
/// the stage name and the seed.
pub fn draw_qa_sample(
    population: &[String],
    stage: &str,
    sample_size: usize,
    seed: u64,
) -> Result<QaSample, EvalError> {
    let mut ids: Vec<String> = population.to_vec();
    ids.sort();
    ids.dedup();
    if ids.is_empty() {
        return Err(EvalError::EmptyPopulation);
    }
    let item_ids = if ids.len() <= sample_size {
        ids
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_u64(seed, &["qa-sample", stage]));
        let mut picked: Vec<usize> = index::sample(&mut rng, ids.len(), sample_size).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| ids[i].clone()).collect()
    };
    Ok(QaSample {
        stage: stage.to_string(),
        item_ids,
        sample_size,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub stage: String,
    pub rated: usize,
    pub passing: usize,
    pub pass_rate: f64,
    pub passed: bool,
}

/// Gate over a sample: an item passes when its clean/slightly-noisy votes
/// outnumber its noisy votes (ties count as noisy); the stage passes when
/// the passing fraction reaches `min_pass_rate`.
pub fn qa_gate(
    sample: &QaSample,
    ratings: &[RatingRecord],
    cfg: &QaConfig,
) -> Result<GateResult, EvalError> {
    let mut votes: BTreeMap<&str, (usize, usize)> =
        sample.item_ids.iter().map(|id| (id.as_str(), (0, 0))).collect();
    for rating in ratings {
        if let RatingValue::StageQa { value } = rating.value {
            if let Some((pass, noisy)) = votes.get_mut(rating.item_id.as_str()) {
                if value.passes() {
                    *pass += 1;
                } else {
                    *noisy += 1;
                }
            }
        }
    }
    let unrated: Vec<String> = votes
        .iter()
        .filter(|(_, (p, n))| p + n == 0)
        .map(|(id, _)| id.to_string())
        .collect();
    if !unrated.is_empty() {
        return Err(EvalError::Unrated(unrated));
    }
    if votes.is_empty() {
        return Err(EvalError::EmptyPopulation);
    }
    let rated = votes.len();
    let passing = votes.values().filter(|(p, n)| p > n).count();
    let pass_rate = passing as f64 / rated as f64;
    Ok(GateResult {
        stage: sample.stage.clone(),
        rated,
        passing,
        pass_rate,
        passed: pass_rate >= cfg.min_pass_rate,
    })
}
