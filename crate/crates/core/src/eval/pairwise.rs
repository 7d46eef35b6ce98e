//! Blinded two-model comparison: side assignment and tallies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ratings::{Dimension, PairChoice, RatingRecord, RatingValue};
use super::{csv_string, EvalError};
use crate::fingerprint::derive_unit;

/// Which model a rater sees on side "A" for one item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideOrder {
    XOnA,
    XOnB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ModelX,
    ModelY,
    BothLoss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindingMap {
    pub model_x: String,
    pub model_y: String,
    pub sides: BTreeMap<String, SideOrder>,
}

impl BlindingMap {
    /// Independent fair coin per item, derived from the session seed.
    pub fn randomized(model_x: &str, model_y: &str, item_ids: &[String], seed: u64) -> Self {
        let sides = item_ids
            .iter()
            .map(|item| {
                let side = if derive_unit(seed, &["blind", item]) < 0.5 {
                    SideOrder::XOnA
                } else {
                    SideOrder::XOnB
                };
                (item.clone(), side)
            })
            .collect();
        Self {
            model_x: model_x.to_string(),
            model_y: model_y.to_string(),
            sides,
        }
    }

    pub fn resolve(&self, item: &str, choice: PairChoice) -> Result<Outcome, EvalError> {
        let side = self
            .sides
            .get(item)
            .ok_or_else(|| EvalError::UnknownItem(item.to_string()))?;
        Ok(match (choice, side) {
            (PairChoice::BothLoss, _) => Outcome::BothLoss,
            (PairChoice::A, SideOrder::XOnA) | (PairChoice::B, SideOrder::XOnB) => Outcome::ModelX,
            _ => Outcome::ModelY,
        })
    }

    /// Model name shown on side A and side B for an item.
    pub fn models_for(&self, item: &str) -> Option<(&str, &str)> {
        self.sides.get(item).map(|side| match side {
            SideOrder::XOnA => (self.model_x.as_str(), self.model_y.as_str()),
            SideOrder::XOnB => (self.model_y.as_str(), self.model_x.as_str()),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DimensionTally {
    pub model_x_wins: usize,
    pub model_y_wins: usize,
    pub both_loss: usize,
    pub total: usize,
    pub model_x_pct: f64,
    pub model_y_pct: f64,
    pub both_loss_pct: f64,
}

impl DimensionTally {
    fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::ModelX => self.model_x_wins += 1,
            Outcome::ModelY => self.model_y_wins += 1,
            Outcome::BothLoss => self.both_loss += 1,
        }
        self.total += 1;
    }

    fn finish(&mut self) {
        let pct = |n: usize| {
            if self.total == 0 {
                0.0
            } else {
                100.0 * n as f64 / self.total as f64
            }
        };
        self.model_x_pct = pct(self.model_x_wins);
        self.model_y_pct = pct(self.model_y_wins);
        self.both_loss_pct = pct(self.both_loss);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTally {
    pub model_x: String,
    pub model_y: String,
    pub dimensions: BTreeMap<Dimension, DimensionTally>,
}

impl PairwiseTally {
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let rows = self.dimensions.iter().map(|(dim, t)| {
            vec![
                dim.as_str().to_string(),
                t.model_x_wins.to_string(),
                t.model_y_wins.to_string(),
                t.both_loss.to_string(),
                t.total.to_string(),
                format!("{:.2}", t.model_x_pct),
                format!("{:.2}", t.model_y_pct),
                format!("{:.2}", t.both_loss_pct),
            ]
        });
        let x_pct = format!("{}_pct", self.model_x);
        let y_pct = format!("{}_pct", self.model_y);
        csv_string(
            &[
                "dimension",
                &self.model_x,
                &self.model_y,
                "both_loss",
                "total",
                &x_pct,
                &y_pct,
                "both_loss_pct",
            ],
            rows,
        )
    }
}

/// Resolves every pairwise rating through the blinding map and counts wins
/// per dimension. Ratings of other kinds are ignored.
pub fn pairwise_tally(
    ratings: &[RatingRecord],
    map: &BlindingMap,
) -> Result<PairwiseTally, EvalError> {
    let mut dimensions: BTreeMap<Dimension, DimensionTally> = Dimension::ALL
        .iter()
        .map(|d| (*d, DimensionTally::default()))
        .collect();
    for rating in ratings {
        if let RatingValue::Pairwise { dimension, value } = rating.value {
            let outcome = map.resolve(&rating.item_id, value)?;
            dimensions.entry(dimension).or_default().add(outcome);
        }
    }
    dimensions.values_mut().for_each(DimensionTally::finish);
    Ok(PairwiseTally {
        model_x: map.model_x.clone(),
        model_y: map.model_y.clone(),
        dimensions,
    })
}
