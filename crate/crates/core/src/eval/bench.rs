//! Benchmark-dimension table with an optional weighted total.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{csv_string, EvalError};

/// Lower-is-better dimension; inverted to `100 - value` inside totals.
pub const WARPING_ERROR: &str = "warping_error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub scores: BTreeMap<String, f64>,
    pub total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub dimensions: Vec<String>,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let with_total = self.rows.iter().any(|r| r.total.is_some());
        let mut header: Vec<&str> = vec!["model"];
        header.extend(self.dimensions.iter().map(String::as_str));
        if with_total {
            header.push("total");
        }
        let rows = self.rows.iter().map(|row| {
            let mut cells = vec![row.model.clone()];
            cells.extend(self.dimensions.iter().map(|d| format!("{:.2}", row.scores[d])));
            if let Some(total) = row.total {
                cells.push(format!("{total:.2}"));
            }
            cells
        });
        csv_string(&header, rows)
    }
}

fn is_aesthetic(dimension: &str) -> bool {
    dimension.to_ascii_lowercase().contains("aesthetic")
}

/// Builds the per-model table. Every model must report the same dimensions
/// and none may be an aesthetic dimension. With weights, the total is the
/// weighted mean of the (higher-is-better) dimension values and rows are
/// sorted by it, descending; otherwise rows follow model name.
pub fn bench_tabulate(
    scores: &BTreeMap<String, BTreeMap<String, f64>>,
    weights: Option<&BTreeMap<String, f64>>,
) -> Result<BenchTable, EvalError> {
    let (_, reference) = scores.iter().next().ok_or(EvalError::EmptySet)?;
    let dimensions: Vec<String> = reference.keys().cloned().collect();
    if let Some(bad) = dimensions.iter().find(|d| is_aesthetic(d)) {
        return Err(EvalError::ExcludedDimension(bad.clone()));
    }
    for (model, dims) in scores {
        if !dims.keys().eq(dimensions.iter()) {
            return Err(EvalError::DimensionMismatch {
                model: model.clone(),
                expected: dimensions.clone(),
                got: dims.keys().cloned().collect(),
            });
        }
        if let Some((dim, _)) = dims.iter().find(|(_, v)| !v.is_finite()) {
            return Err(EvalError::Weights(format!("{model}: {dim} is not finite")));
        }
    }
    if let Some(w) = weights {
        check_weights(w, &dimensions)?;
    }

    let mut rows: Vec<BenchRow> = scores
        .iter()
        .map(|(model, dims)| BenchRow {
            model: model.clone(),
            scores: dims.clone(),
            total: weights.map(|w| weighted_total(dims, w)),
        })
        .collect();
    if weights.is_some() {
        rows.sort_by(|a, b| {
            b.total
                .partial_cmp(&a.total)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.model.cmp(&b.model))
        });
    }
    Ok(BenchTable { dimensions, rows })
}

fn check_weights(weights: &BTreeMap<String, f64>, dimensions: &[String]) -> Result<(), EvalError> {
    if !weights.keys().eq(dimensions.iter()) {
        return Err(EvalError::Weights(format!(
            "weights cover {:?}, dimensions are {:?}",
            weights.keys().collect::<Vec<_>>(),
            dimensions
        )));
    }
    if weights.values().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(EvalError::Weights("weights must be finite and non-negative".into()));
    }
    if weights.values().sum::<f64>() <= 0.0 {
        return Err(EvalError::Weights("weights sum to zero".into()));
    }
    Ok(())
}

fn weighted_total(dims: &BTreeMap<String, f64>, weights: &BTreeMap<String, f64>) -> f64 {
    let norm: f64 = weights.values().sum();
    let sum: f64 = dims
        .iter()
        .map(|(dim, value)| {
            let v = if dim == WARPING_ERROR { 100.0 - value } else { *value };
            weights[dim] * v
        })
        .sum();
    sum / norm
}
