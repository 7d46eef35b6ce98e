//! Three-rater distortion verdicts and the warping error.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::kappa::{kappa_matrix, KappaMatrix, RaterLabels};
use super::ratings::{DistortionLevel, RatingRecord, RatingValue};
use super::EvalError;

pub const DISTORTION_RATERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acceptance {
    Acceptable,
    Unacceptable,
}

/// Acceptable when at least two of the three raters chose `none` or `minor`.
pub fn distortion_acceptance(levels: &[DistortionLevel]) -> Result<Acceptance, EvalError> {
    if levels.len() != DISTORTION_RATERS {
        return Err(EvalError::RaterCount {
            item: String::new(),
            got: levels.len(),
        });
    }
    let ok = levels.iter().filter(|l| l.acceptable()).count();
    Ok(if ok >= 2 {
        Acceptance::Acceptable
    } else {
        Acceptance::Unacceptable
    })
}

/// Percentage of unacceptable videos, held at two decimals.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WarpingError(pub f64);

impl fmt::Display for WarpingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.0)
    }
}

pub fn warping_error(verdicts: &[Acceptance]) -> Result<WarpingError, EvalError> {
    if verdicts.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let bad = verdicts
        .iter()
        .filter(|v| **v == Acceptance::Unacceptable)
        .count();
    let percent = 100.0 * bad as f64 / verdicts.len() as f64;
    Ok(WarpingError((percent * 100.0).round() / 100.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// Verdict per item; `None` while fewer than three ratings exist.
    pub items: BTreeMap<String, Option<Acceptance>>,
    pub acceptable: usize,
    pub unacceptable: usize,
    pub pending: usize,
    /// Present once every item has a verdict.
    pub warping_error: Option<WarpingError>,
    /// Present when at least two raters labelled the same complete items.
    pub kappa: Option<KappaMatrix>,
}

/// Aggregates distortion ratings over an evaluation set. Ratings of other
/// kinds are ignored.
pub fn distortion_report(
    item_ids: &[String],
    ratings: &[RatingRecord],
) -> Result<DistortionReport, EvalError> {
    let mut by_item: BTreeMap<&str, BTreeMap<&str, DistortionLevel>> =
        item_ids.iter().map(|id| (id.as_str(), BTreeMap::new())).collect();
    for rating in ratings {
        let RatingValue::Distortion { value } = rating.value else {
            continue;
        };
        let slot = by_item
            .get_mut(rating.item_id.as_str())
            .ok_or_else(|| EvalError::UnknownItem(rating.item_id.clone()))?;
        slot.insert(rating.rater_id.as_str(), value);
    }

    let mut items = BTreeMap::new();
    let mut verdicts = Vec::new();
    for (item, raters) in &by_item {
        let verdict = match raters.len() {
            n if n < DISTORTION_RATERS => None,
            DISTORTION_RATERS => {
                let levels: Vec<_> = raters.values().copied().collect();
                Some(distortion_acceptance(&levels)?)
            }
            got => {
                return Err(EvalError::RaterCount {
                    item: item.to_string(),
                    got,
                })
            }
        };
        if let Some(v) = verdict {
            verdicts.push(v);
        }
        items.insert(item.to_string(), verdict);
    }

    let acceptable = verdicts
        .iter()
        .filter(|v| **v == Acceptance::Acceptable)
        .count();
    let pending = items.len() - verdicts.len();
    let warping = if pending == 0 && !verdicts.is_empty() {
        Some(warping_error(&verdicts)?)
    } else {
        None
    };

    Ok(DistortionReport {
        acceptable,
        unacceptable: verdicts.len() - acceptable,
        pending,
        warping_error: warping,
        kappa: agreement(&by_item),
        items,
    })
}

/// Kappa over items whose three raters are the same people throughout.
fn agreement(by_item: &BTreeMap<&str, BTreeMap<&str, DistortionLevel>>) -> Option<KappaMatrix> {
    let complete: Vec<_> = by_item
        .iter()
        .filter(|(_, r)| r.len() == DISTORTION_RATERS)
        .collect();
    let (_, first) = complete.first()?;
    let raters: BTreeSet<&str> = first.keys().copied().collect();
    if complete
        .iter()
        .any(|(_, r)| !r.keys().copied().eq(raters.iter().copied()))
    {
        return None;
    }
    let labels: Vec<RaterLabels<DistortionLevel>> = raters
        .iter()
        .map(|rater| RaterLabels {
            rater_id: rater.to_string(),
            labels: complete
                .iter()
                .map(|(item, r)| (item.to_string(), r[rater]))
                .collect(),
        })
        .collect();
    kappa_matrix(&labels).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use DistortionLevel::*;

    #[test]
    fn stated_examples() {
        assert_eq!(
            distortion_acceptance(&[None, Severe, Minor]).unwrap(),
            Acceptance::Acceptable
        );
        assert_eq!(
            distortion_acceptance(&[Moderate, Severe, None]).unwrap(),
            Acceptance::Unacceptable
        );
        assert_eq!(
            distortion_acceptance(&[None, None, None]).unwrap(),
            Acceptance::Acceptable
        );
        assert!(distortion_acceptance(&[None, None]).is_err());
    }

    #[test]
    fn warping_values() {
        let mut v = vec![Acceptance::Acceptable; 123];
        v.extend(vec![Acceptance::Unacceptable; 77]);
        let we = warping_error(&v).unwrap();
        assert_eq!(we.0, 38.5);
        assert_eq!(we.to_string(), "38.50");
        assert_eq!(warping_error(&v[..123]).unwrap().to_string(), "0.00");
        assert_eq!(warping_error(&v[123..]).unwrap().to_string(), "100.00");
        assert_eq!(warping_error(&[]), Err(EvalError::EmptySet));
    }

    fn rating(item: &str, rater: &str, value: DistortionLevel) -> RatingRecord {
        RatingRecord {
            session_id: "s".into(),
            item_id: item.into(),
            rater_id: rater.into(),
            value: RatingValue::Distortion { value },
            timestamp: 0,
        }
    }

    #[test]
    fn report_tracks_pending_and_kappa() {
        let items = vec!["a".to_string(), "b".to_string()];
        let mut ratings = vec![
            rating("a", "r1", None),
            rating("a", "r2", Severe),
            rating("a", "r3", Severe),
            rating("b", "r1", Minor),
        ];
        let report = distortion_report(&items, &ratings).unwrap();
        assert_eq!(report.pending, 1);
        assert_eq!(report.unacceptable, 1);
        assert!(report.warping_error.is_none());

        ratings.push(rating("b", "r2", Minor));
        ratings.push(rating("b", "r3", Moderate));
        let report = distortion_report(&items, &ratings).unwrap();
        assert_eq!(report.pending, 0);
        assert_eq!(report.warping_error.unwrap().to_string(), "50.00");
        assert_eq!(report.kappa.unwrap().raters.len(), 3);

        ratings.push(rating("zzz", "r1", Minor));
        assert_eq!(
            distortion_report(&items, &ratings),
            Err(EvalError::UnknownItem("zzz".into()))
        );
    }
}
