//! Cohen's kappa for two raters and the pairwise table for several.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Unweighted Cohen's kappa, `(p_o - p_e) / (1 - p_e)`.
///
/// Computed from integer tallies, `(n·agree − Σ a_c·b_c) / (n² − Σ a_c·b_c)`,
/// so identical labelings give exactly 1.0. When chance agreement is total
/// (`p_e = 1`) the result is 1.0 if observed agreement is also total, else 0.0.
pub fn cohen_kappa<L: Ord + Debug>(
    labels_a: &[L],
    labels_b: &[L],
    categories: &BTreeSet<L>,
) -> Result<f64, EvalError> {
    if labels_a.len() != labels_b.len() {
        return Err(EvalError::LengthMismatch(labels_a.len(), labels_b.len()));
    }
    if labels_a.is_empty() {
        return Err(EvalError::NoLabels);
    }
    let mut count_a: BTreeMap<&L, u128> = BTreeMap::new();
    let mut count_b: BTreeMap<&L, u128> = BTreeMap::new();
    let mut agree: u128 = 0;
    for (a, b) in labels_a.iter().zip(labels_b) {
        for label in [a, b] {
            if !categories.contains(label) {
                return Err(EvalError::UnknownLabel(format!("{label:?}")));
            }
        }
        *count_a.entry(a).or_default() += 1;
        *count_b.entry(b).or_default() += 1;
        agree += u128::from(a == b);
    }
    let n = labels_a.len() as u128;
    let chance: u128 = count_a
        .iter()
        .map(|(label, ca)| ca * count_b.get(label).copied().unwrap_or(0))
        .sum();
    let total = n * n;
    if chance == total {
        return Ok(if agree == n { 1.0 } else { 0.0 });
    }
    let numerator = (n * agree) as f64 - chance as f64;
    let denominator = (total - chance) as f64;
    Ok(numerator / denominator)
}

/// One rater's labels keyed by item id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterLabels<L> {
    pub rater_id: String,
    pub labels: BTreeMap<String, L>,
}

/// Symmetric pairwise kappa table with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaMatrix {
    pub raters: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl KappaMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.raters.iter().position(|r| r == a)?;
        let j = self.raters.iter().position(|r| r == b)?;
        Some(self.values[i][j])
    }

    /// Upper-triangle entries as `(rater_a, rater_b, kappa)`.
    pub fn pairs(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        for i in 0..self.raters.len() {
            for j in i + 1..self.raters.len() {
                out.push((self.raters[i].clone(), self.raters[j].clone(), self.values[i][j]));
            }
        }
        out
    }
}

/// Pairwise kappa over raters that labelled exactly the same items.
/// Categories are the union of all observed labels.
pub fn kappa_matrix<L: Ord + Clone + Debug>(
    raters: &[RaterLabels<L>],
) -> Result<KappaMatrix, EvalError> {
    if raters.len() < 2 {
        return Err(EvalError::TooFewRaters);
    }
    let reference = &raters[0];
    for rater in &raters[1..] {
        if !rater.labels.keys().eq(reference.labels.keys()) {
            return Err(EvalError::MisalignedItems {
                rater: rater.rater_id.clone(),
                reference: reference.rater_id.clone(),
            });
        }
    }
    let categories: BTreeSet<L> = raters
        .iter()
        .flat_map(|r| r.labels.values().cloned())
        .collect();
    let columns: Vec<Vec<L>> = raters
        .iter()
        .map(|r| r.labels.values().cloned().collect())
        .collect();
    let k = raters.len();
    let mut values = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let kappa = cohen_kappa(&columns[i], &columns[j], &categories)?;
            values[i][j] = kappa;
            values[j][i] = kappa;
        }
    }
    Ok(KappaMatrix {
        raters: raters.iter().map(|r| r.rater_id.clone()).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cats(xs: &[u8]) -> BTreeSet<u8> {
        xs.iter().copied().collect()
    }

    #[test]
    fn identical_is_exactly_one() {
        let a = [0u8, 1, 2, 1, 0];
        assert_eq!(cohen_kappa(&a, &a, &cats(&[0, 1, 2])).unwrap(), 1.0);
    }

    #[test]
    fn hand_computed_case() {
        let a = [1u8, 1, 0, 0, 1];
        let b = [1u8, 0, 0, 0, 1];
        let k = cohen_kappa(&a, &b, &cats(&[0, 1])).unwrap();
        assert!((k - 8.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_chance_agreement() {
        let a = [1u8; 4];
        assert_eq!(cohen_kappa(&a, &a, &cats(&[0, 1])).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            cohen_kappa(&[1u8], &[1, 0], &cats(&[0, 1])),
            Err(EvalError::LengthMismatch(1, 2))
        );
        assert_eq!(cohen_kappa::<u8>(&[], &[], &cats(&[0])), Err(EvalError::NoLabels));
        assert!(matches!(
            cohen_kappa(&[3u8], &[1], &cats(&[0, 1])),
            Err(EvalError::UnknownLabel(_))
        ));
    }

    fn rater(id: &str, labels: &[u8]) -> RaterLabels<u8> {
        RaterLabels {
            rater_id: id.into(),
            labels: labels
                .iter()
                .enumerate()
                .map(|(i, &l)| (format!("item{i}"), l))
                .collect(),
        }
    }

    #[test]
    fn matrix_of_identical_raters() {
        let labels = [0u8, 1, 1, 2];
        let m = kappa_matrix(&[rater("a", &labels), rater("b", &labels), rater("c", &labels)])
            .unwrap();
        assert!(m.values.iter().flatten().all(|&v| v == 1.0));
    }

    #[test]
    fn two_raters_single_entry() {
        let m = kappa_matrix(&[rater("a", &[1, 1, 0, 0, 1]), rater("b", &[1, 0, 0, 0, 1])])
            .unwrap();
        assert_eq!(m.pairs().len(), 1);
        assert_eq!(m.get("a", "b"), m.get("b", "a"));
        assert!((m.get("a", "b").unwrap() - 8.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn misaligned_items_rejected() {
        let mut b = rater("b", &[1, 0, 1]);
        b.labels.remove("item2");
        b.labels.insert("other".into(), 1);
        assert!(matches!(
            kappa_matrix(&[rater("a", &[1, 0, 1]), b]),
            Err(EvalError::MisalignedItems { .. })
        ));
        assert_eq!(kappa_matrix(&[rater("a", &[1])]), Err(EvalError::TooFewRaters));
    }
}
