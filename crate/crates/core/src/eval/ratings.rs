//! Human rating records for stage QA, distortion and pairwise protocols.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::manifest::ManifestRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaLevel {
    Clean,
    SlightlyNoisy,
    Noisy,
}

impl QaLevel {
    pub fn passes(self) -> bool {
        matches!(self, QaLevel::Clean | QaLevel::SlightlyNoisy)
    }
}

/// Four-level deformation rubric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionLevel {
    None,
    Minor,
    Moderate,
    Severe,
}

impl DistortionLevel {
    pub const ALL: [DistortionLevel; 4] = [
        DistortionLevel::None,
        DistortionLevel::Minor,
        DistortionLevel::Moderate,
        DistortionLevel::Severe,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DistortionLevel::None => "No Distortion",
            DistortionLevel::Minor => "Minor Distortion",
            DistortionLevel::Moderate => "Moderate Distortion",
            DistortionLevel::Severe => "Severe Distortion",
        }
    }

    /// Rubric text shown to raters.
    pub fn criteria(self) -> &'static str {
        match self {
            DistortionLevel::None => {
                "No deformation was observed, and the image is fully intact."
            }
            DistortionLevel::Minor => {
                "The distortion is not significant or is only a slight local deformation. \
                 Overall, the original form of the characters, objects, or scenes can still be \
                 recognized, and viewers will not experience noticeable discomfort or disturbance."
            }
            DistortionLevel::Moderate => {
                "The shape of the characters or objects may deviate significantly, and certain \
                 details in the image may become blurred or distorted. The distortion may affect \
                 the recognizability of some scenes, but it will not disappear entirely."
            }
            DistortionLevel::Severe => {
                "The shape of the characters or scenes undergoes extreme distortion, with effects \
                 such as unrecognizable twisting, compression, stretching, or even complete \
                 distortion to the point of being unidentifiable."
            }
        }
    }

    pub fn acceptable(self) -> bool {
        matches!(self, DistortionLevel::None | DistortionLevel::Minor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    TextAlignment,
    MedicalAccuracy,
    VisualQuality,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [
        Dimension::TextAlignment,
        Dimension::MedicalAccuracy,
        Dimension::VisualQuality,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::TextAlignment => "text_alignment",
            Dimension::MedicalAccuracy => "medical_accuracy",
            Dimension::VisualQuality => "visual_quality",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairChoice {
    A,
    B,
    #[serde(rename = "both_loss")]
    BothLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingKind {
    StageQa,
    Distortion,
    Pairwise,
}

impl fmt::Display for RatingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RatingKind::StageQa => "stage_qa",
            RatingKind::Distortion => "distortion",
            RatingKind::Pairwise => "pairwise",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatingValue {
    StageQa { value: QaLevel },
    Distortion { value: DistortionLevel },
    Pairwise { dimension: Dimension, value: PairChoice },
}

impl RatingValue {
    pub fn kind(&self) -> RatingKind {
        match self {
            RatingValue::StageQa { .. } => RatingKind::StageQa,
            RatingValue::Distortion { .. } => RatingKind::Distortion,
            RatingValue::Pairwise { .. } => RatingKind::Pairwise,
        }
    }

    pub fn dimension(&self) -> Option<Dimension> {
        match self {
            RatingValue::Pairwise { dimension, .. } => Some(*dimension),
            _ => None,
        }
    }
}

/// One human judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub session_id: String,
    pub item_id: String,
    pub rater_id: String,
    #[serde(flatten)]
    pub value: RatingValue,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

impl RatingRecord {
    /// Uniqueness key: one rating per (session, item, rater, kind, dimension).
    pub fn key(&self) -> (String, String, String, RatingKind, Option<Dimension>) {
        (
            self.session_id.clone(),
            self.item_id.clone(),
            self.rater_id.clone(),
            self.value.kind(),
            self.value.dimension(),
        )
    }
}

impl ManifestRecord for RatingRecord {
    fn record_id(&self) -> &str {
        &self.item_id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let r = RatingRecord {
            session_id: "s".into(),
            item_id: "i".into(),
            rater_id: "r".into(),
            value: RatingValue::Pairwise {
                dimension: Dimension::MedicalAccuracy,
                value: PairChoice::BothLoss,
            },
            timestamp: 5,
        };
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["kind"], "pairwise");
        assert_eq!(json["dimension"], "medical_accuracy");
        assert_eq!(json["value"], "both_loss");
        let back: RatingRecord = serde_json::from_value(json).unwrap();
        assert_eq!(back, r);

        let qa: RatingValue =
            serde_json::from_str(r#"{"kind":"stage_qa","value":"slightly_noisy"}"#).unwrap();
        assert_eq!(qa, RatingValue::StageQa { value: QaLevel::SlightlyNoisy });
        assert!(serde_json::from_str::<RatingValue>(r#"{"kind":"distortion","value":"meh"}"#)
            .is_err());
    }

    #[test]
    fn rubric_acceptability() {
        let ok: Vec<_> = DistortionLevel::ALL.iter().map(|l| l.acceptable()).collect();
        assert_eq!(ok, vec![true, true, false, false]);
        assert!(DistortionLevel::None.criteria().starts_with("No deformation"));
    }
}
