//! The prediction record shared by every system, and its JSON file format.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Verdict;
use crate::nn::argmax;

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed prediction file")]
    Malformed {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("prediction for {claim_id} violates an invariant: {reason}")]
    Invalid { claim_id: String, reason: String },
}

/// Per-claim output: evidence probabilities, selected evidence, class
/// distribution `(p_entail, p_contra)` and verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPrediction {
    pub claim_id: String,
    pub evidence_probs: Vec<f64>,
    /// Selected global sentence indices, ascending.
    pub selected: Vec<usize>,
    pub class_probs: [f64; 2],
    pub verdict: Verdict,
    /// Set when nothing cleared the threshold and the top sentence was used.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback_used: bool,
}

/// Argmax over `(p_entail, p_contra)`; exact ties go to `Entailment`.
pub fn verdict_of(class_probs: &[f64; 2]) -> Verdict {
    Verdict::from_index(argmax(class_probs)).expect("two classes")
}

impl SystemPrediction {
    pub fn validate(&self) -> Result<(), PredictionError> {
        let fail = |reason: String| {
            Err(PredictionError::Invalid {
                claim_id: self.claim_id.clone(),
                reason,
            })
        };
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        if !self.evidence_probs.iter().copied().all(in_unit) {
            return fail("evidence probability outside [0, 1]".into());
        }
        if !self.class_probs.iter().copied().all(in_unit) {
            return fail("class probability outside [0, 1]".into());
        }
        let total: f64 = self.class_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return fail(format!("class probabilities sum to {total}"));
        }
        if self.verdict != verdict_of(&self.class_probs) {
            return fail("verdict is not the argmax of class_probs".into());
        }
        if self.selected.windows(2).any(|w| w[0] >= w[1]) {
            return fail("selected indices not strictly ascending".into());
        }
        if self
            .selected
            .last()
            .is_some_and(|&i| i >= self.evidence_probs.len())
        {
            return fail("selected index outside the premise".into());
        }
        Ok(())
    }
}

pub fn predictions_to_json(preds: &[SystemPrediction]) -> String {
    let mut s = serde_json::to_string_pretty(preds).expect("predictions serialize");
    s.push('\n');
    s
}

pub fn write_predictions(path: &Path, preds: &[SystemPrediction]) -> Result<(), PredictionError> {
    fs::write(path, predictions_to_json(preds)).map_err(|source| PredictionError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_predictions(path: &Path) -> Result<Vec<SystemPrediction>, PredictionError> {
    let text = fs::read_to_string(path).map_err(|source| PredictionError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let preds: Vec<SystemPrediction> =
        serde_json::from_str(&text).map_err(|source| PredictionError::Malformed {
            path: path.to_path_buf(),
            source,
        })?;
    for p in &preds {
        p.validate()?;
    }
    Ok(preds)
}
