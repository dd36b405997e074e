//! Weighted probability averaging of two systems, plus the evidence cap.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{select_evidence, DEFAULT_THRESHOLD};
use crate::prediction::{verdict_of, SystemPrediction};

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("predictions are for different claims: {a} vs {b}")]
    MismatchedClaim { a: String, b: String },
    #[error("{claim_id}: premise lengths differ ({a} vs {b})")]
    MismatchedPremiseLength { claim_id: String, a: usize, b: usize },
    #[error("invalid ensemble config: {0}")]
    InvalidConfig(String),
}

/// Which task's probabilities get averaged. The other task is copied from
/// the member with the larger weight (the first one on a tie).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tasks {
    #[default]
    Both,
    Evidence,
    Entailment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub w_pipeline: f64,
    pub w_joint: f64,
    pub max_evidence: usize,
    pub threshold: f64,
    pub tasks: Tasks,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            w_pipeline: 0.4,
            w_joint: 0.6,
            max_evidence: 20,
            threshold: DEFAULT_THRESHOLD,
            tasks: Tasks::Both,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        let (a, b) = (self.w_pipeline, self.w_joint);
        if !(a >= 0.0 && b >= 0.0) {
            return Err(EnsembleError::InvalidConfig("weights must be non-negative".into()));
        }
        if (a + b - 1.0).abs() > 1e-9 {
            return Err(EnsembleError::InvalidConfig(format!("weights sum to {}", a + b)));
        }
        if self.max_evidence == 0 {
            return Err(EnsembleError::InvalidConfig("max_evidence must be at least 1".into()));
        }
        Ok(())
    }
}

/// Convex combination, clamped to the members' range so rounding never
/// leaves it.
fn mix(wa: f64, a: f64, wb: f64, b: f64) -> f64 {
    (wa * a + wb * b).clamp(a.min(b), a.max(b))
}

/// Averages `a` (pipeline) and `b` (joint), then recomputes selection and
/// verdict from the averaged probabilities.
pub fn combine(
    a: &SystemPrediction,
    b: &SystemPrediction,
    cfg: &EnsembleConfig,
) -> Result<SystemPrediction, EnsembleError> {
    cfg.validate()?;
    if a.claim_id != b.claim_id {
        return Err(EnsembleError::MismatchedClaim {
            a: a.claim_id.clone(),
            b: b.claim_id.clone(),
        });
    }
    if a.evidence_probs.len() != b.evidence_probs.len() {
        return Err(EnsembleError::MismatchedPremiseLength {
            claim_id: a.claim_id.clone(),
            a: a.evidence_probs.len(),
            b: b.evidence_probs.len(),
        });
    }
    let (wa, wb) = (cfg.w_pipeline, cfg.w_joint);
    let lead = if wb > wa { b } else { a };

    let evidence_probs: Vec<f64> = match cfg.tasks {
        Tasks::Entailment => lead.evidence_probs.clone(),
        _ => a
            .evidence_probs
            .iter()
            .zip(&b.evidence_probs)
            .map(|(&x, &y)| mix(wa, x, wb, y))
            .collect(),
    };
    let class_probs = match cfg.tasks {
        Tasks::Evidence => lead.class_probs,
        _ => [
            mix(wa, a.class_probs[0], wb, b.class_probs[0]),
            mix(wa, a.class_probs[1], wb, b.class_probs[1]),
        ],
    };
    let selection = select_evidence(&evidence_probs, cfg.threshold);
    Ok(SystemPrediction {
        claim_id: a.claim_id.clone(),
        verdict: verdict_of(&class_probs),
        class_probs,
        selected: selection.indices,
        fallback_used: selection.fallback_used,
        evidence_probs,
    })
}

/// Caps the selection at `max_evidence`, keeping the highest probabilities
/// (lower index first on ties). Output is ascending.
pub fn postprocess_evidence(evidence_probs: &[f64], selected: &[usize], cfg: &EnsembleConfig) -> Vec<usize> {
    if selected.len() <= cfg.max_evidence {
        return selected.to_vec();
    }
    let mut ranked = selected.to_vec();
    ranked.sort_by(|&i, &j| evidence_probs[j].total_cmp(&evidence_probs[i]).then(i.cmp(&j)));
    ranked.truncate(cfg.max_evidence);
    ranked.sort_unstable();
    ranked
}

/// Applies the cap to a prediction in place.
pub fn postprocess(pred: &mut SystemPrediction, cfg: &EnsembleConfig) {
    pred.selected = postprocess_evidence(&pred.evidence_probs, &pred.selected, cfg);
}

/// Combines two prediction files claim by claim, in the order of `a`.
/// Both must cover exactly the same claims.
pub fn ensemble(
    a: &[SystemPrediction],
    b: &[SystemPrediction],
    cfg: &EnsembleConfig,
) -> Result<Vec<SystemPrediction>, EnsembleError> {
    cfg.validate()?;
    let by_id: BTreeMap<&str, &SystemPrediction> = b.iter().map(|p| (p.claim_id.as_str(), p)).collect();
    let ids_a: BTreeSet<&str> = a.iter().map(|p| p.claim_id.as_str()).collect();
    if let Some(extra) = by_id.keys().find(|id| !ids_a.contains(*id)) {
        return Err(EnsembleError::MismatchedClaim {
            a: "<absent>".into(),
            b: extra.to_string(),
        });
    }
    a.iter()
        .map(|pa| {
            let pb = by_id.get(pa.claim_id.as_str()).ok_or_else(|| EnsembleError::MismatchedClaim {
                a: pa.claim_id.clone(),
                b: "<absent>".into(),
            })?;
            let mut out = combine(pa, pb, cfg)?;
            postprocess(&mut out, cfg);
            Ok(out)
        })
        .collect()
}
