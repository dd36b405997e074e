//! Precision, recall and F1 for evidence retrieval (each candidate sentence
//! is a binary decision) and for the entailment verdict.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{resolve_premise, ClaimInstance, Corpus, CorpusError, ResolveOptions, Verdict};
use crate::prediction::SystemPrediction;

pub const SCHEMA: &str = "metrics/1";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no gold annotation for {0}")]
    MissingGold(String),
    #[error("{claim_id}: prediction covers {predicted} sentences, gold premise has {gold}")]
    LengthMismatch {
        claim_id: String,
        predicted: usize,
        gold: usize,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Counts {
    pub fn add(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }

    pub fn record(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_of(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

impl Prf {
    pub fn from_counts(c: Counts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        Prf {
            precision,
            recall,
            f1: f1_of(precision, recall),
            counts: c,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Micro,
    Macro,
}

/// Gold view of one claim, with evidence in global premise indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldClaim {
    pub claim_id: String,
    pub premise_len: usize,
    pub evidence: Option<BTreeSet<usize>>,
    pub label: Option<Verdict>,
    pub challenge: Option<String>,
}

impl GoldClaim {
    pub fn from_claims(
        claims: &[ClaimInstance],
        corpus: &Corpus,
        resolve: ResolveOptions,
    ) -> Result<Vec<GoldClaim>, MetricsError> {
        claims
            .iter()
            .map(|c| {
                let premise = resolve_premise(c, corpus, resolve)?;
                Ok(GoldClaim {
                    claim_id: c.claim_id.clone(),
                    premise_len: premise.len(),
                    evidence: premise.gold_globals(c)?,
                    label: c.gold_label,
                    challenge: c.challenge.clone(),
                })
            })
            .collect()
    }
}

fn index_golds(golds: &[GoldClaim]) -> BTreeMap<&str, &GoldClaim> {
    golds.iter().map(|g| (g.claim_id.as_str(), g)).collect()
}

fn paired<'a>(
    preds: &'a [SystemPrediction],
    golds: &'a [GoldClaim],
) -> Result<Vec<(&'a SystemPrediction, &'a GoldClaim)>, MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::MissingGold("<no predictions>".into()));
    }
    let by_id = index_golds(golds);
    preds
        .iter()
        .map(|p| {
            by_id
                .get(p.claim_id.as_str())
                .map(|g| (p, *g))
                .ok_or_else(|| MetricsError::MissingGold(p.claim_id.clone()))
        })
        .collect()
}

/// Confusion counts over the sentences of one claim.
pub fn claim_counts(pred: &SystemPrediction, gold: &GoldClaim) -> Result<Counts, MetricsError> {
    let evidence = gold
        .evidence
        .as_ref()
        .ok_or_else(|| MetricsError::MissingGold(gold.claim_id.clone()))?;
    if pred.evidence_probs.len() != gold.premise_len {
        return Err(MetricsError::LengthMismatch {
            claim_id: pred.claim_id.clone(),
            predicted: pred.evidence_probs.len(),
            gold: gold.premise_len,
        });
    }
    let selected: BTreeSet<usize> = pred.selected.iter().copied().collect();
    let mut c = Counts::default();
    for i in 0..gold.premise_len {
        c.record(selected.contains(&i), evidence.contains(&i));
    }
    Ok(c)
}

/// Micro pools every sentence decision; macro averages per-claim P, R and
/// F1 (counts are still the pooled totals).
pub fn evidence_metrics(
    preds: &[SystemPrediction],
    golds: &[GoldClaim],
    mode: Aggregation,
) -> Result<Prf, MetricsError> {
    let mut pairs = paired(preds, golds)?;
    // Fixed summation order keeps macro scores independent of claim order.
    pairs.sort_by(|a, b| a.0.claim_id.cmp(&b.0.claim_id));
    let per_claim = pairs
        .into_iter()
        .map(|(p, g)| claim_counts(p, g))
        .collect::<Result<Vec<_>, _>>()?;
    let mut pooled = Counts::default();
    per_claim.iter().for_each(|c| pooled.add(*c));
    match mode {
        Aggregation::Micro => Ok(Prf::from_counts(pooled)),
        Aggregation::Macro => {
            let n = per_claim.len() as f64;
            let mut out = Prf {
                counts: pooled,
                ..Prf::default()
            };
            for c in &per_claim {
                let one = Prf::from_counts(*c);
                out.precision += one.precision / n;
                out.recall += one.recall / n;
                out.f1 += one.f1 / n;
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EntailmentMetrics {
    /// Entailment as the positive class.
    #[serde(flatten)]
    pub positive: Prf,
    pub macro_f1: f64,
    pub accuracy: f64,
}

pub fn entailment_metrics(preds: &[SystemPrediction], golds: &[GoldClaim]) -> Result<EntailmentMetrics, MetricsError> {
    let mut c = Counts::default();
    for (p, g) in paired(preds, golds)? {
        let label = g.label.ok_or_else(|| MetricsError::MissingGold(g.claim_id.clone()))?;
        c.record(p.verdict == Verdict::Entailment, label == Verdict::Entailment);
    }
    let positive = Prf::from_counts(c);
    let negative = Prf::from_counts(Counts {
        tp: c.tn,
        fp: c.fn_,
        fn_: c.fp,
        tn: c.tp,
    });
    Ok(EntailmentMetrics {
        positive,
        macro_f1: (positive.f1 + negative.f1) / 2.0,
        accuracy: ratio(c.tp + c.tn, c.tp + c.fp + c.fn_ + c.tn),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimDiagnostics {
    pub claim_id: String,
    pub fallback_used: bool,
    pub selected: usize,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_: Prf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChallengeAccuracy {
    pub claims: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub evidence: EvidenceReport,
    pub entailment: EntailmentMetrics,
    pub per_claim: Vec<ClaimDiagnostics>,
    pub by_challenge: BTreeMap<String, ChallengeAccuracy>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

pub fn evaluate(
    preds: &[SystemPrediction],
    golds: &[GoldClaim],
    metadata: BTreeMap<String, serde_json::Value>,
) -> Result<MetricsReport, MetricsError> {
    let evidence = EvidenceReport {
        micro: evidence_metrics(preds, golds, Aggregation::Micro)?,
        macro_: evidence_metrics(preds, golds, Aggregation::Macro)?,
    };
    let entailment = entailment_metrics(preds, golds)?;
    let per_claim: Vec<ClaimDiagnostics> = paired(preds, golds)?
        .into_iter()
        .map(|(p, g)| ClaimDiagnostics {
            claim_id: p.claim_id.clone(),
            fallback_used: p.fallback_used,
            selected: p.selected.len(),
            correct: g.label == Some(p.verdict),
            challenge: g.challenge.clone(),
        })
        .collect();

    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for d in &per_claim {
        if let Some(tag) = &d.challenge {
            let e = tally.entry(tag.clone()).or_default();
            e.0 += 1;
            e.1 += usize::from(d.correct);
        }
    }
    let by_challenge = tally
        .into_iter()
        .map(|(k, (n, ok))| {
            (
                k,
                ChallengeAccuracy {
                    claims: n,
                    accuracy: ok as f64 / n as f64,
                },
            )
        })
        .collect();

    Ok(MetricsReport {
        schema: SCHEMA.into(),
        evidence,
        entailment,
        per_claim,
        by_challenge,
        metadata,
    })
}

impl MetricsReport {
    /// Pretty JSON with lexicographically sorted keys.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), MetricsError> {
        std::fs::write(path, self.to_json()).map_err(|source| MetricsError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Aligned text table: one row per system, evidence then entailment columns.
pub fn render_table(rows: &[(&str, &MetricsReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("System".len()) + 2;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}| {:^26} | {:^26} | {:^26}",
        "", "Evidence (micro)", "Evidence (macro)", "Entailment"
    );
    let cols = format!("{:>8}{:>9}{:>9}", "P", "R", "F1");
    let _ = writeln!(out, "{:<width$}| {cols} | {cols} | {cols}", "System");
    let _ = writeln!(out, "{}", "-".repeat(width + 3 * 29));
    let cell = |p: &Prf| {
        format!(
            "{:>8.1}{:>9.1}{:>9.1}",
            100.0 * p.precision,
            100.0 * p.recall,
            100.0 * p.f1
        )
    };
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}| {} | {} | {}",
            name,
            cell(&r.evidence.micro),
            cell(&r.evidence.macro_),
            cell(&r.entailment.positive)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(id: &str, n: usize, selected: &[usize], verdict: Verdict) -> SystemPrediction {
        let class_probs = match verdict {
            Verdict::Entailment => [0.7, 0.3],
            Verdict::Contradiction => [0.3, 0.7],
        };
        SystemPrediction {
            claim_id: id.into(),
            evidence_probs: vec![0.5; n],
            selected: selected.to_vec(),
            class_probs,
            verdict,
            fallback_used: false,
        }
    }

    fn gold(id: &str, n: usize, ev: &[usize], label: Verdict) -> GoldClaim {
        GoldClaim {
            claim_id: id.into(),
            premise_len: n,
            evidence: Some(ev.iter().copied().collect()),
            label: Some(label),
            challenge: None,
        }
    }

    #[test]
    fn worked_confusion() {
        let p = [pred("a", 3, &[0, 2], Verdict::Entailment)];
        let g = [gold("a", 3, &[0, 1], Verdict::Entailment)];
        let m = evidence_metrics(&p, &g, Aggregation::Micro).unwrap();
        assert_eq!(
            m.counts,
            Counts {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 0
            }
        );
        assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn select_all_trades_precision_for_recall() {
        let p = [pred("a", 10, &(0..10).collect::<Vec<_>>(), Verdict::Entailment)];
        let g = [gold("a", 10, &[4], Verdict::Entailment)];
        let m = evidence_metrics(&p, &g, Aggregation::Micro).unwrap();
        assert_eq!(m.recall, 1.0);
        assert!((m.precision - 0.1).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_degenerate_entailment() {
        let labels: Vec<Verdict> = (0..10).map(|i| Verdict::from_index(i % 2).unwrap()).collect();
        let golds: Vec<GoldClaim> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| gold(&format!("c{i}"), 2, &[0], l))
            .collect();
        let perfect: Vec<SystemPrediction> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| pred(&format!("c{i}"), 2, &[0], l))
            .collect();
        let m = entailment_metrics(&perfect, &golds).unwrap();
        assert_eq!((m.positive.f1, m.macro_f1, m.accuracy), (1.0, 1.0, 1.0));

        let all_e: Vec<SystemPrediction> = (0..10)
            .map(|i| pred(&format!("c{i}"), 2, &[0], Verdict::Entailment))
            .collect();
        let m = entailment_metrics(&all_e, &golds).unwrap();
        assert_eq!((m.positive.precision, m.positive.recall), (0.5, 1.0));

        assert!(matches!(entailment_metrics(&[], &golds), Err(MetricsError::MissingGold(_))));
    }

    #[test]
    fn contract_errors() {
        let g = [gold("a", 3, &[0], Verdict::Entailment)];
        let short = [pred("a", 2, &[0], Verdict::Entailment)];
        assert!(matches!(
            evidence_metrics(&short, &g, Aggregation::Micro),
            Err(MetricsError::LengthMismatch { .. })
        ));
        let other = [pred("b", 3, &[0], Verdict::Entailment)];
        assert!(matches!(
            evidence_metrics(&other, &g, Aggregation::Macro),
            Err(MetricsError::MissingGold(_))
        ));
        let mut unlabeled = g.clone();
        unlabeled[0].evidence = None;
        assert!(evidence_metrics(&[pred("a", 3, &[0], Verdict::Entailment)], &unlabeled, Aggregation::Micro).is_err());
    }

    #[test]
    fn report_is_deterministic_and_shaped() {
        let p = vec![
            pred("a", 3, &[0], Verdict::Entailment),
            pred("b", 4, &[1, 2], Verdict::Contradiction),
        ];
        let mut g = vec![
            gold("a", 3, &[0], Verdict::Entailment),
            gold("b", 4, &[1], Verdict::Entailment),
        ];
        g[1].challenge = Some("numerical".into());
        let meta = BTreeMap::from([("system".to_string(), serde_json::json!("pipeline"))]);
        let r = evaluate(&p, &g, meta.clone()).unwrap();
        assert_eq!(r.per_claim.len(), 2);
        assert_eq!(r.by_challenge["numerical"].accuracy, 0.0);
        let json = r.to_json();
        assert_eq!(json, evaluate(&p, &g, meta).unwrap().to_json());
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert!(v["evidence"]["micro"]["f1"].is_number());
        assert!(v["evidence"]["macro"]["fn"].is_number());
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);

        let table = render_table(&[("pipeline", &r)]);
        assert!(table.lines().count() == 4 && table.contains("Entailment"));
    }

    #[test]
    fn shuffling_claims_changes_nothing() {
        let p = vec![
            pred("a", 3, &[0], Verdict::Entailment),
            pred("b", 4, &[1, 2], Verdict::Contradiction),
            pred("c", 2, &[1], Verdict::Contradiction),
        ];
        let g = vec![
            gold("a", 3, &[0, 2], Verdict::Entailment),
            gold("b", 4, &[1], Verdict::Entailment),
            gold("c", 2, &[0], Verdict::Contradiction),
        ];
        let rev: Vec<_> = p.iter().rev().cloned().collect();
        for mode in [Aggregation::Micro, Aggregation::Macro] {
            let x = evidence_metrics(&p, &g, mode).unwrap();
            let y = evidence_metrics(&rev, &g, mode).unwrap();
            assert_eq!(x.counts, y.counts);
            assert_eq!(x, y);
        }
    }
}
