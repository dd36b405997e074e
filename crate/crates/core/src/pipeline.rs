//! Two-stage system: score every `[sentence; SEP; claim]` pair, keep the
//! sentences above threshold, then classify `[claim; SEP; evidence]`.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{resolve_premise, ClaimInstance, Corpus, CorpusError, PremiseDoc, ResolveOptions, Verdict};
use crate::encode::{
    build_encoder, pool_span, pool_span_backward, DenseMatrix, EncodeError, EncoderConfig, HashingTokenizer,
    Pooling, SequenceBuilder, Span, ToyEncoder,
};
use crate::nn::{cross_entropy, softmax, MlpHead, Parameters, Tensor};
use crate::optim::TrainConfig;
use crate::prediction::{verdict_of, SystemPrediction};
use crate::train::{self, LossCurve};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("claim {0}: premise has no sentences")]
    EmptyPremise(String),
    #[error("no evidence sentences supplied")]
    EmptyEvidence,
    #[error("claim {0}: gold evidence missing")]
    MissingGoldEvidence(String),
    #[error("claim {0}: gold label missing")]
    MissingGoldLabel(String),
    #[error("claim {claim_id}")]
    Encode {
        claim_id: String,
        #[source]
        source: EncodeError,
    },
    #[error(transparent)]
    Backend(EncodeError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl ModelError {
    pub(crate) fn encode(claim_id: &str) -> impl FnOnce(EncodeError) -> ModelError + '_ {
        move |source| ModelError::Encode {
            claim_id: claim_id.to_string(),
            source,
        }
    }
}

/// Thresholded evidence choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    /// Ascending global indices.
    pub indices: Vec<usize>,
    pub fallback_used: bool,
}

/// `{i : p_i > threshold}`; when that is empty, the single highest-probability
/// index (lowest index on ties) with `fallback_used` set. Empty input gives an
/// empty selection.
pub fn select_evidence(probs: &[f64], threshold: f64) -> Selection {
    let indices: Vec<usize> = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > threshold)
        .map(|(i, _)| i)
        .collect();
    if !indices.is_empty() || probs.is_empty() {
        return Selection {
            indices,
            fallback_used: false,
        };
    }
    Selection {
        indices: vec![crate::nn::argmax(probs)],
        fallback_used: true,
    }
}

/// Settings shared by both pipeline stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub encoder: EncoderConfig,
    pub max_len: usize,
    pub pooling: Pooling,
    pub threshold: f64,
    pub resolve: ResolveOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            encoder: EncoderConfig::default(),
            max_len: 512,
            pooling: Pooling::Mean,
            threshold: DEFAULT_THRESHOLD,
            resolve: ResolveOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn builder(&self) -> Result<SequenceBuilder, ModelError> {
        Ok(SequenceBuilder {
            tokenizer: HashingTokenizer::new(self.encoder.vocab_size).map_err(ModelError::Backend)?,
            max_len: self.max_len,
        })
    }
}

/// Encoder plus an MLP head over the pooled sequence. Class 0 is the
/// positive class (evidence / Entailment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceClassifier {
    pub encoder: ToyEncoder,
    pub head: MlpHead,
}

impl SequenceClassifier {
    pub fn init(enc: &EncoderConfig, hidden: Option<usize>, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        let encoder = build_encoder(enc, rng).map_err(ModelError::Backend)?;
        let d = encoder.dim();
        let head = MlpHead::init(d, hidden.unwrap_or(d), 2, rng);
        Ok(SequenceClassifier { encoder, head })
    }

    fn whole(m: &DenseMatrix) -> Span {
        Span { start: 0, end: m.rows }
    }

    pub fn logits(&self, ids: &[u32], pooling: Pooling) -> Vec<f64> {
        let m = self.encoder.encode(ids);
        let pooled = pool_span(&m, Self::whole(&m), pooling).expect("non-empty sequence");
        self.head.logits(&pooled)
    }

    pub fn probs(&self, ids: &[u32], pooling: Pooling) -> [f64; 2] {
        let p = softmax(&self.logits(ids, pooling));
        [p[0], p[1]]
    }

    /// Cross-entropy against `target`, gradient accumulated into `grads`.
    /// The encoder backward pass is skipped when `train_encoder` is false.
    pub fn loss_and_grad(
        &self,
        ids: &[u32],
        target: usize,
        pooling: Pooling,
        train_encoder: bool,
        grads: &mut SequenceClassifier,
    ) -> f64 {
        let trace = self.encoder.forward(ids);
        let span = Self::whole(&trace.output);
        let pooled = pool_span(&trace.output, span, pooling).expect("non-empty sequence");
        let (logits, head_trace) = self.head.forward(&pooled);
        let (loss, dlogits) = cross_entropy(&logits, target);
        let dpooled = self.head.backward(&head_trace, &dlogits, &mut grads.head);
        if train_encoder {
            let mut dm = DenseMatrix::zeros(trace.output.rows, trace.output.cols);
            pool_span_backward(&trace.output, span, pooling, &dpooled, &mut dm);
            self.encoder.backward(&trace, &dm, &mut grads.encoder);
        }
        loss
    }
}

impl Parameters for SequenceClassifier {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = self
            .encoder
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("encoder.{n}"), t))
            .collect();
        out.extend(self.head.tensors().into_iter().map(|(n, t)| (format!("head.{n}"), t)));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.encoder.tensors_mut();
        out.extend(self.head.tensors_mut());
        out
    }
}

/// Evidence probabilities `p_i`, one per premise sentence.
pub fn score_evidence(
    claim: &str,
    premise: &PremiseDoc,
    model: &SequenceClassifier,
    cfg: &PipelineConfig,
) -> Result<Vec<f64>, ModelError> {
    if premise.is_empty() {
        return Err(ModelError::EmptyPremise(premise.claim_id.clone()));
    }
    let builder = cfg.builder()?;
    premise
        .sentences
        .iter()
        .map(|s| {
            let pair = builder
                .pair(&s.text, claim, s.global_index)
                .map_err(ModelError::encode(&premise.claim_id))?;
            Ok(model.probs(&pair.tokens.ids, cfg.pooling)[0])
        })
        .collect()
}

/// Classifies the claim against its evidence. Evidence is re-sorted into
/// premise order (and de-duplicated) before concatenation.
pub fn classify_entailment(
    claim: &str,
    evidence: &[(usize, &str)],
    model: &SequenceClassifier,
    cfg: &PipelineConfig,
) -> Result<([f64; 2], Verdict), ModelError> {
    if evidence.is_empty() {
        return Err(ModelError::EmptyEvidence);
    }
    let ids = entailment_ids(claim, evidence, cfg).map_err(ModelError::encode("<claim>"))?;
    let probs = model.probs(&ids, cfg.pooling);
    Ok((probs, verdict_of(&probs)))
}

fn entailment_ids(claim: &str, evidence: &[(usize, &str)], cfg: &PipelineConfig) -> Result<Vec<u32>, EncodeError> {
    let mut ev = evidence.to_vec();
    ev.sort_by_key(|&(i, _)| i);
    ev.dedup_by_key(|&mut (i, _)| i);
    let builder = SequenceBuilder {
        tokenizer: HashingTokenizer::new(cfg.encoder.vocab_size)?,
        max_len: cfg.max_len,
    };
    Ok(builder.entailment(claim, ev.iter().map(|&(_, t)| t))?.ids)
}

fn gold_indices(claim: &ClaimInstance, premise: &PremiseDoc) -> Result<BTreeSet<usize>, ModelError> {
    premise
        .gold_globals(claim)?
        .ok_or_else(|| ModelError::MissingGoldEvidence(claim.claim_id.clone()))
}

struct Example {
    ids: Vec<u32>,
    target: usize,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: SequenceClassifier,
    pub curve: LossCurve,
}

fn fit(
    mut model: SequenceClassifier,
    examples: &[Example],
    pooling: Pooling,
    hp: &TrainConfig,
) -> Trained {
    let trainable = train::mask(&model, hp.freeze_encoder.then_some("encoder."));
    let train_encoder = !hp.freeze_encoder;
    let losses = train::run(&mut model, examples, hp, &trainable, |m: &SequenceClassifier, ex: &Example, g| {
        m.loss_and_grad(&ex.ids, ex.target, pooling, train_encoder, g)
    });
    Trained {
        model,
        curve: LossCurve { losses },
    }
}

/// Trains the evidence classifier on every (sentence, claim) pair with the
/// gold evidence flags as targets.
pub fn train_evidence_model(
    claims: &[ClaimInstance],
    corpus: &Corpus,
    cfg: &PipelineConfig,
    hp: &TrainConfig,
    init: Option<&ToyEncoder>,
) -> Result<Trained, ModelError> {
    let builder = cfg.builder()?;
    let mut examples = Vec::new();
    for claim in claims {
        let premise = resolve_premise(claim, corpus, cfg.resolve)?;
        let gold = gold_indices(claim, &premise)?;
        for s in &premise.sentences {
            let pair = builder
                .pair(&s.text, &claim.text, s.global_index)
                .map_err(ModelError::encode(&claim.claim_id))?;
            examples.push(Example {
                ids: pair.tokens.ids,
                target: usize::from(!gold.contains(&s.global_index)),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut model = SequenceClassifier::init(&cfg.encoder, hp.head_hidden, &mut rng)?;
    warm_start(&mut model.encoder, init)?;
    Ok(fit(model, &examples, cfg.pooling, hp))
}

/// Where entailment training takes its premise from.
#[derive(Debug, Clone, Copy)]
pub enum EvidenceSource<'a> {
    Gold,
    Predicted(&'a SequenceClassifier),
}

pub fn train_entailment_model(
    claims: &[ClaimInstance],
    corpus: &Corpus,
    cfg: &PipelineConfig,
    hp: &TrainConfig,
    source: EvidenceSource<'_>,
    init: Option<&ToyEncoder>,
) -> Result<Trained, ModelError> {
    let mut examples = Vec::new();
    for claim in claims {
        let label = claim
            .gold_label
            .ok_or_else(|| ModelError::MissingGoldLabel(claim.claim_id.clone()))?;
        let premise = resolve_premise(claim, corpus, cfg.resolve)?;
        let chosen: Vec<usize> = match source {
            EvidenceSource::Gold => gold_indices(claim, &premise)?.into_iter().collect(),
            EvidenceSource::Predicted(ev_model) => {
                let probs = score_evidence(&claim.text, &premise, ev_model, cfg)?;
                select_evidence(&probs, cfg.threshold).indices
            }
        };
        if chosen.is_empty() {
            return Err(ModelError::MissingGoldEvidence(claim.claim_id.clone()));
        }
        let evidence: Vec<(usize, &str)> = chosen
            .iter()
            .map(|&i| (i, premise.sentences[i].text.as_str()))
            .collect();
        let ids = entailment_ids(&claim.text, &evidence, cfg).map_err(ModelError::encode(&claim.claim_id))?;
        examples.push(Example {
            ids,
            target: label.index(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(1));
    let mut model = SequenceClassifier::init(&cfg.encoder, hp.head_hidden, &mut rng)?;
    warm_start(&mut model.encoder, init)?;
    Ok(fit(model, &examples, cfg.pooling, hp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModels {
    pub config: PipelineConfig,
    pub evidence: SequenceClassifier,
    pub entailment: SequenceClassifier,
}

impl Parameters for PipelineModels {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for (prefix, m) in [("evidence", &self.evidence), ("entailment", &self.entailment)] {
            out.extend(m.tensors().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.evidence.tensors_mut();
        out.extend(self.entailment.tensors_mut());
        out
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineCurves {
    pub evidence: LossCurve,
    pub entailment: LossCurve,
}

/// Replaces a freshly initialized encoder with given weights, e.g. one
/// already fine-tuned on a general NLI corpus.
pub fn warm_start(encoder: &mut ToyEncoder, init: Option<&ToyEncoder>) -> Result<(), ModelError> {
    let Some(init) = init else { return Ok(()) };
    let shapes = |e: &ToyEncoder| e.tensors().into_iter().map(|(n, t)| (n, t.shape.clone())).collect::<Vec<_>>();
    if shapes(encoder) != shapes(init) {
        return Err(ModelError::Backend(EncodeError::InvalidConfig(
            "initial encoder does not match the configured shape".into(),
        )));
    }
    *encoder = init.clone();
    Ok(())
}

/// Trains both stages in sequence: evidence model first, then the entailment
/// model on gold evidence.
pub fn train_pipeline(
    claims: &[ClaimInstance],
    corpus: &Corpus,
    cfg: &PipelineConfig,
    hp: &TrainConfig,
) -> Result<(PipelineModels, PipelineCurves), ModelError> {
    train_pipeline_from(claims, corpus, cfg, hp, None)
}

pub fn train_pipeline_from(
    claims: &[ClaimInstance],
    corpus: &Corpus,
    cfg: &PipelineConfig,
    hp: &TrainConfig,
    init: Option<&ToyEncoder>,
) -> Result<(PipelineModels, PipelineCurves), ModelError> {
    let ev = train_evidence_model(claims, corpus, cfg, hp, init)?;
    let ent = train_entailment_model(claims, corpus, cfg, hp, EvidenceSource::Gold, init)?;
    Ok((
        PipelineModels {
            config: cfg.clone(),
            evidence: ev.model,
            entailment: ent.model,
        },
        PipelineCurves {
            evidence: ev.curve,
            entailment: ent.curve,
        },
    ))
}

pub fn predict_pipeline(
    claim: &ClaimInstance,
    corpus: &Corpus,
    models: &PipelineModels,
) -> Result<SystemPrediction, ModelError> {
    let cfg = &models.config;
    let premise = resolve_premise(claim, corpus, cfg.resolve)?;
    let evidence_probs = score_evidence(&claim.text, &premise, &models.evidence, cfg)?;
    let selection = select_evidence(&evidence_probs, cfg.threshold);
    let evidence: Vec<(usize, &str)> = selection
        .indices
        .iter()
        .map(|&i| (i, premise.sentences[i].text.as_str()))
        .collect();
    let (class_probs, verdict) = classify_entailment(&claim.text, &evidence, &models.entailment, cfg)?;
    Ok(SystemPrediction {
        claim_id: claim.claim_id.clone(),
        evidence_probs,
        selected: selection.indices,
        class_probs,
        verdict,
        fallback_used: selection.fallback_used,
    })
}
