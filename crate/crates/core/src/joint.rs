//! Multi-task system: the claim and the whole section are encoded once as
//! `[claim; SEP; s1; SEP; ...; SEP; sn]`. Each sentence span is pooled and
//! scored by the evidence head; the verdict head reads the mean of the gated
//! sentence vectors. The claim span itself never reaches the verdict head.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{resolve_premise, ClaimInstance, Corpus, PremiseDoc, ResolveOptions, Verdict};
use crate::encode::{
    build_encoder, pool_span, pool_span_backward, DenseMatrix, EncoderConfig, HashingTokenizer, JointInput, Pooling,
    SequenceBuilder, Span, ToyEncoder,
};
use crate::nn::{cross_entropy, softmax, MlpHead, Parameters, Tensor};
use crate::optim::TrainConfig;
use crate::pipeline::{select_evidence, warm_start, ModelError, DEFAULT_THRESHOLD};
use crate::prediction::{verdict_of, SystemPrediction};
use crate::train::{self, LossCurve, StepLoss};

/// Number of named labels; logits past this index are an unused slot.
const LABELS: usize = 2;
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub evidence: f64,
    pub entailment: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            evidence: 1.0,
            entailment: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointConfig {
    pub encoder: EncoderConfig,
    pub max_len: usize,
    pub pooling: Pooling,
    pub threshold: f64,
    /// Verdict head width. Only the first two classes are named and trained.
    pub num_classes: usize,
    pub loss_weights: LossWeights,
    pub resolve: ResolveOptions,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            encoder: EncoderConfig::default(),
            max_len: 1024,
            pooling: Pooling::Mean,
            threshold: DEFAULT_THRESHOLD,
            num_classes: 2,
            loss_weights: LossWeights::default(),
            resolve: ResolveOptions::default(),
        }
    }
}

impl JointConfig {
    fn builder(&self) -> Result<SequenceBuilder, ModelError> {
        Ok(SequenceBuilder {
            tokenizer: HashingTokenizer::new(self.encoder.vocab_size).map_err(ModelError::Backend)?,
            max_len: self.max_len,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    pub config: JointConfig,
    pub encoder: ToyEncoder,
    pub evidence_head: MlpHead,
    pub verdict_head: MlpHead,
}

impl Parameters for JointModel {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for (prefix, part) in [
            ("evidence_head", &self.evidence_head),
            ("verdict_head", &self.verdict_head),
        ] {
            out.extend(part.tensors().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        let enc = self.encoder.tensors().into_iter().map(|(n, t)| (format!("encoder.{n}"), t));
        enc.chain(out).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.encoder.tensors_mut();
        out.extend(self.evidence_head.tensors_mut());
        out.extend(self.verdict_head.tensors_mut());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointOutput {
    /// One probability per surviving sentence, in premise order.
    pub evidence_probs: Vec<f64>,
    /// Global indices removed by truncation; implicitly probability 0.
    pub dropped: Vec<usize>,
    /// Gated global indices, ascending. These are the sentences pooled into
    /// the evidence representation.
    pub gated: Vec<usize>,
    pub fallback_used: bool,
    pub class_probs: [f64; 2],
    pub verdict: Verdict,
}

impl JointModel {
    pub fn init(config: JointConfig, hidden: Option<usize>, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        if config.num_classes < LABELS {
            return Err(ModelError::Backend(crate::encode::EncodeError::InvalidConfig(
                "num_classes must be at least 2".into(),
            )));
        }
        let encoder = build_encoder(&config.encoder, rng).map_err(ModelError::Backend)?;
        let d = encoder.dim();
        let h = hidden.unwrap_or(d);
        let evidence_head = MlpHead::init(d, h, 2, rng);
        let verdict_head = MlpHead::init(d, h, config.num_classes, rng);
        Ok(JointModel {
            config,
            encoder,
            evidence_head,
            verdict_head,
        })
    }

    pub fn layout(&self, claim: &str, premise: &PremiseDoc) -> Result<JointInput, ModelError> {
        self.config
            .builder()?
            .joint(claim, premise)
            .map_err(ModelError::encode(&premise.claim_id))
    }
}

fn named_probs(logits: &[f64]) -> [f64; 2] {
    let p = softmax(&logits[..LABELS]);
    [p[0], p[1]]
}

fn mean_of(vectors: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![0.0; vectors[0].len()];
    for v in vectors {
        out.iter_mut().zip(*v).for_each(|(o, x)| *o += x);
    }
    let n = vectors.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// One encoder pass over the claim-document sequence.
pub fn forward_joint(claim: &str, premise: &PremiseDoc, model: &JointModel) -> Result<JointOutput, ModelError> {
    let input = model.layout(claim, premise)?;
    let m = model.encoder.encode(&input.tokens.ids);
    let pooling = model.config.pooling;
    let pooled: Vec<Vec<f64>> = input
        .spans
        .iter()
        .map(|s| pool_span(&m, s.span, pooling).expect("span within sequence"))
        .collect();
    let evidence_probs: Vec<f64> = pooled
        .iter()
        .map(|v| softmax(&model.evidence_head.logits(v))[0])
        .collect();
    let selection = select_evidence(&evidence_probs, model.config.threshold);
    let gated: Vec<usize> = selection
        .indices
        .iter()
        .map(|&k| input.spans[k].global_index)
        .collect();

    let h_e = if selection.indices.is_empty() {
        // Nothing survived truncation: fall back to the claim block.
        pool_span(&m, input.claim_span, pooling).expect("claim span non-empty")
    } else {
        let vs: Vec<&[f64]> = selection.indices.iter().map(|&k| pooled[k].as_slice()).collect();
        mean_of(&vs)
    };
    let class_probs = named_probs(&model.verdict_head.logits(&h_e));
    Ok(JointOutput {
        evidence_probs,
        dropped: input.dropped,
        gated,
        fallback_used: selection.fallback_used || selection.indices.is_empty(),
        verdict: verdict_of(&class_probs),
        class_probs,
    })
}

fn bce(p: f64, positive: bool) -> f64 {
    let q = if positive { p } else { 1.0 - p };
    -q.max(PROB_FLOOR).ln()
}

/// `w_ev · mean_i BCE(p_i, z_i) + w_ent · CE(class_probs, label)` over the
/// surviving sentences of `output`. Gold evidence is in global indices.
pub fn joint_loss(
    output: &JointOutput,
    gold_evidence: Option<&BTreeSet<usize>>,
    gold_label: Option<Verdict>,
    weights: LossWeights,
) -> Result<f64, ModelError> {
    let (Some(gold), Some(label)) = (gold_evidence, gold_label) else {
        return Err(ModelError::MissingGoldEvidence("<output>".into()));
    };
    let ev = if output.evidence_probs.is_empty() {
        0.0
    } else {
        output
            .evidence_probs
            .iter()
            .enumerate()
            .map(|(i, &p)| bce(p, gold.contains(&i)))
            .sum::<f64>()
            / output.evidence_probs.len() as f64
    };
    let ce = -output.class_probs[label.index()].max(PROB_FLOOR).ln();
    Ok(weights.evidence * ev + weights.entailment * ce)
}

/// A training item with its layout precomputed.
#[derive(Debug, Clone)]
pub struct JointExample {
    pub input: JointInput,
    /// Gold flag per surviving span.
    pub gold: Vec<bool>,
    pub label: Verdict,
}

impl JointExample {
    pub fn new(claim: &ClaimInstance, corpus: &Corpus, model: &JointModel) -> Result<Self, ModelError> {
        let premise = resolve_premise(claim, corpus, model.config.resolve)?;
        let gold = premise
            .gold_globals(claim)?
            .ok_or_else(|| ModelError::MissingGoldEvidence(claim.claim_id.clone()))?;
        let label = claim
            .gold_label
            .ok_or_else(|| ModelError::MissingGoldLabel(claim.claim_id.clone()))?;
        let input = model.layout(&claim.text, &premise)?;
        let gold = input.spans.iter().map(|s| gold.contains(&s.global_index)).collect();
        Ok(JointExample { input, gold, label })
    }
}

/// Per-task training losses (already weighted).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JointLoss {
    pub evidence: f64,
    pub entailment: f64,
}

impl StepLoss for JointLoss {
    fn total(&self) -> f64 {
        self.evidence + self.entailment
    }
    fn add(&mut self, o: &Self) {
        self.evidence += o.evidence;
        self.entailment += o.entailment;
    }
    fn scale(&mut self, k: f64) {
        self.evidence *= k;
        self.entailment *= k;
    }
}

impl JointModel {
    /// Training objective with teacher forcing: the verdict head reads the
    /// mean of the gold sentence vectors (predicted gating if no gold
    /// sentence survived truncation). Gradients go into `grads` when given.
    pub fn training_loss(
        &self,
        ex: &JointExample,
        weights: LossWeights,
        train_encoder: bool,
        grads: Option<&mut JointModel>,
    ) -> JointLoss {
        let pooling = self.config.pooling;
        let trace = self.encoder.forward(&ex.input.tokens.ids);
        let m = &trace.output;
        let spans: Vec<Span> = ex.input.spans.iter().map(|s| s.span).collect();
        let pooled: Vec<Vec<f64>> = spans
            .iter()
            .map(|&s| pool_span(m, s, pooling).expect("span within sequence"))
            .collect();
        let mut dpooled: Vec<Vec<f64>> = pooled.iter().map(|v| vec![0.0; v.len()]).collect();
        let mut grads = grads;

        let n = pooled.len();
        let mut ev_loss = 0.0;
        let mut probs = Vec::with_capacity(n);
        for (k, v) in pooled.iter().enumerate() {
            let (logits, htrace) = self.evidence_head.forward(v);
            let target = usize::from(!ex.gold[k]);
            let (l, mut dl) = cross_entropy(&logits, target);
            probs.push(softmax(&logits)[0]);
            ev_loss += l / n as f64;
            if let Some(g) = grads.as_deref_mut() {
                dl.iter_mut().for_each(|x| *x *= weights.evidence / n as f64);
                let dx = self.evidence_head.backward(&htrace, &dl, &mut g.evidence_head);
                dpooled[k] = dx;
            }
        }

        let mut set: Vec<usize> = (0..n).filter(|&k| ex.gold[k]).collect();
        if set.is_empty() {
            set = select_evidence(&probs, self.config.threshold).indices;
        }
        let (h_e, from_claim) = if set.is_empty() {
            (pool_span(m, ex.input.claim_span, pooling).expect("claim span"), true)
        } else {
            let vs: Vec<&[f64]> = set.iter().map(|&k| pooled[k].as_slice()).collect();
            (mean_of(&vs), false)
        };
        let (logits, htrace) = self.verdict_head.forward(&h_e);
        let (ent_loss, dnamed) = cross_entropy(&logits[..LABELS], self.label_index(ex.label));

        if let Some(g) = grads {
            let mut dl = vec![0.0; logits.len()];
            dl[..LABELS]
                .iter_mut()
                .zip(&dnamed)
                .for_each(|(d, x)| *d = x * weights.entailment);
            let dh = self.verdict_head.backward(&htrace, &dl, &mut g.verdict_head);
            if train_encoder {
                let mut dm = DenseMatrix::zeros(m.rows, m.cols);
                if from_claim {
                    pool_span_backward(m, ex.input.claim_span, pooling, &dh, &mut dm);
                } else {
                    let share = 1.0 / set.len() as f64;
                    for &k in &set {
                        dpooled[k].iter_mut().zip(&dh).for_each(|(a, b)| *a += b * share);
                    }
                }
                for (k, &s) in spans.iter().enumerate() {
                    pool_span_backward(m, s, pooling, &dpooled[k], &mut dm);
                }
                self.encoder.backward(&trace, &dm, &mut g.encoder);
            }
        }
        JointLoss {
            evidence: weights.evidence * ev_loss,
            entailment: weights.entailment * ent_loss,
        }
    }

    fn label_index(&self, v: Verdict) -> usize {
        v.index()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct JointCurves {
    pub evidence: LossCurve,
    pub entailment: LossCurve,
}

pub fn train_joint(
    claims: &[ClaimInstance],
    corpus: &Corpus,
    cfg: &JointConfig,
    hp: &TrainConfig,
) -> Result<(JointModel, JointCurves), ModelError> {
    train_joint_from(claims, corpus, cfg, hp, None)
}

pub fn train_joint_from(
    claims: &[ClaimInstance],
    corpus: &Corpus,
    cfg: &JointConfig,
    hp: &TrainConfig,
    init: Option<&ToyEncoder>,
) -> Result<(JointModel, JointCurves), ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(2));
    let mut model = JointModel::init(cfg.clone(), hp.head_hidden, &mut rng)?;
    warm_start(&mut model.encoder, init)?;
    let examples = claims
        .iter()
        .map(|c| JointExample::new(c, corpus, &model))
        .collect::<Result<Vec<_>, _>>()?;

    let weights = cfg.loss_weights;
    let mut trainable = train::mask(&model, hp.freeze_encoder.then_some("encoder."));
    // Heads outside the objective stay untouched (no decay either).
    for ((name, _), flag) in model.tensors().iter().zip(trainable.iter_mut()) {
        if (name.starts_with("evidence_head.") && weights.evidence == 0.0)
            || (name.starts_with("verdict_head.") && weights.entailment == 0.0)
        {
            *flag = false;
        }
    }
    let train_encoder = !hp.freeze_encoder;
    let losses = train::run(&mut model, &examples, hp, &trainable, |m: &JointModel, ex, g| {
        m.training_loss(ex, weights, train_encoder, Some(g))
    });
    let curves = JointCurves {
        evidence: LossCurve {
            losses: losses.iter().map(|l| l.evidence).collect(),
        },
        entailment: LossCurve {
            losses: losses.iter().map(|l| l.entailment).collect(),
        },
    };
    Ok((model, curves))
}

/// Maps the joint output onto the full premise (dropped sentences get 0.0).
pub fn predict_joint(claim: &ClaimInstance, corpus: &Corpus, model: &JointModel) -> Result<SystemPrediction, ModelError> {
    let premise = resolve_premise(claim, corpus, model.config.resolve)?;
    if premise.is_empty() {
        return Err(ModelError::EmptyPremise(claim.claim_id.clone()));
    }
    let out = forward_joint(&claim.text, &premise, model)?;
    let mut evidence_probs = vec![0.0; premise.len()];
    evidence_probs[..out.evidence_probs.len()].copy_from_slice(&out.evidence_probs);
    Ok(SystemPrediction {
        claim_id: claim.claim_id.clone(),
        evidence_probs,
        selected: out.gated,
        class_probs: out.class_probs,
        verdict: out.verdict,
        fallback_used: out.fallback_used,
    })
}
