//! Token layouts for the three model inputs.
//!
//! * pair: `[sentence, SEP, claim]`, one per candidate sentence;
//! * entailment: `[claim, SEP, evidence...]`;
//! * joint: `[claim, SEP, s1, SEP, s2, ..., SEP, sn]` with a span per
//!   surviving sentence.

use serde::{Deserialize, Serialize};

use super::{EncodeError, HashingTokenizer, TokenSeq, SEP_ID};
use crate::corpus::PremiseDoc;

/// Half-open token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairInput {
    pub tokens: TokenSeq,
    pub sentence_index: usize,
    /// Sentence tokens kept after truncation.
    pub sentence_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceSpan {
    pub global_index: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointInput {
    pub tokens: TokenSeq,
    pub claim_span: Span,
    /// One span per surviving sentence, in premise order.
    pub spans: Vec<SentenceSpan>,
    /// Global indices of sentences cut by the length limit.
    pub dropped: Vec<usize>,
}

impl JointInput {
    pub fn survivors(&self) -> usize {
        self.spans.len()
    }
}

/// Lays out `[sentence, SEP, claim]`. The sentence tail is cut first; the
/// claim must leave room for at least one sentence token.
pub fn pack_pair(
    sentence: &[u32],
    claim: &[u32],
    max_len: usize,
    sentence_index: usize,
) -> Result<PairInput, EncodeError> {
    if claim.len() + 2 > max_len {
        return Err(EncodeError::ClaimAloneExceedsMaxLen {
            claim_len: claim.len(),
            max_len,
        });
    }
    let keep = sentence.len().min(max_len - 1 - claim.len());
    let mut ids = Vec::with_capacity(keep + 1 + claim.len());
    ids.extend_from_slice(&sentence[..keep]);
    ids.push(SEP_ID);
    ids.extend_from_slice(claim);
    Ok(PairInput {
        tokens: TokenSeq { ids },
        sentence_index,
        sentence_len: keep,
    })
}

/// Lays out `[claim, SEP, e1 e2 ... ek]`; evidence is cut from the tail.
pub fn pack_entailment(
    claim: &[u32],
    evidence: &[&[u32]],
    max_len: usize,
) -> Result<TokenSeq, EncodeError> {
    if claim.len() + 2 > max_len {
        return Err(EncodeError::ClaimAloneExceedsMaxLen {
            claim_len: claim.len(),
            max_len,
        });
    }
    let mut ids = Vec::with_capacity(max_len);
    ids.extend_from_slice(claim);
    ids.push(SEP_ID);
    for e in evidence {
        let room = max_len - ids.len();
        if room == 0 {
            break;
        }
        ids.extend_from_slice(&e[..e.len().min(room)]);
    }
    Ok(TokenSeq { ids })
}

/// Greedy whole-sentence packing: sentences are appended in order until the
/// next one (with its separator) would exceed `max_len`; it and every later
/// sentence are dropped.
pub fn pack_joint(
    claim: &[u32],
    sentences: &[Vec<u32>],
    max_len: usize,
) -> Result<JointInput, EncodeError> {
    if claim.len() + 1 > max_len {
        return Err(EncodeError::ClaimAloneExceedsMaxLen {
            claim_len: claim.len(),
            max_len,
        });
    }
    let mut ids = Vec::with_capacity(max_len);
    ids.extend_from_slice(claim);
    let claim_span = Span {
        start: 0,
        end: claim.len(),
    };
    ids.push(SEP_ID);

    let mut spans = Vec::new();
    let mut cut = sentences.len();
    for (i, s) in sentences.iter().enumerate() {
        let sep = usize::from(i > 0);
        if ids.len() + sep + s.len() > max_len {
            cut = i;
            break;
        }
        if sep == 1 {
            ids.push(SEP_ID);
        }
        let start = ids.len();
        ids.extend_from_slice(s);
        spans.push(SentenceSpan {
            global_index: i,
            span: Span {
                start,
                end: ids.len(),
            },
        });
    }
    Ok(JointInput {
        tokens: TokenSeq { ids },
        claim_span,
        spans,
        dropped: (cut..sentences.len()).collect(),
    })
}

/// Text-level front end over the token packers.
#[derive(Debug, Clone, Copy)]
pub struct SequenceBuilder {
    pub tokenizer: HashingTokenizer,
    pub max_len: usize,
}

impl SequenceBuilder {
    pub fn pair(&self, sentence: &str, claim: &str, index: usize) -> Result<PairInput, EncodeError> {
        let s = self.tokenizer.tokenize(sentence)?;
        let c = self.tokenizer.tokenize(claim)?;
        pack_pair(&s.ids, &c.ids, self.max_len, index)
    }

    /// `evidence` must already be in premise order.
    pub fn entailment<'a>(
        &self,
        claim: &str,
        evidence: impl IntoIterator<Item = &'a str>,
    ) -> Result<TokenSeq, EncodeError> {
        let c = self.tokenizer.tokenize(claim)?;
        let ev = evidence
            .into_iter()
            .map(|t| self.tokenizer.tokenize(t))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&[u32]> = ev.iter().map(|t| t.ids.as_slice()).collect();
        pack_entailment(&c.ids, &refs, self.max_len)
    }

    pub fn joint(&self, claim: &str, premise: &PremiseDoc) -> Result<JointInput, EncodeError> {
        let c = self.tokenizer.tokenize(claim)?;
        let sentences = premise
            .texts()
            .map(|t| self.tokenizer.tokenize(t).map(|s| s.ids))
            .collect::<Result<Vec<_>, _>>()?;
        pack_joint(&c.ids, &sentences, self.max_len)
    }
}
