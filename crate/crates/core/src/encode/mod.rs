//! Tokenization, sequence layout and the encoder abstraction.

mod encoder;
mod pooling;
mod sequence;
mod tokenizer;

pub use encoder::{
    build_encoder, Backend, DenseMatrix, EncodeTrace, EncoderConfig, ToyEncoder, CACHE_ENV,
};
pub use pooling::{pool_span, pool_span_backward, Pooling};
pub use sequence::{
    pack_entailment, pack_joint, pack_pair, JointInput, PairInput, SentenceSpan, SequenceBuilder,
    Span,
};
pub use tokenizer::{HashingTokenizer, TokenSeq, PAD_ID, SEP_ID};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("claim of {claim_len} tokens does not fit max_len {max_len}")]
    ClaimAloneExceedsMaxLen { claim_len: usize, max_len: usize },
    #[error("empty span")]
    EmptySpan,
    #[error("span {start}..{end} out of bounds for {rows} rows")]
    SpanOutOfBounds { start: usize, end: usize, rows: usize },
    #[error("encoder backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("invalid encoder configuration: {0}")]
    InvalidConfig(String),
}
