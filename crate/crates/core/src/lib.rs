//! Evidence selection and entailment prediction over clinical trial reports.
//!
//! Two systems share one data model:
//!
//! * [`pipeline`] scores every candidate sentence against the claim, keeps the
//!   ones above threshold and classifies the claim against their
//!   concatenation;
//! * [`joint`] encodes the claim with the whole section once and trains the
//!   evidence and verdict heads together.
//!
//! [`ensemble`] averages their probabilities, [`metrics`] scores the result.

pub mod checkpoint;
pub mod corpus;
pub mod encode;
pub mod ensemble;
pub mod exec;
pub mod joint;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod prediction;
pub mod synth;
pub mod train;

pub use corpus::{ClaimInstance, ClinicalTrialRecord, Corpus, PremiseDoc, Section, Verdict};
pub use prediction::SystemPrediction;
