//! Run configuration: a JSON file, defaults for anything it omits, and
//! command-line flags applied on top.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use ctrnli_core::checkpoint::System;
use ctrnli_core::encode::Backend;
use ctrnli_core::ensemble::EnsembleConfig;
use ctrnli_core::joint::JointConfig;
use ctrnli_core::optim::TrainConfig;
use ctrnli_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub claims: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub system: System,
    pub pipeline: PipelineConfig,
    pub joint: JointConfig,
    pub train: TrainConfig,
    pub ensemble: EnsembleConfig,
    /// Checkpoint whose encoder seeds training, e.g. one already fine-tuned
    /// on a general NLI corpus.
    pub init_checkpoint: Option<PathBuf>,
    #[serde(skip)]
    pub seed_given: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            claims: None,
            output: None,
            system: System::Pipeline,
            pipeline: PipelineConfig::default(),
            joint: JointConfig::default(),
            train: TrainConfig::default(),
            ensemble: EnsembleConfig::default(),
            init_checkpoint: None,
            seed_given: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        let seed_given = value.pointer("/train/seed").is_some();
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        cfg.seed_given = seed_given;
        Ok(cfg)
    }

    pub fn set_backend(&mut self, backend: Backend) {
        self.pipeline.encoder.backend = backend;
        self.joint.encoder.backend = backend;
    }

    pub fn corpus(&self) -> Result<&Path> {
        required(&self.corpus, "--corpus")
    }

    pub fn claims(&self) -> Result<&Path> {
        required(&self.claims, "--claims")
    }

    pub fn output(&self) -> Result<&Path> {
        required(&self.output, "--out")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| UsageError(format!("{flag} is required (flag or config file)")).into())
}
