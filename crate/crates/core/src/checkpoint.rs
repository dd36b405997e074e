//! Checkpoint directories: `config.json`, `manifest.json` and a flat
//! little-endian f32 blob `weights.bin`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::ToyEncoder;
use crate::joint::{JointConfig, JointModel};
use crate::nn::{Parameters, Tensor};
use crate::pipeline::{ModelError, PipelineConfig, PipelineModels, SequenceClassifier};

pub const FORMAT: &str = "ctrnli-checkpoint/1";
const CONFIG: &str = "config.json";
const MANIFEST: &str = "manifest.json";
const WEIGHTS: &str = "weights.bin";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint {path}: {reason}")]
    BadCheckpoint { path: PathBuf, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Pipeline,
    Joint,
}

impl System {
    pub fn as_str(self) -> &'static str {
        match self {
            System::Pipeline => "pipeline",
            System::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    /// Byte offset into `weights.bin`.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub system: System,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredConfig<C> {
    model: C,
    head_hidden: usize,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn bad(path: &Path, reason: impl Into<String>) -> CheckpointError {
    CheckpointError::BadCheckpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CheckpointError> {
    let mut s = serde_json::to_string_pretty(value).expect("checkpoint metadata serializes");
    s.push('\n');
    fs::write(path, s).map_err(io(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CheckpointError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| bad(path, e.to_string()))
}

fn save_params<C: Serialize>(
    dir: &Path,
    system: System,
    config: &StoredConfig<C>,
    params: &impl Parameters,
) -> Result<(), CheckpointError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut blob = Vec::with_capacity(4 * params.param_count());
    let mut entries = Vec::new();
    for (name, t) in params.tensors() {
        entries.push(TensorEntry {
            name,
            shape: t.shape.clone(),
            dtype: "f32".into(),
            offset: blob.len(),
        });
        for &x in &t.data {
            blob.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        system,
        tensors: entries,
    };
    write_json(&dir.join(CONFIG), config)?;
    write_json(&dir.join(MANIFEST), &manifest)?;
    let path = dir.join(WEIGHTS);
    fs::write(&path, blob).map_err(io(&path))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CheckpointError> {
    let path = dir.join(MANIFEST);
    let m: Manifest = read_json(&path)?;
    if m.format != FORMAT {
        return Err(bad(&path, format!("unknown format {:?}", m.format)));
    }
    Ok(m)
}

/// Fills `params` from the checkpoint; names and shapes must match in order.
fn load_params(dir: &Path, expect: System, params: &mut impl Parameters) -> Result<(), CheckpointError> {
    let manifest = read_manifest(dir)?;
    let mpath = dir.join(MANIFEST);
    if manifest.system != expect {
        return Err(bad(
            &mpath,
            format!("holds a {} system, expected {}", manifest.system.as_str(), expect.as_str()),
        ));
    }
    let wpath = dir.join(WEIGHTS);
    let blob = fs::read(&wpath).map_err(io(&wpath))?;
    let layout: Vec<(String, Vec<usize>)> = params
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape.clone()))
        .collect();
    if layout.len() != manifest.tensors.len() {
        return Err(bad(
            &mpath,
            format!("{} tensors listed, model has {}", manifest.tensors.len(), layout.len()),
        ));
    }
    let mut slots = params.tensors_mut();
    for ((entry, (name, shape)), slot) in manifest.tensors.iter().zip(&layout).zip(slots.iter_mut()) {
        if entry.name != *name || entry.shape != *shape {
            return Err(bad(
                &mpath,
                format!("tensor {} {:?} does not match model tensor {name} {shape:?}", entry.name, entry.shape),
            ));
        }
        if entry.dtype != "f32" {
            return Err(bad(&mpath, format!("tensor {}: unsupported dtype {}", entry.name, entry.dtype)));
        }
        let n: usize = shape.iter().product();
        let bytes = entry
            .offset
            .checked_add(4 * n)
            .and_then(|end| blob.get(entry.offset..end))
            .ok_or_else(|| bad(&wpath, format!("tensor {} runs past the end of the blob", entry.name)))?;
        fill(slot, bytes);
    }
    Ok(())
}

fn fill(t: &mut Tensor, bytes: &[u8]) {
    for (x, chunk) in t.data.iter_mut().zip(bytes.chunks_exact(4)) {
        *x = f64::from(f32::from_le_bytes(chunk.try_into().expect("4-byte chunk")));
    }
}

fn head_hidden(m: &SequenceClassifier) -> usize {
    m.head.w1.shape[0]
}

pub fn save_pipeline(dir: &Path, models: &PipelineModels) -> Result<(), CheckpointError> {
    let cfg = StoredConfig {
        model: models.config.clone(),
        head_hidden: head_hidden(&models.evidence),
    };
    save_params(dir, System::Pipeline, &cfg, models)
}

pub fn load_pipeline(dir: &Path) -> Result<PipelineModels, CheckpointError> {
    let cfg: StoredConfig<PipelineConfig> = read_json(&dir.join(CONFIG))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut models = PipelineModels {
        evidence: SequenceClassifier::init(&cfg.model.encoder, Some(cfg.head_hidden), &mut rng)?,
        entailment: SequenceClassifier::init(&cfg.model.encoder, Some(cfg.head_hidden), &mut rng)?,
        config: cfg.model,
    };
    load_params(dir, System::Pipeline, &mut models)?;
    Ok(models)
}

pub fn save_joint(dir: &Path, model: &JointModel) -> Result<(), CheckpointError> {
    let cfg = StoredConfig {
        model: model.config.clone(),
        head_hidden: model.evidence_head.w1.shape[0],
    };
    save_params(dir, System::Joint, &cfg, model)
}

pub fn load_joint(dir: &Path) -> Result<JointModel, CheckpointError> {
    let cfg: StoredConfig<JointConfig> = read_json(&dir.join(CONFIG))?;
    let mut model = JointModel::init(cfg.model, Some(cfg.head_hidden), &mut ChaCha8Rng::seed_from_u64(0))?;
    load_params(dir, System::Joint, &mut model)?;
    Ok(model)
}

/// Encoder weights from either kind of checkpoint; a pipeline checkpoint
/// contributes its entailment encoder.
pub fn load_encoder(dir: &Path) -> Result<ToyEncoder, CheckpointError> {
    match read_manifest(dir)?.system {
        System::Joint => Ok(load_joint(dir)?.encoder),
        System::Pipeline => Ok(load_pipeline(dir)?.entailment.encoder),
    }
}
