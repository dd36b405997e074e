//! Encoder backends.
//!
//! The toy backend is an embedding table followed by residual mixing layers:
//!
//! ```text
//! m_t     = mean(x_{t-w} .. x_{t+w})      (clipped at the sequence ends)
//! x'_t    = x_t + tanh(W m_t + b)
//! ```
//!
//! It is deterministic, cheap on CPU and fully differentiable, which is all
//! the training and gradient tests need. The pretrained backend is an adapter
//! slot for an external transformer and is not compiled into this crate.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EncodeError;
use crate::nn::{affine, affine_backward, Matrix, Parameters, Tensor};

pub type DenseMatrix = Matrix;

/// Cache directory for pretrained encoder artifacts.
pub const CACHE_ENV: &str = "CTRNLI_CACHE";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Toy,
    Pretrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub backend: Backend,
    pub vocab_size: u32,
    pub dim: usize,
    pub layers: usize,
    /// Neighbourhood radius of the mixing layers.
    pub window: usize,
    /// Opaque to this crate; handed to the pretrained adapter.
    pub model_name: Option<String>,
    pub device: Option<String>,
    /// `None` means backend default: off for toy, on for pretrained.
    pub mixed_precision: Option<bool>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            backend: Backend::Toy,
            vocab_size: 1024,
            dim: 32,
            layers: 2,
            window: 1,
            model_name: None,
            device: None,
            mixed_precision: None,
        }
    }
}

impl EncoderConfig {
    pub fn mixed_precision(&self) -> bool {
        self.mixed_precision
            .unwrap_or(self.backend == Backend::Pretrained)
    }
}

/// Builds the configured backend with freshly initialized parameters.
pub fn build_encoder(cfg: &EncoderConfig, rng: &mut impl Rng) -> Result<ToyEncoder, EncodeError> {
    match cfg.backend {
        Backend::Toy => {
            if cfg.mixed_precision == Some(true) {
                log::warn!("mixed precision has no effect on the toy encoder");
            }
            if cfg.dim == 0 {
                return Err(EncodeError::InvalidConfig("dim must be positive".into()));
            }
            Ok(ToyEncoder::init(cfg, rng))
        }
        Backend::Pretrained => {
            let cache = std::env::var(CACHE_ENV).unwrap_or_else(|_| "<unset>".into());
            Err(EncodeError::BackendUnavailable(format!(
                "pretrained adapter for model `{}` on device `{}` is not available in this build ({CACHE_ENV}={cache})",
                cfg.model_name.as_deref().unwrap_or("<none>"),
                cfg.device.as_deref().unwrap_or("cpu"),
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixLayer {
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ToyEncoder {
    pub embed: Tensor,
    pub layers: Vec<MixLayer>,
    pub window: usize,
    #[serde(skip)]
    passes: AtomicUsize,
}

impl Clone for ToyEncoder {
    fn clone(&self) -> Self {
        ToyEncoder {
            embed: self.embed.clone(),
            layers: self.layers.clone(),
            window: self.window,
            passes: AtomicUsize::new(0),
        }
    }
}

impl PartialEq for ToyEncoder {
    fn eq(&self, other: &Self) -> bool {
        self.embed == other.embed && self.layers == other.layers && self.window == other.window
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncodeTrace {
    ids: Vec<u32>,
    /// Neighbourhood means, one per layer.
    means: Vec<Matrix>,
    /// `tanh` outputs, one per layer.
    acts: Vec<Matrix>,
    pub output: DenseMatrix,
}

impl ToyEncoder {
    pub fn init(cfg: &EncoderConfig, rng: &mut impl Rng) -> Self {
        let d = cfg.dim;
        let bound = (6.0 / (2 * d) as f64).sqrt();
        ToyEncoder {
            embed: Tensor::uniform(&[cfg.vocab_size as usize, d], 1.0, rng),
            layers: (0..cfg.layers)
                .map(|_| MixLayer {
                    w: Tensor::uniform(&[d, d], bound, rng),
                    b: Tensor::zeros(&[d]),
                })
                .collect(),
            window: cfg.window,
            passes: AtomicUsize::new(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.embed.shape[1]
    }

    pub fn vocab_size(&self) -> usize {
        self.embed.shape[0]
    }

    /// Number of forward passes run since construction.
    pub fn forward_count(&self) -> usize {
        self.passes.load(Ordering::Relaxed)
    }

    fn window_of(&self, t: usize, len: usize) -> (usize, usize) {
        (t.saturating_sub(self.window), (t + self.window + 1).min(len))
    }

    pub fn encode(&self, ids: &[u32]) -> DenseMatrix {
        self.forward(ids).output
    }

    pub fn forward(&self, ids: &[u32]) -> EncodeTrace {
        self.passes.fetch_add(1, Ordering::Relaxed);
        let d = self.dim();
        let len = ids.len();
        let mut x = Matrix::zeros(len, d);
        for (t, &id) in ids.iter().enumerate() {
            x.row_mut(t).copy_from_slice(self.embed.row(id as usize % self.vocab_size()));
        }
        let mut means = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut m = Matrix::zeros(len, d);
            for t in 0..len {
                let (lo, hi) = self.window_of(t, len);
                let row = m.row_mut(t);
                for u in lo..hi {
                    row.iter_mut().zip(x.row(u)).for_each(|(a, b)| *a += b);
                }
                let n = (hi - lo) as f64;
                row.iter_mut().for_each(|a| *a /= n);
            }
            let mut a = Matrix::zeros(len, d);
            for t in 0..len {
                affine(&layer.w, &layer.b, m.row(t), a.row_mut(t));
                a.row_mut(t).iter_mut().for_each(|v| *v = v.tanh());
            }
            for (xv, av) in x.data.iter_mut().zip(&a.data) {
                *xv += av;
            }
            means.push(m);
            acts.push(a);
        }
        EncodeTrace {
            ids: ids.to_vec(),
            means,
            acts,
            output: x,
        }
    }

    /// Accumulates parameter gradients for upstream gradient `dout`.
    pub fn backward(&self, trace: &EncodeTrace, dout: &DenseMatrix, grads: &mut ToyEncoder) {
        let d = self.dim();
        let len = trace.ids.len();
        let mut dx = dout.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (m, a) = (&trace.means[l], &trace.acts[l]);
            let g = &mut grads.layers[l];
            // Residual path passes dx through unchanged; add the mixing path.
            let mut dm = Matrix::zeros(len, d);
            for t in 0..len {
                let dz: Vec<f64> = dx
                    .row(t)
                    .iter()
                    .zip(a.row(t))
                    .map(|(g, a)| g * (1.0 - a * a))
                    .collect();
                affine_backward(&layer.w, m.row(t), &dz, &mut g.w, &mut g.b, dm.row_mut(t));
            }
            for t in 0..len {
                let (lo, hi) = self.window_of(t, len);
                let n = (hi - lo) as f64;
                let dmt = dm.row(t).to_vec();
                for u in lo..hi {
                    dx.row_mut(u)
                        .iter_mut()
                        .zip(&dmt)
                        .for_each(|(a, b)| *a += b / n);
                }
            }
        }
        let vocab = self.vocab_size();
        for (t, &id) in trace.ids.iter().enumerate() {
            grads
                .embed
                .row_mut(id as usize % vocab)
                .iter_mut()
                .zip(dx.row(t))
                .for_each(|(a, b)| *a += b);
        }
    }
}

impl Parameters for ToyEncoder {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("embed".to_string(), &self.embed)];
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("mix{i}.w"), &l.w));
            out.push((format!("mix{i}.b"), &l.b));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.embed];
        for l in &mut self.layers {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        out
    }
}
