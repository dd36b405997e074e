//! Small dense-layer toolkit with hand-written backward passes.
//!
//! Everything is `f64` in memory. Gradients are stored in a value of the same
//! type as the parameters they belong to, so any [`Parameters`] type doubles
//! as its own gradient buffer.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Self {
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(|_| dist.sample(rng)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row `r` of a 2-D tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.shape[1];
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.shape[1];
        &mut self.data[r * c..(r + 1) * c]
    }
}

/// A named, ordered collection of tensors.
///
/// `tensors` and `tensors_mut` must yield the same tensors in the same order.
pub trait Parameters {
    fn tensors(&self) -> Vec<(String, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn zero_(&mut self) {
        for t in self.tensors_mut() {
            t.data.fill(0.0);
        }
    }

    fn add_(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src: Vec<&Tensor> = other.tensors().into_iter().map(|(_, t)| t).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (a, b) in dst.data.iter_mut().zip(&src.data) {
                *a += b;
            }
        }
    }

    fn scale_(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= k);
        }
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.tensors()
            .into_iter()
            .flat_map(|(_, t)| t.data.iter().copied())
            .collect()
    }

    fn sq_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.data.iter())
            .map(|x| x * x)
            .sum()
    }
}

pub fn zeros_like<P: Parameters + Clone>(p: &P) -> P {
    let mut z = p.clone();
    z.zero_();
    z
}

/// Squared L2 distance between two parameter sets of the same layout.
pub fn sq_distance<P: Parameters>(a: &P, b: &P) -> f64 {
    a.flat()
        .iter()
        .zip(b.flat())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Row-major matrix of per-token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `out = w · x + b` for `w` of shape `[out, in]`.
pub(crate) fn affine(w: &Tensor, b: &Tensor, x: &[f64], out: &mut [f64]) {
    let cols = w.shape[1];
    for (o, (row, bias)) in out.iter_mut().zip(w.data.chunks_exact(cols).zip(&b.data)) {
        *o = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Accumulates gradients of `w · x + b` given upstream `dy`; adds `wᵀ dy`
/// into `dx`.
pub(crate) fn affine_backward(
    w: &Tensor,
    x: &[f64],
    dy: &[f64],
    dw: &mut Tensor,
    db: &mut Tensor,
    dx: &mut [f64],
) {
    let cols = w.shape[1];
    for (r, &g) in dy.iter().enumerate() {
        db.data[r] += g;
        if g == 0.0 {
            continue;
        }
        let wrow = &w.data[r * cols..(r + 1) * cols];
        let dwrow = &mut dw.data[r * cols..(r + 1) * cols];
        for c in 0..cols {
            dwrow[c] += g * x[c];
            dx[c] += g * wrow[c];
        }
    }
}

/// Two-layer perceptron: `w2 · tanh(w1 · x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHead {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

#[derive(Debug, Clone)]
pub struct HeadTrace {
    input: Vec<f64>,
    hidden: Vec<f64>,
}

impl MlpHead {
    pub fn zeros(input: usize, hidden: usize, classes: usize) -> Self {
        MlpHead {
            w1: Tensor::zeros(&[hidden, input]),
            b1: Tensor::zeros(&[hidden]),
            w2: Tensor::zeros(&[classes, hidden]),
            b2: Tensor::zeros(&[classes]),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(input: usize, hidden: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let b1 = (6.0 / (input + hidden) as f64).sqrt();
        let b2 = (6.0 / (hidden + classes) as f64).sqrt();
        MlpHead {
            w1: Tensor::uniform(&[hidden, input], b1, rng),
            b1: Tensor::zeros(&[hidden]),
            w2: Tensor::uniform(&[classes, hidden], b2, rng),
            b2: Tensor::zeros(&[classes]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.shape[1]
    }

    pub fn classes(&self) -> usize {
        self.w2.shape[0]
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, HeadTrace) {
        let mut hidden = vec![0.0; self.w1.shape[0]];
        affine(&self.w1, &self.b1, x, &mut hidden);
        hidden.iter_mut().for_each(|h| *h = h.tanh());
        let mut logits = vec![0.0; self.classes()];
        affine(&self.w2, &self.b2, &hidden, &mut logits);
        (
            logits,
            HeadTrace {
                input: x.to_vec(),
                hidden,
            },
        )
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).0
    }

    /// Accumulates parameter gradients into `grads`; returns `dL/dx`.
    pub fn backward(&self, trace: &HeadTrace, dlogits: &[f64], grads: &mut MlpHead) -> Vec<f64> {
        let mut dhidden = vec![0.0; trace.hidden.len()];
        affine_backward(
            &self.w2,
            &trace.hidden,
            dlogits,
            &mut grads.w2,
            &mut grads.b2,
            &mut dhidden,
        );
        for (d, h) in dhidden.iter_mut().zip(&trace.hidden) {
            *d *= 1.0 - h * h;
        }
        let mut dx = vec![0.0; trace.input.len()];
        affine_backward(
            &self.w1,
            &trace.input,
            &dhidden,
            &mut grads.w1,
            &mut grads.b1,
            &mut dx,
        );
        dx
    }
}

impl Parameters for MlpHead {
    fn tensors(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("w1".into(), &self.w1),
            ("b1".into(), &self.b1),
            ("w2".into(), &self.w2),
            ("b2".into(), &self.b2),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Cross-entropy of `softmax(logits)` against class `target`, with its
/// gradient wrt the logits.
pub fn cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    (loss, grad)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_of_two_zero_one() {
        // 1 / (1 + e^-2)
        let p = softmax(&[2.0, 0.0]);
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.8808).abs() < 1e-4);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax(&[1000.0, -1000.0]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert_eq!(argmax(&p), 0);
    }

    #[test]
    fn argmax_tie_prefers_lowest() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3]), 1);
    }

    #[test]
    fn zero_head_gives_zero_logits() {
        let h = MlpHead::zeros(4, 3, 2);
        assert_eq!(h.logits(&[1.0, -2.0, 3.0, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn head_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let head = MlpHead::init(5, 4, 2, &mut rng);
        let x: Vec<f64> = (0..5).map(|i| (i as f64 * 0.37).sin()).collect();
        let loss = |h: &MlpHead, x: &[f64]| cross_entropy(&h.logits(x), 1).0;

        let (logits, trace) = head.forward(&x);
        let (_, dlogits) = cross_entropy(&logits, 1);
        let mut grads = zeros_like(&head);
        let dx = head.backward(&trace, &dlogits, &mut grads);

        let step = 1e-5;
        let analytic = grads.flat();
        let mut k = 0;
        let mut probe = head.clone();
        for t in 0..4 {
            for i in 0..probe.tensors()[t].1.len() {
                let orig = probe.tensors_mut()[t].data[i];
                probe.tensors_mut()[t].data[i] = orig + step;
                let up = loss(&probe, &x);
                probe.tensors_mut()[t].data[i] = orig - step;
                let down = loss(&probe, &x);
                probe.tensors_mut()[t].data[i] = orig;
                let numeric = (up - down) / (2.0 * step);
                assert!((numeric - analytic[k]).abs() < 1e-8, "param {k}");
                k += 1;
            }
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += step;
            let mut xm = x.clone();
            xm[i] -= step;
            let numeric = (loss(&head, &xp) - loss(&head, &xm)) / (2.0 * step);
            assert!((numeric - dx[i]).abs() < 1e-8);
        }
    }
}
