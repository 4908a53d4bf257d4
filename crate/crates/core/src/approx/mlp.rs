//! Fully connected network: tanh hidden layers, linear output layer.
//!
//! All weights and biases live in one flat vector, layer by layer, each
//! layer stored as its weight matrix (row-major, `out x in`) followed by
//! its bias. Gradients use the same layout, so optimizers and checkpoints
//! never need to know the architecture.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer activations from [`Mlp::forward_trace`], input first.
#[derive(Clone, Debug)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has an output")
    }

    pub fn hidden(&self, layer: usize) -> &[f64] {
        &self.activations[layer + 1]
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        Mlp { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] }
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::ShapeMismatch { expected: 2, found: sizes.len() });
        }
        let expected = param_count(&sizes);
        if params.len() != expected {
            return Err(Error::ShapeMismatch { expected, found: params.len() });
        }
        Ok(Mlp { sizes, params })
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn fan_in_uniform<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for l in 0..net.num_layers() {
            let bound = 1.0 / (net.sizes[l] as f64).sqrt();
            let (w, b) = net.layer_mut(l);
            for v in w.iter_mut().chain(b.iter_mut()) {
                *v = rng.gen_range(-bound..bound);
            }
        }
        net
    }

    /// Orthogonal weights scaled by a per-layer gain, zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], gains: &[f64], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        assert_eq!(gains.len(), net.num_layers());
        for (l, &gain) in gains.iter().enumerate() {
            let (rows, cols) = (net.sizes[l + 1], net.sizes[l]);
            let q = orthogonal_matrix(rows, cols, rng);
            let (w, _) = net.layer_mut(l);
            for r in 0..rows {
                for c in 0..cols {
                    w[r * cols + c] = gain * q[(r, c)];
                }
            }
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offset(&self, layer: usize) -> usize {
        param_count(&self.sizes[..=layer])
    }

    /// `(weights, bias)` of one layer.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let start = self.offset(layer);
        let (rows, cols) = (self.sizes[layer + 1], self.sizes[layer]);
        let (w, rest) = self.params[start..].split_at(rows * cols);
        (w, &rest[..rows])
    }

    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let start = self.offset(layer);
        let (rows, cols) = (self.sizes[layer + 1], self.sizes[layer]);
        let (w, rest) = self.params[start..].split_at_mut(rows * cols);
        (w, &mut rest[..rows])
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::ShapeMismatch { expected: self.input_len(), found: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        for l in 0..self.num_layers() {
            a = self.apply_layer(l, &a);
        }
        Ok(a)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(x.to_vec());
        for l in 0..self.num_layers() {
            let next = self.apply_layer(l, activations.last().expect("non-empty"));
            activations.push(next);
        }
        Ok(Trace { activations })
    }

    fn apply_layer(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let (w, b) = self.layer(l);
        let cols = input.len();
        let last = l + 1 == self.num_layers();
        b.iter()
            .enumerate()
            .map(|(r, bias)| {
                let z = bias + w[r * cols..(r + 1) * cols].iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
                if last {
                    z
                } else {
                    z.tanh()
                }
            })
            .collect()
    }

    pub fn zero_grad(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    /// Gradient of `upstream . output` with respect to every parameter.
    pub fn backward(&self, trace: &Trace, upstream: &[f64]) -> Result<Vec<f64>> {
        let mut grad = self.zero_grad();
        self.backward_into(trace, upstream, &mut grad)?;
        Ok(grad)
    }

    /// Like [`Mlp::backward`] but adds into `grad`.
    pub fn backward_into(&self, trace: &Trace, upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        if upstream.len() != self.output_len() {
            return Err(Error::ShapeMismatch { expected: self.output_len(), found: upstream.len() });
        }
        if grad.len() != self.params.len() {
            return Err(Error::ShapeMismatch { expected: self.params.len(), found: grad.len() });
        }
        if trace.activations.len() != self.sizes.len() {
            return Err(Error::ShapeMismatch { expected: self.sizes.len(), found: trace.activations.len() });
        }
        let mut delta = upstream.to_vec();
        for l in (0..self.num_layers()).rev() {
            let input = &trace.activations[l];
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let start = self.offset(l);
            let (gw, rest) = grad[start..].split_at_mut(rows * cols);
            let gb = &mut rest[..rows];
            for r in 0..rows {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                gb[r] += d;
                for (g, x) in gw[r * cols..(r + 1) * cols].iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            let mut prev = vec![0.0; cols];
            for r in 0..rows {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                for (p, w) in prev.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                    *p += d * w;
                }
            }
            // Input to layer l is tanh of the previous pre-activation.
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
        Ok(())
    }
}

fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let (tall_rows, tall_cols) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let g = DMatrix::from_fn(tall_rows, tall_cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..tall_cols {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    if rows >= cols {
        q
    } else {
        q.transpose()
    }
}

/// Scale `grad` so its Euclidean norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / (norm + 1e-6);
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
    norm
}
