//! Small dense networks with hand-written reverse-mode passes.
//!
//! Hidden layers are ReLU, the output layer is linear; output heads
//! (sigmoid / softplus / splits) are applied by callers. Parameters
//! flatten to a canonical `Vec<f64>` so finite-difference checks and
//! optimizer steps stay trivial.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One dense layer, weights stored row-major [out][in].
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear { w: vec![0.0; in_dim * out_dim], b: vec![0.0; out_dim], in_dim, out_dim }
    }

    /// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
        Linear { w, b: vec![0.0; out_dim], in_dim, out_dim }
    }

    #[inline]
    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.w.chunks_exact(self.in_dim).zip(&self.b))
        {
            let mut acc = *b;
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            *o = acc;
        }
    }

    /// Accumulates parameter gradients and writes dL/dx.
    /// `dy` is dL/d(out); `x` is the forward input.
    #[inline]
    pub fn backward(&self, x: &[f64], dy: &[f64], dx: &mut [f64], grad: &mut Linear) {
        debug_assert_eq!(dx.len(), self.in_dim);
        dx.fill(0.0);
        for (j, (row, grow)) in self
            .w
            .chunks_exact(self.in_dim)
            .zip(grad.w.chunks_exact_mut(self.in_dim))
            .enumerate()
        {
            let g = dy[j];
            if g == 0.0 {
                continue;
            }
            grad.b[j] += g;
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Multi-layer perceptron: ReLU after every layer except the last.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Post-activation values for each layer boundary; `acts[0]` is the input,
/// `acts[i]` the (post-ReLU) output of layer i-1, the last entry the raw
/// linear output.
#[derive(Debug, Clone, Default)]
pub struct MlpTrace {
    pub acts: Vec<Vec<f64>>,
}

impl Mlp {
    /// Builds an MLP with the given layer sizes, e.g. `[7, 32, 32]`.
    pub fn glorot(dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let layers = dims.windows(2).map(|d| Linear::glorot(d[0], d[1], rng)).collect();
        Mlp { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// Forward pass; returns the raw output of the last layer.
    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.out_dim];
            layer.forward(&cur, &mut next);
            if li != last {
                for v in next.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            cur = next;
        }
        out.copy_from_slice(&cur);
    }

    /// Forward pass recording the activations needed by backward.
    /// The raw output lands in `trace.acts.last()`. Buffers are reused
    /// across calls, so traces are cheap in hot loops.
    pub fn forward_trace(&self, x: &[f64], trace: &mut MlpTrace) {
        let n = self.layers.len() + 1;
        if trace.acts.len() != n {
            trace.acts.resize_with(n, Vec::new);
        }
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let (head, tail) = trace.acts.split_at_mut(li + 1);
            let dst = &mut tail[0];
            dst.resize(layer.out_dim, 0.0);
            layer.forward(&head[li], dst);
            if li != last {
                for v in dst.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    pub fn output<'t>(&self, trace: &'t MlpTrace) -> &'t [f64] {
        trace.acts.last().unwrap()
    }

    /// Reverse pass from dL/d(raw output); accumulates into `grad` and
    /// writes dL/d(input) into `dx`.
    pub fn backward(&self, trace: &MlpTrace, dy: &[f64], dx: &mut [f64], grad: &mut Mlp) {
        let mut dcur = dy.to_vec();
        let last = self.layers.len() - 1;
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            if li != last {
                // ReLU derivative gated by the post-activation sign.
                for (d, a) in dcur.iter_mut().zip(&trace.acts[li + 1]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let mut dprev = vec![0.0; layer.in_dim];
            layer.backward(&trace.acts[li], &dcur, &mut dprev, &mut grad.layers[li]);
            dcur = dprev;
        }
        dx.copy_from_slice(&dcur);
    }

    /// Smallest |pre-activation| over all hidden ReLU units of the trace;
    /// used to keep finite-difference probes away from kinks.
    pub fn min_hidden_preact_margin(&self, trace: &MlpTrace) -> f64 {
        let mut margin = f64::INFINITY;
        let last = self.layers.len() - 1;
        for li in 0..last {
            // Post-ReLU zero means the raw pre-activation was <= 0; recompute
            // it to measure how far below zero it was.
            let mut raw = vec![0.0; self.layers[li].out_dim];
            self.layers[li].forward(&trace.acts[li], &mut raw);
            for v in raw {
                margin = margin.min(v.abs());
            }
        }
        margin
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
    }

    /// Reads parameters back in the order written by `append_params`.
    pub fn load_params(&mut self, src: &[f64], cursor: &mut usize) {
        for l in &mut self.layers {
            l.w.copy_from_slice(&src[*cursor..*cursor + l.w.len()]);
            *cursor += l.w.len();
            l.b.copy_from_slice(&src[*cursor..*cursor + l.b.len()]);
            *cursor += l.b.len();
        }
    }

    pub fn add_scaled(&mut self, other: &Mlp, s: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x += s * y;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += s * y;
            }
        }
    }
}
