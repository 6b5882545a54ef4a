//! Small dense MLPs over positional encodings: plain f64 forward/backprop
//! for hot detached paths, and a fused taped forward for gradient passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{matvec, GroupId, ParameterStore, Var};
use crate::encoding::{encoded_len, positional_encoding, positional_encoding_backward};
use crate::math::{sigmoid_f64, softplus_f64};

/// Hidden-layer activation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    /// softplus(beta * x) / beta; beta = 100 approximates ReLU smoothly.
    Softplus { beta: f64 },
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Softplus { beta } => softplus_f64(beta * x) / beta,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Softplus { beta } => sigmoid_f64(beta * x),
        }
    }

    fn apply_var(self, x: Var) -> Var {
        match self {
            Activation::Softplus { beta } => (x * beta).softplus() / beta,
        }
    }
}

/// Architecture of an encoder-style MLP: positional encoding of a 3-vector
/// into `hidden` dense layers into `out_dim` raw outputs (no final
/// activation; heads apply their own).
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub pe_freqs: usize,
    pub hidden: Vec<usize>,
    pub out_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn input_dim(&self) -> usize {
        encoded_len(self.pe_freqs)
    }

    /// Widths of each affine layer as (rows, cols) pairs.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut prev = self.input_dim();
        for &h in &self.hidden {
            shapes.push((h, prev));
            prev = h;
        }
        shapes.push((self.out_dim, prev));
        shapes
    }

    /// Total parameter count (weights + biases).
    pub fn param_len(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }

    /// He-style seeded initialization. The final layer can be zeroed so the
    /// raw outputs start at exactly zero (softmax heads start uniform).
    pub fn init_params(&self, seed: u64, zero_final: bool) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(self.param_len());
        let shapes = self.layer_shapes();
        let last = shapes.len() - 1;
        for (li, &(rows, cols)) in shapes.iter().enumerate() {
            let std = (2.0 / cols as f64).sqrt();
            for _ in 0..rows * cols {
                let w = if li == last && zero_final {
                    0.0
                } else {
                    rng.gen_range(-1.0..1.0) * std
                };
                params.push(w);
            }
            for _ in 0..rows {
                params.push(0.0);
            }
        }
        params
    }

    /// Initialization biased toward the SDF of an origin sphere: the first
    /// layer reads only the raw point columns of the encoding, the final
    /// layer averages positively with bias `-radius`, so the net starts
    /// close to `|p| - radius` (up to a scale the caller can calibrate).
    pub fn init_params_geometric(&self, seed: u64, radius: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(self.param_len());
        let shapes = self.layer_shapes();
        let last = shapes.len() - 1;
        for (li, &(rows, cols)) in shapes.iter().enumerate() {
            if li == last {
                let w = (std::f64::consts::PI).sqrt() / (cols as f64).sqrt();
                params.extend(std::iter::repeat(w).take(rows * cols));
                params.extend(std::iter::repeat(-radius).take(rows));
            } else {
                let std = (2.0 / rows as f64).sqrt();
                let half_width = std * 3.0f64.sqrt();
                for r in 0..rows {
                    for c in 0..cols {
                        let zeroed = li == 0 && c >= 3;
                        let w = if zeroed { 0.0 } else { rng.gen_range(-half_width..half_width) };
                        params.push(w);
                    }
                    let _ = r;
                }
                params.extend(std::iter::repeat(0.0).take(rows));
            }
        }
        params
    }

    /// Offset of layer `li`'s weights (and its bias block right after).
    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut offs = Vec::new();
        let mut off = 0;
        for (rows, cols) in self.layer_shapes() {
            offs.push((off, off + rows * cols));
            off += rows * cols + rows;
        }
        offs
    }
}

/// Reusable forward/backward buffers; one per worker.
#[derive(Default, Clone)]
pub struct MlpScratch {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    grad_a: Vec<f64>,
    grad_b: Vec<f64>,
}

/// Plain forward pass from a raw 3-vector input. Writes raw outputs (no
/// head activation) into `out`.
pub fn forward_f64(
    spec: &MlpSpec,
    params: &[f64],
    p: [f64; 3],
    scratch: &mut MlpScratch,
    out: &mut Vec<f64>,
) {
    let encoded = positional_encoding(p, spec.pe_freqs);
    let shapes = spec.layer_shapes();
    let offsets = spec.layer_offsets();
    scratch.acts.resize(shapes.len() + 1, Vec::new());
    scratch.pre.resize(shapes.len(), Vec::new());
    scratch.acts[0] = encoded;
    for (li, &(rows, cols)) in shapes.iter().enumerate() {
        let (w_off, b_off) = offsets[li];
        let last = li == shapes.len() - 1;
        let (input, rest) = {
            let (head, tail) = scratch.acts.split_at_mut(li + 1);
            (&head[li], &mut tail[0])
        };
        let pre = &mut scratch.pre[li];
        pre.clear();
        for r in 0..rows {
            let row = &params[w_off + r * cols..w_off + (r + 1) * cols];
            let mut acc = params[b_off + r];
            for (w, x) in row.iter().zip(input.iter()) {
                acc += w * x;
            }
            pre.push(acc);
        }
        rest.clear();
        if last {
            rest.extend_from_slice(pre);
        } else {
            rest.extend(pre.iter().map(|&x| spec.activation.apply(x)));
        }
    }
    out.clear();
    out.extend_from_slice(scratch.acts.last().unwrap());
}

/// Gradient of `sum(d_out . raw_outputs)` with respect to the raw input
/// 3-vector, by layer-wise backprop. Returns the input gradient; parameters
/// are treated as constants.
pub fn input_gradient_f64(
    spec: &MlpSpec,
    params: &[f64],
    p: [f64; 3],
    d_out: &[f64],
    scratch: &mut MlpScratch,
) -> [f64; 3] {
    let mut out = Vec::new();
    forward_f64(spec, params, p, scratch, &mut out);
    let shapes = spec.layer_shapes();
    let offsets = spec.layer_offsets();
    scratch.grad_a.clear();
    scratch.grad_a.extend_from_slice(d_out);
    for li in (0..shapes.len()).rev() {
        let (rows, cols) = shapes[li];
        let (w_off, _) = offsets[li];
        let last = li == shapes.len() - 1;
        // through the activation
        if !last {
            for r in 0..rows {
                scratch.grad_a[r] *= spec.activation.derivative(scratch.pre[li][r]);
            }
        }
        // through the affine layer
        scratch.grad_b.clear();
        scratch.grad_b.resize(cols, 0.0);
        for r in 0..rows {
            let g = scratch.grad_a[r];
            if g == 0.0 {
                continue;
            }
            let row = &params[w_off + r * cols..w_off + (r + 1) * cols];
            for (c, w) in row.iter().enumerate() {
                scratch.grad_b[c] += w * g;
            }
        }
        std::mem::swap(&mut scratch.grad_a, &mut scratch.grad_b);
    }
    let mut d_p = [0.0; 3];
    positional_encoding_backward(p, spec.pe_freqs, &scratch.grad_a, &mut d_p);
    d_p
}

/// Taped forward pass with fused affine rows. `p` may be any taped
/// expression (e.g. a refined hit point depending on geometry parameters).
pub fn forward_var(spec: &MlpSpec, store: &ParameterStore, group: GroupId, p: [Var; 3]) -> Vec<Var> {
    let mut x = positional_encoding(p, spec.pe_freqs);
    let shapes = spec.layer_shapes();
    let offsets = spec.layer_offsets();
    for (li, &(rows, cols)) in shapes.iter().enumerate() {
        let (w_off, b_off) = offsets[li];
        let y = matvec(store, group, w_off, rows, cols, Some(b_off), &x);
        x = if li == shapes.len() - 1 {
            y
        } else {
            y.into_iter().map(|v| spec.activation.apply_var(v)).collect()
        };
    }
    x
}
