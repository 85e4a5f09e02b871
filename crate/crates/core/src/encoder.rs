//! Feedforward encoder with explicit forward and backward passes.
//!
//! Hidden layers use ReLU; the final layer is linear. The tanh squashing
//! that the quantization loss needs is applied downstream by the objective
//! module, so the gradient injected into [`EncoderParams::backward`] is the
//! full derivative of the training objective with respect to the raw
//! network outputs.
//!
//! Checkpoint format: magic `DSAHNET1`, little-endian u32 layer-dimension
//! count, the u32 dimensions, then per layer the row-major f64 weights
//! followed by the f64 biases.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DSAHNET1";

/// Weight decay applied to weights (not biases) by [`sgd_step`].
pub const DEFAULT_WEIGHT_DECAY: f64 = 5e-4;

/// Layered weights and biases of a feedforward encoder.
/// `weights[l]` maps `dims[l] -> dims[l+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    dims: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Per-layer pre-activations and activations retained by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// activations[0] is the input batch; activations[l+1] the output of layer l.
    activations: Vec<Matrix>,
    /// pre_activations[l] is the linear output of layer l before ReLU.
    pre_activations: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn outputs(&self) -> &Matrix {
        self.activations.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.pre_activations.len()
    }
}

/// Parameter gradients shaped like the encoder they came from.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Initializes weights uniformly in [-a, a] with a = sqrt(6/(fan_in+fan_out));
/// biases start at zero.
pub fn init_params(layer_dims: &[usize], rng: &mut SeededRng) -> Result<EncoderParams> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidArgument(
            "encoder needs at least input and output dimensions".into(),
        ));
    }
    if layer_dims.contains(&0) {
        return Err(Error::InvalidArgument(
            "layer dimensions must be positive".into(),
        ));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in layer_dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut m = Matrix::zeros(fan_in, fan_out);
        for i in 0..fan_in {
            for j in 0..fan_out {
                m.set(i, j, rng.uniform(-a, a));
            }
        }
        weights.push(m);
        biases.push(vec![0.0; fan_out]);
    }
    Ok(EncoderParams {
        dims: layer_dims.to_vec(),
        weights,
        biases,
    })
}

impl EncoderParams {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut Matrix {
        &mut self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    /// Assembles an encoder from explicit weights and biases.
    pub fn from_parts(weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<EncoderParams> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::InvalidArgument(
                "encoder needs one bias vector per weight matrix".into(),
            ));
        }
        let mut dims = vec![weights[0].rows()];
        for (l, w) in weights.iter().enumerate() {
            if w.rows() != dims[l] {
                return Err(Error::dim(
                    "from_parts",
                    format!("layer {l} expects {} inputs, got {}", dims[l], w.rows()),
                ));
            }
            if biases[l].len() != w.cols() {
                return Err(Error::dim(
                    "from_parts",
                    format!(
                        "layer {l} bias length {} vs {} outputs",
                        biases[l].len(),
                        w.cols()
                    ),
                ));
            }
            dims.push(w.cols());
        }
        Ok(EncoderParams {
            dims,
            weights,
            biases,
        })
    }

    /// Runs the batch through every layer, retaining the intermediate
    /// values needed by [`EncoderParams::backward`].
    pub fn forward(&self, batch: &Matrix) -> Result<ForwardTrace> {
        if batch.cols() != self.input_dim() {
            return Err(Error::dim(
                "forward",
                format!(
                    "batch has {} columns, encoder expects {}",
                    batch.cols(),
                    self.input_dim()
                ),
            ));
        }
        let layers = self.weights.len();
        let mut activations = vec![batch.clone()];
        let mut pre_activations = Vec::with_capacity(layers);
        for l in 0..layers {
            let mut z = activations[l].matmul(&self.weights[l])?;
            let bias = &self.biases[l];
            for i in 0..z.rows() {
                for j in 0..z.cols() {
                    z.set(i, j, z.get(i, j) + bias[j]);
                }
            }
            let a = if l + 1 < layers {
                z.map(|v| v.max(0.0))
            } else {
                z.clone()
            };
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardTrace {
            activations,
            pre_activations,
        })
    }

    /// Propagates an output-layer gradient back through the trace, returning
    /// the gradient of every weight and bias. Gradients are sums over the
    /// batch, matching losses that sum (not average) over samples.
    pub fn backward(&self, trace: &ForwardTrace, grad_output: &Matrix) -> Result<Gradients> {
        let layers = self.weights.len();
        if trace.layer_count() != layers {
            return Err(Error::dim(
                "backward",
                format!(
                    "trace has {} layers, encoder {}",
                    trace.layer_count(),
                    layers
                ),
            ));
        }
        let out = trace.outputs();
        if grad_output.rows() != out.rows() || grad_output.cols() != out.cols() {
            return Err(Error::dim(
                "backward",
                format!(
                    "grad_output {}x{}, outputs {}x{}",
                    grad_output.rows(),
                    grad_output.cols(),
                    out.rows(),
                    out.cols()
                ),
            ));
        }
        let mut w_grads = vec![Matrix::zeros(0, 0); layers];
        let mut b_grads = vec![Vec::new(); layers];
        let mut delta = grad_output.clone(); // d objective / d pre_activation of last layer
        for l in (0..layers).rev() {
            w_grads[l] = trace.activations[l].transpose().matmul(&delta)?;
            b_grads[l] = delta.col_sums();
            if l > 0 {
                let back = delta.matmul(&self.weights[l].transpose())?;
                // ReLU derivative on the previous hidden layer's pre-activation
                let gate = trace.pre_activations[l - 1].map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                delta = back.hadamard(&gate)?;
            }
        }
        Ok(Gradients {
            weights: w_grads,
            biases: b_grads,
        })
    }

    /// Signs of the network outputs, with sign(0) = +1.
    pub fn encode_binary(&self, features: &Matrix) -> Result<Matrix> {
        let trace = self.forward(features)?;
        Ok(trace.outputs().map(|v| if v >= 0.0 { 1.0 } else { -1.0 }))
    }
}

/// One gradient-descent step with the default weight decay of
/// [`DEFAULT_WEIGHT_DECAY`] on weights.
pub fn sgd_step(params: &mut EncoderParams, grads: &Gradients, lr: f64) -> Result<()> {
    sgd_step_with_decay(params, grads, lr, DEFAULT_WEIGHT_DECAY)
}

/// One gradient-descent step: params <- params - lr * (grads + decay * weights).
/// Decay applies to weights only; biases follow their raw gradient.
pub fn sgd_step_with_decay(
    params: &mut EncoderParams,
    grads: &Gradients,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if lr <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    if grads.weights.len() != params.weights.len() {
        return Err(Error::dim(
            "sgd_step",
            format!(
                "{} gradient layers, {} parameter layers",
                grads.weights.len(),
                params.weights.len()
            ),
        ));
    }
    for l in 0..params.weights.len() {
        let w = &mut params.weights[l];
        let g = &grads.weights[l];
        if w.rows() != g.rows() || w.cols() != g.cols() {
            return Err(Error::dim(
                "sgd_step",
                format!("layer {l} weight/gradient shapes differ"),
            ));
        }
        for i in 0..w.rows() {
            for j in 0..w.cols() {
                let v = w.get(i, j) - lr * (g.get(i, j) + weight_decay * w.get(i, j));
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("weight update at layer {l}")));
                }
                w.set(i, j, v);
            }
        }
        for (b, gb) in params.biases[l].iter_mut().zip(&grads.biases[l]) {
            let v = *b - lr * gb;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("bias update at layer {l}")));
            }
            *b = v;
        }
    }
    Ok(())
}

pub fn save_checkpoint(params: &EncoderParams, path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(params.dims.len() as u32).to_le_bytes());
    for &d in &params.dims {
        bytes.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for l in 0..params.weights.len() {
        for v in params.weights[l].as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for v in &params.biases[l] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<EncoderParams> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let bad = |detail: &str| Error::BadFormat {
        path: shown.clone(),
        detail: detail.to_string(),
    };
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing DSAHNET1 header"));
    }
    let ndims = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if ndims < 2 {
        return Err(bad("fewer than two layer dimensions"));
    }
    let mut off = 12;
    if bytes.len() < off + ndims * 4 {
        return Err(bad("truncated dimension table"));
    }
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        dims.push(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize);
        off += 4;
    }
    if dims.contains(&0) {
        return Err(bad("zero layer dimension"));
    }
    let expected: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>() * 8;
    if bytes.len() != off + expected {
        return Err(bad(&format!(
            "expected {} parameter bytes, got {}",
            expected,
            bytes.len() - off
        )));
    }
    let read_f64 = |off: &mut usize| {
        let v = f64::from_le_bytes(bytes[*off..*off + 8].try_into().unwrap());
        *off += 8;
        v
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in dims.windows(2) {
        let (rows, cols) = (w[0], w[1]);
        let data: Vec<f64> = (0..rows * cols).map(|_| read_f64(&mut off)).collect();
        weights.push(
            Matrix::from_vec(rows, cols, data).map_err(|e| Error::BadFormat {
                path: shown.clone(),
                detail: e.to_string(),
            })?,
        );
        biases.push((0..cols).map(|_| read_f64(&mut off)).collect());
    }
    Ok(EncoderParams {
        dims,
        weights,
        biases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_batch(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn init_shapes_and_bounds() {
        let mut rng = SeededRng::new(1);
        let p = init_params(&[4, 8, 2], &mut rng).unwrap();
        assert_eq!(p.layer_count(), 2);
        assert_eq!((p.weight(0).rows(), p.weight(0).cols()), (4, 8));
        assert_eq!((p.weight(1).rows(), p.weight(1).cols()), (8, 2));
        let a0 = (6.0 / 12.0f64).sqrt();
        assert!(p.weight(0).max_abs() <= a0);
        let a1 = (6.0 / 10.0f64).sqrt();
        assert!(p.weight(1).max_abs() <= a1);
        assert!(p.bias(0).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_deterministic() {
        let a = init_params(&[3, 5, 2], &mut SeededRng::new(7)).unwrap();
        let b = init_params(&[3, 5, 2], &mut SeededRng::new(7)).unwrap();
        assert_eq!(a, b);
        assert!(init_params(&[3], &mut SeededRng::new(0)).is_err());
        assert!(init_params(&[3, 0, 2], &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn forward_zero_params_gives_zero() {
        let mut rng = SeededRng::new(2);
        let mut p = init_params(&[3, 4, 2], &mut rng).unwrap();
        for l in 0..p.layer_count() {
            p.weights[l] = Matrix::zeros(p.weights[l].rows(), p.weights[l].cols());
        }
        let batch = random_batch(5, 3, &mut rng);
        let trace = p.forward(&batch).unwrap();
        assert!(trace.outputs().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_identity_single_layer() {
        let mut rng = SeededRng::new(3);
        let mut p = init_params(&[3, 3], &mut rng).unwrap();
        p.weights[0] = Matrix::identity(3);
        p.biases[0] = vec![0.0; 3];
        let batch = random_batch(4, 3, &mut rng);
        let trace = p.forward(&batch).unwrap();
        assert_eq!(trace.outputs(), &batch);
    }

    /// Loop-based reimplementation used as the forward oracle.
    fn forward_oracle(p: &EncoderParams, batch: &Matrix) -> Matrix {
        let mut act: Vec<Vec<f64>> = (0..batch.rows()).map(|i| batch.row(i).to_vec()).collect();
        for l in 0..p.layer_count() {
            let w = p.weight(l);
            let last = l + 1 == p.layer_count();
            let mut next = vec![vec![0.0; w.cols()]; act.len()];
            for (i, row) in act.iter().enumerate() {
                for j in 0..w.cols() {
                    let mut z = p.bias(l)[j];
                    for (k, &v) in row.iter().enumerate() {
                        z += v * w.get(k, j);
                    }
                    next[i][j] = if last { z } else { z.max(0.0) };
                }
            }
            act = next;
        }
        Matrix::from_rows(&act).unwrap()
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let mut rng = SeededRng::new(4);
        let p = init_params(&[6, 9, 4], &mut rng).unwrap();
        let batch = random_batch(7, 6, &mut rng);
        let fast = p.forward(&batch).unwrap();
        let slow = forward_oracle(&p, &batch);
        let diff = fast.outputs().sub(&slow).unwrap().max_abs();
        assert!(diff < 1e-12, "max diff {diff}");
    }

    #[test]
    fn backward_zero_grad_output() {
        let mut rng = SeededRng::new(5);
        let p = init_params(&[3, 4, 2], &mut rng).unwrap();
        let batch = random_batch(5, 3, &mut rng);
        let trace = p.forward(&batch).unwrap();
        let grads = p.backward(&trace, &Matrix::zeros(5, 2)).unwrap();
        for g in &grads.weights {
            assert_eq!(g.max_abs(), 0.0);
        }
        for b in &grads.biases {
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_single_linear_closed_form() {
        let mut rng = SeededRng::new(6);
        let p = init_params(&[3, 2], &mut rng).unwrap();
        let batch = random_batch(4, 3, &mut rng);
        let trace = p.forward(&batch).unwrap();
        let grad_out = random_batch(4, 2, &mut rng);
        let grads = p.backward(&trace, &grad_out).unwrap();
        let expected = batch.transpose().matmul(&grad_out).unwrap();
        let diff = grads.weights[0].sub(&expected).unwrap().max_abs();
        assert!(diff < 1e-12);
        // bias gradient is the column sums of the output gradient
        assert_eq!(grads.biases[0], grad_out.col_sums());
    }

    /// Central-difference check of every parameter against a scalar loss
    /// L = sum((out - target)^2).
    fn finite_difference_check(dims: &[usize], seed: u64, tol: f64) {
        let mut rng = SeededRng::new(seed);
        let p = init_params(dims, &mut rng).unwrap();
        let batch = random_batch(5, dims[0], &mut rng);
        let target = random_batch(5, *dims.last().unwrap(), &mut rng);

        let loss = |p: &EncoderParams| -> f64 {
            let out = p.forward(&batch).unwrap();
            out.outputs().sub(&target).unwrap().frob_norm_sq()
        };
        let trace = p.forward(&batch).unwrap();
        let grad_out = trace.outputs().sub(&target).unwrap().scale(2.0);
        let grads = p.backward(&trace, &grad_out).unwrap();

        let h = 1e-5;
        let mut checked = 0usize;
        for l in 0..p.layer_count() {
            for i in 0..p.weight(l).rows() {
                for j in 0..p.weight(l).cols() {
                    let mut plus = p.clone();
                    plus.weights[l].set(i, j, p.weight(l).get(i, j) + h);
                    let mut minus = p.clone();
                    minus.weights[l].set(i, j, p.weight(l).get(i, j) - h);
                    let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    let an = grads.weights[l].get(i, j);
                    let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                    assert!(rel < tol, "weight[{l}][{i},{j}]: analytic {an}, fd {fd}");
                    checked += 1;
                }
            }
            for j in 0..p.bias(l).len() {
                let mut plus = p.clone();
                plus.biases[l][j] += h;
                let mut minus = p.clone();
                minus.biases[l][j] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let an = grads.biases[l][j];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
                assert!(rel < tol, "bias[{l}][{j}]: analytic {an}, fd {fd}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        finite_difference_check(&[4, 6, 3], 8, 1e-5);
    }

    #[test]
    fn sgd_zero_grads_zero_decay_is_fixed_point() {
        let mut rng = SeededRng::new(9);
        let p0 = init_params(&[3, 2], &mut rng).unwrap();
        let mut p = p0.clone();
        let grads = Gradients {
            weights: vec![Matrix::zeros(3, 2)],
            biases: vec![vec![0.0; 2]],
        };
        sgd_step_with_decay(&mut p, &grads, 0.5, 0.0).unwrap();
        assert_eq!(p, p0);
    }

    #[test]
    fn sgd_scalar_quadratic_step() {
        // single weight w = 3, loss (w - 1)^2, gradient 2(w - 1) = 4
        let mut p = EncoderParams {
            dims: vec![1, 1],
            weights: vec![Matrix::from_vec(1, 1, vec![3.0]).unwrap()],
            biases: vec![vec![0.0]],
        };
        let grads = Gradients {
            weights: vec![Matrix::from_vec(1, 1, vec![4.0]).unwrap()],
            biases: vec![vec![0.0]],
        };
        sgd_step_with_decay(&mut p, &grads, 0.1, 0.0).unwrap();
        assert!((p.weight(0).get(0, 0) - 2.6).abs() < 1e-15);
        assert!(sgd_step_with_decay(&mut p, &grads, 0.0, 0.0).is_err());
    }

    #[test]
    fn sgd_decay_only_shrinks_weights() {
        let mut rng = SeededRng::new(10);
        let p0 = init_params(&[4, 3], &mut rng).unwrap();
        let mut p = p0.clone();
        let grads = Gradients {
            weights: vec![Matrix::zeros(4, 3)],
            biases: vec![vec![0.0; 3]],
        };
        let lr = 0.2;
        sgd_step(&mut p, &grads, lr).unwrap();
        let factor = 1.0 - lr * DEFAULT_WEIGHT_DECAY;
        for i in 0..4 {
            for j in 0..3 {
                let expected = p0.weight(0).get(i, j) * factor;
                assert!((p.weight(0).get(i, j) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn encode_binary_signs() {
        let p = EncoderParams {
            dims: vec![2, 2],
            weights: vec![Matrix::identity(2)],
            biases: vec![vec![0.0; 2]],
        };
        let x = Matrix::from_vec(1, 2, vec![0.3, -0.2]).unwrap();
        let codes = p.encode_binary(&x).unwrap();
        assert_eq!(codes.as_slice(), &[1.0, -1.0]);

        // zero network output encodes as +1
        let zero = EncoderParams {
            dims: vec![2, 2],
            weights: vec![Matrix::zeros(2, 2)],
            biases: vec![vec![0.0; 2]],
        };
        let codes = zero.encode_binary(&x).unwrap();
        assert_eq!(codes.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn encode_binary_codomain_and_scale_invariance() {
        let mut rng = SeededRng::new(11);
        let p = init_params(&[5, 7, 3], &mut rng).unwrap();
        let batch = random_batch(6, 5, &mut rng);
        let codes = p.encode_binary(&batch).unwrap();
        assert!(codes.as_slice().iter().all(|&v| v == 1.0 || v == -1.0));

        // positive rescaling of the final layer leaves signs unchanged
        let mut scaled = p.clone();
        let last = scaled.layer_count() - 1;
        scaled.weights[last] = scaled.weights[last].scale(3.5);
        scaled.biases[last].iter_mut().for_each(|b| *b *= 3.5);
        assert_eq!(scaled.encode_binary(&batch).unwrap(), codes);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let mut rng = SeededRng::new(12);
        let mut p = init_params(&[4, 6, 2], &mut rng).unwrap();
        p.biases[0][1] = 0.25;
        save_checkpoint(&p, &path).unwrap();
        let q = load_checkpoint(&path).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        std::fs::write(&path, b"NOTMAGIC").unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            Error::BadFormat { .. }
        ));

        let mut rng = SeededRng::new(13);
        let p = init_params(&[3, 2], &mut rng).unwrap();
        save_checkpoint(&p, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            Error::BadFormat { .. }
        ));
    }

    #[test]
    fn dimension_errors() {
        let mut rng = SeededRng::new(14);
        let p = init_params(&[3, 2], &mut rng).unwrap();
        assert!(p.forward(&Matrix::zeros(2, 4)).is_err());
        let trace = p.forward(&Matrix::zeros(2, 3)).unwrap();
        assert!(p.backward(&trace, &Matrix::zeros(2, 3)).is_err());
    }
}
