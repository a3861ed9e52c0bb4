//! Dense multilayer networks: ReLU on hidden layers, linear output.
//!
//! Parameters live in one flat vector. Layer `l` with fan-in `n` and fan-out
//! `m` occupies `m * n` weights (row-major, one row per output unit) followed
//! by `m` biases.

use rand::Rng;

use crate::error::{NetError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`DenseNet::forward_batch`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `activations[0]` is the input; `activations[l + 1]` the output of layer `l`.
    activations: Vec<Matrix>,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("tape always holds the input")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl DenseNet {
    /// All-zero network.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NetError::BadLayout(sizes.to_vec()));
        }
        Ok(DenseNet {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Fan-in scaled uniform initialization: every weight and bias of a
    /// layer with fan-in `n` is drawn from `U(-1/sqrt(n), 1/sqrt(n))`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = DenseNet::zeros(sizes)?;
        let mut offset = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[offset..offset + (w[0] + 1) * w[1]] {
                *p = rng.random_range(-bound..bound);
            }
            offset += (w[0] + 1) * w[1];
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = DenseNet::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(NetError::ShapeMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Multiplies the output layer's weights and biases by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let n = self.sizes.len();
        let last = (self.sizes[n - 2] + 1) * self.sizes[n - 1];
        let len = self.params.len();
        for p in &mut self.params[len - last..] {
            *p *= factor;
        }
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let start = offset;
            offset += (w[0] + 1) * w[1];
            (start, w[0], w[1])
        })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let out = self.forward_batch(&Matrix::from_vec(1, input.len(), input.to_vec()))?;
        Ok(out.output().row(0).to_vec())
    }

    pub fn forward_batch(&self, input: &Matrix) -> Result<Tape> {
        if input.cols() != self.input_size() {
            return Err(NetError::ShapeMismatch {
                expected: self.input_size(),
                got: input.cols(),
            });
        }
        let n_layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.clone());
        for (l, (offset, fan_in, fan_out)) in self.layers().enumerate() {
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            let prev = &activations[l];
            let mut out = Matrix::zeros(prev.rows(), fan_out);
            let hidden = l + 1 < n_layers;
            for b in 0..prev.rows() {
                let x = prev.row(b);
                let y = out.row_mut(b);
                for j in 0..fan_out {
                    let w = &weights[j * fan_in..(j + 1) * fan_in];
                    let z = bias[j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                    y[j] = if hidden { z.max(0.0) } else { z };
                }
            }
            activations.push(out);
        }
        Ok(Tape { activations })
    }

    /// Reverse pass. `d_output` holds `dL/d(output)` for every sample; the
    /// result is `(dL/d(params), dL/d(input))`, summed over the batch.
    pub fn backward(&self, tape: &Tape, d_output: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        let out = tape.output();
        if d_output.rows() != out.rows() || d_output.cols() != out.cols() {
            return Err(NetError::ShapeMismatch {
                expected: out.cols(),
                got: d_output.cols(),
            });
        }
        let layers: Vec<_> = self.layers().collect();
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = d_output.clone();
        for (l, &(offset, fan_in, fan_out)) in layers.iter().enumerate().rev() {
            let post = &tape.activations[l + 1];
            if l + 1 < layers.len() {
                for (d, a) in delta.as_mut_slice().iter_mut().zip(post.as_slice()) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let prev = &tape.activations[l];
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let (g_w, g_b) = grads[offset..offset + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
            let mut d_prev = Matrix::zeros(prev.rows(), fan_in);
            for b in 0..prev.rows() {
                let x = prev.row(b);
                let dz_row = delta.row(b);
                let dx = d_prev.row_mut(b);
                for j in 0..fan_out {
                    let dz = dz_row[j];
                    if dz == 0.0 {
                        continue;
                    }
                    g_b[j] += dz;
                    let w = &weights[j * fan_in..(j + 1) * fan_in];
                    let gw = &mut g_w[j * fan_in..(j + 1) * fan_in];
                    for i in 0..fan_in {
                        gw[i] += dz * x[i];
                        dx[i] += dz * w[i];
                    }
                }
            }
            delta = d_prev;
        }
        Ok((grads, delta))
    }

    /// Mean batch loss and its parameter gradient.
    ///
    /// `loss` maps the batch output to `(mean loss, dL/d(output))`.
    pub fn grad<F>(&self, inputs: &Matrix, loss: F) -> Result<(f64, Vec<f64>)>
    where
        F: FnOnce(&Matrix) -> (f64, Matrix),
    {
        let tape = self.forward_batch(inputs)?;
        let (value, d_out) = loss(tape.output());
        let (grads, _) = self.backward(&tape, &d_out)?;
        Ok((value, grads))
    }

    /// `self <- tau * online + (1 - tau) * self`.
    pub fn polyak_update(&mut self, online: &DenseNet, tau: f64) -> Result<()> {
        if self.sizes != online.sizes {
            return Err(NetError::ShapeMismatch {
                expected: self.params.len(),
                got: online.params.len(),
            });
        }
        polyak_update(&mut self.params, &online.params, tau);
        Ok(())
    }
}

/// Elementwise soft target update.
pub fn polyak_update(target: &mut [f64], online: &[f64], tau: f64) {
    debug_assert_eq!(target.len(), online.len());
    for (t, o) in target.iter_mut().zip(online) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

/// Mean squared error over a single-output batch and its output gradient.
pub fn mse_loss(output: &Matrix, targets: &[f64]) -> (f64, Matrix) {
    let n = output.rows() as f64;
    let mut d = Matrix::zeros(output.rows(), 1);
    let mut loss = 0.0;
    for (i, y) in targets.iter().enumerate() {
        let e = output.get(i, 0) - y;
        loss += e * e;
        d.set(i, 0, 2.0 * e / n);
    }
    (loss / n, d)
}
