//! Reference arithmetic for dense ReLU networks, written independently of
//! `DenseNet`: explicit per-layer weight matrices and a straightforward
//! nested-loop forward pass. Shared by the diffnet tests and the acceptance
//! suite.

#![allow(dead_code)]

/// Unpacks a flat parameter vector into `(weights[out][in], biases[out])`
/// per layer, following the documented layout.
pub fn unpack(sizes: &[usize], params: &[f64]) -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut layers = Vec::new();
    let mut k = 0;
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let mut w = vec![vec![0.0; n_in]; n_out];
        for row in w.iter_mut() {
            for v in row.iter_mut() {
                *v = params[k];
                k += 1;
            }
        }
        let b = params[k..k + n_out].to_vec();
        k += n_out;
        layers.push((w, b));
    }
    assert_eq!(k, params.len());
    layers
}

/// Output and the ReLU on/off pattern of every hidden unit.
pub fn forward(sizes: &[usize], params: &[f64], x: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let layers = unpack(sizes, params);
    let mut a = x.to_vec();
    let mut pattern = Vec::new();
    for (l, (w, b)) in layers.iter().enumerate() {
        let mut z: Vec<f64> = w
            .iter()
            .zip(b)
            .map(|(row, bias)| bias + row.iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>())
            .collect();
        if l + 1 < layers.len() {
            for v in z.iter_mut() {
                pattern.push(*v > 0.0);
                *v = v.max(0.0);
            }
        }
        a = z;
    }
    (a, pattern)
}

/// Smooth test loss: mean over the batch of `sum_k c_k o_k + 0.5 d_k o_k^2`.
pub struct QuadLoss {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl QuadLoss {
    pub fn value(&self, outputs: &[Vec<f64>]) -> f64 {
        let n = outputs.len() as f64;
        outputs
            .iter()
            .map(|o| {
                o.iter()
                    .enumerate()
                    .map(|(k, v)| self.c[k] * v + 0.5 * self.d[k] * v * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / n
    }

    pub fn output_grad(&self, o: &[f64], batch: usize) -> Vec<f64> {
        o.iter()
            .enumerate()
            .map(|(k, v)| (self.c[k] + self.d[k] * v) / batch as f64)
            .collect()
    }
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_at_kinks: usize,
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

/// Central differences (step `h`) on every parameter and input coordinate.
/// Coordinates whose perturbation flips a ReLU are skipped: the loss is not
/// differentiable across the kink.
pub fn check(
    sizes: &[usize],
    params: &[f64],
    inputs: &[Vec<f64>],
    loss: &QuadLoss,
    analytic_params: &[f64],
    analytic_inputs: &[Vec<f64>],
    h: f64,
) -> GradCheck {
    let eval = |p: &[f64], xs: &[Vec<f64>]| {
        let runs: Vec<_> = xs.iter().map(|x| forward(sizes, p, x)).collect();
        let outs: Vec<Vec<f64>> = runs.iter().map(|r| r.0.clone()).collect();
        let pattern: Vec<bool> = runs.into_iter().flat_map(|r| r.1).collect();
        (loss.value(&outs), pattern)
    };
    let mut out = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
    };
    let mut p = params.to_vec();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let (lp, pat_p) = eval(&p, inputs);
        p[i] = orig - h;
        let (lm, pat_m) = eval(&p, inputs);
        p[i] = orig;
        if pat_p != pat_m {
            out.skipped_at_kinks += 1;
            continue;
        }
        out.checked += 1;
        out.max_rel_error = out
            .max_rel_error
            .max(rel_err((lp - lm) / (2.0 * h), analytic_params[i]));
    }
    let mut xs = inputs.to_vec();
    for b in 0..xs.len() {
        for j in 0..xs[b].len() {
            let orig = xs[b][j];
            xs[b][j] = orig + h;
            let (lp, pat_p) = eval(params, &xs);
            xs[b][j] = orig - h;
            let (lm, pat_m) = eval(params, &xs);
            xs[b][j] = orig;
            if pat_p != pat_m {
                out.skipped_at_kinks += 1;
                continue;
            }
            out.checked += 1;
            out.max_rel_error = out
                .max_rel_error
                .max(rel_err((lp - lm) / (2.0 * h), analytic_inputs[b][j]));
        }
    }
    out
}
