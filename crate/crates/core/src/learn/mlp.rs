//! Dense feed-forward regressor: tanh hidden layers, linear output, trained on
//! mean squared error with hand-written reverse-mode gradients.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::{Error, Result};

/// Weights and biases of every layer. Weight matrices are row-major
/// `out × in`. The same shape doubles as a gradient or optimizer moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
            biases: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut mlp = Self::zeros(sizes)?;
        for (l, w) in mlp.weights.iter_mut().enumerate() {
            let limit = (6.0 / (sizes[l] + sizes[l + 1]) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.gen_range(-limit..limit);
            }
        }
        Ok(mlp)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes).expect("shape already validated")
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Parameter `i` in the flat order: layer by layer, weights then biases.
    pub fn param_mut(&mut self, mut i: usize) -> &mut f64 {
        for l in 0..self.layers() {
            if i < self.weights[l].len() {
                return &mut self.weights[l][i];
            }
            i -= self.weights[l].len();
            if i < self.biases[l].len() {
                return &mut self.biases[l][i];
            }
            i -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    pub fn param(&self, i: usize) -> f64 {
        let mut c = self.clone();
        *c.param_mut(i)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.biases.iter()).all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_size() {
            return Err(Error::Shape { expected: self.input_size(), got: x.len() });
        }
        let mut ws = Workspace::new(self);
        Ok(self.forward_ws(x, &mut ws).to_vec())
    }

    /// Forward pass keeping every layer's activations in `ws`.
    fn forward_ws<'w>(&self, x: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        ws.acts[0].copy_from_slice(x);
        let last = self.layers() - 1;
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let input = &before[l];
            let out = &mut after[0];
            let w = &self.weights[l];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut z = self.biases[l][o];
                for (wi, xi) in row.iter().zip(input.iter()) {
                    z += wi * xi;
                }
                out[o] = if l == last { z } else { z.tanh() };
            }
        }
        &ws.acts[self.layers()]
    }

    /// Mean squared error over the batch and all output dimensions, and its
    /// exact gradient.
    pub fn loss_and_grad(&self, xs: &[&[f64]], ys: &[&[f64]]) -> Result<(f64, Mlp)> {
        let mut grad = self.zeros_like();
        let mut ws = Workspace::new(self);
        let loss = self.accumulate_grad(xs, ys, &mut grad, &mut ws)?;
        Ok((loss, grad))
    }

    pub(crate) fn accumulate_grad(
        &self,
        xs: &[&[f64]],
        ys: &[&[f64]],
        grad: &mut Mlp,
        ws: &mut Workspace,
    ) -> Result<f64> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::InvalidArgument(format!("batch of {} inputs, {} targets", xs.len(), ys.len())));
        }
        debug_assert!(self.same_shape(grad));
        for g in grad.weights.iter_mut().chain(grad.biases.iter_mut()) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let n_out = self.output_size();
        let scale = 1.0 / (xs.len() * n_out) as f64;
        let mut loss = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            if x.len() != self.input_size() {
                return Err(Error::Shape { expected: self.input_size(), got: x.len() });
            }
            if y.len() != n_out {
                return Err(Error::Shape { expected: n_out, got: y.len() });
            }
            self.forward_ws(x, ws);
            // dL/d(output pre-activation); output layer is linear
            let out = &ws.acts[self.layers()];
            for o in 0..n_out {
                let r = out[o] - y[o];
                loss += r * r;
                ws.delta[self.layers() - 1][o] = 2.0 * r * scale;
            }
            for l in (0..self.layers()).rev() {
                let (n_in, n_outl) = (self.sizes[l], self.sizes[l + 1]);
                let input = &ws.acts[l];
                let gw = &mut grad.weights[l];
                let gb = &mut grad.biases[l];
                {
                    let delta = &ws.delta[l];
                    for o in 0..n_outl {
                        let d = delta[o];
                        gb[o] += d;
                        let row = &mut gw[o * n_in..(o + 1) * n_in];
                        for (g, xi) in row.iter_mut().zip(input.iter()) {
                            *g += d * xi;
                        }
                    }
                }
                if l > 0 {
                    let w = &self.weights[l];
                    let (lower, upper) = ws.delta.split_at_mut(l);
                    let prev = &mut lower[l - 1];
                    let delta = &upper[0];
                    for i in 0..n_in {
                        let mut s = 0.0;
                        for o in 0..n_outl {
                            s += w[o * n_in + i] * delta[o];
                        }
                        // tanh' = 1 − a²
                        let a = ws.acts[l][i];
                        prev[i] = s * (1.0 - a * a);
                    }
                }
            }
        }
        Ok(loss * scale)
    }

    pub fn loss(&self, xs: &[&[f64]], ys: &[&[f64]]) -> Result<f64> {
        let mut ws = Workspace::new(self);
        let mut total = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let out = self.forward_ws(x, &mut ws);
            total += out.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total / (xs.len() * self.output_size()) as f64)
    }
}

/// Scratch buffers for one forward/backward pass.
pub(crate) struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    pub(crate) fn new(mlp: &Mlp) -> Self {
        Self {
            acts: mlp.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta: mlp.sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

impl Mlp {
    /// Forward pass reusing caller-owned scratch space.
    pub(crate) fn forward_with<'w>(&self, x: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        self.forward_ws(x, ws)
    }
}

/// Largest relative disagreement between the analytic gradient and central
/// finite differences over `n_probes` randomly chosen parameters, on a random
/// batch of eight samples.
pub fn gradient_check(params: &Mlp, n_probes: usize, rng: &mut Rng) -> Result<f64> {
    if n_probes == 0 {
        return Err(Error::InvalidArgument("n_probes must be at least 1".into()));
    }
    const H: f64 = 1e-5;
    let xs: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..params.input_size()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ys: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..params.output_size()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let yr: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
    let (_, grad) = params.loss_and_grad(&xr, &yr)?;
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for _ in 0..n_probes {
        let i = rng.gen_range(0..params.n_params());
        let orig = params.param(i);
        *probe.param_mut(i) = orig + H;
        let up = probe.loss(&xr, &yr)?;
        *probe.param_mut(i) = orig - H;
        let down = probe.loss(&xr, &yr)?;
        *probe.param_mut(i) = orig;
        let numeric = (up - down) / (2.0 * H);
        let analytic = grad.param(i);
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(worst)
}
