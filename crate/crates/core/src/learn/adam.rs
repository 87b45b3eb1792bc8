use serde::{Deserialize, Serialize};

use super::mlp::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Mlp,
    pub v: Mlp,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &Mlp) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn optimizer_step(params: &mut Mlp, grad: &Mlp, state: &mut AdamState, cfg: &AdamConfig) {
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let groups = params
        .weights
        .iter_mut()
        .chain(params.biases.iter_mut())
        .zip(grad.weights.iter().chain(grad.biases.iter()))
        .zip(state.m.weights.iter_mut().chain(state.m.biases.iter_mut()))
        .zip(state.v.weights.iter_mut().chain(state.v.biases.iter_mut()));
    for (((p, g), m), v) in groups {
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(w: f64) -> Mlp {
        let mut m = Mlp::zeros(&[1, 1]).unwrap();
        m.biases[0][0] = w;
        m
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = scalar(0.7);
        let before = p.clone();
        let mut st = AdamState::new(&p);
        let zero = p.zeros_like();
        optimizer_step(&mut p, &zero, &mut st, &AdamConfig::default());
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(0.0);
        let mut st = AdamState::new(&p);
        let g = scalar(1.0);
        let cfg = AdamConfig::default();
        optimizer_step(&mut p, &g, &mut st, &cfg);
        assert!((p.biases[0][0] + cfg.learning_rate).abs() < 1e-10);
    }

    #[test]
    fn converges_on_shifted_parabola() {
        let mut p = scalar(0.0);
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig { learning_rate: 0.1, ..AdamConfig::default() };
        for _ in 0..200 {
            let w = p.biases[0][0];
            let g = scalar(2.0 * (w - 3.0));
            optimizer_step(&mut p, &g, &mut st, &cfg);
        }
        assert!((p.biases[0][0] - 3.0).abs() < 0.05, "{}", p.biases[0][0]);
    }
}
