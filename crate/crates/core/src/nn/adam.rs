use ndarray::Zip;

use super::LayerParams;
use crate::error::{Error, Result};

/// Adam moments for one network, one entry per layer.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<LayerParams>,
    pub v: Vec<LayerParams>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &[LayerParams]) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(params: &[LayerParams], beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<LayerParams> = params.iter().map(LayerParams::zeros_like).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// One bias-corrected Adam update. Gradients are validated before any
    /// parameter is touched, so an error leaves `params` and `self` intact.
    pub fn step(&mut self, params: &mut [LayerParams], grads: &[LayerParams], lr: f64) -> Result<()> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
        }
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "{} parameter blocks, {} gradient blocks, optimizer tracks {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (l, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.weights.dim() != g.weights.dim() || p.bias.dim() != g.bias.dim() {
                return Err(Error::Shape(format!("layer {l}: gradient shape differs from parameters")));
            }
            if !g.weights.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of layer {l} weights")));
            }
            if !g.bias.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of layer {l} bias")));
            }
        }

        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (l, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[l], &mut self.v[l]);
            Zip::from(&mut p.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut p.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        Ok(())
    }
}
