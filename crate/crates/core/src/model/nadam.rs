//! Nadam optimizer: Adam with a Nesterov look-ahead on the first
//! moment. State is one (m, v) pair per parameter tensor plus a shared
//! step counter.

use crate::error::{Error, Result};
use crate::model::{DenseGrad, Mlp};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NadamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        NadamConfig {
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl NadamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParam {
                name: "learning_rate",
                reason: "must be positive".into(),
            });
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParam {
                    name,
                    reason: format!("must be in [0, 1), got {v}"),
                });
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParam {
                name: "epsilon",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct Nadam {
    pub config: NadamConfig,
    state: Vec<Moments>,
    pub step: u64,
}

impl Nadam {
    pub fn new(config: NadamConfig, model: &Mlp) -> Result<Self> {
        config.validate()?;
        let state = model
            .params()
            .iter()
            .map(|(w, b)| Moments {
                m_w: Array2::zeros(w.dim()),
                v_w: Array2::zeros(w.dim()),
                m_b: Array1::zeros(b.len()),
                v_b: Array1::zeros(b.len()),
            })
            .collect();
        Ok(Nadam {
            config,
            state,
            step: 0,
        })
    }

    /// One update across every parameter tensor.
    pub fn apply(&mut self, model: &mut Mlp, grads: &[DenseGrad]) -> Result<()> {
        let params = model.params_mut();
        if grads.len() != params.len() || grads.len() != self.state.len() {
            return Err(Error::DimensionMismatch {
                expected: self.state.len(),
                got: grads.len(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);

        let update = |theta: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            // Nesterov-corrected direction
            let direction = c.beta1 * m_hat + (1.0 - c.beta1) * g / bc1;
            *theta -= c.learning_rate / (v_hat.sqrt() + c.epsilon) * direction;
        };

        for ((grad, (w, b)), moments) in grads.iter().zip(params).zip(&mut self.state) {
            if grad.w.dim() != w.dim() || grad.b.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    expected: w.len() + b.len(),
                    got: grad.w.len() + grad.b.len(),
                });
            }
            ndarray::Zip::from(&mut *w)
                .and(&grad.w)
                .and(&mut moments.m_w)
                .and(&mut moments.v_w)
                .for_each(|theta, &g, m, v| update(theta, g, m, v));
            ndarray::Zip::from(&mut *b)
                .and(&grad.b)
                .and(&mut moments.m_b)
                .and(&mut moments.v_b)
                .for_each(|theta, &g, m, v| update(theta, g, m, v));
        }
        Ok(())
    }
}
