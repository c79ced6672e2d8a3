//! Feed-forward network with a softmax classification head and, for the
//! direction task, a parallel linear regression head for the horizon.
//!
//! Everything is explicit: dense layers with tanh activations and
//! inverted dropout, reverse-mode gradients written out by hand, and a
//! Nadam optimizer. Training is deterministic for a fixed seed.

pub mod checkpoint;
pub mod metrics;
pub mod nadam;
pub mod train;

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Floor applied inside log() when computing cross-entropy.
pub const LOG_EPS: f64 = 1e-12;
/// Cross-entropy weight in the dual loss; the squared-error term gets
/// the complement.
pub const DEFAULT_LAMBDA: f64 = 0.99;

/// Prediction task. `Direction` adds the scalar horizon head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Direction,
    ThreeClass,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Direction => 2,
            Task::ThreeClass => 3,
        }
    }

    pub fn has_regression(self) -> bool {
        matches!(self, Task::Direction)
    }
}

/// One hidden layer: width plus dropout rate applied after tanh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenSpec {
    pub units: usize,
    pub dropout: f64,
}

impl HiddenSpec {
    pub fn new(units: usize, dropout: f64) -> Self {
        HiddenSpec { units, dropout }
    }
}

/// Benchmark topologies, smallest to largest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    Mlp1,
    Mlp2,
    Mlp3,
    Mlp4,
    Mlp5,
}

impl Preset {
    pub fn hidden(self) -> Vec<HiddenSpec> {
        match self {
            Preset::Mlp1 => vec![HiddenSpec::new(4, 0.0)],
            Preset::Mlp2 => vec![HiddenSpec::new(512, 0.2), HiddenSpec::new(256, 0.0)],
            Preset::Mlp3 => vec![HiddenSpec::new(256, 0.2), HiddenSpec::new(256, 0.0)],
            Preset::Mlp4 => vec![
                HiddenSpec::new(256, 0.2),
                HiddenSpec::new(256, 0.2),
                HiddenSpec::new(256, 0.0),
            ],
            Preset::Mlp5 => vec![
                HiddenSpec::new(128, 0.2),
                HiddenSpec::new(128, 0.2),
                HiddenSpec::new(128, 0.0),
            ],
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "mlp1" | "mlp_1" => Ok(Preset::Mlp1),
            "mlp2" | "mlp_2" => Ok(Preset::Mlp2),
            "mlp3" | "mlp_3" => Ok(Preset::Mlp3),
            "mlp4" | "mlp_4" => Ok(Preset::Mlp4),
            "mlp5" | "mlp_5" => Ok(Preset::Mlp5),
            other => Err(Error::InvalidParam {
                name: "preset",
                reason: format!("unknown topology {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: Vec<HiddenSpec>,
    pub task: Task,
    pub lambda: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn from_preset(preset: Preset, input_dim: usize, task: Task, seed: u64) -> Self {
        ModelConfig {
            input_dim,
            hidden: preset.hidden(),
            task,
            lambda: DEFAULT_LAMBDA,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidParam {
                name: "input_dim",
                reason: "must be positive".into(),
            });
        }
        if self.hidden.is_empty() {
            return Err(Error::InvalidParam {
                name: "hidden",
                reason: "need at least one hidden layer".into(),
            });
        }
        for h in &self.hidden {
            if h.units == 0 || !(0.0..1.0).contains(&h.dropout) {
                return Err(Error::InvalidParam {
                    name: "hidden",
                    reason: format!("bad layer spec {h:?}"),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParam {
                name: "lambda",
                reason: format!("must be in [0, 1], got {}", self.lambda),
            });
        }
        Ok(())
    }
}

/// Dense layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn init(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = 1.0 / (fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| dist.sample(rng));
        Dense {
            w,
            b: Array1::zeros(fan_out),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }
}

/// Gradients with the same shapes as [`Dense`].
#[derive(Debug, Clone)]
pub struct DenseGrad {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub config: ModelConfig,
    pub trunk: Vec<Dense>,
    pub class_head: Dense,
    pub reg_head: Option<Dense>,
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    /// Input plus post-activation (and post-dropout) output of each
    /// trunk layer.
    activations: Vec<Array2<f64>>,
    /// Inverted-dropout masks per trunk layer (empty when eval).
    masks: Vec<Option<Array2<f64>>>,
    pub probs: Array2<f64>,
    pub reg: Option<Array1<f64>>,
}

/// Classification probabilities and optional horizon predictions.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub probs: Array2<f64>,
    pub reg: Option<Array1<f64>>,
}

/// Batch targets: class index per row, horizon per row for the
/// direction task.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub class: Vec<usize>,
    pub horizon: Option<Vec<f64>>,
}

impl Targets {
    pub fn validate(&self, task: Task, rows: usize) -> Result<()> {
        if self.class.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                got: self.class.len(),
            });
        }
        if self.class.iter().any(|&c| c >= task.n_classes()) {
            return Err(Error::InvalidParam {
                name: "class",
                reason: "label out of range for task".into(),
            });
        }
        match (&self.horizon, task.has_regression()) {
            (Some(h), true) if h.len() == rows => Ok(()),
            (None, false) => Ok(()),
            (Some(h), _) => Err(Error::DimensionMismatch {
                expected: rows,
                got: h.len(),
            }),
            (None, true) => Err(Error::DimensionMismatch {
                expected: rows,
                got: 0,
            }),
        }
    }
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

impl Mlp {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut trunk = Vec::with_capacity(config.hidden.len());
        let mut fan_in = config.input_dim;
        for h in &config.hidden {
            trunk.push(Dense::init(fan_in, h.units, &mut rng));
            fan_in = h.units;
        }
        let class_head = Dense::init(fan_in, config.task.n_classes(), &mut rng);
        let reg_head = config
            .task
            .has_regression()
            .then(|| Dense::init(fan_in, 1, &mut rng));
        Ok(Mlp {
            config,
            trunk,
            class_head,
            reg_head,
        })
    }

    /// Forward pass. `dropout_rng` enables training mode with inverted
    /// dropout; `None` runs in evaluation mode.
    pub fn forward(
        &self,
        x: &Array2<f64>,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardCache> {
        if x.ncols() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                got: x.ncols(),
            });
        }
        let mut activations = vec![x.clone()];
        let mut masks = Vec::with_capacity(self.trunk.len());
        let mut current = x.clone();
        for (layer, spec) in self.trunk.iter().zip(&self.config.hidden) {
            let mut a = layer.forward(&current).mapv(f64::tanh);
            let mask = match (&mut dropout_rng, spec.dropout > 0.0) {
                (Some(rng), true) => {
                    let keep = 1.0 - spec.dropout;
                    let m = Array2::from_shape_fn(a.dim(), |_| {
                        if rng.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    a *= &m;
                    Some(m)
                }
                _ => None,
            };
            masks.push(mask);
            activations.push(a.clone());
            current = a;
        }
        let probs = softmax_rows(&self.class_head.forward(&current));
        let reg = self
            .reg_head
            .as_ref()
            .map(|h| h.forward(&current).column(0).to_owned());
        Ok(ForwardCache {
            activations,
            masks,
            probs,
            reg,
        })
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Prediction> {
        let cache = self.forward(x, None)?;
        Ok(Prediction {
            probs: cache.probs,
            reg: cache.reg,
        })
    }

    /// Dual loss on a forward cache: lambda * cross-entropy plus
    /// (1 - lambda) * mean squared error of the horizon head.
    pub fn loss(&self, cache: &ForwardCache, targets: &Targets) -> Result<f64> {
        let rows = cache.probs.nrows();
        targets.validate(self.config.task, rows)?;
        let mut ce = 0.0;
        for (i, &c) in targets.class.iter().enumerate() {
            ce -= cache.probs[[i, c]].max(LOG_EPS).ln();
        }
        ce /= rows as f64;
        let mse = match (&cache.reg, &targets.horizon) {
            (Some(pred), Some(truth)) => {
                pred.iter()
                    .zip(truth)
                    .map(|(p, t)| (p - t).powi(2))
                    .sum::<f64>()
                    / rows as f64
            }
            _ => 0.0,
        };
        let lambda = self.config.lambda;
        Ok(lambda * ce + (1.0 - lambda) * mse)
    }

    /// Reverse-mode gradients of the dual loss for one batch. Returns
    /// gradients ordered trunk first, then class head, then the
    /// regression head when present.
    pub fn backward(&self, cache: &ForwardCache, targets: &Targets) -> Result<Vec<DenseGrad>> {
        let rows = cache.probs.nrows();
        targets.validate(self.config.task, rows)?;
        let lambda = self.config.lambda;
        let scale = 1.0 / rows as f64;

        // softmax + cross-entropy: d z = (p - y) * lambda / rows
        let mut d_class = cache.probs.clone();
        for (i, &c) in targets.class.iter().enumerate() {
            d_class[[i, c]] -= 1.0;
        }
        d_class *= lambda * scale;

        let last = cache.activations.last().expect("at least the input");
        let class_grad = DenseGrad {
            w: last.t().dot(&d_class),
            b: d_class.sum_axis(Axis(0)),
        };
        let mut d_hidden = d_class.dot(&self.class_head.w.t());

        let reg_grad = match (&self.reg_head, &cache.reg, &targets.horizon) {
            (Some(head), Some(pred), Some(truth)) => {
                // d mse / d yhat = 2 (yhat - t) / rows, weighted by 1 - lambda
                let d_reg = Array2::from_shape_fn((rows, 1), |(i, _)| {
                    2.0 * (pred[i] - truth[i]) * (1.0 - lambda) * scale
                });
                d_hidden = d_hidden + d_reg.dot(&head.w.t());
                Some(DenseGrad {
                    w: last.t().dot(&d_reg),
                    b: d_reg.sum_axis(Axis(0)),
                })
            }
            _ => None,
        };

        let mut trunk_grads: Vec<DenseGrad> = Vec::with_capacity(self.trunk.len());
        let mut d_out = d_hidden;
        for l in (0..self.trunk.len()).rev() {
            let a = &cache.activations[l + 1];
            let mut d_act = d_out;
            if let Some(mask) = &cache.masks[l] {
                d_act *= mask;
            }
            // derivative of tanh from the pre-dropout activation
            let pre_drop = match &cache.masks[l] {
                Some(mask) => {
                    let mut t = a.clone();
                    t.zip_mut_with(mask, |v, &m| {
                        if m != 0.0 {
                            *v /= m;
                        }
                    });
                    t
                }
                None => a.clone(),
            };
            d_act.zip_mut_with(&pre_drop, |d, &t| *d *= 1.0 - t * t);
            let input = &cache.activations[l];
            trunk_grads.push(DenseGrad {
                w: input.t().dot(&d_act),
                b: d_act.sum_axis(Axis(0)),
            });
            d_out = d_act.dot(&self.trunk[l].w.t());
        }
        trunk_grads.reverse();

        let mut grads = trunk_grads;
        grads.push(class_grad);
        if let Some(g) = reg_grad {
            grads.push(g);
        }
        Ok(grads)
    }

    /// Mutable views of every parameter tensor, in gradient order.
    pub fn params_mut(&mut self) -> Vec<(&mut Array2<f64>, &mut Array1<f64>)> {
        let mut out: Vec<(&mut Array2<f64>, &mut Array1<f64>)> = Vec::new();
        for layer in &mut self.trunk {
            out.push((&mut layer.w, &mut layer.b));
        }
        out.push((&mut self.class_head.w, &mut self.class_head.b));
        if let Some(h) = &mut self.reg_head {
            out.push((&mut h.w, &mut h.b));
        }
        out
    }

    pub fn params(&self) -> Vec<(&Array2<f64>, &Array1<f64>)> {
        let mut out: Vec<(&Array2<f64>, &Array1<f64>)> = Vec::new();
        for layer in &self.trunk {
            out.push((&layer.w, &layer.b));
        }
        out.push((&self.class_head.w, &self.class_head.b));
        if let Some(h) = &self.reg_head {
            out.push((&h.w, &h.b));
        }
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.params().iter().map(|(w, b)| w.len() + b.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn tiny(task: Task, seed: u64) -> Mlp {
        Mlp::new(ModelConfig {
            input_dim: 3,
            hidden: vec![HiddenSpec::new(5, 0.0), HiddenSpec::new(4, 0.0)],
            task,
            lambda: DEFAULT_LAMBDA,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let z = array![[1.0, 2.0, 3.0], [-10.0, 0.0, 10.0], [5.0, 5.0, 5.0]];
        let p = softmax_rows(&z);
        for row in p.rows() {
            assert_relative_eq!(row.sum(), 1.0, max_relative = 1e-12);
            assert!(row.iter().all(|&v| v > 0.0));
        }
        assert_relative_eq!(p[[2, 0]], 1.0 / 3.0, max_relative = 1e-12);
        // large logits stay finite
        let p = softmax_rows(&array![[1000.0, 0.0]]);
        assert!(p[[0, 0]].is_finite() && p[[0, 0]] > 0.999);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = tiny(Task::Direction, 9);
        let b = tiny(Task::Direction, 9);
        let c = tiny(Task::Direction, 10);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let limit = 1.0 / 3f64.sqrt();
        assert!(a.trunk[0].w.iter().all(|&v| v.abs() <= limit));
        assert!(a.trunk[0].b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dual_loss_perfect_prediction_is_small() {
        let model = tiny(Task::Direction, 1);
        let cache = ForwardCache {
            activations: vec![],
            masks: vec![],
            probs: array![[1.0, 0.0], [0.0, 1.0]],
            reg: Some(array![3.0, 7.0].into_iter().collect()),
        };
        let targets = Targets {
            class: vec![0, 1],
            horizon: Some(vec![3.0, 7.0]),
        };
        // probability 1 hits the log floor only at exactly 0 on the off class
        let loss = model.loss(&cache, &targets).unwrap();
        assert!(loss.abs() < 1e-10, "loss = {loss}");
    }

    #[test]
    fn finite_difference_gradient_check() {
        for task in [Task::Direction, Task::ThreeClass] {
            let mut model = tiny(task, 4);
            let x = array![
                [0.3, -0.2, 0.9],
                [0.1, 0.5, -0.7],
                [-0.4, 0.8, 0.2],
                [0.9, -0.9, 0.4],
            ];
            let targets = Targets {
                class: vec![0, 1, 0, 1],
                horizon: task.has_regression().then(|| vec![2.0, 5.0, 1.0, 9.0]),
            };
            let cache = model.forward(&x, None).unwrap();
            let grads = model.backward(&cache, &targets).unwrap();

            let eps = 1e-6;
            // probe a handful of coordinates in every tensor
            for (p_idx, grad) in grads.iter().enumerate() {
                let probe: Vec<(usize, usize)> = {
                    let (r, c) = grad.w.dim();
                    vec![(0, 0), (r - 1, c - 1), (r / 2, c / 2)]
                };
                for (r, c) in probe {
                    let analytic = grad.w[[r, c]];
                    {
                        let mut params = model.params_mut();
                        params[p_idx].0[[r, c]] += eps;
                    }
                    let plus = {
                        let cache = model.forward(&x, None).unwrap();
                        model.loss(&cache, &targets).unwrap()
                    };
                    {
                        let mut params = model.params_mut();
                        params[p_idx].0[[r, c]] -= 2.0 * eps;
                    }
                    let minus = {
                        let cache = model.forward(&x, None).unwrap();
                        model.loss(&cache, &targets).unwrap()
                    };
                    {
                        let mut params = model.params_mut();
                        params[p_idx].0[[r, c]] += eps;
                    }
                    let numeric = (plus - minus) / (2.0 * eps);
                    assert!(
                        (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(1.0),
                        "tensor {p_idx} at ({r},{c}): analytic {analytic} vs numeric {numeric}"
                    );
                }
                // bias coordinate 0
                let analytic = grad.b[0];
                {
                    let mut params = model.params_mut();
                    params[p_idx].1[0] += eps;
                }
                let plus = {
                    let cache = model.forward(&x, None).unwrap();
                    model.loss(&cache, &targets).unwrap()
                };
                {
                    let mut params = model.params_mut();
                    params[p_idx].1[0] -= 2.0 * eps;
                }
                let minus = {
                    let cache = model.forward(&x, None).unwrap();
                    model.loss(&cache, &targets).unwrap()
                };
                {
                    let mut params = model.params_mut();
                    params[p_idx].1[0] += eps;
                }
                let numeric = (plus - minus) / (2.0 * eps);
                assert!(
                    (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(1.0),
                    "tensor {p_idx} bias: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn dropout_masks_are_inverted_and_eval_is_deterministic() {
        let model = Mlp::new(ModelConfig {
            input_dim: 3,
            hidden: vec![HiddenSpec::new(64, 0.5)],
            task: Task::ThreeClass,
            lambda: DEFAULT_LAMBDA,
            seed: 2,
        })
        .unwrap();
        let x = array![[0.1, 0.2, 0.3]];
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cache = model.forward(&x, Some(&mut rng)).unwrap();
        let mask = cache.masks[0].as_ref().unwrap();
        assert!(mask.iter().all(|&m| m == 0.0 || (m - 2.0).abs() < 1e-12));
        assert!(mask.iter().any(|&m| m == 0.0));
        // eval mode ignores dropout and is repeatable
        let a = model.predict(&x).unwrap();
        let b = model.predict(&x).unwrap();
        assert_eq!(a.probs, b.probs);
    }

    #[test]
    fn presets_have_expected_shapes() {
        let m = Mlp::new(ModelConfig::from_preset(Preset::Mlp1, 26, Task::Direction, 0)).unwrap();
        assert_eq!(m.trunk.len(), 1);
        assert_eq!(m.trunk[0].w.dim(), (26, 4));
        assert!(m.reg_head.is_some());
        let m = Mlp::new(ModelConfig::from_preset(Preset::Mlp4, 26, Task::ThreeClass, 0)).unwrap();
        assert_eq!(m.trunk.len(), 3);
        assert_eq!(m.class_head.w.dim(), (256, 3));
        assert!(m.reg_head.is_none());
        assert_eq!(Preset::parse("MLP_5").unwrap(), Preset::Mlp5);
        assert!(Preset::parse("resnet").is_err());
    }
}
