//! Minibatch training loop and evaluation.

use crate::error::{Error, Result};
use crate::model::metrics::{classification_report, rmse, ClassificationReport};
use crate::model::nadam::{Nadam, NadamConfig};
use crate::model::{Mlp, Targets};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: NadamConfig,
    /// Seed for epoch shuffling and dropout; independent of the weight
    /// initialization seed.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 250,
            batch_size: 256,
            optimizer: NadamConfig::default(),
            seed: 0,
        }
    }
}

/// Design matrix plus targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub targets: Targets,
}

impl Dataset {
    pub fn new(x: Array2<f64>, targets: Targets) -> Result<Self> {
        if x.nrows() != targets.class.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: targets.class.len(),
            });
        }
        Ok(Dataset { x, targets })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), idx),
            targets: Targets {
                class: idx.iter().map(|&i| self.targets.class[i]).collect(),
                horizon: self
                    .targets
                    .horizon
                    .as_ref()
                    .map(|h| idx.iter().map(|&i| h[i]).collect()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,validation_loss\n");
        for e in &self.epochs {
            let val = e
                .validation_loss
                .map(|v| v.to_string())
                .unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", e.epoch, e.train_loss, val);
        }
        out
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }
}

/// Full-dataset loss in evaluation mode (no dropout).
pub fn dataset_loss(model: &Mlp, data: &Dataset) -> Result<f64> {
    data.targets.validate(model.config.task, data.len())?;
    let cache = model.forward(&data.x, None)?;
    model.loss(&cache, &data.targets)
}

/// Train in place; returns the per-epoch loss history. Deterministic
/// for fixed seeds: epoch shuffles and dropout draws come from one
/// sequential ChaCha stream each.
pub fn train(
    model: &mut Mlp,
    train_data: &Dataset,
    validation: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    if train_data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::InvalidParam {
            name: "train",
            reason: "epochs and batch_size must be positive".into(),
        });
    }
    train_data
        .targets
        .validate(model.config.task, train_data.len())?;
    let mut optimizer = Nadam::new(config.optimizer, model)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let uses_dropout = model.config.hidden.iter().any(|h| h.dropout > 0.0);

    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch_idx in order.chunks(config.batch_size) {
            let batch = train_data.subset(batch_idx);
            let cache = if uses_dropout {
                model.forward(&batch.x, Some(&mut dropout_rng))?
            } else {
                model.forward(&batch.x, None)?
            };
            epoch_loss += model.loss(&cache, &batch.targets)? * batch.len() as f64;
            seen += batch.len();
            let grads = model.backward(&cache, &batch.targets)?;
            optimizer.apply(model, &grads)?;
        }
        let validation_loss = match validation {
            Some(v) if !v.is_empty() => Some(dataset_loss(model, v)?),
            _ => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / seen as f64,
            validation_loss,
        });
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classification: ClassificationReport,
    /// Horizon error on the raw scale; present for the direction task.
    pub horizon_rmse: Option<f64>,
    pub n_rows: usize,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        let mut out = format!(
            "rows={} accuracy={:.4} macro_f1={:.4}",
            self.n_rows, self.classification.accuracy, self.classification.macro_f1
        );
        for (c, s) in self.classification.per_class.iter().enumerate() {
            let _ = write!(
                out,
                " | class {c}: p={:.4} r={:.4} f1={:.4} n={}",
                s.precision, s.recall, s.f1, s.support
            );
        }
        if let Some(r) = self.horizon_rmse {
            let _ = write!(out, " | horizon_rmse={r:.4}");
        }
        out
    }
}

/// Evaluate on held-out rows: argmax classification plus horizon RMSE.
pub fn evaluate(model: &Mlp, data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    data.targets.validate(model.config.task, data.len())?;
    let pred = model.predict(&data.x)?;
    let predicted: Vec<usize> = pred
        .probs
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
                .map(|(i, _)| i)
                .expect("non-empty row")
        })
        .collect();
    let classification = classification_report(
        &data.targets.class,
        &predicted,
        model.config.task.n_classes(),
    )?;
    let horizon_rmse = match (&pred.reg, &data.targets.horizon) {
        (Some(p), Some(t)) => Some(rmse(t, &p.to_vec())?),
        _ => None,
    };
    Ok(EvalReport {
        classification,
        horizon_rmse,
        n_rows: data.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HiddenSpec, ModelConfig, Task, DEFAULT_LAMBDA};
    use ndarray::Array2;

    /// Linearly separable toy set: class = sign of x0, horizon = 2 + 3*x1.
    fn toy(n: usize, seed: u64, task: Task) -> Dataset {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, 2));
        let mut class = Vec::with_capacity(n);
        let mut horizon = Vec::with_capacity(n);
        for i in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(0.0..1.0);
            x[[i, 0]] = a;
            x[[i, 1]] = b;
            class.push(match task {
                Task::Direction => usize::from(a > 0.0),
                Task::ThreeClass => {
                    if a < -0.3 {
                        0
                    } else if a > 0.3 {
                        2
                    } else {
                        1
                    }
                }
            });
            horizon.push(2.0 + 3.0 * b);
        }
        Dataset::new(
            x,
            Targets {
                class,
                horizon: task.has_regression().then_some(horizon),
            },
        )
        .unwrap()
    }

    fn small_model(task: Task, seed: u64) -> Mlp {
        Mlp::new(ModelConfig {
            input_dim: 2,
            hidden: vec![HiddenSpec::new(16, 0.0)],
            task,
            lambda: DEFAULT_LAMBDA,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn training_reduces_loss_and_separates_classes() {
        let data = toy(400, 5, Task::Direction);
        let mut model = small_model(Task::Direction, 5);
        let config = TrainConfig {
            epochs: 60,
            batch_size: 64,
            ..TrainConfig::default()
        };
        let history = train(&mut model, &data, None, &config).unwrap();
        assert_eq!(history.epochs.len(), 60);
        assert!(history.epochs[59].train_loss < history.epochs[0].train_loss / 2.0);
        let report = evaluate(&model, &data).unwrap();
        assert!(report.classification.accuracy > 0.95, "{}", report.summary());
        assert!(report.horizon_rmse.unwrap() < 1.0);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let data = toy(200, 8, Task::ThreeClass);
        let config = TrainConfig {
            epochs: 5,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let run = |init_seed: u64| {
            let mut model = small_model(Task::ThreeClass, init_seed);
            let h = train(&mut model, &data, None, &config).unwrap();
            (model, h)
        };
        let (m1, h1) = run(11);
        let (m2, h2) = run(11);
        let (m3, h3) = run(12);
        assert_eq!(m1, m2);
        assert_eq!(h1, h2);
        assert!(m1 != m3 || h1 != h3);
    }

    #[test]
    fn validation_loss_is_tracked() {
        let data = toy(300, 2, Task::Direction);
        let val = toy(50, 3, Task::Direction);
        let mut model = small_model(Task::Direction, 1);
        let config = TrainConfig {
            epochs: 3,
            batch_size: 50,
            ..TrainConfig::default()
        };
        let history = train(&mut model, &data, Some(&val), &config).unwrap();
        assert!(history.epochs.iter().all(|e| e.validation_loss.is_some()));
        let csv = history.to_csv();
        assert!(csv.starts_with("epoch,train_loss,validation_loss\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn dropout_training_runs_and_evaluates_cleanly() {
        let data = toy(200, 4, Task::ThreeClass);
        let mut model = Mlp::new(ModelConfig {
            input_dim: 2,
            hidden: vec![HiddenSpec::new(32, 0.2), HiddenSpec::new(16, 0.0)],
            task: Task::ThreeClass,
            lambda: DEFAULT_LAMBDA,
            seed: 6,
        })
        .unwrap();
        let config = TrainConfig {
            epochs: 40,
            batch_size: 64,
            ..TrainConfig::default()
        };
        train(&mut model, &data, None, &config).unwrap();
        let report = evaluate(&model, &data).unwrap();
        assert!(report.classification.accuracy > 0.8, "{}", report.summary());
        assert!(report.horizon_rmse.is_none());
    }

    #[test]
    fn empty_and_mismatched_inputs_error() {
        let mut model = small_model(Task::Direction, 0);
        let empty = Dataset::new(
            Array2::zeros((0, 2)),
            Targets {
                class: vec![],
                horizon: Some(vec![]),
            },
        )
        .unwrap();
        assert!(train(&mut model, &empty, None, &TrainConfig::default()).is_err());
        // three-class labels fed to a binary model
        let bad = toy(10, 0, Task::ThreeClass);
        assert!(evaluate(&model, &bad).is_err());
    }
}
