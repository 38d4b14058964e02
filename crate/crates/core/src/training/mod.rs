//! Mini-batch training with MSE loss and Adam, plus checkpoint files.

mod adam;
mod checkpoint;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cells::{ModelKind, ModelState, DEFAULT_UNITS};
use crate::dataprep::WindowedDataset;
use crate::error::{Error, Result};
use crate::numkit::Rng;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub units: usize,
    /// Reshuffle sample order every epoch.
    pub shuffle: bool,
    pub learning_rate: f64,
    /// Rescale gradients whose global L2 norm exceeds this threshold.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            seed: 0,
            units: DEFAULT_UNITS,
            shuffle: true,
            learning_rate: AdamConfig::default().learning_rate,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 || self.units < 1 {
            return Err(Error::Argument(format!(
                "epochs, batch_size and units must be >= 1 (got {}, {}, {})",
                self.epochs, self.batch_size, self.units
            )));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Argument(format!("clip_norm must be positive, got {c}")));
            }
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, ..AdamConfig::default() }
    }
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Train a fresh model of `kind` on `dataset`.
pub fn train(kind: ModelKind, dataset: &WindowedDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(kind, dataset, config, |_, _| {})
}

/// Like [`train`], calling `progress(epoch, mean_loss)` after every epoch.
pub fn train_with_progress(
    kind: ModelKind,
    dataset: &WindowedDataset,
    config: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Argument("training dataset is empty".into()));
    }
    let n = dataset.len();
    let mut rng = Rng::new(config.seed);
    let mut model = ModelState::new(kind, config.units, dataset.window(), dataset.horizon(), &mut rng)?;
    let mut adam = AdamState::for_params(config.adam(), &model.params())?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let context = |e: Error| match e {
                Error::Numeric(msg) => Error::Numeric(format!("epoch {}, batch {}: {msg}", epoch + 1, batch_idx + 1)),
                other => other,
            };
            let (x, y) = dataset.batch(chunk)?;
            let loss = model.backward_batch(&x, &y, false).map_err(context)?;
            total += loss * chunk.len() as f64;

            if let Some(limit) = config.clip_norm {
                let norm = model.grad_norm();
                if norm > limit {
                    model.scale_grads(limit / norm);
                }
            }
            let (mut params, grads) = model.params_and_grads_mut();
            adam.step(&mut params, &grads).map_err(context)?;
        }
        let mean = total / n as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric(format!("epoch {}: mean loss {mean}", epoch + 1)));
        }
        history.push(mean);
        progress(epoch + 1, mean);
    }

    let checkpoint = Checkpoint { bounds: dataset.bounds, config: config.clone(), ..Checkpoint::from_model(&model) };
    Ok(TrainOutcome { checkpoint, loss_history: history })
}
