//! A dense feed-forward regression network written from scratch.
//!
//! Hidden layers use ReLU, the output is a single linear neuron, dropout is
//! applied after every hidden layer during training, the loss is mean squared
//! error and Adam (or plain SGD) updates the parameters. [`fit`] adds a
//! train/validation split, feature standardization and patience-based early
//! stopping.

mod checkpoint;
mod network;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use network::{adam_step, Cache, Gradients, Layer, Mode, Network, OptimizerState};
pub use train::{fit, predict, Monitor, Standardizer, TrainReport, MIN_ROWS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    Adam(AdamParams),
    Sgd { lr: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam(AdamParams::default())
    }
}

/// Training loss. Mean squared error without a 1/2 factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    Mse,
}

/// Evaluation metric reported per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Mae,
}

/// Named layer/epoch presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetProfile {
    /// Ten hidden layers of 1000, 900, ..., 100 units and 300 epochs.
    Paper,
    /// Three hidden layers of 64, 48 and 32 units and 150 epochs.
    #[default]
    Desk,
}

impl NetProfile {
    pub fn config(self) -> NetworkConfig {
        match self {
            NetProfile::Paper => NetworkConfig::default(),
            NetProfile::Desk => NetworkConfig {
                hidden_layers: vec![64, 48, 32],
                epochs: 150,
                ..NetworkConfig::default()
            },
        }
    }
}

impl std::str::FromStr for NetProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(NetProfile::Paper),
            "desk" => Ok(NetProfile::Desk),
            other => Err(Error::Config(format!(
                "unknown network profile {other:?} (expected paper or desk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Widths of the hidden layers, input side first.
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    /// Epochs without improvement of the monitored loss before stopping.
    pub patience: usize,
    pub dropout_rate: f64,
    pub validation_fraction: f64,
    pub optimizer: Optimizer,
    pub loss: Loss,
    pub metric: Metric,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden_layers: (1..=10).rev().map(|k| k * 100).collect(),
            epochs: 300,
            patience: 25,
            dropout_rate: 0.1,
            validation_fraction: 0.2,
            optimizer: Optimizer::default(),
            loss: Loss::Mse,
            metric: Metric::Mae,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if self.epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs, patience and batch size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} is outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction {} is outside (0, 1)",
                self.validation_fraction
            )));
        }
        let lr = match self.optimizer {
            Optimizer::Adam(p) => p.lr,
            Optimizer::Sgd { lr } => lr,
        };
        if !(lr > 0.0) {
            return Err(Error::Config(format!("learning rate {lr} must be positive")));
        }
        Ok(())
    }
}
