//! JSON weight checkpoints.
//!
//! ```json
//! {
//!   "format": "rzimpute-network",
//!   "version": 1,
//!   "dropout_rate": 0.1,
//!   "layers": [
//!     { "rows": 64, "cols": 9, "weights": [/* rows*cols, row-major */], "bias": [/* rows */] }
//!   ],
//!   "scaler": { "x_mean": [], "x_std": [], "y_mean": 0.0, "y_std": 1.0 }
//! }
//! ```
//!
//! `rows` is the layer's output width and `cols` its input width. Optimizer
//! moments are not stored.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::network::{Layer, Network};
use super::Standardizer;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "rzimpute-network";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dropout_rate: f64,
    pub layers: Vec<LayerRecord>,
    pub scaler: Standardizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl From<&Network> for Checkpoint {
    fn from(net: &Network) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            dropout_rate: net.dropout_rate,
            layers: net
                .layers
                .iter()
                .map(|l| LayerRecord {
                    rows: l.output_dim(),
                    cols: l.input_dim(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            scaler: net.scaler.clone(),
        }
    }
}

impl Checkpoint {
    pub fn into_network(self) -> Result<Network> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let layers = self
            .layers
            .into_iter()
            .map(|r| {
                let weights = Array2::from_shape_vec((r.rows, r.cols), r.weights)
                    .map_err(|e| Error::Shape(format!("checkpoint weights: {e}")))?;
                Ok(Layer {
                    weights,
                    bias: Array1::from(r.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut net = Network::from_layers(layers, self.dropout_rate)?;
        if self.scaler.x_mean.len() != net.input_dim() {
            return Err(Error::Shape("checkpoint scaler width differs from input layer".into()));
        }
        net.scaler = self.scaler;
        Ok(net)
    }
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    let text = serde_json::to_string(&Checkpoint::from(net))?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    ckpt.into_network()
}
