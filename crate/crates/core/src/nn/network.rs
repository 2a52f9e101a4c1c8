use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{AdamParams, Optimizer, Standardizer};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// A fully connected layer; `weights` is `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Layer {
            weights: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    /// He-uniform weights on `[-sqrt(6/fan_in), sqrt(6/fan_in)]`, zero bias.
    fn he_uniform(input: usize, output: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / input.max(1) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((output, input), || {
            rng.random_range(-bound..=bound)
        });
        Layer {
            weights,
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active.
    Train,
    Infer,
}

/// Per-parameter Adam moments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState {
    pub step: u64,
    pub first: Vec<Layer>,
    pub second: Vec<Layer>,
}

impl OptimizerState {
    fn for_layers(layers: &[Layer]) -> Self {
        let zeros = || {
            layers
                .iter()
                .map(|l| Layer::zeros(l.input_dim(), l.output_dim()))
                .collect()
        };
        OptimizerState {
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub dropout_rate: f64,
    pub optimizer: OptimizerState,
    /// Applied by [`super::predict`]; `forward` works in standardized units.
    pub scaler: Standardizer,
}

/// Activations saved by [`Network::forward_batch`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Input to every layer (the batch itself for layer 0).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pub pre: Vec<Array2<f64>>,
    /// Dropout multipliers (0 or `1/(1-p)`) of the hidden layers, train mode only.
    pub dropout: Vec<Option<Array2<f64>>>,
    pub output: Array1<f64>,
}

/// Gradients laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
    /// Batch loss the gradients belong to.
    pub loss: f64,
}

impl Network {
    /// Randomly initialized network with `hidden` ReLU layers and one linear output.
    pub fn new(input_dim: usize, hidden: &[usize], dropout_rate: f64, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &width in hidden.iter().chain(std::iter::once(&1)) {
            layers.push(Layer::he_uniform(prev, width, &mut rng));
            prev = width;
        }
        Self::from_layers(layers, dropout_rate).expect("layer shapes chain by construction")
    }

    pub fn from_layers(layers: Vec<Layer>, dropout_rate: f64) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::Shape("a network needs at least one layer".into()));
        };
        if last.output_dim() != 1 {
            return Err(Error::Shape(format!(
                "output layer has {} neurons, expected 1",
                last.output_dim()
            )));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Shape(format!(
                    "layer {k} emits {} values but layer {} expects {}",
                    pair[0].output_dim(),
                    k + 1,
                    pair[1].input_dim()
                )));
            }
        }
        for l in &layers {
            if l.bias.len() != l.output_dim() {
                return Err(Error::Shape("bias length differs from layer width".into()));
            }
        }
        let input_dim = layers[0].input_dim();
        Ok(Network {
            optimizer: OptimizerState::for_layers(&layers),
            layers,
            dropout_rate,
            scaler: Standardizer::identity(input_dim),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn reset_optimizer(&mut self) {
        self.optimizer = OptimizerState::for_layers(&self.layers);
    }

    /// Forward pass for a single feature vector.
    pub fn forward(&self, x: &[f64], mode: Mode, rng: &mut Rng) -> Result<(f64, Cache)> {
        let batch = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let cache = self.forward_batch(batch, mode, rng)?;
        Ok((cache.output[0], cache))
    }

    /// Forward pass for a `batch x input_dim` matrix.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>, mode: Mode, rng: &mut Rng) -> Result<Cache> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(hidden);
        let mut dropout = Vec::with_capacity(hidden);
        let mut act = x.to_owned();
        let keep = 1.0 - self.dropout_rate;

        for layer in &self.layers[..hidden] {
            let z = act.dot(&layer.weights.t()) + &layer.bias;
            let mut a = z.mapv(|v| v.max(0.0));
            let mask = if mode == Mode::Train && self.dropout_rate > 0.0 {
                let m = Array2::from_shape_simple_fn(a.dim(), || {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                a *= &m;
                Some(m)
            } else {
                None
            };
            inputs.push(act);
            pre.push(z);
            dropout.push(mask);
            act = a;
        }
        let out_layer = &self.layers[hidden];
        let output = (act.dot(&out_layer.weights.t()) + &out_layer.bias).column(0).to_owned();
        inputs.push(act);
        Ok(Cache {
            inputs,
            pre,
            dropout,
            output,
        })
    }

    /// Gradients of the batch mean squared error `mean((pred - y)^2)`.
    pub fn backward(&self, cache: &Cache, targets: &[f64]) -> Result<Gradients> {
        let batch = cache.output.len();
        if targets.len() != batch {
            return Err(Error::Shape(format!(
                "{} targets for a batch of {batch}",
                targets.len()
            )));
        }
        let residual: Vec<f64> = cache
            .output
            .iter()
            .zip(targets)
            .map(|(p, y)| p - y)
            .collect();
        let loss = residual.iter().map(|r| r * r).sum::<f64>() / batch as f64;
        let scale = 2.0 / batch as f64;
        let mut delta = Array2::from_shape_fn((batch, 1), |(i, _)| scale * residual[i]);

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let weights = delta.t().dot(&cache.inputs[l]);
            let bias = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights);
                back.zip_mut_with(&cache.pre[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                if let Some(mask) = &cache.dropout[l - 1] {
                    back *= mask;
                }
                delta = back;
            }
            grads.push(Layer { weights, bias });
        }
        grads.reverse();
        Ok(Gradients { layers: grads, loss })
    }

    /// Applies one update with the configured optimizer.
    pub fn apply(&mut self, grads: &Gradients, optimizer: &Optimizer) {
        match optimizer {
            Optimizer::Adam(params) => adam_step(self, grads, params),
            Optimizer::Sgd { lr } => {
                for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
                    layer.weights.scaled_add(-lr, &g.weights);
                    layer.bias.scaled_add(-lr, &g.bias);
                }
            }
        }
    }
}

/// One Adam update with bias-corrected moments.
pub fn adam_step(net: &mut Network, grads: &Gradients, p: &AdamParams) {
    let state = &mut net.optimizer;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - p.beta1.powi(t);
    let c2 = 1.0 - p.beta2.powi(t);
    let update = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = p.beta1 * *m + (1.0 - p.beta1) * g;
        *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *theta -= p.lr * m_hat / (v_hat.sqrt() + p.epsilon);
    };
    for (k, layer) in net.layers.iter_mut().enumerate() {
        let g = &grads.layers[k];
        let (m, v) = (&mut state.first[k], &mut state.second[k]);
        ndarray::Zip::from(&mut layer.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .and(&g.weights)
            .for_each(|theta, m, v, &g| update(theta, m, v, g));
        ndarray::Zip::from(&mut layer.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .and(&g.bias)
            .for_each(|theta, m, v, &g| update(theta, m, v, g));
    }
}
