use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{Mode, Network};
use super::NetworkConfig;
use crate::error::{Error, Result};
use crate::rng;
use crate::Warning;

/// Minimum number of rows `fit` accepts.
pub const MIN_ROWS: usize = 5;

/// Column-wise centring and scaling of features plus the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl Standardizer {
    pub fn identity(features: usize) -> Self {
        Standardizer {
            x_mean: vec![0.0; features],
            x_std: vec![1.0; features],
            y_mean: 0.0,
            y_std: 1.0,
        }
    }

    /// Population mean and standard deviation; a constant column keeps scale 1.
    pub fn fit(x: &Array2<f64>, y: &Array1<f64>) -> Self {
        let (x_mean, x_std) = (0..x.ncols())
            .map(|j| mean_std(x.column(j).iter().copied()))
            .unzip();
        let (y_mean, y_std) = mean_std(y.iter().copied());
        Standardizer {
            x_mean,
            x_std,
            y_mean,
            y_std,
        }
    }

    pub fn transform_x(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.x_mean[j], self.x_std[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }

    pub fn transform_y(&self, y: &Array1<f64>) -> Array1<f64> {
        y.mapv(|v| (v - self.y_mean) / self.y_std)
    }

    pub fn inverse_y(&self, y: &Array1<f64>) -> Array1<f64> {
        y.mapv(|v| v * self.y_std + self.y_mean)
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

/// Which loss drives early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    Validation,
    /// Used when the validation split would be empty.
    Training,
}

/// Per-epoch history of one `fit`.
///
/// Losses are in standardized target units; `val_mae` is in the target's
/// original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_train_loss: f64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_mae: Vec<f64>,
    /// Epochs actually run (1-based count).
    pub stopped_epoch: usize,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub monitor: Monitor,
    pub warnings: Vec<Warning>,
}

/// Trains `net` to regress `y` on `x`.
///
/// A seeded shuffle puts `validation_fraction` of the rows aside. Features
/// and target are standardized with training-split statistics, then up to
/// `epochs` passes of mini-batch updates run. Training stops once the
/// monitored loss has not improved for `patience` consecutive epochs, and the
/// parameters of the best epoch are returned.
pub fn fit(
    mut net: Network,
    x: &Array2<f64>,
    y: &Array1<f64>,
    cfg: &NetworkConfig,
) -> Result<(Network, TrainReport)> {
    cfg.validate()?;
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} feature rows but {} targets", y.len())));
    }
    if x.ncols() != net.input_dim() {
        return Err(Error::Shape(format!(
            "{} features for a network with {} inputs",
            x.ncols(),
            net.input_dim()
        )));
    }
    if n < MIN_ROWS {
        return Err(Error::Config(format!(
            "training needs at least {MIN_ROWS} rows, got {n}"
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("training data contains non-finite values".into()));
    }

    let mut rng = rng::seeded(rng::derive_seed(cfg.seed, &[0x5eed]));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = (n as f64 * cfg.validation_fraction).round() as usize;
    let mut warnings = Vec::new();
    let (val_idx, train_idx, monitor) = if n_val == 0 || n_val >= n {
        warnings.push(Warning::new(format!(
            "validation split of {n} rows is empty; early stopping monitors training loss"
        )));
        (Vec::new(), order.clone(), Monitor::Training)
    } else {
        let (v, t) = order.split_at(n_val);
        (v.to_vec(), t.to_vec(), Monitor::Validation)
    };

    let x_train = x.select(Axis(0), &train_idx);
    let y_train = y.select(Axis(0), &train_idx);
    let scaler = Standardizer::fit(&x_train, &y_train);
    let xs = scaler.transform_x(x);
    let ys = scaler.transform_y(y);
    let x_val = xs.select(Axis(0), &val_idx);
    let y_val = ys.select(Axis(0), &val_idx);

    net.dropout_rate = cfg.dropout_rate;
    net.reset_optimizer();
    net.scaler = scaler;

    let initial_train_loss = mse(&net, &xs.select(Axis(0), &train_idx), &ys.select(Axis(0), &train_idx))?;
    let batch = cfg.batch_size.min(train_idx.len());
    let mut shuffled = train_idx.clone();
    let mut report = TrainReport {
        initial_train_loss,
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs),
        val_mae: Vec::with_capacity(cfg.epochs),
        stopped_epoch: 0,
        best_epoch: 0,
        monitor,
        warnings,
    };
    let mut best = (f64::INFINITY, net.layers.clone());
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        shuffled.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in shuffled.chunks(batch) {
            let xb = xs.select(Axis(0), chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| ys[i]).collect();
            let cache = net.forward_batch(xb.view(), Mode::Train, &mut rng)?;
            let grads = net.backward(&cache, &yb)?;
            net.apply(&grads, &cfg.optimizer);
            total += grads.loss * chunk.len() as f64;
        }
        let train_loss = total / shuffled.len() as f64;
        if !train_loss.is_finite() || !net.all_finite() {
            return Err(Error::Numerical(format!("training diverged at epoch {epoch}")));
        }
        report.train_loss.push(train_loss);

        let monitored = if monitor == Monitor::Validation {
            let pred = infer(&net, &x_val, &mut rng)?;
            let (loss, mae) = errors(&pred, &y_val);
            report.val_loss.push(loss);
            report.val_mae.push(mae * net.scaler.y_std);
            loss
        } else {
            train_loss
        };
        report.stopped_epoch = epoch;

        if monitored < best.0 {
            best = (monitored, net.layers.clone());
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    if report.best_epoch > 0 {
        net.layers = best.1;
    }
    Ok((net, report))
}

fn infer(net: &Network, x: &Array2<f64>, rng: &mut rng::Rng) -> Result<Array1<f64>> {
    Ok(net.forward_batch(x.view(), Mode::Infer, rng)?.output)
}

fn errors(pred: &Array1<f64>, y: &Array1<f64>) -> (f64, f64) {
    let n = y.len().max(1) as f64;
    let (mut sq, mut abs) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(y) {
        sq += (p - t).powi(2);
        abs += (p - t).abs();
    }
    (sq / n, abs / n)
}

fn mse(net: &Network, x: &Array2<f64>, y: &Array1<f64>) -> Result<f64> {
    let mut rng = rng::seeded(0);
    Ok(errors(&infer(net, x, &mut rng)?, y).0)
}

/// Inference-mode predictions in the target's original units.
pub fn predict(net: &Network, x: &Array2<f64>) -> Result<Array1<f64>> {
    if x.ncols() != net.input_dim() {
        return Err(Error::Shape(format!(
            "{} features for a network with {} inputs",
            x.ncols(),
            net.input_dim()
        )));
    }
    if x.nrows() == 0 {
        return Ok(Array1::zeros(0));
    }
    let xs = net.scaler.transform_x(x);
    let mut rng = rng::seeded(0);
    Ok(net.scaler.inverse_y(&infer(net, &xs, &mut rng)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{AdamParams, NetProfile, Optimizer};
    use ndarray::Array2;
    use rand::Rng as _;

    fn toy(n: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut r = rng::seeded(seed);
        let x = Array2::from_shape_simple_fn((n, 3), || r.random_range(-1.0..1.0));
        let y = x.map_axis(Axis(1), |row| 2.0 * row[0] - row[1] + 0.5 * row[2] + 1.0);
        (x, y)
    }

    fn small_cfg() -> NetworkConfig {
        NetworkConfig {
            hidden_layers: vec![16, 8],
            epochs: 60,
            ..NetProfile::Desk.config()
        }
    }

    #[test]
    fn constant_target_is_learned() {
        let (x, _) = toy(60, 1);
        let c = 3.5;
        let y = Array1::from_elem(60, c);
        let cfg = NetworkConfig {
            hidden_layers: vec![],
            epochs: 200,
            optimizer: Optimizer::Adam(AdamParams {
                lr: 0.05,
                ..AdamParams::default()
            }),
            ..small_cfg()
        };
        let net = Network::new(3, &cfg.hidden_layers, 0.0, 2);
        let (net, report) = fit(net, &x, &y, &cfg).unwrap();
        assert!(*report.val_mae.last().unwrap() < 0.01 * c + 0.01);
        let pred = predict(&net, &x).unwrap();
        assert!(pred.iter().all(|p| (p - c).abs() < 0.01 * c + 0.01));
    }

    #[test]
    fn training_reduces_loss() {
        let (x, y) = toy(120, 2);
        let cfg = small_cfg();
        let net = Network::new(3, &cfg.hidden_layers, 0.0, cfg.seed);
        let (_, report) = fit(net, &x, &y, &cfg).unwrap();
        assert!(report.train_loss.last().unwrap() < &report.initial_train_loss);
        assert!(report.best_epoch <= report.stopped_epoch);
        assert!(report.stopped_epoch <= cfg.epochs);
        assert_eq!(report.monitor, Monitor::Validation);
    }

    #[test]
    fn patience_one_stops_right_after_best() {
        let (x, y) = toy(50, 3);
        // a huge SGD step makes validation loss worsen immediately
        let cfg = NetworkConfig {
            patience: 1,
            optimizer: Optimizer::Sgd { lr: 0.5 },
            ..small_cfg()
        };
        let net = Network::new(3, &cfg.hidden_layers, 0.0, 0);
        match fit(net, &x, &y, &cfg) {
            Ok((_, report)) => assert!(report.stopped_epoch <= report.best_epoch + 2),
            Err(Error::Numerical(_)) => {}
            Err(e) => panic!("{e}"),
        }
        let cfg = NetworkConfig {
            patience: 1,
            ..small_cfg()
        };
        let net = Network::new(3, &cfg.hidden_layers, 0.0, 0);
        let (_, report) = fit(net, &x, &y, &cfg).unwrap();
        assert!(report.stopped_epoch <= report.best_epoch + 1);
    }

    #[test]
    fn fit_is_deterministic() {
        let (x, y) = toy(80, 4);
        let cfg = small_cfg();
        let run = || fit(Network::new(3, &cfg.hidden_layers, 0.1, 9), &x, &y, &cfg).unwrap();
        let (a, ra) = run();
        let (b, rb) = run();
        assert_eq!(ra, rb);
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            assert!(la.weights.iter().zip(lb.weights.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn tiny_validation_split_falls_back_to_training_loss() {
        let (x, y) = toy(5, 5);
        let cfg = NetworkConfig {
            validation_fraction: 0.01,
            epochs: 5,
            ..small_cfg()
        };
        let (_, report) = fit(Network::new(3, &[4], 0.0, 0), &x, &y, &cfg).unwrap();
        assert_eq!(report.monitor, Monitor::Training);
        assert_eq!(report.warnings.len(), 1);
        assert!(report.val_loss.is_empty());
    }

    #[test]
    fn too_few_rows_is_rejected() {
        let (x, y) = toy(4, 6);
        assert!(fit(Network::new(3, &[4], 0.0, 0), &x, &y, &small_cfg()).is_err());
    }

    #[test]
    fn predict_edge_cases() {
        let net = Network::new(3, &[5], 0.0, 1);
        assert_eq!(predict(&net, &Array2::zeros((0, 3))).unwrap().len(), 0);
        let x = Array2::from_shape_vec((3, 3), vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1, 0.2, 0.3]).unwrap();
        let p = predict(&net, &x).unwrap();
        assert_eq!(p[0], p[1]);
        assert_eq!(p[1], p[2]);
        let single = net
            .forward(&[0.1, 0.2, 0.3], Mode::Infer, &mut rng::seeded(0))
            .unwrap()
            .0;
        assert_eq!(p[0], single);
        assert!(predict(&net, &Array2::zeros((1, 2))).is_err());
    }

    #[test]
    fn adam_learning_rate_in_config_is_used() {
        let cfg = NetworkConfig {
            optimizer: Optimizer::Adam(AdamParams { lr: 0.0, ..AdamParams::default() }),
            ..small_cfg()
        };
        assert!(cfg.validate().is_err());
    }
}
