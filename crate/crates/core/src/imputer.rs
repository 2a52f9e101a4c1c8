//! EM-style imputation of rounded zeros with one network per censored variable.
//!
//! Both algorithms start from an initialized matrix and then repeatedly
//! visit every censored column: a network is fitted on the rows where the
//! column is observed and predicts the censored rows. One sweep over all
//! censored columns is one iteration; iterations continue until the change
//! of the imputed cells drops to `eps` or `maxiter` is reached.
//!
//! [`Algorithm::Raw`] regresses the part on all other parts directly.
//! [`Algorithm::Pivot`] moves the part to the front, regresses its first
//! pivot coordinate on the remaining coordinates, maps predictions back with
//! the inverse transform and restores the absolute scale from the observed
//! parts of each row.

use std::collections::BTreeSet;

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::coda::{self, CompositionMatrix, DetectionLimits};
use crate::error::{Error, Result};
use crate::init::{self, InitConfig};
use crate::nn::{self, Network, NetworkConfig};
use crate::rng;
use crate::Warning;

/// Floor for non-positive raw-space predictions, as a fraction of the limit.
pub const POSITIVITY_FLOOR: f64 = 0.001;

/// Columns with fewer observed rows keep their initial fill.
pub const MIN_OBSERVED: usize = nn::MIN_ROWS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Regression on the raw parts.
    Raw,
    /// Regression in pivot log-ratio coordinates.
    Pivot,
}

/// Order in which censored columns are visited within an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableOrder {
    /// Ascending number of rounded zeros, ties by column index.
    #[default]
    FewestZerosFirst,
    ColumnIndex,
}

/// Statistic compared against `eps` after each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceStat {
    /// Mean absolute change of the imputed cells.
    #[default]
    MeanAbsolute,
    /// Sum of squared relative changes of the imputed cells.
    SumSquaredRelative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputerConfig {
    pub algorithm: Algorithm,
    pub eps: f64,
    pub maxiter: usize,
    pub net: NetworkConfig,
    pub init: InitConfig,
    /// Keep imputations inside `(0, DL]`.
    pub censor: bool,
    pub order: VariableOrder,
    /// Continue training last iteration's network instead of a fresh one.
    pub warm_start: bool,
    pub convergence: ConvergenceStat,
}

impl Default for ImputerConfig {
    fn default() -> Self {
        ImputerConfig {
            algorithm: Algorithm::Pivot,
            eps: 1.0,
            maxiter: 10,
            net: NetworkConfig::default(),
            init: InitConfig::default(),
            censor: true,
            order: VariableOrder::default(),
            warm_start: false,
            convergence: ConvergenceStat::default(),
        }
    }
}

impl ImputerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) {
            return Err(Error::Config(format!("eps {} must be non-negative", self.eps)));
        }
        if self.maxiter == 0 {
            return Err(Error::Config("maxiter must be at least 1".into()));
        }
        self.net.validate()
    }
}

/// How a censored cell got its final value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellSource {
    Initialized,
    Predicted,
    /// Prediction above the limit, set to the limit.
    ClampedAtLimit,
    /// Non-positive raw prediction, set to the positivity floor.
    Floored,
    /// Two-part pivot case: mean of the observed first coordinates.
    CoordinateMean,
    /// Filled by a baseline imputer.
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub row: usize,
    pub col: usize,
    pub source: CellSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationReport {
    pub imputed: Array2<f64>,
    pub iterations: usize,
    pub delta_trace: Vec<f64>,
    pub converged: bool,
    pub variable_order: Vec<usize>,
    /// Final source of every censored cell, row-major.
    pub provenance: Vec<CellRecord>,
    pub warnings: Vec<Warning>,
}

impl ImputationReport {
    pub(crate) fn unchanged(x: &CompositionMatrix) -> Self {
        ImputationReport {
            imputed: x.values().clone(),
            iterations: 0,
            delta_trace: Vec::new(),
            converged: true,
            variable_order: Vec::new(),
            provenance: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub converged: bool,
    pub stop: bool,
    pub warning: Option<Warning>,
}

/// Decides whether the EM loop stops after the latest entry of `trace`.
pub fn check_convergence(trace: &[f64], eps: f64, maxiter: usize) -> Convergence {
    let Some(&last) = trace.last() else {
        return Convergence {
            converged: false,
            stop: false,
            warning: None,
        };
    };
    let converged = last <= eps;
    let exhausted = trace.len() >= maxiter;
    let warning = (!converged && exhausted).then(|| {
        Warning::new(format!(
            "no convergence after {} iterations (last change {last:.6e}, threshold {eps:.6e})",
            trace.len()
        ))
    });
    Convergence {
        converged,
        stop: converged || exhausted,
        warning,
    }
}

pub fn impute(
    x: &CompositionMatrix,
    limits: &DetectionLimits,
    cfg: &ImputerConfig,
) -> Result<ImputationReport> {
    match cfg.algorithm {
        Algorithm::Raw => impute_raw(x, limits, cfg),
        Algorithm::Pivot => impute_pivot(x, limits, cfg),
    }
}

/// Imputation on the raw parts.
pub fn impute_raw(
    x: &CompositionMatrix,
    limits: &DetectionLimits,
    cfg: &ImputerConfig,
) -> Result<ImputationReport> {
    Em::run(x, limits, cfg, Algorithm::Raw)
}

/// Imputation in pivot log-ratio coordinates.
pub fn impute_pivot(
    x: &CompositionMatrix,
    limits: &DetectionLimits,
    cfg: &ImputerConfig,
) -> Result<ImputationReport> {
    Em::run(x, limits, cfg, Algorithm::Pivot)
}

struct Em<'a> {
    limits: &'a DetectionLimits,
    cfg: &'a ImputerConfig,
    algorithm: Algorithm,
    work: CompositionMatrix,
    nets: Vec<Option<Network>>,
    sources: Array2<Option<CellSource>>,
    skipped: BTreeSet<usize>,
    warnings: Vec<Warning>,
}

impl<'a> Em<'a> {
    fn run(
        x: &CompositionMatrix,
        limits: &'a DetectionLimits,
        cfg: &'a ImputerConfig,
        algorithm: Algorithm,
    ) -> Result<ImputationReport> {
        cfg.validate()?;
        limits.validate_for(x)?;
        if x.masked_count() == 0 {
            return Ok(ImputationReport::unchanged(x));
        }
        let (work, warnings) = init::initialize(x, limits, &cfg.init)?;
        let sources = x.mask().mapv(|m| m.then_some(CellSource::Initialized));
        let mut em = Em {
            limits,
            cfg,
            algorithm,
            work,
            nets: vec![None; x.nparts()],
            sources,
            skipped: BTreeSet::new(),
            warnings,
        };
        let order = variable_order(x, cfg.order);
        let cells: Vec<(usize, usize)> = x
            .mask()
            .indexed_iter()
            .filter_map(|(ij, &m)| m.then_some(ij))
            .collect();

        let mut trace = Vec::new();
        let mut converged = false;
        for iteration in 0..cfg.maxiter {
            let before: Vec<f64> = cells.iter().map(|&ij| em.work.values()[ij]).collect();
            for &col in &order {
                em.update_column(col, iteration)?;
            }
            let after: Vec<f64> = cells.iter().map(|&ij| em.work.values()[ij]).collect();
            trace.push(change(&before, &after, cfg.convergence));
            let check = check_convergence(&trace, cfg.eps, cfg.maxiter);
            converged = check.converged;
            if let Some(w) = check.warning {
                em.warnings.push(w);
            }
            if check.stop {
                break;
            }
        }

        let provenance = cells
            .iter()
            .map(|&(row, col)| CellRecord {
                row,
                col,
                source: em.sources[[row, col]].unwrap_or(CellSource::Initialized),
            })
            .collect();
        Ok(ImputationReport {
            imputed: em.work.into_parts().0,
            iterations: trace.len(),
            delta_trace: trace,
            converged,
            variable_order: order,
            provenance,
            warnings: em.warnings,
        })
    }

    fn update_column(&mut self, col: usize, iteration: usize) -> Result<()> {
        let observed = self.work.observed_rows(col);
        let masked = self.work.masked_rows(col);
        let coordinate_mean = self.algorithm == Algorithm::Pivot && self.nparts() == 2;
        let enough = if coordinate_mean {
            !observed.is_empty()
        } else {
            observed.len() >= MIN_OBSERVED
        };
        if !enough {
            if self.skipped.insert(col) {
                self.warnings.push(Warning::at(
                    None,
                    Some(col),
                    format!(
                        "column {col} has only {} observed rows; keeping its initial values",
                        observed.len()
                    ),
                ));
            }
            return Ok(());
        }
        match self.algorithm {
            Algorithm::Raw => self.update_raw(col, iteration, &observed, &masked),
            Algorithm::Pivot => self.update_pivot(col, iteration, &observed, &masked),
        }
    }

    fn nparts(&self) -> usize {
        self.work.nparts()
    }

    fn fit_predict(
        &mut self,
        col: usize,
        iteration: usize,
        features: &Array2<f64>,
        target: &Array1<f64>,
        observed: &[usize],
        masked: &[usize],
    ) -> Result<Array1<f64>> {
        let seed = rng::derive_seed(self.cfg.net.seed, &[iteration as u64, col as u64]);
        let net_cfg = NetworkConfig {
            seed,
            ..self.cfg.net.clone()
        };
        let net = match self.nets[col].take() {
            Some(net) if self.cfg.warm_start => net,
            _ => Network::new(
                features.ncols(),
                &net_cfg.hidden_layers,
                net_cfg.dropout_rate,
                seed,
            ),
        };
        let x_train = features.select(Axis(0), observed);
        let y_train = target.select(Axis(0), observed);
        let (net, report) = nn::fit(net, &x_train, &y_train, &net_cfg)?;
        for w in report.warnings {
            self.warnings.push(Warning::at(None, Some(col), w.message));
        }
        let pred = nn::predict(&net, &features.select(Axis(0), masked))?;
        if let Some(k) = pred.iter().position(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!(
                "network for column {col} predicted {} at row {}",
                pred[k], masked[k]
            )));
        }
        if self.cfg.warm_start {
            self.nets[col] = Some(net);
        }
        Ok(pred)
    }

    fn update_raw(
        &mut self,
        col: usize,
        iteration: usize,
        observed: &[usize],
        masked: &[usize],
    ) -> Result<()> {
        let values = self.work.values();
        let others: Vec<usize> = (0..self.nparts()).filter(|&k| k != col).collect();
        let features = values.select(Axis(1), &others);
        let target = values.column(col).to_owned();
        let pred = self.fit_predict(col, iteration, &features, &target, observed, masked)?;
        let limit = self.limits.require(col)?;
        for (&row, &p) in masked.iter().zip(pred.iter()) {
            let (value, source) = if !self.cfg.censor {
                (p, CellSource::Predicted)
            } else if p > limit {
                (limit, CellSource::ClampedAtLimit)
            } else if p <= 0.0 {
                (POSITIVITY_FLOOR * limit, CellSource::Floored)
            } else {
                (p, CellSource::Predicted)
            };
            self.work.set_masked(row, col, value);
            self.sources[[row, col]] = Some(source);
        }
        Ok(())
    }

    fn update_pivot(
        &mut self,
        col: usize,
        iteration: usize,
        observed: &[usize],
        masked: &[usize],
    ) -> Result<()> {
        let mut coords = coda::pivot_forward_composition(&self.work, col)?;
        let (pred, fallback) = if self.nparts() == 2 {
            let mean = observed.iter().map(|&i| coords.z[[i, 0]]).sum::<f64>()
                / observed.len() as f64;
            (Array1::from_elem(masked.len(), mean), true)
        } else {
            let features = coords.z.slice(s![.., 1..]).to_owned();
            let target = coords.z.column(0).to_owned();
            let pred = self.fit_predict(col, iteration, &features, &target, observed, masked)?;
            (pred, false)
        };

        let limit = self.limits.require(col)?;
        let mut clamped = vec![false; masked.len()];
        for (k, (&row, &z)) in masked.iter().zip(pred.iter()).enumerate() {
            let mut z = z;
            if self.cfg.censor {
                let phi = coda::dl_to_pivot(self.work.values().row(row), limit, col)
                    .map_err(|e| relocate(e, row, col))?;
                if z > phi {
                    z = phi;
                    clamped[k] = true;
                }
            }
            coords.z[[row, 0]] = z;
        }

        let parts = coda::pivot_inverse(&coords).map_err(|e| match e {
            Error::Domain { row, msg, .. } => Error::domain(row, col, msg),
            other => other,
        })?;
        let adjusted = coda::readjust_absolute(&parts, &self.work)?.values;
        for (k, &row) in masked.iter().enumerate() {
            let mut v = adjusted[[row, col]];
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::domain(
                    row,
                    col,
                    format!("inverse transform produced {v}"),
                ));
            }
            if self.cfg.censor && v > limit {
                v = limit;
            }
            let source = if fallback {
                CellSource::CoordinateMean
            } else if clamped[k] {
                CellSource::ClampedAtLimit
            } else {
                CellSource::Predicted
            };
            self.work.set_masked(row, col, v);
            self.sources[[row, col]] = Some(source);
        }
        Ok(())
    }
}

fn relocate(e: Error, row: usize, col: usize) -> Error {
    match e {
        Error::Domain { msg, .. } => Error::domain(row, col, msg),
        other => other,
    }
}

fn variable_order(x: &CompositionMatrix, order: VariableOrder) -> Vec<usize> {
    let mut cols = x.censored_columns();
    if order == VariableOrder::FewestZerosFirst {
        cols.sort_by_key(|&j| (x.masked_in_column(j), j));
    }
    cols
}

fn change(before: &[f64], after: &[f64], stat: ConvergenceStat) -> f64 {
    match stat {
        ConvergenceStat::MeanAbsolute => {
            before
                .iter()
                .zip(after)
                .map(|(a, b)| (b - a).abs())
                .sum::<f64>()
                / before.len().max(1) as f64
        }
        ConvergenceStat::SumSquaredRelative => before
            .iter()
            .zip(after)
            .map(|(a, b)| {
                let base = if *a != 0.0 { a.abs() } else { b.abs().max(f64::MIN_POSITIVE) };
                ((b - a) / base).powi(2)
            })
            .sum(),
    }
}
