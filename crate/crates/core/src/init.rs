//! Initial fills for rounded zeros.
//!
//! Log-ratios cannot be taken of zeros, so every censored cell receives a
//! positive starting value before the EM loop runs.

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::coda::{CompositionMatrix, DetectionLimits};
use crate::error::{Error, Result};
use crate::rng;
use crate::Warning;

/// Fraction of the detection limit used by the univariate 65% rule.
pub const DL_FRACTION: f64 = 0.65;

/// kNN fills are clamped to this fraction of the limit.
pub const AKNN_CLAMP: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// k nearest neighbours in Aitchison geometry, median of rescaled donors.
    Aknn,
    /// 65% of the detection limit.
    Dl65,
    /// Uniform draw on `(0, DL)`.
    UniformDl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub method: InitMethod,
    pub k: usize,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            method: InitMethod::Aknn,
            k: 5,
            seed: 0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self, nrows: usize) -> Result<()> {
        if self.method == InitMethod::Aknn {
            if self.k == 0 {
                return Err(Error::Config("k must be at least 1".into()));
            }
            if self.k > nrows.saturating_sub(1) {
                return Err(Error::Config(format!(
                    "k = {} needs at least {} rows, got {nrows}",
                    self.k,
                    self.k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Runs the configured initializer.
pub fn initialize(
    x: &CompositionMatrix,
    limits: &DetectionLimits,
    cfg: &InitConfig,
) -> Result<(CompositionMatrix, Vec<Warning>)> {
    match cfg.method {
        InitMethod::Aknn => {
            cfg.validate(x.nrows())?;
            init_aknn(x, limits, cfg.k)
        }
        InitMethod::Dl65 => Ok((init_dl65(x, limits)?, Vec::new())),
        InitMethod::UniformDl => Ok((init_uniform_dl(x, limits, cfg.seed)?, Vec::new())),
    }
}

/// Sets every masked cell of column `j` to `0.65 * d_j`.
pub fn init_dl65(x: &CompositionMatrix, limits: &DetectionLimits) -> Result<CompositionMatrix> {
    limits.validate_for(x)?;
    let mut out = x.clone();
    for j in x.censored_columns() {
        let fill = DL_FRACTION * limits.require(j)?;
        for i in x.masked_rows(j) {
            out.set_masked(i, j, fill);
        }
    }
    Ok(out)
}

/// Independent uniform draws on the open interval `(0, d_j)`.
///
/// Cells are visited in row-major order, so the output depends only on the
/// mask and the seed.
pub fn init_uniform_dl(
    x: &CompositionMatrix,
    limits: &DetectionLimits,
    seed: u64,
) -> Result<CompositionMatrix> {
    limits.validate_for(x)?;
    let mut rng = rng::seeded(seed);
    let mut out = x.clone();
    for ((i, j), &m) in x.mask().indexed_iter() {
        if m {
            let u: f64 = rng.sample(rand::distr::Open01);
            out.set_masked(i, j, u * limits.require(j)?);
        }
    }
    Ok(out)
}

/// Aitchison kNN initialization, clamped below the detection limit.
pub fn init_aknn(
    x: &CompositionMatrix,
    limits: &DetectionLimits,
    k: usize,
) -> Result<(CompositionMatrix, Vec<Warning>)> {
    limits.validate_for(x)?;
    aknn_fill(x, Some(limits), k)
}

/// Shared kNN-in-Aitchison-geometry fill.
///
/// Distances between a recipient and a donor use only the parts observed in
/// both rows. The donor's target part is rescaled by the ratio of the
/// recipient's to the donor's total over those common parts, and the fill is
/// the median of the `k` nearest rescaled donors. With `limits` present, the
/// fill is clamped to `0.999 * d_j`, and cells without any donor fall back to
/// `0.65 * d_j` with a warning. Without limits they fall back to the median
/// of the column's observed values.
pub(crate) fn aknn_fill(
    x: &CompositionMatrix,
    limits: Option<&DetectionLimits>,
    k: usize,
) -> Result<(CompositionMatrix, Vec<Warning>)> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let values = x.values();
    let mask = x.mask();
    let (n, d) = values.dim();
    let logs = values.mapv(|v| if v > 0.0 { v.ln() } else { 0.0 });

    let mut out = x.clone();
    let mut warnings = Vec::new();
    let mut common = Vec::with_capacity(d);

    for i in 0..n {
        let targets: Vec<usize> = (0..d).filter(|&j| mask[[i, j]]).collect();
        if targets.is_empty() {
            continue;
        }
        // (distance, donor row, rescale factor) for every usable donor
        let mut donors: Vec<(f64, usize, f64)> = Vec::with_capacity(n);
        for r in (0..n).filter(|&r| r != i) {
            common.clear();
            common.extend((0..d).filter(|&c| !mask[[i, c]] && !mask[[r, c]]));
            if common.is_empty() {
                continue;
            }
            let dist = subcomposition_distance(&logs, i, r, &common);
            let own: f64 = common.iter().map(|&c| values[[i, c]]).sum();
            let theirs: f64 = common.iter().map(|&c| values[[r, c]]).sum();
            donors.push((dist, r, own / theirs));
        }
        donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        for j in targets {
            let picked: Vec<f64> = donors
                .iter()
                .filter(|&&(_, r, _)| !mask[[r, j]])
                .take(k)
                .map(|&(_, r, scale)| values[[r, j]] * scale)
                .collect();
            let fill = match (median(picked), limits) {
                (Some(v), Some(l)) => v.min(AKNN_CLAMP * l.require(j)?),
                (Some(v), None) => v,
                (None, Some(l)) => {
                    warnings.push(Warning::at(
                        Some(i),
                        Some(j),
                        "no donor observes this part; using 65% of the detection limit",
                    ));
                    DL_FRACTION * l.require(j)?
                }
                (None, None) => {
                    warnings.push(Warning::at(
                        Some(i),
                        Some(j),
                        "no donor shares an observed part; using the column median",
                    ));
                    column_median(x, j)?
                }
            };
            out.set_masked(i, j, fill);
        }
    }
    Ok((out, warnings))
}

/// Aitchison distance on the subcomposition `parts`, from precomputed logs.
fn subcomposition_distance(logs: &Array2<f64>, a: usize, b: usize, parts: &[usize]) -> f64 {
    // differences of log-ratios reduce to differences of centred log diffs
    let diffs: Vec<f64> = parts.iter().map(|&c| logs[[a, c]] - logs[[b, c]]).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt()
}

/// Median of the observed values of column `j`.
pub(crate) fn column_median(x: &CompositionMatrix, j: usize) -> Result<f64> {
    median(x.observed_rows(j).iter().map(|&i| x.values()[[i, j]]).collect())
        .ok_or_else(|| Error::Degenerate(format!("column {j} has no observed values")))
}

pub(crate) fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}
