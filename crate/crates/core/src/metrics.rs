//! Imputation quality criteria, computed against the true data.
//!
//! - RDCM: relative Frobenius difference between the covariance matrices of
//!   the true and imputed data in pivot coordinates.
//! - CED: mean Aitchison distance between true and imputed rows that had a
//!   rounded zero, divided by the largest pairwise distance in the true data.
//! - Curious imputations: censored cells imputed outside `(0, DL]`.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::coda::{self, DetectionLimits};
use crate::error::{Error, Result};
use crate::imputer::POSITIVITY_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RdcmForm {
    /// `||S - S*||_F / ((D-1) ||S||_F)`.
    #[default]
    Normalized,
    /// `sqrt(sum (s_ij - s*_ij)^2 / (D-1)^2)`, without the relative scaling.
    Rms,
}

/// Sample covariance (denominator `n - 1`) of the columns of `z`.
pub fn covariance(z: &Array2<f64>) -> Result<Array2<f64>> {
    let n = z.nrows();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "covariance needs at least 2 rows, got {n}"
        )));
    }
    let mean = z.mean_axis(Axis(0)).expect("non-empty");
    let centred = z - &mean;
    Ok(centred.t().dot(&centred) / (n - 1) as f64)
}

/// RDCM from two covariance matrices; `s_true` provides the normalization.
pub fn rdcm_from_covariances(
    s_true: &Array2<f64>,
    s_imp: &Array2<f64>,
    form: RdcmForm,
) -> Result<f64> {
    if s_true.dim() != s_imp.dim() || s_true.nrows() != s_true.ncols() {
        return Err(Error::Shape(format!(
            "covariances {:?} and {:?}",
            s_true.dim(),
            s_imp.dim()
        )));
    }
    let k = s_true.nrows() as f64;
    let diff = (s_true - s_imp).mapv(|v| v * v).sum().sqrt();
    match form {
        RdcmForm::Rms => Ok(diff / k),
        RdcmForm::Normalized => {
            let norm = s_true.mapv(|v| v * v).sum().sqrt();
            if norm == 0.0 {
                return Err(Error::Degenerate("true covariance matrix is zero".into()));
            }
            Ok(diff / (k * norm))
        }
    }
}

/// RDCM with pivot coordinates for variable 0.
pub fn rdcm(x_true: &Array2<f64>, x_imp: &Array2<f64>) -> Result<f64> {
    rdcm_with(x_true, x_imp, RdcmForm::Normalized)
}

pub fn rdcm_with(x_true: &Array2<f64>, x_imp: &Array2<f64>, form: RdcmForm) -> Result<f64> {
    same_shape(x_true, x_imp)?;
    let s = covariance(&coda::pivot_forward(x_true, 0)?.z)?;
    let s_imp = covariance(&coda::pivot_forward(x_imp, 0)?.z)?;
    rdcm_from_covariances(&s, &s_imp, form)
}

fn same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("true data {:?} vs imputed {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Largest Aitchison distance between any two rows.
pub fn max_pairwise_distance(x: &Array2<f64>) -> Result<f64> {
    // distances via centred log-ratios: Euclidean there equals Aitchison
    let mut clr = Array2::zeros(x.dim());
    for (i, row) in x.axis_iter(Axis(0)).enumerate() {
        if let Some(j) = row.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::domain(i, j, format!("value {} is not positive", row[j])));
        }
        clr.row_mut(i).assign(&coda::clr(row));
    }
    let mut best: f64 = 0.0;
    for i in 0..clr.nrows() {
        for j in i + 1..clr.nrows() {
            let d2: f64 = clr
                .row(i)
                .iter()
                .zip(clr.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            best = best.max(d2);
        }
    }
    Ok(best.sqrt())
}

/// Compositional error deviation.
///
/// The numerator averages over rows with at least one masked cell; with no
/// such row there is nothing to deviate and the result is 0.
pub fn ced(x_true: &Array2<f64>, x_imp: &Array2<f64>, mask: &Array2<bool>) -> Result<f64> {
    same_shape(x_true, x_imp)?;
    if mask.dim() != x_true.dim() {
        return Err(Error::Shape(format!("mask {:?} vs data {:?}", mask.dim(), x_true.dim())));
    }
    let denom = max_pairwise_distance(x_true)?;
    // proportional rows give a distance of rounding-error size
    if denom < 1e-12 {
        return Err(Error::Degenerate(
            "all rows of the true data are proportional; CED is undefined".into(),
        ));
    }
    let rows: Vec<usize> = (0..mask.nrows())
        .filter(|&i| mask.row(i).iter().any(|&m| m))
        .collect();
    if rows.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &i in &rows {
        total += coda::aitchison_distance(x_true.row(i), x_imp.row(i))
            .map_err(|e| Error::Degenerate(format!("row {i}: {e}")))?;
    }
    Ok(total / rows.len() as f64 / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CuriousCounts {
    pub above_dl: usize,
    pub nonpositive: usize,
    pub masked: usize,
}

/// Counts masked cells imputed above their limit or at/below zero.
///
/// A value equal to the limit is valid. Columns without a limit are only
/// checked for positivity.
pub fn curious_count(
    x_imp: &Array2<f64>,
    mask: &Array2<bool>,
    limits: &DetectionLimits,
) -> CuriousCounts {
    let mut c = CuriousCounts::default();
    for ((i, j), &m) in mask.indexed_iter() {
        if !m {
            continue;
        }
        let v = x_imp[[i, j]];
        c.masked += 1;
        if v <= 0.0 {
            c.nonpositive += 1;
        } else if limits.get(j).is_some_and(|d| v > d) {
            c.above_dl += 1;
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountFraction {
    pub count: usize,
    pub fraction: f64,
}

impl CountFraction {
    fn new(count: usize, total: usize) -> Self {
        CountFraction {
            count,
            fraction: if total == 0 { 0.0 } else { count as f64 / total as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMetrics {
    pub variable: usize,
    pub masked: usize,
    pub above_dl: usize,
    pub nonpositive: usize,
}

/// Serialized field names are part of the report format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rdcm: f64,
    pub ced: f64,
    pub curious_above_dl: CountFraction,
    pub curious_nonpositive: CountFraction,
    pub masked_cells: usize,
    /// Non-positive imputations replaced by a small positive value before
    /// computing the log-ratio criteria.
    pub shrunk_for_scoring: usize,
    pub per_variable: Vec<VariableMetrics>,
}

/// Scores an imputation against the true data.
pub fn evaluate(
    x_true: &Array2<f64>,
    x_imp: &Array2<f64>,
    mask: &Array2<bool>,
    limits: &DetectionLimits,
) -> Result<MetricsReport> {
    same_shape(x_true, x_imp)?;
    let counts = curious_count(x_imp, mask, limits);
    let per_variable = (0..mask.ncols())
        .map(|j| {
            let col_mask = mask.column(j);
            let mut v = VariableMetrics {
                variable: j,
                masked: 0,
                above_dl: 0,
                nonpositive: 0,
            };
            for (i, &m) in col_mask.iter().enumerate() {
                if m {
                    let x = x_imp[[i, j]];
                    v.masked += 1;
                    if x <= 0.0 {
                        v.nonpositive += 1;
                    } else if limits.get(j).is_some_and(|d| x > d) {
                        v.above_dl += 1;
                    }
                }
            }
            v
        })
        .collect();

    let mut scored = x_imp.clone();
    let mut shrunk = 0;
    for ((i, j), &m) in mask.indexed_iter() {
        if m && scored[[i, j]] <= 0.0 {
            let d = limits.require(j)?;
            scored[[i, j]] = POSITIVITY_FLOOR * d;
            shrunk += 1;
        }
    }
    Ok(MetricsReport {
        rdcm: rdcm(x_true, &scored)?,
        ced: ced(x_true, &scored, mask)?,
        curious_above_dl: CountFraction::new(counts.above_dl, counts.masked),
        curious_nonpositive: CountFraction::new(counts.nonpositive, counts.masked),
        masked_cells: counts.masked,
        shrunk_for_scoring: shrunk,
        per_variable,
    })
}
