//! Compositional geometry: closure, pivot log-ratio coordinates, their
//! inverse, the absolute-value adjustment and the Aitchison distance.
//!
//! Pivot coordinates of a row `x` (after moving the pivot part to the front)
//! are
//!
//! ```text
//! z_j = sqrt((D-j)/(D-j+1)) * ln( x_j / gmean(x_{j+1}, ..., x_D) ),  j = 1..D-1
//! ```
//!
//! so the first coordinate carries all relative information about the pivot
//! part. Geometric means are always computed as a mean of logs.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x D` matrix of parts together with the rounded-zero mask.
///
/// Masked cells are `0` in raw input and strictly positive once initialized.
/// Unmasked cells are always strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionMatrix {
    values: Array2<f64>,
    mask: Array2<bool>,
}

impl CompositionMatrix {
    pub fn new(values: Array2<f64>, mask: Array2<bool>) -> Result<Self> {
        if values.dim() != mask.dim() {
            return Err(Error::Shape(format!(
                "values are {:?} but mask is {:?}",
                values.dim(),
                mask.dim()
            )));
        }
        let (n, d) = values.dim();
        if n < 1 || d < 2 {
            return Err(Error::Shape(format!(
                "a composition needs at least 1 row and 2 parts, got {n}x{d}"
            )));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::domain(i, j, format!("non-finite value {v}")));
            }
            if mask[[i, j]] {
                if v < 0.0 {
                    return Err(Error::domain(i, j, format!("negative value {v} in a masked cell")));
                }
            } else if v <= 0.0 {
                return Err(Error::domain(i, j, format!("observed value {v} is not positive")));
            }
        }
        Ok(CompositionMatrix { values, mask })
    }

    /// Builds a matrix whose zero cells are the rounded zeros.
    pub fn from_zeros(values: Array2<f64>) -> Result<Self> {
        let mask = values.mapv(|v| v == 0.0);
        Self::new(values, mask)
    }

    /// A matrix with no censored cells.
    pub fn complete(values: Array2<f64>) -> Result<Self> {
        let mask = Array2::from_elem(values.dim(), false);
        Self::new(values, mask)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn nparts(&self) -> usize {
        self.values.ncols()
    }

    /// Number of rounded zeros.
    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn masked_in_column(&self, col: usize) -> usize {
        self.mask.column(col).iter().filter(|&&m| m).count()
    }

    /// Row indices of masked cells in `col`.
    pub fn masked_rows(&self, col: usize) -> Vec<usize> {
        self.mask
            .column(col)
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    /// Row indices of observed cells in `col`.
    pub fn observed_rows(&self, col: usize) -> Vec<usize> {
        self.mask
            .column(col)
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| (!m).then_some(i))
            .collect()
    }

    /// Columns that contain at least one masked cell.
    pub fn censored_columns(&self) -> Vec<usize> {
        (0..self.nparts())
            .filter(|&j| self.masked_in_column(j) > 0)
            .collect()
    }

    /// True when every cell, masked or not, is strictly positive.
    pub fn is_initialized(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// Replaces the value of a masked cell.
    ///
    /// Panics if the cell is observed: observed data is never overwritten.
    pub fn set_masked(&mut self, row: usize, col: usize, value: f64) {
        assert!(self.mask[[row, col]], "cell ({row}, {col}) is observed");
        self.values[[row, col]] = value;
    }

    /// Returns a copy with the masked values taken from `values`.
    ///
    /// Observed cells keep their original bits.
    pub fn with_masked_from(&self, values: &Array2<f64>) -> Result<Self> {
        if values.dim() != self.values.dim() {
            return Err(Error::Shape(format!(
                "expected {:?}, got {:?}",
                self.values.dim(),
                values.dim()
            )));
        }
        let mut out = self.clone();
        for ((i, j), &m) in self.mask.indexed_iter() {
            if m {
                out.values[[i, j]] = values[[i, j]];
            }
        }
        Ok(out)
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<bool>) {
        (self.values, self.mask)
    }
}

/// Per-variable detection limits; `None` means the variable has no limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLimits(Vec<Option<f64>>);

impl DetectionLimits {
    pub fn new(limits: Vec<Option<f64>>) -> Self {
        DetectionLimits(limits)
    }

    pub fn from_values(limits: &[f64]) -> Self {
        DetectionLimits(limits.iter().map(|&d| Some(d)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, col: usize) -> Option<f64> {
        self.0.get(col).copied().flatten()
    }

    pub fn as_slice(&self) -> &[Option<f64>] {
        &self.0
    }

    /// The limit for `col`, or a configuration error if there is none.
    pub fn require(&self, col: usize) -> Result<f64> {
        match self.get(col) {
            Some(d) if d > 0.0 && d.is_finite() => Ok(d),
            Some(d) => Err(Error::Config(format!(
                "detection limit {d} for column {col} is not a positive number"
            ))),
            None => Err(Error::Config(format!(
                "no detection limit for column {col}, which has rounded zeros"
            ))),
        }
    }

    /// Checks that every censored column of `x` has a positive limit.
    pub fn validate_for(&self, x: &CompositionMatrix) -> Result<()> {
        if self.len() != x.nparts() {
            return Err(Error::Shape(format!(
                "{} detection limits for {} parts",
                self.len(),
                x.nparts()
            )));
        }
        for j in x.censored_columns() {
            self.require(j)?;
        }
        Ok(())
    }
}

/// Pivot coordinates of a whole matrix for one pivot variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotCoordinates {
    /// `n x (D-1)` coordinates.
    pub z: Array2<f64>,
    /// The original column moved to the first position.
    pub pivot: usize,
    /// `perm[k]` is the original column placed at position `k`.
    pub perm: Vec<usize>,
    /// Row sums of the input.
    pub row_totals: Array1<f64>,
}

impl PivotCoordinates {
    pub fn nparts(&self) -> usize {
        self.perm.len()
    }
}

/// Rescales a positive vector so that it sums to `kappa`.
pub fn closure(x: ArrayView1<'_, f64>, kappa: f64) -> Result<Array1<f64>> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::DomainValue(format!("closure constant {kappa} must be positive")));
    }
    check_positive(x)?;
    let total: f64 = x.sum();
    Ok(x.mapv(|v| v / total * kappa))
}

fn check_positive(x: ArrayView1<'_, f64>) -> Result<()> {
    match x.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        Some(k) => Err(Error::DomainValue(format!(
            "part {k} has value {}, expected a positive finite number",
            x[k]
        ))),
        None => Ok(()),
    }
}

/// Column order with `pivot` first and the rest in their original order.
pub fn pivot_permutation(nparts: usize, pivot: usize) -> Vec<usize> {
    std::iter::once(pivot)
        .chain((0..nparts).filter(|&k| k != pivot))
        .collect()
}

/// Pivot coordinates of one row whose parts are already in pivot order.
fn pivot_row(logs: &[f64], out: &mut [f64]) {
    let d = logs.len();
    // suffix[j] = sum of logs[j..]
    let mut suffix = vec![0.0; d + 1];
    for j in (0..d).rev() {
        suffix[j] = suffix[j + 1] + logs[j];
    }
    for j in 0..d - 1 {
        let rest = (d - j - 1) as f64;
        let coef = (rest / (rest + 1.0)).sqrt();
        out[j] = coef * (logs[j] - suffix[j + 1] / rest);
    }
}

/// Pivot log-ratio transform with `pivot_var` moved to the first position.
pub fn pivot_forward(x: &Array2<f64>, pivot_var: usize) -> Result<PivotCoordinates> {
    let (n, d) = x.dim();
    if d < 2 {
        return Err(Error::Shape(format!("need at least 2 parts, got {d}")));
    }
    if pivot_var >= d {
        return Err(Error::Shape(format!("pivot {pivot_var} out of range for {d} parts")));
    }
    let perm = pivot_permutation(d, pivot_var);
    let mut z = Array2::zeros((n, d - 1));
    let mut logs = vec![0.0; d];
    let mut coords = vec![0.0; d - 1];
    let mut row_totals = Array1::zeros(n);
    for i in 0..n {
        let mut total = 0.0;
        for (k, &src) in perm.iter().enumerate() {
            let v = x[[i, src]];
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(i, src, format!("value {v} is not positive and finite")));
            }
            logs[k] = v.ln();
            total += v;
        }
        pivot_row(&logs, &mut coords);
        for (j, &c) in coords.iter().enumerate() {
            z[[i, j]] = c;
        }
        row_totals[i] = total;
    }
    Ok(PivotCoordinates {
        z,
        pivot: pivot_var,
        perm,
        row_totals,
    })
}

/// Pivot coordinates of an initialized composition.
pub fn pivot_forward_composition(
    x: &CompositionMatrix,
    pivot_var: usize,
) -> Result<PivotCoordinates> {
    if let Some(((i, j), _)) = x
        .mask()
        .indexed_iter()
        .find(|&((i, j), &m)| m && x.values()[[i, j]] <= 0.0)
    {
        return Err(Error::domain(i, j, "masked cell has not been initialized"));
    }
    pivot_forward(x.values(), pivot_var)
}

/// Inverse pivot transform, returned in the original column order.
///
/// Each row comes back "up to a scaling factor": the parts have geometric
/// mean one. Use [`rescale_to_totals`] or [`readjust_absolute`] to restore an
/// absolute scale.
///
/// Position `j` (0-based, in pivot order) is
/// `exp(-sum_{k<j} z_k / sqrt((D-k)(D-k-1)) + sqrt((D-j-1)/(D-j)) z_j)`,
/// with the last term absent for `j = D-1`. The pivot part is the `j = 0`
/// case of the same expression.
pub fn pivot_inverse(coords: &PivotCoordinates) -> Result<Array2<f64>> {
    let (n, dm1) = coords.z.dim();
    let d = dm1 + 1;
    if coords.perm.len() != d {
        return Err(Error::Shape(format!(
            "permutation of length {} for {} coordinates",
            coords.perm.len(),
            dm1
        )));
    }
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..d {
            let mut e = -acc;
            if j < dm1 {
                let zj = coords.z[[i, j]];
                if !zj.is_finite() {
                    return Err(Error::domain(i, j, format!("coordinate {zj} is not finite")));
                }
                let rest = (d - j - 1) as f64;
                e += (rest / (rest + 1.0)).sqrt() * zj;
                acc += zj / ((rest + 1.0) * rest).sqrt();
            }
            out[[i, coords.perm[j]]] = e.exp();
        }
    }
    Ok(out)
}

/// Scales each row of `x` to sum to the matching entry of `totals`.
pub fn rescale_to_totals(x: &Array2<f64>, totals: &Array1<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for (mut row, &t) in out.axis_iter_mut(Axis(0)).zip(totals.iter()) {
        let s = row.sum();
        row.mapv_inplace(|v| v / s * t);
    }
    out
}

/// Rows of `readjust_absolute` output that had no observed cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Readjusted {
    pub values: Array2<f64>,
    pub fully_masked_rows: Vec<usize>,
}

/// Restores the absolute scale of a row-wise proportional matrix.
///
/// Each row of `x_new` is multiplied by the factor that makes the sum of its
/// observed cells equal to the same sum in `x_ref`; observed cells are then
/// overwritten with their exact original values. A row with every cell
/// masked is rescaled to the total of its current `x_ref` row instead and
/// reported in `fully_masked_rows`.
pub fn readjust_absolute(x_new: &Array2<f64>, x_ref: &CompositionMatrix) -> Result<Readjusted> {
    if x_new.dim() != x_ref.values().dim() {
        return Err(Error::Shape(format!(
            "readjust: {:?} vs reference {:?}",
            x_new.dim(),
            x_ref.values().dim()
        )));
    }
    let reference = x_ref.values();
    let mask = x_ref.mask();
    let mut values = x_new.clone();
    let mut fully_masked_rows = Vec::new();
    for i in 0..values.nrows() {
        let (mut ref_sum, mut new_sum) = (0.0, 0.0);
        for j in 0..values.ncols() {
            if !mask[[i, j]] {
                ref_sum += reference[[i, j]];
                new_sum += x_new[[i, j]];
            }
        }
        if new_sum == 0.0 {
            fully_masked_rows.push(i);
            ref_sum = reference.row(i).sum();
            new_sum = x_new.row(i).sum();
        }
        let factor = ref_sum / new_sum;
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::domain(i, 0, format!("cannot rescale row (factor {factor})")));
        }
        for j in 0..values.ncols() {
            values[[i, j]] = if mask[[i, j]] {
                x_new[[i, j]] * factor
            } else {
                reference[[i, j]]
            };
        }
    }
    Ok(Readjusted {
        values,
        fully_masked_rows,
    })
}

/// Aitchison distance from the pairwise log-ratio definition.
pub fn aitchison_distance(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} parts vs {} parts", x.len(), y.len())));
    }
    check_positive(x)?;
    check_positive(y)?;
    let d = x.len();
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mut sum = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            let diff = (lx[i] - lx[j]) - (ly[i] - ly[j]);
            sum += diff * diff;
        }
    }
    Ok((sum / d as f64).sqrt())
}

/// Centered log-ratio coefficients of a positive row.
pub(crate) fn clr(x: ArrayView1<'_, f64>) -> Array1<f64> {
    let logs = x.mapv(f64::ln);
    let mean = logs.mean().unwrap_or(0.0);
    logs - mean
}

/// Detection limit of `pivot_var` expressed in the first pivot coordinate.
///
/// This is the value `z_1` takes when the pivot part equals `limit` and the
/// other parts of the row are held fixed.
pub fn dl_to_pivot(row: ArrayView1<'_, f64>, limit: f64, pivot_var: usize) -> Result<f64> {
    let d = row.len();
    if pivot_var >= d || d < 2 {
        return Err(Error::Shape(format!("pivot {pivot_var} with {d} parts")));
    }
    if !(limit > 0.0) || !limit.is_finite() {
        return Err(Error::DomainValue(format!("detection limit {limit} is not positive")));
    }
    let mut log_sum = 0.0;
    for (k, &v) in row.iter().enumerate() {
        if k == pivot_var {
            continue;
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::domain(0, k, format!("part value {v} is not positive")));
        }
        log_sum += v.ln();
    }
    let rest = (d - 1) as f64;
    Ok((rest / d as f64).sqrt() * (limit.ln() - log_sum / rest))
}
