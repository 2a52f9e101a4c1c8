//! Reference imputers used for comparison.
//!
//! None of these runs the EM loop. The kNN variants know nothing about the
//! detection limit, so they can and do impute values above it.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::coda::{CompositionMatrix, DetectionLimits};
use crate::error::{Error, Result};
use crate::imputer::{CellRecord, CellSource, ImputationReport};
use crate::init;
use crate::Warning;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BaselineKind {
    /// Median of the `k` nearest rows in Euclidean distance over observed parts.
    KnnEuclidean { k: usize },
    /// Median of the `k` nearest rows in Aitchison geometry, rescaled.
    KnnAitchison { k: usize },
    Dl65,
    UniformDl { seed: u64 },
}

pub fn impute_baseline(
    x: &CompositionMatrix,
    limits: &DetectionLimits,
    kind: BaselineKind,
) -> Result<ImputationReport> {
    if x.masked_count() == 0 {
        return Ok(ImputationReport::unchanged(x));
    }
    let (filled, warnings) = match kind {
        BaselineKind::KnnEuclidean { k } => {
            check_k(k, x.nrows())?;
            knn_euclidean(x, k)?
        }
        BaselineKind::KnnAitchison { k } => {
            check_k(k, x.nrows())?;
            init::aknn_fill(x, None, k)?
        }
        BaselineKind::Dl65 => (init::init_dl65(x, limits)?, Vec::new()),
        BaselineKind::UniformDl { seed } => (init::init_uniform_dl(x, limits, seed)?, Vec::new()),
    };
    let provenance = x
        .mask()
        .indexed_iter()
        .filter(|(_, &m)| m)
        .map(|((row, col), _)| CellRecord {
            row,
            col,
            source: CellSource::Baseline,
        })
        .collect();
    Ok(ImputationReport {
        imputed: filled.into_parts().0,
        iterations: 1,
        delta_trace: Vec::new(),
        converged: true,
        variable_order: Vec::new(),
        provenance,
        warnings,
    })
}

fn check_k(k: usize, nrows: usize) -> Result<()> {
    if k == 0 || k >= nrows {
        return Err(Error::Config(format!(
            "k = {k} must lie in [1, {}]",
            nrows.saturating_sub(1)
        )));
    }
    Ok(())
}

/// Euclidean kNN on the raw parts.
///
/// The distance between two rows uses the parts observed in both. The fill
/// is the median of the donors' raw values; ties go to the lower row index.
/// A row sharing no observed part with any donor gets the column median.
fn knn_euclidean(x: &CompositionMatrix, k: usize) -> Result<(CompositionMatrix, Vec<Warning>)> {
    let values = x.values();
    let mask = x.mask();
    let (n, d) = values.dim();
    let mut out = x.clone();
    let mut warnings = Vec::new();
    for i in 0..n {
        let targets: Vec<usize> = (0..d).filter(|&j| mask[[i, j]]).collect();
        if targets.is_empty() {
            continue;
        }
        let mut donors: Vec<(f64, usize)> = (0..n)
            .filter(|&r| r != i)
            .filter_map(|r| common_euclidean(values, mask, i, r).map(|dist| (dist, r)))
            .collect();
        donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for j in targets {
            let picked: Vec<f64> = donors
                .iter()
                .filter(|&&(_, r)| !mask[[r, j]])
                .take(k)
                .map(|&(_, r)| values[[r, j]])
                .collect();
            let fill = match init::median(picked) {
                Some(v) => v,
                None => {
                    warnings.push(Warning::at(
                        Some(i),
                        Some(j),
                        "no donor shares an observed part; using the column median",
                    ));
                    init::column_median(x, j)?
                }
            };
            out.set_masked(i, j, fill);
        }
    }
    Ok((out, warnings))
}

fn common_euclidean(values: &Array2<f64>, mask: &Array2<bool>, a: usize, b: usize) -> Option<f64> {
    let mut ss = 0.0;
    let mut common = false;
    for c in 0..values.ncols() {
        if !mask[[a, c]] && !mask[[b, c]] {
            ss += (values[[a, c]] - values[[b, c]]).powi(2);
            common = true;
        }
    }
    common.then(|| ss.sqrt())
}

/// Rows whose observed donors all sit far above the limit of the censored
/// part, so the Euclidean kNN fill lands above it too.
pub fn adversarial_knn_fixture() -> (CompositionMatrix, DetectionLimits) {
    let mut values = Array2::zeros((8, 3));
    for i in 0..8 {
        let t = i as f64;
        values[[i, 0]] = 10.0 + t;
        values[[i, 1]] = 20.0 - t;
        values[[i, 2]] = if i < 2 { 0.0 } else { 5.0 + t };
    }
    let x = CompositionMatrix::from_zeros(values).expect("positive fixture");
    (x, DetectionLimits::from_values(&[1.0, 1.0, 1.0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn euclidean_knn_takes_nearest_median() {
        let x = CompositionMatrix::from_zeros(array![
            [1.0, 1.0, 0.0],
            [1.1, 1.0, 4.0],
            [0.9, 1.0, 6.0],
            [50.0, 50.0, 100.0],
        ])
        .unwrap();
        let limits = DetectionLimits::from_values(&[0.1, 0.1, 0.5]);
        let r = impute_baseline(&x, &limits, BaselineKind::KnnEuclidean { k: 2 }).unwrap();
        assert_eq!(r.imputed[[0, 2]], 5.0);
        assert_eq!(r.iterations, 1);
        assert!(r.provenance.iter().all(|c| c.source == CellSource::Baseline));
    }

    #[test]
    fn euclidean_tie_breaks_on_row_index() {
        let x = CompositionMatrix::from_zeros(array![
            [1.0, 0.0],
            [2.0, 3.0],
            [2.0, 7.0],
        ])
        .unwrap();
        let limits = DetectionLimits::from_values(&[1.0, 1.0]);
        let r = impute_baseline(&x, &limits, BaselineKind::KnnEuclidean { k: 1 }).unwrap();
        assert_eq!(r.imputed[[0, 1]], 3.0);
    }

    #[test]
    fn distance_skips_masked_parts() {
        let values = array![[1.0, 0.0, 3.0], [3.0, 5.0, 3.0]];
        let mask = array![[false, true, false], [false, false, false]];
        assert_eq!(common_euclidean(&values, &mask, 0, 1), Some(2.0));
    }

    #[test]
    fn duplicate_rows_copy_the_donor() {
        let x = CompositionMatrix::from_zeros(array![[2.0, 3.0, 0.0], [2.0, 3.0, 0.4], [9.0, 1.0, 7.0]])
            .unwrap();
        let limits = DetectionLimits::from_values(&[1.0, 1.0, 1.0]);
        let r = impute_baseline(&x, &limits, BaselineKind::KnnEuclidean { k: 1 }).unwrap();
        assert_eq!(r.imputed[[0, 2]], 0.4);
        assert_eq!(r.imputed.row(1), x.values().row(1));
    }

    #[test]
    fn adversarial_fixture_exceeds_limit() {
        let (x, limits) = adversarial_knn_fixture();
        let r = impute_baseline(&x, &limits, BaselineKind::KnnEuclidean { k: 3 }).unwrap();
        let c = crate::metrics::curious_count(&r.imputed, x.mask(), &limits);
        assert_eq!(c.above_dl, 2);
    }

    #[test]
    fn univariate_baselines_respect_limits() {
        let x = CompositionMatrix::from_zeros(array![[0.0, 2.0], [1.0, 2.0], [3.0, 1.0]]).unwrap();
        let limits = DetectionLimits::from_values(&[0.5, 0.5]);
        let r = impute_baseline(&x, &limits, BaselineKind::Dl65).unwrap();
        assert_eq!(r.imputed[[0, 0]], 0.65 * 0.5);
        let r = impute_baseline(&x, &limits, BaselineKind::UniformDl { seed: 3 }).unwrap();
        assert!(r.imputed[[0, 0]] > 0.0 && r.imputed[[0, 0]] < 0.5);
    }

    #[test]
    fn fully_masked_row_gets_column_median() {
        let x = CompositionMatrix::from_zeros(array![[0.0, 0.0], [1.0, 2.0], [3.0, 4.0], [5.0, 9.0]])
            .unwrap();
        let limits = DetectionLimits::from_values(&[0.5, 0.5]);
        for kind in [BaselineKind::KnnEuclidean { k: 1 }, BaselineKind::KnnAitchison { k: 1 }] {
            let r = impute_baseline(&x, &limits, kind).unwrap();
            assert_eq!(r.imputed.row(0).to_vec(), vec![3.0, 4.0]);
            assert_eq!(r.warnings.len(), 2);
        }
    }

    #[test]
    fn rejects_k_too_large() {
        let x = CompositionMatrix::from_zeros(array![[0.0, 2.0], [1.0, 2.0]]).unwrap();
        let limits = DetectionLimits::from_values(&[0.5, 0.5]);
        assert!(impute_baseline(&x, &limits, BaselineKind::KnnAitchison { k: 2 }).is_err());
    }

    proptest! {
        #[test]
        fn baselines_keep_observed_bits_and_univariate_ones_stay_valid(
            logs in prop::collection::vec(-3.0f64..3.0, 24),
            hits in prop::collection::vec(prop::bool::weighted(0.3), 24),
            seed in 0u64..50,
        ) {
            let values = Array2::from_shape_vec((8, 3), logs).unwrap().mapv(f64::exp);
            let zeroed = Array2::from_shape_fn((8, 3), |(i, j)| {
                if i > 0 && hits[i * 3 + j] { 0.0 } else { values[[i, j]] }
            });
            let x = CompositionMatrix::from_zeros(zeroed).unwrap();
            let limits = DetectionLimits::from_values(&[0.5, 1.0, 2.0]);
            for kind in [
                BaselineKind::KnnEuclidean { k: 3 },
                BaselineKind::KnnAitchison { k: 3 },
                BaselineKind::Dl65,
                BaselineKind::UniformDl { seed },
            ] {
                let r = impute_baseline(&x, &limits, kind).unwrap();
                for ((i, j), &m) in x.mask().indexed_iter() {
                    if !m {
                        prop_assert_eq!(r.imputed[[i, j]].to_bits(), values[[i, j]].to_bits());
                    }
                }
                if matches!(kind, BaselineKind::Dl65 | BaselineKind::UniformDl { .. }) {
                    let c = crate::metrics::curious_count(&r.imputed, x.mask(), &limits);
                    prop_assert_eq!((c.above_dl, c.nonpositive), (0, 0));
                }
            }
        }
    }
}
