//! Imputation of rounded zeros in compositional data.
//!
//! Values that fall below an instrument's detection limit are recorded as
//! zero ("rounded zeros"). This crate replaces them with values in
//! `(0, DL]` using an EM-style loop of per-variable neural-network
//! regressions, either directly on the raw parts or on pivot log-ratio
//! coordinates. It also ships the evaluation criteria (RDCM, CED and the
//! count of invalid imputations), a handful of simple baseline imputers and
//! a benchmark harness that censors synthetic or user-supplied data at a
//! per-variable quantile.
//!
//! # Layout
//!
//! - [`coda`]: closure, pivot coordinates and their inverse, Aitchison distance.
//! - [`init`]: initial fills for censored cells (Aitchison kNN, 65% of DL, uniform).
//! - [`nn`]: a small dense network with dropout, Adam and early stopping.
//! - [`imputer`]: the raw-space and log-ratio EM imputers.
//! - [`metrics`]: RDCM, CED and curious-imputation counts.
//! - [`baselines`]: Euclidean/Aitchison kNN and univariate references.
//! - [`bench`]: synthetic data, artificial detection limits, experiment runner.
//! - [`io`] and [`cli`]: CSV handling and the `rzimpute` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod coda;
pub mod error;
pub mod imputer;
pub mod init;
pub mod io;
pub mod metrics;
pub mod nn;
mod rng;

pub use coda::{CompositionMatrix, DetectionLimits, PivotCoordinates};
pub use error::{Error, Result};
pub use imputer::{Algorithm, ImputationReport, ImputerConfig};
pub use metrics::MetricsReport;
pub use nn::{NetworkConfig, NetProfile};

use serde::{Deserialize, Serialize};

/// A non-fatal condition recorded during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub col: Option<usize>,
    pub message: String,
}

impl Warning {
    pub fn new(message: impl Into<String>) -> Self {
        Warning {
            row: None,
            col: None,
            message: message.into(),
        }
    }

    pub fn at(row: Option<usize>, col: Option<usize>, message: impl Into<String>) -> Self {
        Warning {
            row,
            col,
            message: message.into(),
        }
    }
}
