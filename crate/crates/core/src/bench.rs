//! Benchmark harness: synthetic data, artificial detection limits and
//! method comparison runs.
//!
//! A run censors a complete data set at a per-variable quantile, imputes it
//! with every configured method and seed, and scores each result against
//! the complete data. All methods of one experiment see the same censoring.
//!
//! The JSON report holds one record per (method, seed) plus per-method
//! medians. The long CSV table has the columns `method,seed,metric,value`
//! and leaves out wall-clock times so that it is reproducible byte for byte.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineKind};
use crate::coda::{CompositionMatrix, DetectionLimits};
use crate::error::{Error, Result};
use crate::imputer::{self, Algorithm, ImputationReport, ImputerConfig};
use crate::init::{self, InitConfig, InitMethod};
use crate::metrics::{self, MetricsReport};
use crate::nn::{NetProfile, NetworkConfig};
use crate::{io, rng, Warning};

/// Each variable must keep at least this many observed rows after censoring.
pub const MIN_OBSERVED_AFTER_CENSORING: usize = 5;

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`). `None` for an empty sample.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Log-normal latent factor model: `x_ij = exp(sum_f F_if L_fj + noise_ij)`
/// with standard normal factors, loadings scaled by `loading_scale` and
/// noise scaled by `noise_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n: usize,
    pub parts: usize,
    pub factors: usize,
    pub loading_scale: f64,
    pub noise_scale: f64,
    pub seed: u64,
    /// Close every row to this total.
    pub closure: Option<f64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 300,
            parts: 10,
            factors: 1,
            loading_scale: 1.0,
            noise_scale: 0.1,
            seed: 0,
            closure: None,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.parts < 2 {
            return Err(Error::Config(format!(
                "synthetic data needs n >= 2 and parts >= 2, got {} and {}",
                self.n, self.parts
            )));
        }
        for (name, v) in [("loading_scale", self.loading_scale), ("noise_scale", self.noise_scale)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} {v} must be finite and >= 0")));
            }
        }
        if let Some(k) = self.closure {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Config(format!("closure constant {k} must be positive")));
            }
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let mut normal = |scale: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    };
    let factors = Array2::from_shape_simple_fn((spec.n, spec.factors), || normal(1.0));
    let loadings = Array2::from_shape_simple_fn((spec.factors, spec.parts), || normal(spec.loading_scale));
    let noise = Array2::from_shape_simple_fn((spec.n, spec.parts), || normal(spec.noise_scale));
    let mut x = (factors.dot(&loadings) + noise).mapv(f64::exp);
    if let Some(kappa) = spec.closure {
        for mut row in x.rows_mut() {
            let total = row.sum();
            row.mapv_inplace(|v| kappa * v / total);
        }
    }
    if let Some(((i, j), v)) = x.indexed_iter().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Numerical(format!(
            "synthetic value {v} at row {i}, column {j}; reduce the scales"
        )));
    }
    Ok(x)
}

/// Complete data censored at artificial detection limits.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredData {
    pub matrix: CompositionMatrix,
    pub limits: DetectionLimits,
    pub truth: Array2<f64>,
    pub warnings: Vec<Warning>,
}

/// Sets every cell below its column's `q`-quantile to a rounded zero.
///
/// The quantile is the interpolated one of [`quantile`] and masking is
/// strict, so with `q = 0.05` and 100 distinct values exactly the 5 smallest
/// are censored. Constant columns are left uncensored with a warning.
pub fn apply_artificial_dl(x: &Array2<f64>, q: f64) -> Result<CensoredData> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("censor quantile {q} is outside (0, 1)")));
    }
    let complete = CompositionMatrix::complete(x.clone())?;
    let (n, d) = x.dim();
    let mut values = x.clone();
    let mut mask = Array2::from_elem((n, d), false);
    let mut limits = Vec::with_capacity(d);
    let mut warnings = Vec::new();
    for j in 0..d {
        let col = x.column(j);
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            warnings.push(Warning::at(None, Some(j), "constant column left uncensored"));
            limits.push(None);
            continue;
        }
        let dl = quantile(&col.to_vec(), q).expect("non-empty column");
        let below: Vec<usize> = (0..n).filter(|&i| col[i] < dl).collect();
        if n - below.len() < MIN_OBSERVED_AFTER_CENSORING {
            return Err(Error::Config(format!(
                "censor quantile {q} leaves {} observed rows in column {j}, need {}",
                n - below.len(),
                MIN_OBSERVED_AFTER_CENSORING
            )));
        }
        for i in below {
            mask[[i, j]] = true;
            values[[i, j]] = 0.0;
        }
        limits.push(Some(dl));
    }
    Ok(CensoredData {
        matrix: CompositionMatrix::new(values, mask)?,
        limits: DetectionLimits::new(limits),
        truth: complete.into_parts().0,
        warnings,
    })
}

/// Imputation methods, named after the usual labels of the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    DeepImp,
    DeepImpDl,
    DeepImpCoDa,
    DeepImpCoDaDl,
    Knn,
    Aknn,
    Dl65,
    UniformDl,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::DeepImp,
        Method::DeepImpDl,
        Method::DeepImpCoDa,
        Method::DeepImpCoDaDl,
        Method::Knn,
        Method::Aknn,
        Method::Dl65,
        Method::UniformDl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::DeepImp => "deepImp",
            Method::DeepImpDl => "deepImp-dl",
            Method::DeepImpCoDa => "deepImpCoDa",
            Method::DeepImpCoDaDl => "deepImpCoDa-dl",
            Method::Knn => "knn",
            Method::Aknn => "aknn",
            Method::Dl65 => "dl65",
            Method::UniformDl => "uniform-dl",
        }
    }

    pub fn category(self) -> Category {
        let (coda, dl) = match self {
            Method::DeepImp | Method::Knn => (false, false),
            Method::DeepImpDl | Method::Dl65 | Method::UniformDl => (false, true),
            Method::DeepImpCoDa | Method::Aknn => (true, false),
            Method::DeepImpCoDaDl => (true, true),
        };
        Category { coda, dl }
    }

    pub fn is_network(self) -> bool {
        matches!(
            self,
            Method::DeepImp | Method::DeepImpDl | Method::DeepImpCoDa | Method::DeepImpCoDaDl
        )
    }

    fn valid_names() -> String {
        Method::ALL.map(Method::name).join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!("unknown method {s:?}; valid methods: {}", Method::valid_names()))
            })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

/// Whether a method works in log-ratio geometry and whether it respects the
/// detection limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub coda: bool,
    pub dl: bool,
}

/// Tuning shared by every method of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodSettings {
    pub net: NetworkConfig,
    pub eps: f64,
    pub maxiter: usize,
    /// Neighbours for the kNN baselines and the kNN initializer.
    pub k: usize,
}

impl Default for MethodSettings {
    fn default() -> Self {
        let imp = ImputerConfig::default();
        MethodSettings {
            net: NetProfile::Desk.config(),
            eps: imp.eps,
            maxiter: imp.maxiter,
            k: InitConfig::default().k,
        }
    }
}

/// What a method resolves to for a given seed.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodRun {
    Imputer(ImputerConfig),
    Baseline(BaselineKind),
}

impl MethodRun {
    pub fn new(method: Method, settings: &MethodSettings, seed: u64) -> Self {
        let imputer = |algorithm, censor| {
            MethodRun::Imputer(ImputerConfig {
                algorithm,
                eps: settings.eps,
                maxiter: settings.maxiter,
                net: NetworkConfig {
                    seed,
                    ..settings.net.clone()
                },
                init: InitConfig {
                    method: InitMethod::Aknn,
                    k: settings.k,
                    seed,
                },
                censor,
                ..ImputerConfig::default()
            })
        };
        match method {
            Method::DeepImp => imputer(Algorithm::Raw, false),
            Method::DeepImpDl => imputer(Algorithm::Raw, true),
            Method::DeepImpCoDa => imputer(Algorithm::Pivot, false),
            Method::DeepImpCoDaDl => imputer(Algorithm::Pivot, true),
            Method::Knn => MethodRun::Baseline(BaselineKind::KnnEuclidean { k: settings.k }),
            Method::Aknn => MethodRun::Baseline(BaselineKind::KnnAitchison { k: settings.k }),
            Method::Dl65 => MethodRun::Baseline(BaselineKind::Dl65),
            Method::UniformDl => MethodRun::Baseline(BaselineKind::UniformDl { seed }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MethodRun::Imputer(cfg) => cfg.validate(),
            MethodRun::Baseline(BaselineKind::KnnEuclidean { k } | BaselineKind::KnnAitchison { k })
                if *k == 0 =>
            {
                Err(Error::Config("k must be at least 1".into()))
            }
            MethodRun::Baseline(_) => Ok(()),
        }
    }

    pub fn run(&self, x: &CompositionMatrix, limits: &DetectionLimits) -> Result<ImputationReport> {
        match self {
            MethodRun::Imputer(cfg) => imputer::impute(x, limits, cfg),
            MethodRun::Baseline(kind) => baselines::impute_baseline(x, limits, *kind),
        }
    }
}

/// Runs `method` with `seed` on `x`.
pub fn run_method(
    method: Method,
    settings: &MethodSettings,
    seed: u64,
    x: &CompositionMatrix,
    limits: &DetectionLimits,
) -> Result<ImputationReport> {
    MethodRun::new(method, settings, seed).run(x, limits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    /// A complete, strictly positive CSV data set.
    Csv(PathBuf),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic(SyntheticSpec::default())
    }
}

/// Experiment description, readable from TOML or JSON.
///
/// ```toml
/// censor_quantile = 0.05
/// methods = ["deepImpCoDa-dl", "dl65"]
/// seeds = [1, 2, 3]
///
/// [dataset.synthetic]
/// n = 300
/// parts = 10
/// noise_scale = 0.1
///
/// [settings]
/// maxiter = 10
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub censor_quantile: f64,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub settings: MethodSettings,
    /// Directory receiving `report.json` and `results.csv`.
    pub output: Option<PathBuf>,
    /// Run (method, seed) pairs on several threads.
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::default(),
            censor_quantile: 0.05,
            methods: Method::ALL.to_vec(),
            seeds: vec![1, 2, 3],
            settings: MethodSettings::default(),
            output: None,
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    /// Parses a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.censor_quantile > 0.0 && self.censor_quantile < 1.0) {
            return Err(Error::Config(format!(
                "censor_quantile {} is outside (0, 1)",
                self.censor_quantile
            )));
        }
        if self.methods.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("at least one method and one seed are required".into()));
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        for &m in &self.methods {
            MethodRun::new(m, &self.settings, 0).validate()?;
        }
        Ok(())
    }

    fn load_data(&self) -> Result<Array2<f64>> {
        match &self.dataset {
            DatasetSource::Synthetic(spec) => generate_synthetic(spec),
            DatasetSource::Csv(path) => {
                let table = io::read_table(path)?;
                if table.values.iter().any(|&v| v == 0.0) {
                    return Err(Error::Input {
                        path: path.display().to_string(),
                        msg: "benchmark data must be complete; found zeros".into(),
                    });
                }
                Ok(table.values)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub category: Category,
    pub seed: u64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    pub iterations: usize,
    pub converged: bool,
    pub delta_trace: Vec<f64>,
    pub wall_time_secs: f64,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub category: Category,
    pub runs_ok: usize,
    pub median_ced: Option<f64>,
    pub median_rdcm: Option<f64>,
    pub median_wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub censor_quantile: f64,
    pub nrows: usize,
    pub nparts: usize,
    pub masked_cells: usize,
    pub limits: Vec<Option<f64>>,
    pub warnings: Vec<Warning>,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<MethodSummary>,
}

impl ExperimentReport {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// The long table `method,seed,metric,value`, without timings.
    pub fn long_table(&self) -> String {
        let mut out = String::from("method,seed,metric,value\n");
        for r in &self.runs {
            let Some(m) = &r.metrics else { continue };
            let rows = [
                ("rdcm", m.rdcm),
                ("ced", m.ced),
                ("curious_above_dl", m.curious_above_dl.count as f64),
                ("curious_nonpositive", m.curious_nonpositive.count as f64),
                ("iterations", r.iterations as f64),
            ];
            for (name, value) in rows {
                out.push_str(&format!("{},{},{name},{value}\n", r.method, r.seed));
            }
        }
        out
    }

    /// Writes `report.json` and `results.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        io::write_text(&dir.join("report.json"), &serde_json::to_string_pretty(self)?)?;
        io::write_text(&dir.join("results.csv"), &self.long_table())
    }
}

/// Censors the data once and runs every (method, seed) pair on it.
///
/// A failing run is recorded with its error and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = apply_artificial_dl(&cfg.load_data()?, cfg.censor_quantile)?;
    run_on_censored(cfg, &data)
}

/// Same as [`run_experiment`] with the censoring already done.
pub fn run_on_censored(cfg: &ExperimentConfig, data: &CensoredData) -> Result<ExperimentReport> {
    let jobs: Vec<(Method, u64)> = cfg
        .methods
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let run = |&(method, seed): &(Method, u64)| run_one(method, seed, &cfg.settings, data);
    let runs: Vec<RunRecord> = if cfg.parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };
    let mut methods = cfg.methods.clone();
    methods.dedup();
    let summary = methods.iter().map(|&m| summarize(m, &runs)).collect();
    let report = ExperimentReport {
        censor_quantile: cfg.censor_quantile,
        nrows: data.truth.nrows(),
        nparts: data.truth.ncols(),
        masked_cells: data.matrix.masked_count(),
        limits: data.limits.as_slice().to_vec(),
        warnings: data.warnings.clone(),
        runs,
        summary,
    };
    if let Some(dir) = &cfg.output {
        report.write(dir)?;
    }
    Ok(report)
}

fn run_one(method: Method, seed: u64, settings: &MethodSettings, data: &CensoredData) -> RunRecord {
    let start = Instant::now();
    let outcome = run_method(method, settings, seed, &data.matrix, &data.limits).and_then(|rep| {
        let m = metrics::evaluate(&data.truth, &rep.imputed, data.matrix.mask(), &data.limits)?;
        Ok((rep, m))
    });
    let wall_time_secs = start.elapsed().as_secs_f64();
    let mut record = RunRecord {
        method,
        category: method.category(),
        seed,
        ok: false,
        error: None,
        metrics: None,
        iterations: 0,
        converged: false,
        delta_trace: Vec::new(),
        wall_time_secs,
        warnings: Vec::new(),
    };
    match outcome {
        Ok((rep, m)) => {
            record.ok = true;
            record.metrics = Some(m);
            record.iterations = rep.iterations;
            record.converged = rep.converged;
            record.delta_trace = rep.delta_trace;
            record.warnings = rep.warnings;
        }
        Err(e) => {
            log::warn!("{method} with seed {seed} failed: {e}");
            record.error = Some(e.to_string());
        }
    }
    record
}

fn summarize(method: Method, runs: &[RunRecord]) -> MethodSummary {
    let ok: Vec<&RunRecord> = runs.iter().filter(|r| r.method == method && r.ok).collect();
    let pick = |f: &dyn Fn(&RunRecord) -> f64| init::median(ok.iter().map(|r| f(r)).collect());
    MethodSummary {
        method,
        category: method.category(),
        runs_ok: ok.len(),
        median_ced: pick(&|r| r.metrics.as_ref().map_or(f64::NAN, |m| m.ced)),
        median_rdcm: pick(&|r| r.metrics.as_ref().map_or(f64::NAN, |m| m.rdcm)),
        median_wall_time_secs: pick(&|r| r.wall_time_secs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    #[test]
    fn quantile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn five_percent_of_hundred_masks_five() {
        let col: Array1<f64> = (1..=100).map(|i| i as f64 * 0.37).collect();
        let mut x = Array2::zeros((100, 2));
        x.column_mut(0).assign(&col);
        x.column_mut(1).assign(&col.iter().rev().copied().collect::<Array1<f64>>());
        let c = apply_artificial_dl(&x, 0.05).unwrap();
        assert_eq!(c.matrix.masked_in_column(0), 5);
        assert_eq!(c.matrix.masked_in_column(1), 5);
        assert_eq!(c.truth, x);
        for j in 0..2 {
            let d = c.limits.get(j).unwrap();
            for i in 0..100 {
                assert_eq!(c.matrix.mask()[[i, j]], x[[i, j]] < d);
            }
        }
    }

    #[test]
    fn constant_column_is_skipped() {
        let mut x = Array2::from_elem((10, 2), 2.0);
        for i in 0..10 {
            x[[i, 0]] = 1.0 + i as f64;
        }
        let c = apply_artificial_dl(&x, 0.2).unwrap();
        assert_eq!(c.limits.get(1), None);
        assert_eq!(c.matrix.masked_in_column(1), 0);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn rejects_quantile_leaving_too_few_rows() {
        let x = Array2::from_shape_fn((6, 2), |(i, j)| 1.0 + (i * 2 + j) as f64);
        assert!(apply_artificial_dl(&x, 0.5).is_err());
        assert!(apply_artificial_dl(&x, 1.5).is_err());
    }

    #[test]
    fn synthetic_without_noise_is_rank_one_in_logs() {
        let spec = SyntheticSpec {
            n: 20,
            parts: 4,
            noise_scale: 0.0,
            seed: 9,
            ..SyntheticSpec::default()
        };
        let logs = generate_synthetic(&spec).unwrap().mapv(f64::ln);
        // every 2x2 minor of a rank-one matrix vanishes
        for i in 1..20 {
            for j in 1..4 {
                let minor = logs[[0, 0]] * logs[[i, j]] - logs[[0, j]] * logs[[i, 0]];
                assert!(minor.abs() < 1e-9, "{minor}");
            }
        }
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn synthetic_default_is_positive() {
        let x = generate_synthetic(&SyntheticSpec::default()).unwrap();
        assert_eq!(x.dim(), (300, 10));
        assert!(x.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        let err = "mice".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("deepImpCoDa-dl"));
    }

    #[test]
    fn dl65_experiment_has_clean_record() {
        let cfg = ExperimentConfig {
            dataset: DatasetSource::Synthetic(SyntheticSpec {
                n: 40,
                parts: 4,
                ..SyntheticSpec::default()
            }),
            methods: vec![Method::Dl65],
            seeds: vec![1, 2],
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.runs.len(), 2);
        for r in &report.runs {
            let m = r.metrics.as_ref().unwrap();
            assert_eq!((m.curious_above_dl.count, m.curious_nonpositive.count), (0, 0));
        }
        assert_eq!(report.long_table().lines().count(), 1 + 2 * 5);
    }

    #[test]
    fn config_parses_from_toml() {
        let text = r#"
            censor_quantile = 0.1
            methods = ["knn", "uniform-dl"]
            seeds = [4]
            [dataset.synthetic]
            n = 50
            [settings]
            maxiter = 3
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.methods, vec![Method::Knn, Method::UniformDl]);
        assert_eq!(cfg.settings.maxiter, 3);
        assert_eq!(cfg.settings.net.hidden_layers, vec![64, 48, 32]);
        assert!(toml::from_str::<ExperimentConfig>("methods = [\"mice\"]").is_err());
    }
}
