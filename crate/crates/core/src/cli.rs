//! The `rzimpute` command.
//!
//! ```text
//! rzimpute impute  --input x.csv --output imputed.csv [--dl-file dl.csv | --dl-quantile 0.05] ...
//! rzimpute bench   --config experiment.toml [--output results/]
//! rzimpute metrics --truth true.csv --imputed imputed.csv (--censored x.csv | --mask mask.csv) [--dl-file dl.csv]
//! ```
//!
//! Exit codes: 0 on success (including runs that did not converge, which
//! carry a warning in the report), 2 for usage, input and validation errors,
//! 1 for internal failures. Log verbosity comes from `RZIMPUTE_LOG`
//! (`error`, `warn`, `info`, `debug`), default `warn`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::Serialize;

use crate::bench::{self, ExperimentConfig, Method, MethodRun, MethodSettings};
use crate::coda::{CompositionMatrix, DetectionLimits};
use crate::error::{Error, Result};
use crate::imputer::CellRecord;
use crate::metrics;
use crate::nn::NetProfile;
use crate::{io, Warning};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

pub const LOG_ENV: &str = "RZIMPUTE_LOG";

#[derive(Debug, Parser)]
#[command(name = "rzimpute", version, about = "Impute rounded zeros in compositional data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Impute the zeros of one CSV file.
    Impute(ImputeArgs),
    /// Run a benchmark experiment described by a TOML or JSON file.
    Bench(BenchArgs),
    /// Score an imputed file against the true data.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// deepImp, deepImp-dl, deepImpCoDa, deepImpCoDa-dl, knn, aknn, dl65 or uniform-dl.
    #[arg(long, default_value = "deepImpCoDa-dl")]
    pub method: Method,
    /// One-row CSV of detection limits with the input's header.
    #[arg(long, conflicts_with = "dl_quantile")]
    pub dl_file: Option<PathBuf>,
    /// Use this quantile of each censored column's observed values as its limit.
    #[arg(long)]
    pub dl_quantile: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub maxiter: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, default_value = "desk")]
    pub net_profile: NetProfile,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Let a network method impute outside (0, DL].
    #[arg(long)]
    pub no_censor: bool,
    /// Write a JSON run report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the one in the config.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Run one job at a time.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub imputed: PathBuf,
    /// The censored input; its zero cells are the imputed ones.
    #[arg(long, required_unless_present = "mask", conflicts_with = "mask")]
    pub censored: Option<PathBuf>,
    /// CSV of 0/1 flags marking the imputed cells.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub dl_file: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Parses the process arguments, runs the command and maps errors to exit codes.
pub fn main_entry() -> ExitCode {
    env_logger::Builder::new()
        .parse_filters(&std::env::var(LOG_ENV).unwrap_or_else(|_| "warn".into()))
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Impute(args) => cmd_impute(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Metrics(args) => cmd_metrics(&args),
    }
}

#[derive(Debug, Serialize)]
struct ImputeRunReport<'a> {
    method: Method,
    seed: u64,
    censor: bool,
    limits: &'a [Option<f64>],
    masked_cells: usize,
    iterations: usize,
    converged: bool,
    delta_trace: &'a [f64],
    variable_order: &'a [usize],
    warnings: &'a [Warning],
    provenance: &'a [CellRecord],
}

/// Builds the method configuration, rejecting flags the method ignores.
pub fn method_run(args: &ImputeArgs) -> Result<MethodRun> {
    let network = args.method.is_network();
    let net_flags = [
        ("--eps", args.eps.is_some()),
        ("--maxiter", args.maxiter.is_some()),
        ("--epochs", args.epochs.is_some()),
        ("--patience", args.patience.is_some()),
        ("--dropout", args.dropout.is_some()),
        ("--no-censor", args.no_censor),
    ];
    if !network {
        if let Some((flag, _)) = net_flags.iter().find(|(_, set)| *set) {
            return Err(Error::Config(format!(
                "{flag} only applies to network methods, not {}",
                args.method
            )));
        }
    }
    if args.k.is_some() && matches!(args.method, Method::Dl65 | Method::UniformDl) {
        return Err(Error::Config(format!("--k does not apply to {}", args.method)));
    }

    let mut settings = MethodSettings {
        net: args.net_profile.config(),
        ..MethodSettings::default()
    };
    if let Some(k) = args.k {
        settings.k = k;
    }
    if let Some(eps) = args.eps {
        settings.eps = eps;
    }
    if let Some(m) = args.maxiter {
        settings.maxiter = m;
    }
    if let Some(e) = args.epochs {
        settings.net.epochs = e;
    }
    if let Some(p) = args.patience {
        settings.net.patience = p;
    }
    if let Some(d) = args.dropout {
        settings.net.dropout_rate = d;
    }
    let mut run = MethodRun::new(args.method, &settings, args.seed);
    if let MethodRun::Imputer(cfg) = &mut run {
        if args.no_censor {
            cfg.censor = false;
        }
    }
    run.validate()?;
    Ok(run)
}

fn load_limits(
    header: &[String],
    x: &CompositionMatrix,
    dl_file: Option<&Path>,
    dl_quantile: Option<f64>,
) -> Result<DetectionLimits> {
    let limits = match (dl_file, dl_quantile) {
        (Some(p), _) => io::read_limits(p, header)?,
        (None, Some(q)) => io::limits_from_quantile(x, q)?,
        (None, None) => DetectionLimits::new(vec![None; header.len()]),
    };
    for j in x.censored_columns() {
        if limits.get(j).is_none() {
            return Err(Error::Config(format!(
                "column {:?} has rounded zeros but no detection limit; pass --dl-file or --dl-quantile",
                header[j]
            )));
        }
    }
    Ok(limits)
}

pub fn cmd_impute(args: &ImputeArgs) -> Result<()> {
    let run = method_run(args)?;
    let (header, x) = io::read_composition(&args.input)?;
    let limits = load_limits(&header, &x, args.dl_file.as_deref(), args.dl_quantile)?;
    let rep = run.run(&x, &limits)?;
    for w in &rep.warnings {
        log::warn!("{}", w.message);
    }
    io::write_table(&args.output, &header, &rep.imputed)?;
    if let Some(path) = &args.report {
        let censor = match &run {
            MethodRun::Imputer(cfg) => cfg.censor,
            MethodRun::Baseline(_) => args.method.category().dl,
        };
        let report = ImputeRunReport {
            method: args.method,
            seed: args.seed,
            censor,
            limits: limits.as_slice(),
            masked_cells: x.masked_count(),
            iterations: rep.iterations,
            converged: rep.converged,
            delta_trace: &rep.delta_trace,
            variable_order: &rep.variable_order,
            warnings: &rep.warnings,
            provenance: &rep.provenance,
        };
        io::write_text(path, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(dir) = &args.output {
        cfg.output = Some(dir.clone());
    }
    if args.sequential {
        cfg.parallel = false;
    }
    let report = bench::run_experiment(&cfg)?;
    for s in &report.summary {
        println!(
            "{:<16} ok {:>2}  ced {}  rdcm {}",
            s.method.name(),
            s.runs_ok,
            fmt_opt(s.median_ced),
            fmt_opt(s.median_rdcm)
        );
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

pub fn cmd_metrics(args: &MetricsArgs) -> Result<()> {
    let truth = io::read_table(&args.truth)?;
    let imputed = io::read_table(&args.imputed)?;
    check_same(&args.imputed, &truth, &imputed)?;
    let mask: Array2<bool> = match (&args.censored, &args.mask) {
        (Some(p), _) => {
            let t = io::read_table(p)?;
            check_same(p, &truth, &t)?;
            t.values.mapv(|v| v == 0.0)
        }
        (None, Some(p)) => {
            let t = io::read_table(p)?;
            check_same(p, &truth, &t)?;
            if let Some(v) = t.values.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::Input {
                    path: p.display().to_string(),
                    msg: format!("mask cells must be 0 or 1, found {v}"),
                });
            }
            t.values.mapv(|v| v == 1.0)
        }
        (None, None) => return Err(Error::Config("pass --censored or --mask".into())),
    };
    let limits = match &args.dl_file {
        Some(p) => io::read_limits(p, &truth.header)?,
        None => DetectionLimits::new(vec![None; truth.header.len()]),
    };
    let report = metrics::evaluate(&truth.values, &imputed.values, &mask, &limits)?;
    let text = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => io::write_text(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn check_same(path: &Path, truth: &io::Table, other: &io::Table) -> Result<()> {
    if truth.values.dim() != other.values.dim() || truth.header != other.header {
        return Err(Error::Shape(format!(
            "{} is {:?} with header {:?}, the truth is {:?} with header {:?}",
            path.display(),
            other.values.dim(),
            other.header,
            truth.values.dim(),
            truth.header
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("rzimpute").chain(args.iter().copied()))
    }

    fn impute_args(extra: &[&str]) -> ImputeArgs {
        let mut args = vec!["impute", "--input", "x.csv", "--output", "y.csv"];
        args.extend_from_slice(extra);
        match parse(&args).unwrap().command {
            Command::Impute(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults() {
        let a = impute_args(&[]);
        assert_eq!(a.method, Method::DeepImpCoDaDl);
        assert_eq!(a.seed, DEFAULT_SEED);
        assert_eq!(a.net_profile, NetProfile::Desk);
    }

    #[test]
    fn rejects_network_flags_for_baselines() {
        assert!(method_run(&impute_args(&["--method", "dl65", "--epochs", "3"])).is_err());
        assert!(method_run(&impute_args(&["--method", "knn", "--no-censor"])).is_err());
        assert!(method_run(&impute_args(&["--method", "uniform-dl", "--k", "3"])).is_err());
        assert!(method_run(&impute_args(&["--method", "knn", "--k", "3"])).is_ok());
    }

    #[test]
    fn no_censor_turns_off_clamping() {
        let run = method_run(&impute_args(&["--method", "deepImp-dl", "--no-censor"])).unwrap();
        match run {
            MethodRun::Imputer(cfg) => assert!(!cfg.censor),
            _ => panic!("expected a network method"),
        }
    }

    #[test]
    fn conflicting_limit_sources() {
        assert!(parse(&[
            "impute", "--input", "a", "--output", "b", "--dl-file", "d", "--dl-quantile", "0.1"
        ])
        .is_err());
        assert!(parse(&["impute", "--input", "a", "--output", "b", "--method", "mice"]).is_err());
    }
}
