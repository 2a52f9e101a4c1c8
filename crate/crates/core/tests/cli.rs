use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rzimpute::bench::{apply_artificial_dl, generate_synthetic, SyntheticSpec};
use rzimpute::io::{read_table, write_table};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rzimpute"));
    c.env_remove("RZIMPUTE_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

fn write_limits(path: &Path, limits: &[Option<f64>]) {
    let mut text = header(limits.len()).join(",");
    text.push('\n');
    let cells: Vec<String> = limits
        .iter()
        .map(|l| l.map_or_else(String::new, |v| v.to_string()))
        .collect();
    text.push_str(&cells.join(","));
    text.push('\n');
    std::fs::write(path, text).unwrap();
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    truth: PathBuf,
    censored: PathBuf,
    limits: PathBuf,
}

impl Fixture {
    fn path(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let spec = SyntheticSpec {
        n: 60,
        parts: 4,
        seed: 11,
        ..SyntheticSpec::default()
    };
    let x = generate_synthetic(&spec).unwrap();
    let data = apply_artificial_dl(&x, 0.1).unwrap();
    let h = header(4);
    let truth = root.join("truth.csv");
    let censored = root.join("censored.csv");
    let limits = root.join("dl.csv");
    write_table(&truth, &h, &data.truth).unwrap();
    write_table(&censored, &h, data.matrix.values()).unwrap();
    write_limits(&limits, data.limits.as_slice());
    Fixture {
        _dir: dir,
        root,
        truth,
        censored,
        limits,
    }
}

fn impute_args<'a>(f: &'a Fixture, out: &'a str, method: &'a str) -> Vec<String> {
    [
        "impute",
        "--input",
        f.censored.to_str().unwrap(),
        "--output",
        out,
        "--method",
        method,
        "--dl-file",
        f.limits.to_str().unwrap(),
        "--epochs",
        "20",
        "--maxiter",
        "2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[test]
fn impute_writes_positive_values_below_limits() {
    let f = fixture();
    let out = f.path("out.csv");
    let report = f.path("report.json");
    let mut args = impute_args(&f, &out, "deepImpCoDa-dl");
    args.extend(["--report".to_string(), report.clone()]);
    let before = (std::fs::read(&f.censored).unwrap(), std::fs::read(&f.limits).unwrap());
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let after = (std::fs::read(&f.censored).unwrap(), std::fs::read(&f.limits).unwrap());
    assert_eq!(before, after);

    let imputed = read_table(Path::new(&out)).unwrap();
    let censored = read_table(&f.censored).unwrap();
    let limits = read_table(&f.limits).unwrap();
    assert_eq!(imputed.header, censored.header);
    for ((i, j), &c) in censored.values.indexed_iter() {
        let v = imputed.values[[i, j]];
        if c == 0.0 {
            assert!(v > 0.0 && v <= limits.values[[0, j]], "cell ({i}, {j}) = {v}");
        } else {
            assert_eq!(v, c);
        }
    }
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(rep["method"], "deepImpCoDa-dl");
    assert_eq!(rep["seed"], 42);
    assert!(rep["iterations"].as_u64().unwrap() >= 1);
}

#[test]
fn complete_input_is_returned_unchanged() {
    let f = fixture();
    let out = f.path("out.csv");
    let report = f.path("report.json");
    let o = run(&[
        "impute",
        "--input",
        f.truth.to_str().unwrap(),
        "--output",
        &out,
        "--report",
        &report,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        std::fs::read_to_string(&f.truth).unwrap()
    );
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(rep["iterations"], 0);
    assert_eq!(rep["masked_cells"], 0);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let f = fixture();
    let a = f.path("a.csv");
    let b = f.path("b.csv");
    for out in [&a, &b] {
        let o = bin().args(impute_args(&f, out, "deepImp-dl")).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn missing_limit_names_the_column() {
    let f = fixture();
    let censored = read_table(&f.censored).unwrap();
    let col = (0..4)
        .find(|&j| censored.values.column(j).iter().any(|&v| v == 0.0))
        .unwrap();
    let mut limits: Vec<Option<f64>> = read_table(&f.limits)
        .unwrap()
        .values
        .row(0)
        .iter()
        .map(|&v| Some(v))
        .collect();
    limits[col] = None;
    let dl = f.root.join("partial.csv");
    write_limits(&dl, &limits);
    let o = run(&[
        "impute",
        "--input",
        f.censored.to_str().unwrap(),
        "--output",
        &f.path("out.csv"),
        "--dl-file",
        dl.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&format!("\"x{col}\"")), "{}", stderr(&o));
}

#[test]
fn malformed_csv_is_rejected() {
    let f = fixture();
    let bad = f.root.join("bad.csv");
    std::fs::write(&bad, "a,b,c\n1,2,3\n4,five,6\n").unwrap();
    let o = run(&["impute", "--input", bad.to_str().unwrap(), "--output", &f.path("o.csv")]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("data row 2") && msg.contains("\"b\""), "{msg}");

    let ragged = f.root.join("ragged.csv");
    std::fs::write(&ragged, "a,b\n1,2\n3\n").unwrap();
    let o = run(&["impute", "--input", ragged.to_str().unwrap(), "--output", &f.path("o.csv")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_file_fails() {
    let o = run(&["impute", "--input", "/nonexistent/x.csv", "--output", "/tmp/never.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/x.csv"));
}

#[test]
fn unknown_method_is_rejected() {
    let o = run(&["impute", "--input", "a.csv", "--output", "b.csv", "--method", "mice"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("deepImpCoDa-dl"));
}

#[test]
fn network_flags_on_a_baseline_are_rejected() {
    let f = fixture();
    let o = run(&[
        "impute",
        "--input",
        f.censored.to_str().unwrap(),
        "--output",
        &f.path("o.csv"),
        "--method",
        "dl65",
        "--dl-file",
        f.limits.to_str().unwrap(),
        "--epochs",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_of_truth_against_itself_are_zero() {
    let f = fixture();
    let o = run(&[
        "metrics",
        "--truth",
        f.truth.to_str().unwrap(),
        "--imputed",
        f.truth.to_str().unwrap(),
        "--censored",
        f.censored.to_str().unwrap(),
        "--dl-file",
        f.limits.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["rdcm"], 0.0);
    assert_eq!(rep["ced"], 0.0);
    assert_eq!(rep["curious_above_dl"]["count"], 0);
    assert!(rep["masked_cells"].as_u64().unwrap() > 0);
}

#[test]
fn metrics_shape_mismatch_fails() {
    let f = fixture();
    let small = f.root.join("small.csv");
    let t = read_table(&f.truth).unwrap();
    let cut: Array2<f64> = t.values.slice(ndarray::s![..10, ..]).to_owned();
    write_table(&small, &t.header, &cut).unwrap();
    let o = run(&[
        "metrics",
        "--truth",
        f.truth.to_str().unwrap(),
        "--imputed",
        small.to_str().unwrap(),
        "--censored",
        f.censored.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_rejects_bad_quantile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    std::fs::write(&cfg, "censor_quantile = 1.5\nmethods = [\"dl65\"]\n").unwrap();
    let o = run(&["bench", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("censor_quantile"), "{}", stderr(&o));
}

#[test]
fn small_baseline_bench_is_quick() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    std::fs::write(
        &cfg,
        "methods = [\"dl65\", \"uniform-dl\"]\nseeds = [1]\n\n[dataset.synthetic]\nn = 100\nparts = 5\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    let start = Instant::now();
    let o = run(&["bench", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert!(start.elapsed() < Duration::from_secs(5));
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("dl65") && stdout.contains("uniform-dl"), "{stdout}");
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("method,seed,metric,value"));
    assert!(out.join("report.json").exists());
}
