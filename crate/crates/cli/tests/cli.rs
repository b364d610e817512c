use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jointsbm"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    run(args, cwd).status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const GEN: &str = r#"{"n_graphs": 5, "sizes": {"fixed": 25}, "alpha": 1.0,
  "theta": {"planted": {"k": 6, "theta_in": 0.5, "theta_out": 0.05}}, "seed": 4}"#;

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn generate_writes_dataset_reproducibly() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "gen.json", GEN);
    ok(&["generate", "--config", "gen.json", "--out", "a"], d);
    ok(&["generate", "--config", "gen.json", "--out", "b"], d);
    let a = read_all(&d.join("a"));
    assert_eq!(a, read_all(&d.join("b")));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names.iter().filter(|n| n.ends_with(".edg")).count(), 5);
    assert!(names.contains(&"truth.csv") && names.contains(&"manifest.json"));

    ok(&["generate", "--config", "gen.json", "--seed", "5", "--out", "c"], d);
    assert_ne!(a, read_all(&d.join("c")));
}

#[test]
fn generate_rejects_bad_configs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "zero.json", &GEN.replace("\"alpha\": 1.0", "\"alpha\": 0"));
    let out = run(&["generate", "--config", "zero.json", "--out", "x"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
    write(d, "extra.json", &GEN.replace("\"seed\"", "\"sed\""));
    assert_eq!(code(&["generate", "--config", "extra.json", "--out", "x"], d), 2);
    assert_eq!(code(&["generate", "--config", "missing.json", "--out", "x"], d), 2);
    assert_eq!(code(&["generate", "--out", "x"], d), 2);
}

#[test]
fn fit_joint_and_iso() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "gen.json", GEN);
    ok(&["generate", "--config", "gen.json", "--out", "data"], d);
    ok(&["fit", "data", "--method", "joint", "--seed", "1", "--out", "j1"], d);
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("j1/model.json")).unwrap()).unwrap();
    assert_eq!(model["converged"], true);
    assert_eq!(model["method"], "joint");
    assert_eq!(model["k"], 6);
    assert!(model["iterations"].as_u64().unwrap() <= 100);
    for f in ["membership.csv", "theta_hat.csv", "loss_trace.csv"] {
        assert!(d.join("j1").join(f).is_file(), "{f}");
    }

    ok(&["fit", "data/manifest.json", "--method", "joint", "--seed", "1", "--jobs", "2", "--out", "j2"], d);
    assert_eq!(read_all(&d.join("j1")), read_all(&d.join("j2")));

    for m in ["iso1", "iso2", "iso3"] {
        ok(&["fit", "data", "--method", m, "--k", "6", "--out", m], d);
        assert!(d.join(m).join("membership.csv").is_file());
    }

    let out = run(&["fit", "data", "--method", "iso3", "--k", "10", "--out", "big"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k = 10"));
    assert!(!d.join("big").exists());
    assert_eq!(code(&["fit", "nothing", "--out", "x"], d), 2);
    assert_eq!(code(&["fit", "data", "--method", "iso9", "--out", "x"], d), 2);
}

#[test]
fn fit_reads_config() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "gen.json", GEN);
    ok(&["generate", "--config", "gen.json", "--out", "data"], d);
    write(d, "fit.json", r#"{"method": "joint", "k": 6, "max_iter": 1, "n_restarts": 1, "seed": 3}"#);
    ok(&["fit", "data", "--config", "fit.json", "--out", "f"], d);
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("f/model.json")).unwrap()).unwrap();
    assert_eq!(model["iterations"], 1);
    assert_eq!(model["restart_losses"].as_array().unwrap().len(), 1);
    ok(&["fit", "data", "--config", "fit.json", "--max-iter", "50", "--out", "g"], d);
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("g/model.json")).unwrap()).unwrap();
    assert_eq!(model["max_iter"], 50);
}

#[test]
fn evaluate_truth_against_itself() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "gen.json", GEN);
    ok(&["generate", "--config", "gen.json", "--out", "data"], d);
    // A "fit" holding the true labels and the true connectivity.
    fs::create_dir(d.join("perfect")).unwrap();
    fs::copy(d.join("data/truth.csv"), d.join("perfect/membership.csv")).unwrap();
    fs::copy(d.join("data/theta_true.csv"), d.join("perfect/theta_hat.csv")).unwrap();
    ok(&["evaluate", "perfect", "data", "--out", "ev"], d);
    let csv = fs::read_to_string(d.join("ev/report.csv")).unwrap();
    assert!(csv.starts_with("# schema_version=1\n"));
    let overall = csv.lines().find(|l| l.starts_with("overall")).unwrap();
    assert_eq!(overall, "overall,,1,1,0,0");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("ev/report.json")).unwrap()).unwrap();
    assert_eq!(json["overall_nmi"], 1.0);
    assert_eq!(json["sse"], 0.0);

    fs::create_dir(d.join("empty")).unwrap();
    let out = run(&["evaluate", "perfect", "empty", "--out", "ev2"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truth.csv"));
}

const EXPERIMENT: &str = r#"{"n_graphs": [20], "sizes": [{"fixed": 100}], "alpha": [0.1, 0.5, 1, 2],
  "replicates": 5, "methods": ["joint", "iso1"], "k": 3,
  "theta": {"planted": {"k": 3, "theta_in": 0.4, "theta_out": 0.05}}, "seed": 11}"#;

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

/// Type-7 quantile (linear interpolation between order statistics).
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Independent recomputation of `summary.csv` from `results.csv`.
fn recompute_summary(results: &str) -> Vec<Vec<String>> {
    let header: Vec<&str> = results.lines().nth(1).unwrap().split(',').collect();
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap();
    let rows = data_rows(results);
    let mut keys: Vec<Vec<String>> = Vec::new();
    for r in &rows {
        let key = vec![r[0].clone(), r[1].clone(), r[2].clone(), r[3].clone(), r[5].clone()];
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = Vec::new();
    for key in keys {
        for metric in ["overall_nmi", "individual_nmi_median", "ari", "mcr", "sse"] {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r[0] == key[0] && r[5] == key[4])
                .filter_map(|r| r[col(metric)].parse::<f64>().ok())
                .filter(|v| !v.is_nan())
                .collect();
            let f = |q: f64| {
                let x = quantile(&values, q);
                if x.is_nan() { "NaN".to_string() } else { x.to_string() }
            };
            let mut row = key.clone();
            row.extend([metric.to_string(), values.len().to_string(), f(0.5), f(0.25), f(0.75)]);
            out.push(row);
        }
    }
    out
}

#[test]
fn experiment_sweep_resume_and_summary() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "exp.json", EXPERIMENT);
    ok(&["experiment", "--config", "exp.json", "--out", "ex"], d);
    let results = fs::read_to_string(d.join("ex/results.csv")).unwrap();
    assert!(results.starts_with("# schema_version=1\n"));
    let rows = data_rows(&results);
    assert_eq!(rows.len(), 40);
    assert_eq!(rows.iter().filter(|r| r[5] == "joint").count(), 20);
    assert!(rows.iter().all(|r| r.len() == 16));

    let summary = fs::read_to_string(d.join("ex/summary.csv")).unwrap();
    assert_eq!(data_rows(&summary), recompute_summary(&results));

    // Same spec and seed in a fresh directory: identical tables.
    ok(&["experiment", "--config", "exp.json", "--jobs", "1", "--out", "ex2"], d);
    assert_eq!(results, fs::read_to_string(d.join("ex2/results.csv")).unwrap());
    assert_eq!(summary, fs::read_to_string(d.join("ex2/summary.csv")).unwrap());

    // Resume: cells in the ledger are not recomputed, missing ones are.
    let ledger = fs::read_to_string(d.join("ex/ledger.txt")).unwrap();
    let mut ids: Vec<&str> = ledger.lines().collect();
    ids.sort();
    assert_eq!(ids, ["c000", "c001", "c002", "c003"]);
    let kept: String = ledger.lines().filter(|l| *l != "c002").map(|l| format!("{l}\n")).collect();
    fs::write(d.join("ex/ledger.txt"), kept).unwrap();
    let marked = fs::read_to_string(d.join("ex/cells/c000.csv")).unwrap().replacen("c000,20", "c000,21", 1);
    fs::write(d.join("ex/cells/c000.csv"), &marked).unwrap();
    ok(&["experiment", "--config", "exp.json", "--out", "ex"], d);
    assert_eq!(fs::read_to_string(d.join("ex/cells/c000.csv")).unwrap(), marked);
    let resumed = fs::read_to_string(d.join("ex/results.csv")).unwrap();
    assert_eq!(resumed, results.replacen("c000,20", "c000,21", 1));

    // A different spec cannot reuse the directory.
    assert_eq!(code(&["experiment", "--config", "exp.json", "--seed", "12", "--out", "ex"], d), 2);
}

#[test]
fn experiment_rejects_bad_specs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "none.json", &EXPERIMENT.replace(r#"["joint", "iso1"]"#, "[]"));
    let out = run(&["experiment", "--config", "none.json", "--out", "x"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("methods"));
    write(d, "zero.json", &EXPERIMENT.replace(r#""replicates": 5"#, r#""replicates": 0"#));
    assert_eq!(code(&["experiment", "--config", "zero.json", "--out", "x"], d), 2);
    write(d, "axis.json", &EXPERIMENT.replace("[0.1, 0.5, 1, 2]", "[]"));
    assert_eq!(code(&["experiment", "--config", "axis.json", "--out", "x"], d), 2);
    write(d, "k.json", &EXPERIMENT.replacen(r#""k": 3,"#, r#""k": 4,"#, 1));
    assert_eq!(code(&["experiment", "--config", "k.json", "--out", "x"], d), 2);
    assert!(!d.join("x").exists());
}
