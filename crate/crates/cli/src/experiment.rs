//! Experiment sweeps.
//!
//! The grid `n_graphs × sizes × alpha` is expanded into cells `c000, c001, …`
//! in that nesting order. Cell `i` draws its replicates from
//! `derive_seed(derive_seed(seed, i), replicate)`, so any cell can be rerun on
//! its own. Finished cells are written to `cells/<id>.csv` and their ids
//! appended to `ledger.txt`; a rerun over the same directory skips them.

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::Path;
use std::sync::Mutex;

use jointsbm::iso::fit_raw;
use jointsbm::metrics::{evaluate, Summary};
use jointsbm::seed::derive_seed;
use jointsbm::synth::generate;
use jointsbm::{Connectivity, GeneratorConfig, SizeSpec};
use log::info;
use rayon::prelude::*;

use crate::commands::{fit_iso, fit_joint, resolve};
use crate::config::{config_base, read_json, ExperimentSpec, Method, ThetaSpec};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, fmt_f64, schema_header, write_atomic};
use crate::{ExperimentArgs, FitFlags};

pub const SPEC_FILE: &str = "experiment.json";
pub const LEDGER: &str = "ledger.txt";
pub const RESULTS: &str = "results.csv";
pub const SUMMARY: &str = "summary.csv";

pub const RESULT_COLUMNS: &str = "cell,n_graphs,sizes,alpha,replicate,method,seed,overall_nmi,\
individual_nmi_median,individual_nmi_q25,individual_nmi_q75,ari,mcr,sse,iterations,converged";
pub const SUMMARY_COLUMNS: &str = "cell,n_graphs,sizes,alpha,method,metric,count,median,q25,q75";
/// Result columns summarized per cell and method.
pub const SUMMARY_METRICS: [&str; 5] = ["overall_nmi", "individual_nmi_median", "ari", "mcr", "sse"];

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub n_graphs: usize,
    pub sizes: SizeSpec,
    pub alpha: f64,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("c{:03}", self.index)
    }
}

/// Comma-free label of a size spec.
pub fn size_label(s: &SizeSpec) -> String {
    match s {
        SizeSpec::Fixed(n) => format!("fixed:{n}"),
        SizeSpec::Explicit(v) => {
            let parts: Vec<String> = v.iter().map(usize::to_string).collect();
            format!("explicit:{}", parts.join(";"))
        }
        SizeSpec::NegativeBinomial { mu, r } => format!("nb:mu={mu};r={r}"),
    }
}

pub fn expand(spec: &ExperimentSpec) -> Vec<Cell> {
    let sizes: Vec<SizeSpec> = spec
        .sizes
        .iter()
        .flat_map(|s| match s {
            SizeSpec::NegativeBinomial { mu, .. } if !spec.r.is_empty() => spec
                .r
                .iter()
                .map(|&r| SizeSpec::NegativeBinomial { mu: *mu, r })
                .collect(),
            other => vec![other.clone()],
        })
        .collect();
    let mut cells = Vec::new();
    for &n_graphs in &spec.n_graphs {
        for s in &sizes {
            for &alpha in &spec.alpha {
                cells.push(Cell {
                    index: cells.len(),
                    n_graphs,
                    sizes: s.clone(),
                    alpha,
                });
            }
        }
    }
    cells
}

fn apply_flags(mut spec: ExperimentSpec, flags: &FitFlags) -> ExperimentSpec {
    if let Some(k) = flags.k {
        spec.k = k;
    }
    if let Some(s) = flags.seed {
        spec.seed = s;
    }
    spec.fit.epsilon = flags.epsilon.or(spec.fit.epsilon);
    spec.fit.max_iter = flags.max_iter.or(spec.fit.max_iter);
    spec.fit.n_restarts = flags.restarts.or(spec.fit.n_restarts);
    spec
}

/// Result rows of one cell, without header.
pub fn run_cell(cell: &Cell, spec: &ExperimentSpec, theta: &Connectivity) -> CliResult<String> {
    let cell_seed = derive_seed(spec.seed, cell.index as u64);
    let mut rows = String::new();
    for rep in 0..spec.replicates {
        let seed = derive_seed(cell_seed, rep as u64);
        let data = generate(&GeneratorConfig {
            n_graphs: cell.n_graphs,
            sizes: cell.sizes.clone(),
            alpha: cell.alpha,
            theta: theta.clone(),
            seed,
        })?;
        let mut fit_cfg = spec.fit.clone();
        fit_cfg.seed = Some(seed);
        let opts = resolve(Method::Joint, spec.k, &FitFlags::default(), &fit_cfg)?;
        let raw = if spec.methods.iter().any(|m| *m != Method::Joint) {
            Some(fit_raw(&data.dataset, spec.k, &opts.iso)?)
        } else {
            None
        };
        for &method in &spec.methods {
            let outcome = match (method, &raw) {
                (Method::Joint, _) => fit_joint(&data.dataset, &opts.joint)?,
                (m, Some(raw)) => fit_iso(&data.dataset, raw.clone(), m, &opts.iso)?,
                (_, None) => unreachable!("raw fits exist whenever an isolated method is requested"),
            };
            let report = evaluate(
                &outcome.membership,
                &data.truth,
                Some(&outcome.theta_hat),
                Some(theta.probs()),
            )?;
            let ind = Summary::of(&report.individual_nmis);
            let fields = [
                cell.id(),
                cell.n_graphs.to_string(),
                size_label(&cell.sizes),
                cell.alpha.to_string(),
                rep.to_string(),
                method.name().to_string(),
                seed.to_string(),
                fmt_f64(report.overall_nmi),
                fmt_f64(ind.median),
                fmt_f64(ind.q25),
                fmt_f64(ind.q75),
                fmt_f64(report.ari),
                fmt_f64(report.mcr),
                report.sse.map(fmt_f64).unwrap_or_default(),
                outcome.iterations.map(|i| i.to_string()).unwrap_or_default(),
                outcome.converged.map(|c| c.to_string()).unwrap_or_default(),
            ];
            rows.push_str(&fields.join(","));
            rows.push('\n');
        }
    }
    Ok(rows)
}

fn read_ledger(path: &Path) -> CliResult<HashSet<String>> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(HashSet::new()),
        Err(e) => Err(CliError::usage(format!("cannot read {}: {e}", path.display()))),
    }
}

fn append_ledger(path: &Path, id: &str) -> CliResult<()> {
    let err = |e: std::io::Error| CliError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
    writeln!(f, "{id}").map_err(err)?;
    f.sync_data().map_err(err)
}

/// Saves the spec, or checks it against the one already in `out`.
fn claim_output(spec: &ExperimentSpec, out: &Path) -> CliResult<()> {
    let path = out.join(SPEC_FILE);
    if path.is_file() {
        let existing: ExperimentSpec = read_json(&path)?;
        if &existing != spec {
            return Err(CliError::usage(format!(
                "{} holds a different experiment; choose another --out",
                out.display()
            )));
        }
        return Ok(());
    }
    let mut json = serde_json::to_string_pretty(spec)
        .map_err(|e| CliError::Runtime(format!("spec serialization: {e}")))?;
    json.push('\n');
    write_atomic(&path, &json)
}

pub fn run(args: &ExperimentArgs) -> CliResult<()> {
    let spec: ExperimentSpec = read_json(&args.config)?;
    let mut spec = apply_flags(spec, &args.flags);
    spec.validate()?;
    let theta = spec.theta.resolve(&config_base(&args.config))?;
    if matches!(spec.theta, ThetaSpec::File(_)) {
        // Saved specs carry Θ inline so they do not depend on the config's location.
        spec.theta = ThetaSpec::Matrix(jointsbm::io::matrix_rows(theta.probs()));
    }
    if theta.k() != spec.k {
        return Err(CliError::usage(format!(
            "theta is {0}x{0} but k = {1}",
            theta.k(),
            spec.k
        )));
    }
    resolve(Method::Joint, spec.k, &FitFlags::default(), &spec.fit)?;

    let cells_dir = args.out.join("cells");
    ensure_dir(&cells_dir)?;
    claim_output(&spec, &args.out)?;
    let ledger_path = args.out.join(LEDGER);
    let done = read_ledger(&ledger_path)?;
    let cells = expand(&spec);
    let cell_path = |c: &Cell| cells_dir.join(format!("{}.csv", c.id()));
    let pending: Vec<&Cell> = cells
        .iter()
        .filter(|c| !(done.contains(&c.id()) && cell_path(c).is_file()))
        .collect();
    info!("{} of {} cells to run", pending.len(), cells.len());

    let ledger = Mutex::new(());
    let failures: Vec<CliError> = pending
        .par_iter()
        .filter_map(|cell| {
            let result = run_cell(cell, &spec, &theta).and_then(|rows| {
                write_atomic(&cell_path(cell), &rows)?;
                let _guard = ledger.lock().unwrap_or_else(|p| p.into_inner());
                append_ledger(&ledger_path, &cell.id())
            });
            match &result {
                Ok(()) => info!("cell {} done", cell.id()),
                Err(e) => log::error!("cell {} failed: {e}", cell.id()),
            }
            result.err()
        })
        .collect();
    if let Some(first) = failures.into_iter().next() {
        return Err(first);
    }

    let mut results = format!("{}\n{RESULT_COLUMNS}\n", schema_header());
    for c in &cells {
        let path = cell_path(c);
        let rows = fs::read_to_string(&path)
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        results.push_str(&rows);
    }
    write_atomic(&args.out.join(RESULTS), &results)?;
    write_atomic(&args.out.join(SUMMARY), &summarize(&results)?)
}

/// Median and quartiles of each metric per cell and method, skipping `NaN`
/// and empty entries.
pub fn summarize(results_csv: &str) -> CliResult<String> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(results_csv.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::Runtime(format!("results: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name).expect("known column");
    let metric_cols: Vec<usize> = SUMMARY_METRICS.iter().map(|m| col(m)).collect();
    let key_cols = [col("cell"), col("n_graphs"), col("sizes"), col("alpha"), col("method")];

    // Groups in first-appearance order.
    let mut groups: Vec<(Vec<String>, Vec<Vec<f64>>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Runtime(format!("results: {e}")))?;
        let key: Vec<String> = key_cols.iter().map(|&i| record[i].to_string()).collect();
        let idx = match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, vec![Vec::new(); metric_cols.len()]));
                groups.len() - 1
            }
        };
        for (slot, &c) in groups[idx].1.iter_mut().zip(&metric_cols) {
            if let Ok(v) = record[c].parse::<f64>() {
                if !v.is_nan() {
                    slot.push(v);
                }
            }
        }
    }
    let mut out = format!("{}\n{SUMMARY_COLUMNS}\n", schema_header());
    for (key, values) in &groups {
        for (metric, v) in SUMMARY_METRICS.iter().zip(values) {
            let s = Summary::of(v);
            out.push_str(&format!(
                "{},{metric},{},{},{},{}\n",
                key.join(","),
                s.count,
                fmt_f64(s.median),
                fmt_f64(s.q25),
                fmt_f64(s.q75)
            ));
        }
    }
    Ok(out)
}
