//! `generate`, `fit` and `evaluate`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use jointsbm::estimate::{estimate_theta_pooled, pool_estimates};
use jointsbm::io::{load_dataset_with, matrix_rows, matrix_to_csv, read_matrix_csv, read_membership_csv};
use jointsbm::iso::{align, fit_isolated, RawIsoFit};
use jointsbm::metrics::evaluate as score;
use jointsbm::synth::generate as synthesize;
use jointsbm::{
    DuplicatePolicy, FitOptions, GeneratorConfig, GraphDataset, IsoFit, IsoOptions, Membership,
    ThetaEstimate,
};
use log::info;
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{config_base, read_json, FitConfig, GenerateConfig, Method};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, schema_header, write_atomic, writing};
use crate::{EvaluateArgs, FitArgs, FitFlags, GenerateArgs};

pub const MANIFEST: &str = "manifest.json";
pub const TRUTH: &str = "truth.csv";
pub const THETA_TRUE: &str = "theta_true.csv";
pub const MEMBERSHIP: &str = "membership.csv";
pub const MODEL: &str = "model.json";
pub const THETA_HAT: &str = "theta_hat.csv";
pub const LOSS_TRACE: &str = "loss_trace.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

pub fn generate(args: &GenerateArgs) -> CliResult<()> {
    let cfg: GenerateConfig = read_json(&args.config)?;
    let theta = cfg.theta.resolve(&config_base(&args.config))?;
    let gen = GeneratorConfig {
        n_graphs: cfg.n_graphs,
        sizes: cfg.sizes,
        alpha: cfg.alpha,
        theta,
        seed: args.seed.unwrap_or(cfg.seed),
    };
    let data = synthesize(&gen)?;
    write_dataset(&data, &args.out)?;
    info!("wrote {} graphs to {}", data.dataset.n_graphs(), args.out.display());
    Ok(())
}

/// Manifest, edge lists, `truth.csv` and `theta_true.csv`.
pub fn write_dataset(data: &jointsbm::synth::SyntheticData, dir: &Path) -> CliResult<()> {
    ensure_dir(dir)?;
    writing(dir, jointsbm::io::save_dataset(&data.dataset, dir, Some(data.theta.k())))?;
    write_atomic(&dir.join(TRUTH), &membership_csv(&data.truth))?;
    write_atomic(
        &dir.join(THETA_TRUE),
        &format!("{}\n{}", schema_header(), matrix_to_csv(data.theta.probs())),
    )
}

pub fn membership_csv(m: &Membership) -> String {
    let mut text = format!("{}\ngraph,node,label\n", schema_header());
    for (n, labels) in m.per_graph().iter().enumerate() {
        for (i, l) in labels.iter().enumerate() {
            writeln!(text, "{n},{i},{l}").expect("writing to a String cannot fail");
        }
    }
    text
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST)
    } else {
        p.to_path_buf()
    }
}

/// Settings after merging command-line flags over a config file.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub method: Method,
    pub joint: FitOptions,
    pub iso: IsoOptions,
}

pub fn resolve(method: Method, k: usize, flags: &FitFlags, cfg: &FitConfig) -> CliResult<Resolved> {
    let mut joint = FitOptions::new(k);
    if let Some(e) = flags.epsilon.or(cfg.epsilon) {
        joint.epsilon = e;
    }
    if let Some(m) = flags.max_iter.or(cfg.max_iter) {
        joint.max_iter = m;
    }
    if let Some(r) = flags.restarts.or(cfg.n_restarts) {
        joint.n_restarts = r;
    }
    joint.seed = flags.seed.or(cfg.seed).unwrap_or(0);
    joint.parallel = cfg.parallel;
    joint.validate()?;
    let mut iso = IsoOptions::default();
    iso.kmeans.seed = joint.seed;
    if let Some(r) = flags.restarts.or(cfg.n_restarts) {
        iso.kmeans.n_restarts = r;
    }
    Ok(Resolved { method, joint, iso })
}

/// A fitted labeling with its pooled connectivity estimate.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub membership: Membership,
    pub theta_hat: ThetaEstimate,
    pub model: Value,
    pub loss_trace: Option<Vec<f64>>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

pub fn fit_joint(ds: &GraphDataset, opts: &FitOptions) -> CliResult<Outcome> {
    let fit = jointsbm::joint::fit(ds, opts)?;
    let mut model: Value = serde_json::from_str(&fit.to_json()?)
        .map_err(|e| CliError::Runtime(format!("model serialization: {e}")))?;
    model["method"] = json!("joint");
    model["epsilon"] = json!(opts.epsilon);
    model["max_iter"] = json!(opts.max_iter);
    model["n_restarts"] = json!(opts.n_restarts);
    let theta_hat = estimate_theta_pooled(ds, &fit.membership)?;
    Ok(Outcome {
        theta_hat,
        model,
        loss_trace: Some(fit.loss_trace),
        iterations: Some(fit.iterations),
        converged: Some(fit.converged),
        membership: fit.membership,
    })
}

pub fn fit_iso(ds: &GraphDataset, raw: RawIsoFit, method: Method, opts: &IsoOptions) -> CliResult<Outcome> {
    let alignment = method.alignment().expect("isolated method");
    iso_outcome(align(ds, raw, alignment, &opts.kmeans)?, opts)
}

fn iso_outcome(fit: IsoFit, opts: &IsoOptions) -> CliResult<Outcome> {
    let theta_hat = pool_estimates(&fit.thetas)?;
    let model = json!({
        "method": fit.alignment.to_string(),
        "k": fit.memberships_aligned.k(),
        "seed": opts.kmeans.seed,
        "alignment": fit.alignment,
        "centers": fit.centers.iter().map(matrix_rows).collect::<Vec<_>>(),
        "permutations": fit.permutations,
    });
    Ok(Outcome {
        membership: fit.memberships_aligned,
        theta_hat,
        model,
        loss_trace: None,
        iterations: None,
        converged: None,
    })
}

pub fn fit_with(ds: &GraphDataset, r: &Resolved) -> CliResult<Outcome> {
    match r.method.alignment() {
        None => fit_joint(ds, &r.joint),
        Some(a) => iso_outcome(fit_isolated(ds, r.joint.k, a, &r.iso)?, &r.iso),
    }
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let cfg: FitConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => FitConfig::default(),
    };
    let loaded = load_dataset_with(manifest_path(&args.dataset), DuplicatePolicy::Dedupe)?;
    let k = args
        .flags
        .k
        .or(cfg.k)
        .or(loaded.k_hint)
        .ok_or_else(|| CliError::usage("number of communities unknown: pass --k or set k in the config"))?;
    let method = args.method.or(cfg.method).unwrap_or(Method::Joint);
    let resolved = resolve(method, k, &args.flags, &cfg)?;
    let outcome = fit_with(&loaded.dataset, &resolved)?;
    write_outcome(&outcome, &args.out)?;
    if outcome.converged == Some(false) {
        log::warn!("joint fit stopped at the iteration limit without converging");
    }
    Ok(())
}

pub fn write_outcome(o: &Outcome, dir: &Path) -> CliResult<()> {
    ensure_dir(dir)?;
    write_atomic(&dir.join(MEMBERSHIP), &membership_csv(&o.membership))?;
    let mut model = serde_json::to_string_pretty(&o.model)
        .map_err(|e| CliError::Runtime(format!("model serialization: {e}")))?;
    model.push('\n');
    write_atomic(&dir.join(MODEL), &model)?;
    write_atomic(
        &dir.join(THETA_HAT),
        &format!("{}\n{}", schema_header(), matrix_to_csv(&o.theta_hat.probs)),
    )?;
    if let Some(trace) = &o.loss_trace {
        let mut text = format!("{}\niteration,loss\n", schema_header());
        for (i, l) in trace.iter().enumerate() {
            writeln!(text, "{},{l}", i + 1).expect("writing to a String cannot fail");
        }
        write_atomic(&dir.join(LOSS_TRACE), &text)?;
    }
    Ok(())
}

fn with_k(m: Membership, k: usize) -> CliResult<Membership> {
    Ok(Membership::new(m.into_per_graph(), k)?)
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let truth_path = args.truth_dir.join(TRUTH);
    if !truth_path.is_file() {
        return Err(CliError::usage(format!("truth file {} not found", truth_path.display())));
    }
    let pred = read_membership_csv(args.fit_dir.join(MEMBERSHIP), None)?;
    let truth = read_membership_csv(&truth_path, None)?;
    let model_k = std::fs::read_to_string(args.fit_dir.join(MODEL))
        .ok()
        .and_then(|t| serde_json::from_str::<Value>(&t).ok())
        .and_then(|v| v["k"].as_u64())
        .map(|k| k as usize);
    let optional = |p: PathBuf| -> CliResult<Option<DMatrix<f64>>> {
        if p.is_file() {
            Ok(Some(read_matrix_csv(p)?))
        } else {
            Ok(None)
        }
    };
    let theta_hat = optional(args.fit_dir.join(THETA_HAT))?;
    let theta_true = optional(args.truth_dir.join(THETA_TRUE))?;
    let k = [
        Some(pred.k()),
        Some(truth.k()),
        model_k,
        theta_hat.as_ref().map(|m| m.nrows()),
        theta_true.as_ref().map(|m| m.nrows()),
    ]
    .into_iter()
    .flatten()
    .max()
    .expect("non-empty");
    let pred = with_k(pred, k)?;
    let truth = with_k(truth, k)?;
    let hat = theta_hat.map(|probs| ThetaEstimate {
        clamped: probs.map(|p| if p.is_nan() { p } else { p.clamp(0.0, 1.0) }),
        variance: DMatrix::from_element(probs.nrows(), probs.ncols(), f64::NAN),
        probs,
    });
    let report = score(&pred, &truth, hat.as_ref(), theta_true.as_ref())?;
    ensure_dir(&args.out)?;
    let mut json = report.to_json()?;
    json.push('\n');
    write_atomic(&args.out.join(REPORT_JSON), &json)?;
    let header = schema_header();
    write_atomic(
        &args.out.join(REPORT_CSV),
        &report.to_csv(Some(header.trim_start_matches("# "))),
    )
}
