//! Clustering agreement and connectivity error metrics.
//!
//! NMI is mutual information over the arithmetic mean of the two entropies
//! (natural log). Two single-cluster labelings count as identical (NMI 1).

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::ThetaEstimate;
use crate::graph::Membership;
use crate::perm::best_assignment;

/// Contingency table of two labelings with labels compacted to `0..r`, `0..c`.
fn contingency(a: &[usize], b: &[usize]) -> Result<DMatrix<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("cannot compare empty labelings"));
    }
    let compact = |x: &[usize]| {
        let mut ids = BTreeMap::new();
        for &v in x {
            let next = ids.len();
            ids.entry(v).or_insert(next);
        }
        ids
    };
    let (ia, ib) = (compact(a), compact(b));
    let mut t = DMatrix::zeros(ia.len(), ib.len());
    for (x, y) in a.iter().zip(b) {
        t[(ia[x], ib[y])] += 1.0;
    }
    Ok(t)
}

fn entropy_of(counts: impl Iterator<Item = f64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0.0)
        .map(|c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    let n = a.len() as f64;
    let rows: Vec<f64> = t.row_iter().map(|r| r.sum()).collect();
    let cols: Vec<f64> = t.column_iter().map(|c| c.sum()).collect();
    let (ha, hb) = (entropy_of(rows.iter().copied(), n), entropy_of(cols.iter().copied(), n));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for i in 0..t.nrows() {
        for j in 0..t.ncols() {
            let nij = t[(i, j)];
            if nij > 0.0 {
                mi += nij / n * (n * nij / (rows[i] * cols[j])).ln();
            }
        }
    }
    Ok((mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0))
}

/// NMI on all nodes of all graphs stacked together.
pub fn overall_nmi(pred: &Membership, truth: &Membership) -> Result<f64> {
    check_same_shape(pred, truth)?;
    nmi(&pred.stacked(), &truth.stacked())
}

/// NMI computed separately on each graph.
pub fn individual_nmis(pred: &Membership, truth: &Membership) -> Result<Vec<f64>> {
    check_same_shape(pred, truth)?;
    pred.per_graph()
        .iter()
        .zip(truth.per_graph())
        .map(|(p, t)| nmi(p, t))
        .collect()
}

fn check_same_shape(a: &Membership, b: &Membership) -> Result<()> {
    if a.n_graphs() != b.n_graphs() {
        return Err(Error::LengthMismatch {
            expected: b.n_graphs(),
            actual: a.n_graphs(),
        });
    }
    for (x, y) in a.per_graph().iter().zip(b.per_graph()) {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                expected: y.len(),
                actual: x.len(),
            });
        }
    }
    Ok(())
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index (Hubert and Arabie).
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    let n = a.len() as f64;
    let sum_ij: f64 = t.iter().map(|&x| choose2(x)).sum();
    let sum_a: f64 = t.row_iter().map(|r| choose2(r.sum())).sum();
    let sum_b: f64 = t.column_iter().map(|c| choose2(c.sum())).sum();
    let expected = sum_a * sum_b / choose2(n).max(f64::MIN_POSITIVE);
    let max_index = (sum_a + sum_b) / 2.0;
    if max_index == expected {
        // Both labelings trivial in the same way.
        return Ok(1.0);
    }
    Ok((sum_ij - expected) / (max_index - expected))
}

fn label_table(pred: &[usize], truth: &[usize], k: usize) -> Result<DMatrix<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("cannot compare empty labelings"));
    }
    if let Some(&label) = pred.iter().chain(truth).find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, k });
    }
    let mut t = DMatrix::zeros(k, k);
    for (&p, &q) in pred.iter().zip(truth) {
        t[(p, q)] += 1.0;
    }
    Ok(t)
}

/// Relabeling `perm` (predicted label `p` becomes `perm[p]`) that agrees with
/// `truth` on the most nodes.
pub fn best_relabeling(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<usize>> {
    Ok(best_assignment(&label_table(pred, truth, k)?))
}

/// Misclustering rate: the smallest fraction of disagreeing nodes over all
/// relabelings of `pred`. Labels must lie in `0..k`.
pub fn mcr(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    let t = label_table(pred, truth, k)?;
    let perm = best_assignment(&t);
    let agree: f64 = perm.iter().enumerate().map(|(p, &q)| t[(p, q)]).sum();
    let n = pred.len() as f64;
    Ok((n - agree) / n)
}

/// Standardized squared error `Σ (θ̂ − θ)² / (θ(1 − θ))`.
///
/// Cells with `θ ∈ {0, 1}` have no variance and are skipped with a warning.
/// A missing (`NaN`) estimate in a used cell makes the result `NaN`.
pub fn sse(theta_hat: &DMatrix<f64>, theta_true: &DMatrix<f64>) -> Result<f64> {
    if theta_hat.shape() != theta_true.shape() {
        return Err(Error::LengthMismatch {
            expected: theta_true.nrows(),
            actual: theta_hat.nrows(),
        });
    }
    let mut total = 0.0;
    let mut skipped = 0;
    for (h, t) in theta_hat.iter().zip(theta_true.iter()) {
        let var = t * (1.0 - t);
        if var <= 0.0 {
            skipped += 1;
            continue;
        }
        total += (h - t).powi(2) / var;
    }
    if skipped > 0 {
        log::warn!("sse: skipped {skipped} cell(s) with true probability 0 or 1");
    }
    Ok(total)
}

/// Per-key Shannon entropy (natural log) of cluster assignments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport<K: Ord> {
    pub per_key: BTreeMap<K, f64>,
    pub summary: Summary,
}

/// Mean and type-7 quartiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        };
        Summary {
            count: v.len(),
            mean,
            q25: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q75: quantile_sorted(&v, 0.75),
        }
    }
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

pub fn assignment_entropy<K: Ord + Clone>(
    occurrences: &BTreeMap<K, Vec<usize>>,
) -> EntropyReport<K> {
    let per_key: BTreeMap<K, f64> = occurrences
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(key, clusters)| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for &c in clusters {
                *counts.entry(c).or_default() += 1.0;
            }
            let h = entropy_of(counts.into_values(), clusters.len() as f64);
            (key.clone(), h)
        })
        .collect();
    let values: Vec<f64> = per_key.values().copied().collect();
    EntropyReport {
        summary: Summary::of(&values),
        per_key,
    }
}

/// Per-graph agreement scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphScores {
    pub graph: usize,
    pub nmi: f64,
    pub ari: f64,
    pub mcr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub overall_nmi: f64,
    pub individual_nmis: Vec<f64>,
    pub ari: f64,
    pub mcr: f64,
    /// Present when both an estimate and the true connectivity are given.
    pub sse: Option<f64>,
    pub graphs: Vec<GraphScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_summary: Option<Summary>,
}

/// Scores `pred` against `truth`. `theta_hat` is in `pred`'s label space; it is
/// relabeled by the overall best-agreement permutation before computing SSE.
pub fn evaluate(
    pred: &Membership,
    truth: &Membership,
    theta_hat: Option<&ThetaEstimate>,
    theta_true: Option<&DMatrix<f64>>,
) -> Result<EvalReport> {
    check_same_shape(pred, truth)?;
    let k = pred.k().max(truth.k());
    let (ps, ts) = (pred.stacked(), truth.stacked());
    let individual = individual_nmis(pred, truth)?;
    let graphs = pred
        .per_graph()
        .iter()
        .zip(truth.per_graph())
        .zip(&individual)
        .enumerate()
        .map(|(graph, ((p, t), &nmi))| {
            Ok(GraphScores {
                graph,
                nmi,
                ari: ari(p, t)?,
                mcr: mcr(p, t, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sse = match (theta_hat, theta_true) {
        (Some(hat), Some(truth_theta)) => {
            if hat.k() != truth_theta.nrows() || hat.k() != k {
                return Err(Error::LengthMismatch {
                    expected: truth_theta.nrows(),
                    actual: hat.k(),
                });
            }
            let perm = best_relabeling(&ps, &ts, k)?;
            Some(sse(&hat.permuted(&perm).probs, truth_theta)?)
        }
        _ => None,
    };
    Ok(EvalReport {
        overall_nmi: nmi(&ps, &ts)?,
        individual_nmis: individual,
        ari: ari(&ps, &ts)?,
        mcr: mcr(&ps, &ts, k)?,
        sse,
        graphs,
        entropy_summary: None,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }

    /// One row per graph followed by an `overall` row.
    pub fn to_csv(&self, header_comment: Option<&str>) -> String {
        let fmt = |x: f64| x.to_string();
        let mut out = String::new();
        if let Some(c) = header_comment {
            out.push_str(&format!("# {c}\n"));
        }
        out.push_str("scope,graph,nmi,ari,mcr,sse\n");
        for g in &self.graphs {
            out.push_str(&format!(
                "graph,{},{},{},{},\n",
                g.graph,
                fmt(g.nmi),
                fmt(g.ari),
                fmt(g.mcr)
            ));
        }
        out.push_str(&format!(
            "overall,,{},{},{},{}\n",
            fmt(self.overall_nmi),
            fmt(self.ari),
            fmt(self.mcr),
            self.sse.map(fmt).unwrap_or_default()
        ));
        out
    }

    pub fn write(&self, json_path: &Path, csv_path: &Path, header_comment: Option<&str>) -> Result<()> {
        crate::io::write_file(json_path, &self.to_json()?)?;
        crate::io::write_file(csv_path, &self.to_csv(header_comment))
    }
}
