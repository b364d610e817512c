//! Dataset manifests, edge lists, membership CSV and connectivity CSV.
//!
//! A manifest is a JSON object
//! `{"k_hint": 6, "graphs": [{"nodes": 25, "edges": "graph_0000.edg"}, ...]}`
//! whose edge paths are relative to the manifest's directory. Edge-list files
//! hold one whitespace-separated `u v` pair per line with 0-based node ids.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, DuplicatePolicy, GraphDataset, Membership};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_hint: Option<usize>,
    pub graphs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub nodes: usize,
    pub edges: String,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: GraphDataset,
    pub k_hint: Option<usize>,
}

pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<GraphDataset> {
    load_dataset_with(manifest_path, DuplicatePolicy::Dedupe).map(|l| l.dataset)
}

pub fn load_dataset_with(
    manifest_path: impl AsRef<Path>,
    policy: DuplicatePolicy,
) -> Result<LoadedDataset> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let graphs = manifest
        .graphs
        .iter()
        .map(|entry| {
            let path = base.join(&entry.edges);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let pairs = parse_edge_list(&text, &path)?;
            Adjacency::new(entry.nodes, pairs, policy).map_err(|e| match e {
                Error::SelfLoop(_)
                | Error::EndpointOutOfRange { .. }
                | Error::DuplicateEdge(..)
                | Error::EmptyGraph => Error::Parse {
                    path: path.clone(),
                    line: 0,
                    message: e.to_string(),
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedDataset {
        dataset: GraphDataset::new(graphs)?,
        k_hint: manifest.k_hint,
    })
}

fn parse_edge_list(text: &str, path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(parse_err(format!(
                "expected two node ids, found {} token(s)",
                tokens.len()
            )));
        }
        let mut ids = [0usize; 2];
        for (slot, tok) in ids.iter_mut().zip(&tokens) {
            *slot = tok
                .parse()
                .map_err(|_| parse_err(format!("non-integer token {tok:?}")))?;
        }
        if ids[0] == ids[1] {
            return Err(parse_err(format!("self-loop on node {}", ids[0])));
        }
        pairs.push((ids[0], ids[1]));
    }
    Ok(pairs)
}

/// Writes `manifest.json` plus one `graph_NNNN.edg` per graph into `dir`.
pub fn save_dataset(
    dataset: &GraphDataset,
    dir: impl AsRef<Path>,
    k_hint: Option<usize>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(dataset.n_graphs());
    for (n, g) in dataset.graphs().iter().enumerate() {
        let name = format!("graph_{n:04}.edg");
        let mut text = String::with_capacity(g.n_edges() * 8);
        for &(u, v) in g.edges() {
            writeln!(text, "{u} {v}").expect("writing to a String cannot fail");
        }
        write_file(&dir.join(&name), &text)?;
        entries.push(ManifestEntry {
            nodes: g.n_nodes(),
            edges: name,
        });
    }
    let manifest = Manifest {
        k_hint,
        graphs: entries,
    };
    let path = dir.join("manifest.json");
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_file(&path, &json)?;
    Ok(path)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes a `graph,node,label` CSV.
pub fn write_membership_csv(membership: &Membership, path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::from("graph,node,label\n");
    for (n, labels) in membership.per_graph().iter().enumerate() {
        for (i, l) in labels.iter().enumerate() {
            writeln!(text, "{n},{i},{l}").expect("writing to a String cannot fail");
        }
    }
    write_file(path.as_ref(), &text)
}

#[derive(Debug, Deserialize)]
struct MembershipRow {
    graph: usize,
    node: usize,
    label: usize,
}

/// Reads a `graph,node,label` CSV. Rows may come in any order but must cover
/// nodes `0..n` of graphs `0..N` exactly once. When `k` is `None` it is
/// inferred as one more than the largest label.
pub fn read_membership_csv(path: impl AsRef<Path>, k: Option<usize>) -> Result<Membership> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut slots: Vec<Vec<Option<usize>>> = Vec::new();
    for (i, row) in reader.deserialize::<MembershipRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        if slots.len() <= row.graph {
            slots.resize(row.graph + 1, Vec::new());
        }
        let g = &mut slots[row.graph];
        if g.len() <= row.node {
            g.resize(row.node + 1, None);
        }
        if g[row.node].replace(row.label).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: format!("duplicate entry for graph {} node {}", row.graph, row.node),
            });
        }
    }
    let labels = slots
        .into_iter()
        .enumerate()
        .map(|(n, g)| {
            if g.is_empty() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    message: format!("graph {n} has no rows"),
                });
            }
            g.into_iter()
                .enumerate()
                .map(|(i, l)| {
                    l.ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        line: 0,
                        message: format!("graph {n} is missing node {i}"),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let k = k.unwrap_or_else(|| labels.iter().flatten().max().map_or(1, |m| m + 1));
    Membership::new(labels, k)
}

/// Writes a square matrix as CSV, one row per line, no header. Non-finite
/// entries (undefined estimates) are written as `NaN`.
pub fn write_matrix_csv(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &matrix_to_csv(m))
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut text = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Row-major nested vectors, for JSON output.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Reads a K×K CSV of numbers (no header).
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("non-numeric token {:?}", t.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let k = rows.len();
    if k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "expected a non-empty square matrix".into(),
        });
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}
