//! JSON configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use jointsbm::io::read_matrix_csv;
use jointsbm::{Alignment, Connectivity, SizeSpec};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Connectivity given inline, as a planted partition, or as a CSV file
/// (relative paths resolve against the config file's directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    Planted { k: usize, theta_in: f64, theta_out: f64 },
    Matrix(Vec<Vec<f64>>),
    File(PathBuf),
}

impl ThetaSpec {
    pub fn resolve(&self, base: &Path) -> CliResult<Connectivity> {
        match self {
            ThetaSpec::Planted { k, theta_in, theta_out } => {
                Ok(Connectivity::planted(*k, *theta_in, *theta_out)?)
            }
            ThetaSpec::Matrix(rows) => {
                let k = rows.len();
                if k == 0 || rows.iter().any(|r| r.len() != k) {
                    return Err(CliError::usage("theta matrix must be square and non-empty"));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(Connectivity::new(DMatrix::from_row_slice(k, k, &flat))?)
            }
            ThetaSpec::File(p) => {
                let path = if p.is_absolute() { p.clone() } else { base.join(p) };
                Ok(Connectivity::new(read_matrix_csv(path)?)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub n_graphs: usize,
    pub sizes: SizeSpec,
    pub alpha: f64,
    pub theta: ThetaSpec,
    #[serde(default)]
    pub seed: u64,
}

/// Fit settings; every field can also be given on the command line, which
/// takes precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub method: Option<Method>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub n_restarts: Option<usize>,
    pub seed: Option<u64>,
    /// Sweep graphs concurrently within a joint-fit pass.
    #[serde(default)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Joint,
    Iso1,
    Iso2,
    Iso3,
}

impl Method {
    pub fn alignment(self) -> Option<Alignment> {
        match self {
            Method::Joint => None,
            Method::Iso1 => Some(Alignment::Iso1),
            Method::Iso2 => Some(Alignment::Iso2),
            Method::Iso3 => Some(Alignment::Iso3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Joint => "joint",
            Method::Iso1 => "iso1",
            Method::Iso2 => "iso2",
            Method::Iso3 => "iso3",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "joint" => Ok(Method::Joint),
            "iso1" => Ok(Method::Iso1),
            "iso2" => Ok(Method::Iso2),
            "iso3" => Ok(Method::Iso3),
            other => Err(format!("unknown method '{other}' (expected joint, iso1, iso2 or iso3)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub n_graphs: Vec<usize>,
    pub sizes: Vec<SizeSpec>,
    pub alpha: Vec<f64>,
    /// Dispersion values substituted into every negative-binomial size spec.
    #[serde(default)]
    pub r: Vec<f64>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub k: usize,
    pub theta: ThetaSpec,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> CliResult<()> {
        let empty = [
            ("n_graphs", self.n_graphs.is_empty()),
            ("sizes", self.sizes.is_empty()),
            ("alpha", self.alpha.is_empty()),
            ("methods", self.methods.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(CliError::usage(format!("experiment axis '{name}' is empty")));
        }
        if self.replicates == 0 {
            return Err(CliError::usage("replicates must be at least 1"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(CliError::usage(format!("method '{}' listed twice", m.name())));
            }
        }
        if self.methods.contains(&Method::Iso3) && self.k > jointsbm::perm::MAX_EXHAUSTIVE_K {
            return Err(CliError::Core(jointsbm::Error::PermutationSearchTooLarge {
                k: self.k,
                max: jointsbm::perm::MAX_EXHAUSTIVE_K,
            }));
        }
        if self.fit.method.is_some() || self.fit.k.is_some() || self.fit.seed.is_some() {
            return Err(CliError::usage(
                "set methods, k and seed at the top level of an experiment spec, not under 'fit'",
            ));
        }
        Ok(())
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
}

/// Directory relative paths inside a config resolve against.
pub fn config_base(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}
