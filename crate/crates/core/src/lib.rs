//! Community detection across collections of non-aligned graphs with joint
//! and isolated spectral stochastic block models.

pub mod error;
pub mod estimate;
pub mod graph;
pub mod io;
pub mod iso;
pub mod joint;
pub mod kmeans;
pub mod metrics;
pub mod perm;
pub mod seed;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use estimate::ThetaEstimate;
pub use graph::{Adjacency, ClusterCounts, DuplicatePolicy, GraphDataset, Membership};
pub use iso::{Alignment, IsoFit, IsoOptions};
pub use joint::{FitOptions, JointFit};
pub use metrics::EvalReport;
pub use spectral::{EigenOptions, QStar, SpectralPair};
pub use synth::{Connectivity, GeneratorConfig, SizeSpec};
