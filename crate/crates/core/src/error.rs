// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("graph {graph}: negative node id {id}")]
    NegativeId { graph: String, id: i64 },
    #[error("graph {graph}: self-loop on node {node}")]
    SelfLoop { graph: String, node: usize },
    #[error("graph {graph}: node id {node} out of range for {n} nodes")]
    NodeOutOfRange { graph: String, node: usize, n: usize },
    #[error("graph {graph}: node ids are not contiguous, id {missing} never appears")]
    NodeGap { graph: String, missing: usize },
    #[error("graph {graph}: graph has no nodes")]
    EmptyGraph { graph: String },
    #[error("graph {graph}: malformed edge entry: {detail}")]
    MalformedEdge { graph: String, detail: String },
    #[error("duplicate graph id {0}")]
    DuplicateId(String),
    #[error("graph {0} has a target row but no edge list")]
    MissingGraph(String),
    #[error("graph {0} has an edge list but no target row")]
    MissingTarget(String),
    #[error("graph {id}: target {value:?} is not 0 or 1")]
    NonBinaryTarget { id: String, value: String },
    #[error("CSV header lacks column {0:?}")]
    MissingColumn(&'static str),
    #[error("graph {0} has no entry in the feature file")]
    MissingFeatures(String),
    #[error("feature file entry {id}: {detail}")]
    BadFeatures { id: String, detail: String },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },
    #[error("matrix has negative entries")]
    NegativeEntries,
    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("Lyapunov residual {residual:e} exceeds {tolerance:e}")]
    LyapunovResidual { residual: f64, tolerance: f64 },
    #[error("cannot build a histogram from no values")]
    EmptyHistogram,
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("node {node} has degree {degree} above cap {cap} and clamping is disabled")]
    DegreeAboveCap { node: usize, degree: usize, cap: usize },
    #[error("standardization requested without dataset moments")]
    MissingMoments,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("forward cache is stale (cache step {cache_step}, model step {model_step})")]
    StaleCache { cache_step: u64, model_step: u64 },
    #[error("non-finite gradient in parameter {param} at step {step}")]
    NonFiniteGradient { param: String, step: u64 },
    #[error("ROC AUC is undefined when only one class is present")]
    SingleClass,
    #[error("length mismatch: {scores} scores vs {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("class {class} has {count} members, fewer than {folds} folds")]
    ClassTooSmall { class: u8, count: usize, folds: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("rejection sampling gave up after {attempts} attempts")]
    SamplingBudget { attempts: usize },
    #[error("graph {id}: {source}")]
    InGraph {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Attaches the id of the graph being processed.
    pub fn in_graph(self, id: impl std::fmt::Display) -> Self {
        Error::InGraph { id: id.to_string(), source: Box::new(self) }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InGraph { source, .. } => source.kind(),
            Error::NonSymmetric { .. }
            | Error::NegativeEntries
            | Error::NoConvergence { .. }
            | Error::LyapunovResidual { .. }
            | Error::NonFiniteGradient { .. }
            | Error::SamplingBudget { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}
