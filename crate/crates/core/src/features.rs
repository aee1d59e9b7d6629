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

//! Dataset-level featurization and the feature file format.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::centrality::{BETWEENNESS_CONVENTION, CLOSENESS_CONVENTION, EIGENVECTOR_CONVENTION};
use crate::encode::{
    assemble_from_metrics, build_histogram, compute_node_metrics, encode_degree_onehot, encode_values_hist_onehot,
    moments_from_metrics, DatasetMoments, EncodingMode, EncodingSpec, Histogram, HistogramScope, CONSTANT_SPREAD,
    STD_FLOOR,
};
use crate::error::{Error, Result};
use crate::graph::{read_file, Graph, GraphId, UnlabeledDataset};
use crate::json;
use crate::nct::{average_controllability_detailed, STABILIZATION_CONVENTION};
use crate::par::{try_map_collect, Schedule};

/// One graph's block in the feature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFeatures {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov_residual: Option<f64>,
    /// Row-major, one row per node.
    pub features: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
    /// Encoding settings with every default resolved (degree cap filled in).
    pub encoding: EncodingSpec,
    pub conventions: BTreeMap<String, String>,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<DatasetMoments>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
    pub graphs: BTreeMap<GraphId, GraphFeatures>,
}

/// Conventions written next to every feature set.
pub fn conventions(spec: &EncodingSpec) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        c.insert(k.to_owned(), v);
    };
    match spec.mode {
        EncodingMode::NctEfaRaw => {
            put("stabilization", STABILIZATION_CONVENTION.to_owned());
            put("closeness", CLOSENESS_CONVENTION.to_owned());
            put("betweenness", BETWEENNESS_CONVENTION.to_owned());
            put("eigenvector", EIGENVECTOR_CONVENTION.to_owned());
            if spec.standardize {
                put("standardization", format!("dataset z-score, population std, columns with std < {STD_FLOOR:e} set to 0"));
            }
        }
        EncodingMode::AvgctrlHistOnehot => {
            put("stabilization", STABILIZATION_CONVENTION.to_owned());
            put(
                "histogram",
                format!("uniform width over [min, max], last bin right-inclusive, relative spread <= {CONSTANT_SPREAD:e} is a single bin"),
            );
        }
        EncodingMode::DegreeOnehot => {
            put("degree", if spec.clamp_degree { "degrees above the cap clamp to the cap" } else { "degrees above the cap are an error" }.to_owned());
        }
    }
    c
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

/// Encodes every graph of `ds`. Results are keyed by id, so the output does
/// not depend on `schedule`.
pub fn featurize(ds: &UnlabeledDataset, spec: &EncodingSpec, schedule: Schedule) -> Result<FeatureFile> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let entries = &ds.entries;
    let tag = |id: &GraphId| {
        let id = id.clone();
        move |e: Error| e.in_graph(&id)
    };
    let mut resolved = spec.clone();
    let mut moments = None;
    let mut histogram = None;
    let blocks: Vec<GraphFeatures> = match spec.mode {
        EncodingMode::NctEfaRaw => {
            let metrics = try_map_collect(entries, schedule, |(id, g)| compute_node_metrics(g).map_err(tag(id)))?;
            if spec.standardize {
                moments = Some(moments_from_metrics(&metrics)?);
            }
            metrics
                .iter()
                .map(|m| GraphFeatures {
                    n: m.node_count(),
                    lambda_max: Some(m.lambda_max),
                    lyapunov_residual: Some(m.lyapunov_residual),
                    features: rows(&assemble_from_metrics(m, moments.as_ref()).values),
                })
                .collect()
        }
        EncodingMode::AvgctrlHistOnehot => {
            let ac = try_map_collect(entries, schedule, |(id, g)| average_controllability_detailed(g).map_err(tag(id)))?;
            if spec.histogram_scope == HistogramScope::Dataset {
                let all: Vec<f64> = ac.iter().flat_map(|a| a.values.iter().copied()).collect();
                histogram = Some(build_histogram(&all, spec.bins)?);
            }
            ac.iter()
                .zip(entries)
                .map(|(a, (id, _))| {
                    let values = a.values.to_vec();
                    let m = encode_values_hist_onehot(&values, spec.bins, histogram.as_ref()).map_err(tag(id))?;
                    Ok(GraphFeatures {
                        n: values.len(),
                        lambda_max: Some(a.lambda_max),
                        lyapunov_residual: Some(a.lyapunov_residual),
                        features: rows(&m.values),
                    })
                })
                .collect::<Result<_>>()?
        }
        EncodingMode::DegreeOnehot => {
            let cap = spec.degree_cap.unwrap_or_else(|| ds.graphs().map(Graph::max_degree).max().unwrap_or(0));
            resolved.degree_cap = Some(cap);
            try_map_collect(entries, schedule, |(id, g)| {
                let m = encode_degree_onehot(g, cap, spec.clamp_degree).map_err(tag(id))?;
                Ok(GraphFeatures { n: g.node_count(), lambda_max: None, lyapunov_residual: None, features: rows(&m.values) })
            })?
        }
    };
    Ok(FeatureFile {
        manifest: None,
        conventions: conventions(&resolved),
        feature_names: resolved.feature_names(),
        encoding: resolved,
        moments,
        histogram,
        graphs: entries.iter().map(|(id, _)| id.clone()).zip(blocks).collect(),
    })
}

impl FeatureFile {
    /// Pretty JSON with 17-significant-digit floats.
    pub fn to_json(&self) -> Result<String> {
        json::to_string_pretty(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_file(path.as_ref())?)
    }

    /// Dense matrices per graph, after checking each block's shape.
    pub fn matrices(&self) -> Result<BTreeMap<GraphId, Array2<f64>>> {
        let width = self.feature_names.len();
        self.graphs
            .iter()
            .map(|(id, block)| {
                let bad = |detail: String| Error::BadFeatures { id: id.to_string(), detail };
                if block.features.len() != block.n {
                    return Err(bad(format!("{} rows for n = {}", block.features.len(), block.n)));
                }
                if let Some(r) = block.features.iter().position(|r| r.len() != width) {
                    return Err(bad(format!("row {r} has {} values, expected {width}", block.features[r].len())));
                }
                let flat: Vec<f64> = block.features.iter().flatten().copied().collect();
                let m = Array2::from_shape_vec((block.n, width), flat).map_err(|e| bad(e.to_string()))?;
                Ok((id.clone(), m))
            })
            .collect()
    }
}
