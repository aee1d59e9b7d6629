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

//! Node feature encoders.
//!
//! * `nct-efa-raw`: the 4-vector [average controllability, closeness,
//!   betweenness, eigenvector centrality], optionally z-scored with
//!   dataset-wide moments.
//! * `avgctrl-hist-onehot`: one-hot index of each node's average
//!   controllability in a uniform-width histogram over the graph's values.
//! * `degree-onehot`: the featureless-graph baseline.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::centrality::{betweenness, closeness, eigenvector_centrality_detailed};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphId};
use crate::nct::average_controllability_detailed;

pub const DEFAULT_BINS: usize = 32;
/// Standard deviations below this are treated as a constant column.
pub const STD_FLOOR: f64 = 1e-12;
/// Relative spread under which histogram input counts as constant.
pub const CONSTANT_SPREAD: f64 = 1e-9;

pub const NCT_EFA_COLUMNS: [&str; 4] = ["average_controllability", "closeness", "betweenness", "eigenvector"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingMode {
    NctEfaRaw,
    AvgctrlHistOnehot,
    DegreeOnehot,
}

impl EncodingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EncodingMode::NctEfaRaw => "nct-efa-raw",
            EncodingMode::AvgctrlHistOnehot => "avgctrl-hist-onehot",
            EncodingMode::DegreeOnehot => "degree-onehot",
        }
    }
}

impl std::str::FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nct-efa-raw" => Ok(EncodingMode::NctEfaRaw),
            "avgctrl-hist-onehot" => Ok(EncodingMode::AvgctrlHistOnehot),
            "degree-onehot" => Ok(EncodingMode::DegreeOnehot),
            other => Err(Error::InvalidConfig(format!("unknown encoding {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistogramScope {
    /// One histogram per graph over that graph's values.
    PerGraph,
    /// One histogram over every node of the dataset.
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub mode: EncodingMode,
    pub bins: usize,
    /// `None` resolves to the dataset-wide maximum degree.
    pub degree_cap: Option<usize>,
    pub clamp_degree: bool,
    pub standardize: bool,
    pub histogram_scope: HistogramScope,
}

impl EncodingSpec {
    pub fn new(mode: EncodingMode) -> Self {
        EncodingSpec {
            mode,
            bins: DEFAULT_BINS,
            degree_cap: None,
            clamp_degree: false,
            standardize: true,
            histogram_scope: HistogramScope::PerGraph,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::ZeroBins);
        }
        Ok(())
    }

    /// Feature width for graphs encoded with this spec.
    pub fn width(&self) -> Option<usize> {
        match self.mode {
            EncodingMode::NctEfaRaw => Some(NCT_EFA_COLUMNS.len()),
            EncodingMode::AvgctrlHistOnehot => Some(self.bins),
            EncodingMode::DegreeOnehot => self.degree_cap.map(|c| c + 1),
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        match self.mode {
            EncodingMode::NctEfaRaw => NCT_EFA_COLUMNS.iter().map(|s| s.to_string()).collect(),
            EncodingMode::AvgctrlHistOnehot => (0..self.bins).map(|i| format!("avgctrl_bin_{i}")).collect(),
            EncodingMode::DegreeOnehot => {
                (0..self.width().unwrap_or(0)).map(|i| format!("degree_{i}")).collect()
            }
        }
    }
}

/// Node-by-feature matrix for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub graph_id: GraphId,
    pub values: Array2<f64>,
    pub feature_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn with_id(mut self, id: GraphId) -> Self {
        self.graph_id = id;
        self
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

fn unnamed(values: Array2<f64>, feature_names: Vec<String>) -> FeatureMatrix {
    FeatureMatrix { graph_id: GraphId::new(""), values, feature_names }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `k + 1` ascending edges, or `[min, max]` when the values are constant.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Single bin holding every value.
    pub fn is_degenerate(&self) -> bool {
        self.counts.len() == 1
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Bin of `x`, with the rightmost edge inclusive. Values outside the
    /// span land in the nearest end bin.
    pub fn bin_of(&self, x: f64) -> usize {
        let k = self.counts.len();
        let lo = self.edges[0];
        let hi = self.edges[k];
        if k == 1 || !(hi > lo) {
            return 0;
        }
        let raw = (k as f64 * (x - lo) / (hi - lo)).floor();
        let mut i = if raw.is_nan() || raw < 0.0 { 0 } else { (raw as usize).min(k - 1) };
        // The edges are rounded; nudge so edges[i] <= x <= edges[i + 1] holds exactly.
        while i > 0 && x < self.edges[i] {
            i -= 1;
        }
        while i + 1 < k && x > self.edges[i + 1] {
            i += 1;
        }
        i
    }
}

/// `k` uniform-width bins spanning `[min, max]`.
pub fn build_histogram(values: &[f64], k: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    if k == 0 {
        return Err(Error::ZeroBins);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidConfig("histogram values must be finite".into()));
    }
    // Spreads at rounding-noise level (vertex-transitive graphs) are constant.
    if hi - lo <= CONSTANT_SPREAD * lo.abs().max(hi.abs()).max(1.0) {
        return Ok(Histogram { edges: vec![lo, hi], counts: vec![values.len()] });
    }
    let width = hi - lo;
    let mut edges: Vec<f64> = (0..=k).map(|i| lo + width * i as f64 / k as f64).collect();
    edges[k] = hi;
    let mut hist = Histogram { edges, counts: vec![0; k] };
    for &x in values {
        let b = hist.bin_of(x);
        hist.counts[b] += 1;
    }
    Ok(hist)
}

fn one_hot(indices: &[usize], width: usize) -> Array2<f64> {
    let mut m = Array2::zeros((indices.len(), width));
    for (row, &col) in indices.iter().enumerate() {
        m[[row, col]] = 1.0;
    }
    m
}

fn hist_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("avgctrl_bin_{i}")).collect()
}

/// One-hot histogram-bin encoding of a graph's own average-controllability
/// distribution. A degenerate histogram puts every node in bin 0.
pub fn encode_avgctrl_hist_onehot(g: &Graph, k: usize) -> Result<FeatureMatrix> {
    let values = average_controllability_detailed(g)?.values.to_vec();
    encode_values_hist_onehot(&values, k, None)
}

/// One-hot encodes `values` against `hist`, or against a histogram built
/// from `values` when `hist` is `None`.
pub fn encode_values_hist_onehot(values: &[f64], k: usize, hist: Option<&Histogram>) -> Result<FeatureMatrix> {
    let own;
    let hist = match hist {
        Some(h) => h,
        None => {
            own = build_histogram(values, k)?;
            &own
        }
    };
    let bins: Vec<usize> = values.iter().map(|&x| hist.bin_of(x)).collect();
    Ok(unnamed(one_hot(&bins, k), hist_names(k)))
}

/// Degree one-hot with width `cap + 1`.
pub fn encode_degree_onehot(g: &Graph, cap: usize, clamp: bool) -> Result<FeatureMatrix> {
    let mut indices = g.degree_vector();
    for (node, d) in indices.iter_mut().enumerate() {
        if *d > cap {
            if !clamp {
                return Err(Error::DegreeAboveCap { node, degree: *d, cap });
            }
            *d = cap;
        }
    }
    Ok(unnamed(one_hot(&indices, cap + 1), (0..=cap).map(|i| format!("degree_{i}")).collect()))
}

/// The four per-node metrics plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMetrics {
    pub average_controllability: Vec<f64>,
    pub closeness: Vec<f64>,
    pub betweenness: Vec<f64>,
    pub eigenvector: Vec<f64>,
    pub lambda_max: f64,
    pub lyapunov_residual: f64,
    pub eigen_residual: f64,
}

impl NodeMetrics {
    pub fn node_count(&self) -> usize {
        self.average_controllability.len()
    }

    pub fn columns(&self) -> [&[f64]; 4] {
        [&self.average_controllability, &self.closeness, &self.betweenness, &self.eigenvector]
    }

    /// Unstandardized `n × 4` matrix.
    pub fn raw_matrix(&self) -> Array2<f64> {
        let n = self.node_count();
        let cols = self.columns();
        Array2::from_shape_fn((n, 4), |(i, j)| cols[j][i])
    }
}

pub fn compute_node_metrics(g: &Graph) -> Result<NodeMetrics> {
    let ac = average_controllability_detailed(g)?;
    let eig = eigenvector_centrality_detailed(g)?;
    Ok(NodeMetrics {
        average_controllability: ac.values.to_vec(),
        closeness: closeness(g),
        betweenness: betweenness(g),
        eigenvector: eig.values,
        lambda_max: ac.lambda_max,
        lyapunov_residual: ac.lyapunov_residual,
        eigen_residual: eig.residual,
    })
}

/// Per-column mean and (population) standard deviation over every node of
/// a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetMoments {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

/// Two-pass moments, accumulated in the order given.
pub fn moments_from_metrics<'a>(metrics: impl IntoIterator<Item = &'a NodeMetrics> + Clone) -> Result<DatasetMoments> {
    let mut count = 0usize;
    let mut sum = [0.0; 4];
    for m in metrics.clone() {
        count += m.node_count();
        for (s, col) in sum.iter_mut().zip(m.columns()) {
            *s += col.iter().sum::<f64>();
        }
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let mean = sum.map(|s| s / count as f64);
    let mut sq = [0.0; 4];
    for m in metrics {
        for ((s, col), mu) in sq.iter_mut().zip(m.columns()).zip(mean) {
            *s += col.iter().map(|x| (x - mu).powi(2)).sum::<f64>();
        }
    }
    let std = sq.map(|s| (s / count as f64).sqrt());
    Ok(DatasetMoments { mean, std })
}

pub fn compute_dataset_moments<'a>(graphs: impl IntoIterator<Item = &'a Graph>) -> Result<DatasetMoments> {
    let metrics = graphs.into_iter().map(compute_node_metrics).collect::<Result<Vec<_>>>()?;
    moments_from_metrics(&metrics)
}

/// Z-scores each column; columns whose std is under [`STD_FLOOR`] are
/// constant over the dataset and map to 0.
pub fn standardize(raw: &Array2<f64>, moments: &DatasetMoments) -> Array2<f64> {
    let mut out = raw.clone();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let (mu, sd) = (moments.mean[j], moments.std[j]);
        if sd < STD_FLOOR {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|x| (x - mu) / sd);
        }
    }
    out
}

pub fn assemble_from_metrics(
    metrics: &NodeMetrics,
    standardize_with: Option<&DatasetMoments>,
) -> FeatureMatrix {
    let raw = metrics.raw_matrix();
    let values = match standardize_with {
        Some(moments) => standardize(&raw, moments),
        None => raw,
    };
    unnamed(values, NCT_EFA_COLUMNS.iter().map(|s| s.to_string()).collect())
}

/// `n × 4` NCT-EFA features, columns in [`NCT_EFA_COLUMNS`] order.
pub fn assemble_nct_efa(g: &Graph, standardize: bool, stats: Option<&DatasetMoments>) -> Result<FeatureMatrix> {
    let moments = match (standardize, stats) {
        (true, None) => return Err(Error::MissingMoments),
        (true, Some(m)) => Some(m),
        (false, _) => None,
    };
    Ok(assemble_from_metrics(&compute_node_metrics(g)?, moments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn hot_index(row: ndarray::ArrayView1<f64>) -> usize {
        assert_eq!(row.sum(), 1.0);
        assert_eq!(row.iter().filter(|&&x| x != 0.0).count(), 1);
        row.iter().position(|&x| x == 1.0).unwrap()
    }

    #[test]
    fn histogram_examples() {
        let h = build_histogram(&[0.1, 0.15, 0.9], 2).unwrap();
        assert_eq!(h.counts, [2, 1]);
        assert_abs_diff_eq!(h.edges[0], 0.1);
        assert_abs_diff_eq!(h.edges[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(h.edges[2], 0.9);

        let h = build_histogram(&[0.5, 0.5, 0.5], 4).unwrap();
        assert!(h.is_degenerate());
        assert_eq!(h.counts.iter().sum::<usize>(), 3);

        let h = build_histogram(&[0.0, 1.0, 2.0, 3.0], 4).unwrap();
        assert_eq!(h.counts, [1, 1, 1, 1]);

        assert!(matches!(build_histogram(&[], 3), Err(Error::EmptyHistogram)));
        assert!(matches!(build_histogram(&[1.0], 0), Err(Error::ZeroBins)));
    }

    #[test]
    fn hist_onehot_examples() {
        let k2 = encode_avgctrl_hist_onehot(&Graph::complete(2).unwrap(), 4).unwrap();
        assert_eq!(k2.values.dim(), (2, 4));
        assert_eq!(hot_index(k2.values.row(0)), 0);
        assert_eq!(hot_index(k2.values.row(1)), 0);

        let star = encode_avgctrl_hist_onehot(&Graph::star(4).unwrap(), 2).unwrap();
        assert_eq!(hot_index(star.values.row(0)), 1);
        for leaf in 1..4 {
            assert_eq!(hot_index(star.values.row(leaf)), 0);
        }
    }

    #[test]
    fn degree_onehot_examples() {
        let p3 = encode_degree_onehot(&Graph::path(3).unwrap(), 2, false).unwrap();
        let hot: Vec<_> = p3.values.rows().into_iter().map(hot_index).collect();
        assert_eq!(hot, [1, 2, 1]);

        let single = encode_degree_onehot(&Graph::empty(1).unwrap(), 2, false).unwrap();
        assert_eq!(hot_index(single.values.row(0)), 0);
        assert_eq!(single.values.ncols(), 3);

        let star = Graph::star(4).unwrap();
        assert!(matches!(encode_degree_onehot(&star, 2, false), Err(Error::DegreeAboveCap { node: 0, .. })));
        let clamped = encode_degree_onehot(&star, 2, true).unwrap();
        assert_eq!(hot_index(clamped.values.row(0)), 2);
    }

    #[test]
    fn nct_efa_examples() {
        let k2 = assemble_nct_efa(&Graph::complete(2).unwrap(), false, None).unwrap();
        for row in k2.values.rows() {
            for (got, want) in row.iter().zip([2.0 / 3.0, 1.0, 0.0, H]) {
                assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
            }
        }
        let p3 = assemble_nct_efa(&Graph::path(3).unwrap(), false, None).unwrap();
        let center = p3.values.row(1);
        assert_abs_diff_eq!(center[0], 0.7612038749637411, epsilon = 1e-10);
        assert_abs_diff_eq!(center[1], 1.0);
        assert_abs_diff_eq!(center[2], 1.0);
        assert_abs_diff_eq!(center[3], H, epsilon = 1e-6);

        assert!(matches!(assemble_nct_efa(&Graph::path(3).unwrap(), true, None), Err(Error::MissingMoments)));
    }

    #[test]
    fn moments_examples() {
        let k2 = Graph::complete(2).unwrap();
        let m = compute_dataset_moments([&k2]).unwrap();
        for (got, want) in m.mean.iter().zip([2.0 / 3.0, 1.0, 0.0, H]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
        }
        assert!(m.std.iter().all(|&s| s < 1e-12));

        let p3 = Graph::path(3).unwrap();
        let m = compute_dataset_moments([&k2, &p3]).unwrap();
        let ac_p3 = [0.6306019374818699, 0.7612038749637411, 0.6306019374818699];
        let want_ac = (2.0 * 2.0 / 3.0 + ac_p3.iter().sum::<f64>()) / 5.0;
        assert_abs_diff_eq!(m.mean[0], want_ac, epsilon = 1e-10);
        assert_abs_diff_eq!(m.mean[1], (2.0 + 2.0 / 3.0 + 1.0 + 2.0 / 3.0) / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean[2], 1.0 / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean[3], (2.0 * H + 0.5 + H + 0.5) / 5.0, epsilon = 1e-6);

        assert!(matches!(compute_dataset_moments(std::iter::empty()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn standardized_identical_graphs_are_zero() {
        let g = Graph::cycle(5).unwrap();
        let m = compute_dataset_moments([&g, &g, &g]).unwrap();
        let f = assemble_nct_efa(&g, true, Some(&m)).unwrap();
        assert!(f.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn standardized_columns_have_unit_moments() {
        let graphs = [Graph::star(6).unwrap(), Graph::path(5).unwrap(), Graph::cycle(7).unwrap()];
        let metrics: Vec<_> = graphs.iter().map(|g| compute_node_metrics(g).unwrap()).collect();
        let m = moments_from_metrics(&metrics).unwrap();
        let z: Vec<_> = metrics.iter().map(|x| assemble_from_metrics(x, Some(&m)).values).collect();
        for j in 0..4 {
            let col: Vec<f64> = z.iter().flat_map(|v| v.column(j).to_vec()).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
            assert!(mean.abs() <= 1e-9);
            assert!((sd - 1.0).abs() <= 1e-9 || sd == 0.0);
        }
    }

    fn values_and_k() -> impl Strategy<Value = (Vec<f64>, usize)> {
        let value = prop_oneof![-1e3..1e3f64, Just(0.0), Just(1.0), 0.5..0.5 + 1e-12];
        (proptest::collection::vec(value, 1..60), 1usize..40)
    }

    proptest! {
        #[test]
        fn bin_assignment_respects_edges((values, k) in values_and_k()) {
            let h = build_histogram(&values, k).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<usize>(), values.len());
            prop_assert!(h.edges.windows(2).all(|w| w[0] < w[1]) || h.is_degenerate());
            let enc = encode_values_hist_onehot(&values, k, None).unwrap();
            for (row, &x) in enc.values.rows().into_iter().zip(&values) {
                let i = hot_index(row);
                if !h.is_degenerate() {
                    prop_assert!(h.edges[i] <= x && x <= h.edges[i + 1]);
                } else {
                    prop_assert_eq!(i, 0);
                }
            }
        }
    }
}
