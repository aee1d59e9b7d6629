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

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Label};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Sage,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Sage => "sage",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(ModelKind::Gcn),
            "sage" => Ok(ModelKind::Sage),
            other => Err(Error::InvalidConfig(format!("unknown model {other:?}"))),
        }
    }
}

/// Shapes of a reference model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub head_hidden: usize,
    pub k_sort: usize,
    pub conv_layers: usize,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, input_dim: usize) -> Self {
        ModelConfig { kind, input_dim, hidden: 64, head_hidden: 32, k_sort: 30, conv_layers: 3 }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.head_hidden == 0 || self.k_sort == 0 || self.conv_layers == 0 {
            return Err(Error::InvalidConfig(format!("all model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    fn per_layer(&self) -> usize {
        match self.kind {
            ModelKind::Gcn => 2,
            ModelKind::Sage => 3,
        }
    }

    fn conv_weight(&self, layer: usize) -> usize {
        layer * self.per_layer()
    }

    fn conv_neighbor_weight(&self, layer: usize) -> usize {
        debug_assert_eq!(self.kind, ModelKind::Sage);
        layer * self.per_layer() + 1
    }

    fn conv_bias(&self, layer: usize) -> usize {
        layer * self.per_layer() + self.per_layer() - 1
    }

    fn dense(&self, i: usize) -> usize {
        self.conv_layers * self.per_layer() + 2 * i
    }

    fn dense_bias(&self, i: usize) -> usize {
        self.dense(i) + 1
    }

    /// `(name, rows, cols)` of every parameter tensor, biases as `1 × m`.
    fn layout(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        for l in 0..self.conv_layers {
            let fan_in = if l == 0 { self.input_dim } else { self.hidden };
            match self.kind {
                ModelKind::Gcn => out.push((format!("conv{l}.weight"), fan_in, self.hidden)),
                ModelKind::Sage => {
                    out.push((format!("conv{l}.self_weight"), fan_in, self.hidden));
                    out.push((format!("conv{l}.neighbor_weight"), fan_in, self.hidden));
                }
            }
            out.push((format!("conv{l}.bias"), 1, self.hidden));
        }
        let dims = [(self.k_sort * self.hidden, self.head_hidden), (self.head_hidden, self.head_hidden), (self.head_hidden, 1)];
        for (i, (rows, cols)) in dims.into_iter().enumerate() {
            out.push((format!("dense{i}.weight"), rows, cols));
            out.push((format!("dense{i}.bias"), 1, cols));
        }
        out
    }
}

/// Sparse `n × n` propagation operator, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Propagation {
    /// `D̂^{-1/2} (A + I) D̂^{-1/2}` with `D̂` the degree matrix of `A + I`.
    pub fn gcn(g: &Graph) -> Self {
        let inv_sqrt: Vec<f64> = (0..g.node_count()).map(|v| 1.0 / ((g.degree(v) + 1) as f64).sqrt()).collect();
        let rows = (0..g.node_count())
            .map(|v| {
                let mut row: Vec<(usize, f64)> =
                    g.neighbors(v).iter().map(|&w| (w, inv_sqrt[v] * inv_sqrt[w])).collect();
                row.push((v, inv_sqrt[v] * inv_sqrt[v]));
                row.sort_by_key(|&(w, _)| w);
                row
            })
            .collect();
        Propagation { rows }
    }

    /// Row-normalized adjacency; isolated nodes get an all-zero row.
    pub fn mean_neighbors(g: &Graph) -> Self {
        let rows = (0..g.node_count())
            .map(|v| {
                let nbrs = g.neighbors(v);
                let w = 1.0 / nbrs.len().max(1) as f64;
                nbrs.iter().map(|&u| (u, w)).collect()
            })
            .collect();
        Propagation { rows }
    }

    pub fn for_kind(kind: ModelKind, g: &Graph) -> Self {
        match kind {
            ModelKind::Gcn => Self::gcn(g),
            ModelKind::Sage => Self::mean_neighbors(g),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows.len(), x.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            let mut target = out.row_mut(i);
            for &(j, w) in row {
                target.scaled_add(w, &x.row(j));
            }
        }
        out
    }

    pub fn apply_transpose(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows.len(), x.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            let source = x.row(i);
            for &(j, w) in row {
                out.row_mut(j).scaled_add(w, &source);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.rows.len();
        let mut m = Array2::zeros((n, n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m[[i, j]] += w;
            }
        }
        m
    }
}

/// Dense GCN renormalized adjacency.
pub fn normalize_adjacency(g: &Graph) -> Array2<f64> {
    Propagation::gcn(g).to_dense()
}

/// A graph prepared for one model kind: propagation operator and features.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub propagation: Propagation,
    pub features: Array2<f64>,
}

impl GraphInput {
    pub fn new(kind: ModelKind, g: &Graph, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != g.node_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for a graph with {} nodes",
                features.nrows(),
                g.node_count()
            )));
        }
        Ok(GraphInput { propagation: Propagation::for_kind(kind, g), features })
    }

    pub fn node_count(&self) -> usize {
        self.features.nrows()
    }
}

/// Trainable parameters and Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    names: Vec<String>,
    params: Vec<Array2<f64>>,
    first_moment: Vec<Array2<f64>>,
    second_moment: Vec<Array2<f64>>,
    pub step_count: u64,
}

impl ModelState {
    /// All-zero parameters.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        let params: Vec<Array2<f64>> = layout.iter().map(|(_, r, c)| Array2::zeros((*r, *c))).collect();
        Ok(ModelState {
            config,
            names: layout.into_iter().map(|(name, _, _)| name).collect(),
            first_moment: params.clone(),
            second_moment: params.clone(),
            params,
            step_count: 0,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        for (name, p) in model.names.iter().zip(&mut model.params) {
            if name.ends_with("bias") {
                continue;
            }
            let (fan_in, fan_out) = p.dim();
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            p.mapv_inplace(|_| rng.gen_range(-bound..bound));
        }
        Ok(model)
    }

    pub fn params(&self) -> &[Array2<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Array2::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|x| x.is_finite()))
    }

    /// Index of the final dense bias, the scalar added to every logit.
    pub fn output_bias_index(&self) -> usize {
        self.config.dense_bias(2)
    }
}

/// Gradients, one tensor per model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Array2<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &ModelState) -> Self {
        Gradients { tensors: model.params.iter().map(|p| Array2::zeros(p.raw_dim())).collect() }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            *t *= factor;
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    aggregated: Array2<f64>,
    pre: Array2<f64>,
}

/// Activations recorded by [`forward`] for the matching [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    step: u64,
    config: ModelConfig,
    layers: Vec<LayerCache>,
    /// Node rows kept by sort pooling, best first.
    pub order: Vec<usize>,
    /// Last-channel value of every node, the sort-pool key.
    pub sort_keys: Vec<f64>,
    pooled: Array1<f64>,
    head_pre: Vec<Array1<f64>>,
    head_post: Vec<Array1<f64>>,
    pub logit: f64,
}

impl ForwardCache {
    /// Distance to the nearest non-smooth point: the smallest |pre-activation|
    /// of any ReLU, or the smallest gap between two positive sort keys.
    pub fn kink_margin(&self) -> f64 {
        let relu_inputs = self.layers.iter().flat_map(|l| l.pre.iter()).chain(self.head_pre.iter().flat_map(|a| a.iter()));
        let mut margin = relu_inputs.fold(f64::INFINITY, |m, &x| m.min(x.abs()));
        let mut keys: Vec<f64> = self.sort_keys.iter().copied().filter(|&k| k > 0.0).collect();
        keys.sort_by(f64::total_cmp);
        for w in keys.windows(2) {
            margin = margin.min(w[1] - w[0]);
        }
        margin
    }
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

fn add_bias(z: &mut Array2<f64>, bias: &Array2<f64>) {
    *z += &bias.row(0);
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a logit: `max(z, 0) − z·y + log(1 + e^{−|z|})`.
pub fn loss_bce(logit: f64, label: Label) -> f64 {
    logit.max(0.0) - logit * label.as_f64() + (-logit.abs()).exp().ln_1p()
}

/// Convolutions, sort pooling on the last channel, then the dense head.
pub fn forward(input: &GraphInput, model: &ModelState) -> Result<ForwardCache> {
    let cfg = model.config;
    let n = input.node_count();
    if input.features.ncols() != cfg.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} input features, got {}",
            cfg.input_dim,
            input.features.ncols()
        )));
    }
    if input.propagation.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "propagation is {0}x{0} but features have {n} rows",
            input.propagation.dim()
        )));
    }
    let p = &model.params;
    let mut layers = Vec::with_capacity(cfg.conv_layers);
    let mut h = input.features.clone();
    for l in 0..cfg.conv_layers {
        let aggregated = input.propagation.apply(&h);
        let mut pre = match cfg.kind {
            ModelKind::Gcn => aggregated.dot(&p[cfg.conv_weight(l)]),
            ModelKind::Sage => h.dot(&p[cfg.conv_weight(l)]) + aggregated.dot(&p[cfg.conv_neighbor_weight(l)]),
        };
        add_bias(&mut pre, &p[cfg.conv_bias(l)]);
        let next = relu(&pre);
        layers.push(LayerCache { input: h, aggregated, pre });
        h = next;
    }

    let key = cfg.hidden - 1;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h[[b, key]].total_cmp(&h[[a, key]]).then(a.cmp(&b)));
    order.truncate(cfg.k_sort);
    let width = order.len() * cfg.hidden;
    let mut pooled = Array1::zeros(width);
    for (r, &v) in order.iter().enumerate() {
        pooled.slice_mut(s![r * cfg.hidden..(r + 1) * cfg.hidden]).assign(&h.row(v));
    }

    // Zero-padded rows of the flattened readout contribute nothing, so only
    // the leading `width` rows of the first dense weight take part.
    let mut head_pre = Vec::with_capacity(3);
    let mut head_post = Vec::with_capacity(2);
    let mut a = pooled.dot(&p[cfg.dense(0)].slice(s![..width, ..])) + p[cfg.dense_bias(0)].row(0);
    for i in 1..3 {
        let post = a.mapv(|v| v.max(0.0));
        head_pre.push(a);
        a = post.dot(&p[cfg.dense(i)]) + p[cfg.dense_bias(i)].row(0);
        head_post.push(post);
    }
    let logit = a[0];
    let sort_keys = h.column(key).to_vec();

    Ok(ForwardCache { step: model.step_count, config: cfg, layers, order, sort_keys, pooled, head_pre, head_post, logit })
}

/// Gradient of the BCE loss for one graph.
pub fn backward(model: &ModelState, input: &GraphInput, cache: &ForwardCache, label: Label) -> Result<Gradients> {
    let mut grads = Gradients::zeros_like(model);
    backward_accumulate(model, input, cache, label, 1.0, &mut grads)?;
    Ok(grads)
}

fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let col = a.insert_axis(Axis(1));
    let row = b.insert_axis(Axis(0));
    col.dot(&row)
}

/// Adds `scale ×` the gradient of the BCE loss for one graph into `grads`.
pub fn backward_accumulate(
    model: &ModelState,
    input: &GraphInput,
    cache: &ForwardCache,
    label: Label,
    scale: f64,
    grads: &mut Gradients,
) -> Result<()> {
    if cache.step != model.step_count || cache.config != model.config {
        return Err(Error::StaleCache { cache_step: cache.step, model_step: model.step_count });
    }
    let cfg = model.config;
    let p = &model.params;
    let g = &mut grads.tensors;

    // Head, back to front.
    let mut delta = Array1::from_elem(1, scale * (sigmoid(cache.logit) - label.as_f64()));
    for i in (1..3).rev() {
        let post = &cache.head_post[i - 1];
        g[cfg.dense(i)] += &outer(post.view(), delta.view());
        g[cfg.dense_bias(i)].row_mut(0).scaled_add(1.0, &delta);
        let upstream = p[cfg.dense(i)].dot(&delta);
        delta = upstream * cache.head_pre[i - 1].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    }
    let width = cache.pooled.len();
    {
        let mut gw = g[cfg.dense(0)].slice_mut(s![..width, ..]);
        gw += &outer(cache.pooled.view(), delta.view());
    }
    g[cfg.dense_bias(0)].row_mut(0).scaled_add(1.0, &delta);
    let d_pooled = p[cfg.dense(0)].slice(s![..width, ..]).dot(&delta);

    // Route the pooled gradient back through the sort permutation.
    let n = input.node_count();
    let mut d_h = Array2::zeros((n, cfg.hidden));
    for (r, &v) in cache.order.iter().enumerate() {
        d_h.row_mut(v).assign(&d_pooled.slice(s![r * cfg.hidden..(r + 1) * cfg.hidden]));
    }

    for l in (0..cfg.conv_layers).rev() {
        let layer = &cache.layers[l];
        let d_pre = d_h * layer.pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        g[cfg.conv_bias(l)].row_mut(0).scaled_add(1.0, &d_pre.sum_axis(Axis(0)));
        match cfg.kind {
            ModelKind::Gcn => {
                g[cfg.conv_weight(l)] += &layer.aggregated.t().dot(&d_pre);
                if l == 0 {
                    break;
                }
                let d_agg = d_pre.dot(&p[cfg.conv_weight(l)].t());
                d_h = input.propagation.apply_transpose(&d_agg);
            }
            ModelKind::Sage => {
                g[cfg.conv_weight(l)] += &layer.input.t().dot(&d_pre);
                g[cfg.conv_neighbor_weight(l)] += &layer.aggregated.t().dot(&d_pre);
                if l == 0 {
                    break;
                }
                let d_agg = d_pre.dot(&p[cfg.conv_neighbor_weight(l)].t());
                d_h = d_pre.dot(&p[cfg.conv_weight(l)].t()) + input.propagation.apply_transpose(&d_agg);
            }
        }
    }
    Ok(())
}

/// Learning rate and decoupled weight decay for [`adam_step`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
}

/// One Adam update with decoupled weight decay (`θ ← θ − lr·wd·θ` first).
pub fn adam_step(model: &mut ModelState, grads: &Gradients, optim: &OptimConfig) -> Result<()> {
    if grads.tensors.len() != model.params.len()
        || grads.tensors.iter().zip(&model.params).any(|(g, p)| g.dim() != p.dim())
    {
        return Err(Error::DimensionMismatch("gradient shapes do not match the model".into()));
    }
    if let Some(i) = grads.tensors.iter().position(|g| g.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFiniteGradient { param: model.names[i].clone(), step: model.step_count });
    }
    model.step_count += 1;
    let t = model.step_count as i32;
    let correction1 = 1.0 - ADAM_BETA1.powi(t);
    let correction2 = 1.0 - ADAM_BETA2.powi(t);
    let decay = 1.0 - optim.learning_rate * optim.weight_decay;
    let lr = optim.learning_rate;
    for (((theta, m), v), g) in model
        .params
        .iter_mut()
        .zip(&mut model.first_moment)
        .zip(&mut model.second_moment)
        .zip(&grads.tensors)
    {
        ndarray::Zip::from(theta).and(m).and(v).and(g).for_each(|theta, m, v, &g| {
            *theta *= decay;
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *theta -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        });
    }
    if let Some(i) = model.params.iter().position(|p| p.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFiniteGradient { param: model.names[i].clone(), step: model.step_count });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{finite_difference_check, GradientCheckInstance};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(kind: ModelKind, input_dim: usize) -> ModelConfig {
        ModelConfig { kind, input_dim, hidden: 4, head_hidden: 5, k_sort: 3, conv_layers: 3 }
    }

    #[test]
    fn normalized_adjacency_examples() {
        let k2 = normalize_adjacency(&Graph::complete(2).unwrap());
        assert!(k2.iter().all(|&x| (x - 0.5).abs() < 1e-15));
        assert_eq!(normalize_adjacency(&Graph::empty(1).unwrap())[[0, 0]], 1.0);
        let p3 = normalize_adjacency(&Graph::path(3).unwrap());
        assert_abs_diff_eq!(p3[[0, 1]], 1.0 / 6.0_f64.sqrt(), epsilon = 1e-15);
        assert_eq!(p3, p3.t());
        let radius = crate::spectra::sym_eigendecompose(&p3).unwrap().eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(radius <= 1.0 + 1e-9);
    }

    #[test]
    fn sage_mean_of_empty_neighborhood_is_zero() {
        let g = Graph::new(3, [(0, 1)]).unwrap();
        let prop = Propagation::mean_neighbors(&g);
        let x = Array2::from_shape_vec((3, 1), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(prop.apply(&x).column(0).to_vec(), [2.0, 1.0, 0.0]);
        assert_eq!(prop.apply_transpose(&x).to_owned(), prop.to_dense().t().dot(&x));
    }

    #[test]
    fn zero_model_gives_zero_logit() {
        let g = Graph::star(6).unwrap();
        let model = ModelState::zeros(ModelConfig::new(ModelKind::Gcn, 3)).unwrap();
        let input = GraphInput::new(ModelKind::Gcn, &g, Array2::from_elem((6, 3), 0.7)).unwrap();
        assert_eq!(forward(&input, &model).unwrap().logit, 0.0);
    }

    #[test]
    fn output_bias_passes_through() {
        let g = Graph::empty(1).unwrap();
        let mut model = ModelState::zeros(ModelConfig::new(ModelKind::Gcn, 1)).unwrap();
        model.params_mut()[0].fill(1.0);
        let idx = model.output_bias_index();
        model.params_mut()[idx][[0, 0]] = 1.25;
        let input = GraphInput::new(ModelKind::Gcn, &g, Array2::ones((1, 1))).unwrap();
        assert_eq!(forward(&input, &model).unwrap().logit, 1.25);
    }

    #[test]
    fn dimension_mismatch() {
        let g = Graph::path(3).unwrap();
        let model = ModelState::zeros(ModelConfig::new(ModelKind::Sage, 2)).unwrap();
        let input = GraphInput::new(ModelKind::Sage, &g, Array2::zeros((3, 5))).unwrap();
        assert!(matches!(forward(&input, &model), Err(Error::DimensionMismatch(_))));
        assert!(GraphInput::new(ModelKind::Sage, &g, Array2::zeros((4, 2))).is_err());
    }

    #[test]
    fn bce_values() {
        assert_abs_diff_eq!(loss_bce(0.0, Label::Positive), std::f64::consts::LN_2, epsilon = 1e-15);
        assert!(loss_bce(20.0, Label::Positive) <= 2.1e-9);
        assert_abs_diff_eq!(loss_bce(-20.0, Label::Positive), 20.0, epsilon = 1e-8);
        assert_abs_diff_eq!(loss_bce(-20.0, Label::Negative), loss_bce(20.0, Label::Positive), epsilon = 1e-20);
        assert!(loss_bce(-800.0, Label::Positive).is_finite());
    }

    #[test]
    fn zero_model_output_bias_gradient() {
        let g = Graph::cycle(5).unwrap();
        let model = ModelState::zeros(ModelConfig::new(ModelKind::Sage, 2)).unwrap();
        let input = GraphInput::new(ModelKind::Sage, &g, Array2::from_elem((5, 2), 0.3)).unwrap();
        let cache = forward(&input, &model).unwrap();
        let grads = backward(&model, &input, &cache, Label::Positive).unwrap();
        assert_eq!(grads.tensors[model.output_bias_index()][[0, 0]], -0.5);
    }

    #[test]
    fn gradient_is_linear_in_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Graph::path(4).unwrap();
        let model = ModelState::init(small(ModelKind::Gcn, 2), &mut rng).unwrap();
        let x = Array2::from_shape_fn((4, 2), |(i, j)| (i + 2 * j) as f64 * 0.3 - 0.4);
        let input = GraphInput::new(ModelKind::Gcn, &g, x).unwrap();
        let cache = forward(&input, &model).unwrap();
        let once = backward(&model, &input, &cache, Label::Negative).unwrap();
        let mut twice = Gradients::zeros_like(&model);
        backward_accumulate(&model, &input, &cache, Label::Negative, 1.0, &mut twice).unwrap();
        backward_accumulate(&model, &input, &cache, Label::Negative, 1.0, &mut twice).unwrap();
        let mut doubled = once.clone();
        doubled.scale(2.0);
        assert_eq!(twice, doubled);
    }

    #[test]
    fn stale_cache_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Graph::path(3).unwrap();
        let mut model = ModelState::init(small(ModelKind::Gcn, 1), &mut rng).unwrap();
        let input = GraphInput::new(ModelKind::Gcn, &g, Array2::ones((3, 1))).unwrap();
        let cache = forward(&input, &model).unwrap();
        let grads = backward(&model, &input, &cache, Label::Positive).unwrap();
        adam_step(&mut model, &grads, &OptimConfig { learning_rate: 1e-3, weight_decay: 0.0 }).unwrap();
        assert!(matches!(backward(&model, &input, &cache, Label::Positive), Err(Error::StaleCache { .. })));
    }

    #[test]
    fn padding_rows_get_no_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = ModelConfig { k_sort: 6, ..small(ModelKind::Sage, 2) };
        let model = ModelState::init(cfg, &mut rng).unwrap();
        let g = Graph::path(3).unwrap();
        let input = GraphInput::new(ModelKind::Sage, &g, Array2::from_elem((3, 2), 0.5)).unwrap();
        let cache = forward(&input, &model).unwrap();
        let grads = backward(&model, &input, &cache, Label::Positive).unwrap();
        let dense0 = &grads.tensors[cfg.dense(0)];
        assert!(dense0.slice(s![3 * cfg.hidden.., ..]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn adam_examples() {
        let optim = OptimConfig { learning_rate: 1e-4, weight_decay: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = ModelState::init(small(ModelKind::Gcn, 2), &mut rng).unwrap();
        let before = model.clone();
        let zero = Gradients::zeros_like(&model);
        adam_step(&mut model, &zero, &optim).unwrap();
        assert_eq!(model.params(), before.params());
        assert_eq!(model.step_count, 1);

        // First step moves each coordinate by ≈ lr against the gradient sign.
        let mut model = before.clone();
        let mut grads = Gradients::zeros_like(&model);
        grads.tensors[0][[0, 0]] = 0.37;
        grads.tensors[0][[0, 1]] = -2.0;
        adam_step(&mut model, &grads, &optim).unwrap();
        assert_abs_diff_eq!(before.params()[0][[0, 0]] - model.params()[0][[0, 0]], 1e-4, epsilon = 1e-10);
        assert_abs_diff_eq!(before.params()[0][[0, 1]] - model.params()[0][[0, 1]], -1e-4, epsilon = 1e-10);

        let decayed = OptimConfig { learning_rate: 1e-2, weight_decay: 0.5 };
        let mut model = before.clone();
        adam_step(&mut model, &zero, &decayed).unwrap();
        adam_step(&mut model, &zero, &decayed).unwrap();
        for (a, b) in model.params().iter().zip(before.params()) {
            for (x, y) in a.iter().zip(b) {
                assert_abs_diff_eq!(*x, y * (1.0 - 5e-3) * (1.0 - 5e-3), epsilon = 1e-15);
            }
        }

        let mut bad = Gradients::zeros_like(&model);
        bad.tensors[1][[0, 0]] = f64::NAN;
        let err = adam_step(&mut model, &bad, &optim).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref param, .. } if param == "conv0.bias"));
    }

    #[test]
    fn permutation_invariant_with_distinct_keys() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut compared = 0;
        for trial in 0..40 {
            let kind = if trial % 2 == 0 { ModelKind::Gcn } else { ModelKind::Sage };
            let cfg = ModelConfig { k_sort: 4, ..small(kind, 3) };
            let model = ModelState::init(cfg, &mut rng).unwrap();
            let g = Graph::new(6, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 5), (0, 3)]).unwrap();
            let x = Array2::from_shape_fn((6, 3), |_| rng.gen_range(-1.0..1.0));
            let perm = [3, 0, 5, 1, 4, 2];
            let mut px = Array2::zeros((6, 3));
            for (i, &p) in perm.iter().enumerate() {
                px.row_mut(p).assign(&x.row(i));
            }
            let a = forward(&GraphInput::new(kind, &g, x).unwrap(), &model).unwrap();
            let b = forward(&GraphInput::new(kind, &g.permuted(&perm), px).unwrap(), &model).unwrap();
            let mut keys = a.sort_keys.clone();
            keys.sort_by(f64::total_cmp);
            if keys.windows(2).all(|w| w[0] != w[1]) {
                assert_abs_diff_eq!(a.logit, b.logit, epsilon = 1e-12);
                compared += 1;
            }
        }
        assert!(compared >= 5, "only {compared} trials had distinct sort keys");
    }

    #[test]
    fn finite_differences_small_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for kind in [ModelKind::Gcn, ModelKind::Sage] {
            let mut checked = 0;
            while checked < 4 {
                let inst = GradientCheckInstance::random(kind, &mut rng);
                if let Some(err) = finite_difference_check(&inst).unwrap() {
                    assert!(err <= 1e-4, "{kind:?}: relative error {err}");
                    checked += 1;
                }
            }
        }
    }
}
