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

//! Independent reference implementations used to cross-check the fast paths.
//!
//! Nothing here shares code with the routines it checks: Lyapunov equations
//! are solved as a dense n²×n² linear system, spectral radii come from cyclic
//! Jacobi rotations, path statistics from Floyd–Warshall tables, AUC from an
//! exhaustive floating-point pair loop and gradients from central differences.

mod enumerate;

pub use enumerate::{canonical_code, graphs_up_to, non_isomorphic_graphs, random_connected_graph, MAX_ENUMERATION_NODES};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::centrality;
use crate::error::{Error, Result};
use crate::eval;
use crate::gnn::{backward, forward, loss_bce, GraphInput, ModelConfig, ModelKind, ModelState};
use crate::graph::{Graph, Label};
use crate::nct;

/// Solves `A W + W Aᵀ = −Q` through `(I ⊗ A + A ⊗ I) vec(W) = −vec(Q)`.
pub fn kronecker_lyapunov(a: &Array2<f64>, q: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.dim() != (n, n) {
        return Err(Error::DimensionMismatch(format!("Lyapunov operands {:?} and {:?}", a.dim(), q.dim())));
    }
    let m = n * n;
    // vec stacks columns: W[i, j] lives at j·n + i.
    let mut sys = Array2::<f64>::zeros((m, m + 1));
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                sys[[row, j * n + k]] += a[[i, k]];
                sys[[row, k * n + i]] += a[[j, k]];
            }
            sys[[row, m]] = -q[[i, j]];
        }
    }
    let x = gaussian_solve(sys)?;
    Ok(Array2::from_shape_fn((n, n), |(i, j)| x[j * n + i]))
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gaussian_solve(mut sys: Array2<f64>) -> Result<Vec<f64>> {
    let m = sys.nrows();
    for col in 0..m {
        let pivot = (col..m).max_by(|&a, &b| sys[[a, col]].abs().total_cmp(&sys[[b, col]].abs())).unwrap();
        if sys[[pivot, col]].abs() < 1e-300 {
            return Err(Error::NoConvergence { what: "Kronecker Lyapunov solve (singular system)", iterations: col });
        }
        if pivot != col {
            for c in 0..=m {
                sys.swap([pivot, c], [col, c]);
            }
        }
        for r in col + 1..m {
            let f = sys[[r, col]] / sys[[col, col]];
            if f != 0.0 {
                for c in col..=m {
                    sys[[r, c]] -= f * sys[[col, c]];
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let tail: f64 = (r + 1..m).map(|c| sys[[r, c]] * x[c]).sum();
        x[r] = (sys[[r, m]] - tail) / sys[[r, r]];
    }
    Ok(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[[i, j]].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Average controllability from scratch: Jacobi spectral radius, the
/// stabilized matrix, then the diagonal of the Kronecker Lyapunov solution.
pub fn reference_average_controllability(g: &Graph) -> Result<Vec<f64>> {
    let n = g.node_count();
    let a = g.adjacency_matrix();
    let lambda = jacobi_eigenvalues(&a).last().copied().unwrap_or(0.0).max(0.0);
    let stabilized = &a / (1.0 + lambda) - Array2::<f64>::eye(n);
    let w = kronecker_lyapunov(&stabilized, &Array2::eye(n))?;
    Ok(w.diag().to_vec())
}

/// All-pairs hop distances; `usize::MAX` for unreachable pairs.
pub fn floyd_warshall(g: &Graph) -> Array2<usize> {
    let n = g.node_count();
    let inf = usize::MAX;
    let mut d = Array2::from_elem((n, n), inf);
    for v in 0..n {
        d[[v, v]] = 0;
    }
    for &(u, v) in g.edges() {
        d[[u, v]] = 1;
        d[[v, u]] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[[i, k]] != inf && d[[k, j]] != inf && d[[i, k]] + d[[k, j]] < d[[i, j]] {
                    d[[i, j]] = d[[i, k]] + d[[k, j]];
                }
            }
        }
    }
    d
}

pub fn brute_force_closeness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let d = floyd_warshall(g);
    (0..n)
        .map(|v| {
            let reach: Vec<usize> = (0..n).filter(|&u| u != v && d[[v, u]] != usize::MAX).map(|u| d[[v, u]]).collect();
            if reach.is_empty() {
                return 0.0;
            }
            let r = reach.len() as f64;
            let total: usize = reach.iter().sum();
            r * r / ((n - 1) as f64 * total as f64)
        })
        .collect()
}

/// Shortest-path counts σ(s, t) from the distance table, by layering
/// targets in order of distance.
fn path_counts(g: &Graph, d: &Array2<usize>) -> Array2<f64> {
    let n = g.node_count();
    let mut sigma = Array2::zeros((n, n));
    for s in 0..n {
        let mut targets: Vec<usize> = (0..n).filter(|&t| d[[s, t]] != usize::MAX).collect();
        targets.sort_by_key(|&t| d[[s, t]]);
        for t in targets {
            sigma[[s, t]] = if t == s {
                1.0
            } else {
                g.neighbors(t).iter().filter(|&&w| d[[s, w]] != usize::MAX && d[[s, w]] + 1 == d[[s, t]]).map(|&w| sigma[[s, w]]).sum()
            };
        }
    }
    sigma
}

/// Betweenness summed pair by pair: `σ_st(v) = σ_sv·σ_vt` when `v` lies on a
/// shortest s–t path.
pub fn brute_force_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut out = vec![0.0; n];
    if n <= 2 {
        return out;
    }
    let d = floyd_warshall(g);
    let sigma = path_counts(g, &d);
    let inf = usize::MAX;
    for s in 0..n {
        for t in s + 1..n {
            if d[[s, t]] == inf {
                continue;
            }
            for (v, slot) in out.iter_mut().enumerate() {
                if v == s || v == t || d[[s, v]] == inf || d[[v, t]] == inf {
                    continue;
                }
                if d[[s, v]] + d[[v, t]] == d[[s, t]] {
                    *slot += sigma[[s, v]] * sigma[[v, t]] / sigma[[s, t]];
                }
            }
        }
    }
    let pairs = ((n - 1) * (n - 2)) as f64 / 2.0;
    out.iter_mut().for_each(|x| *x /= pairs);
    out
}

/// AUC by comparing every (positive, negative) pair in floating point.
/// NaN when a class is missing.
pub fn exhaustive_pair_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0usize;
    for (i, &li) in labels.iter().enumerate() {
        if li != Label::Positive {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != Label::Negative {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                credit += 1.0;
            } else if scores[i] == scores[j] {
                credit += 0.5;
            }
        }
    }
    if pairs == 0 {
        f64::NAN
    } else {
        credit / pairs as f64
    }
}

/// A tiny model, graph and label for gradient checking.
#[derive(Debug, Clone)]
pub struct GradientCheckInstance {
    pub model: ModelState,
    pub input: GraphInput,
    pub label: Label,
}

impl GradientCheckInstance {
    /// Up to 5 nodes, up to 3 input features, 4 hidden channels.
    pub fn random<R: Rng + ?Sized>(kind: ModelKind, rng: &mut R) -> Self {
        let n = rng.gen_range(1..=5);
        let input_dim = rng.gen_range(1..=3);
        let edges: Vec<(usize, usize)> =
            (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).filter(|_| rng.gen_bool(0.5)).collect();
        let g = Graph::new(n, edges).expect("random graph is valid");
        let config = ModelConfig { kind, input_dim, hidden: 4, head_hidden: 4, k_sort: rng.gen_range(1..=6), conv_layers: 3 };
        let mut model = ModelState::init(config, rng).expect("valid config");
        // Nonzero biases keep pre-activations away from exact zeros.
        for p in model.params_mut() {
            if p.nrows() == 1 {
                p.mapv_inplace(|_| rng.gen_range(-0.3..0.3));
            }
        }
        let features = Array2::from_shape_fn((n, input_dim), |_| rng.gen_range(-1.0..1.0));
        let input = GraphInput::new(kind, &g, features).expect("shapes agree");
        let label = if rng.gen_bool(0.5) { Label::Positive } else { Label::Negative };
        GradientCheckInstance { model, input, label }
    }
}

pub const FD_STEP: f64 = 1e-5;
/// Instances closer than this to a non-smooth point are skipped.
pub const FD_KINK_MARGIN: f64 = 1e-3;
/// Floor on the denominator of the relative error.
pub const FD_RELATIVE_FLOOR: f64 = 1e-6;

/// Largest relative error `|a − f| / max(|a|, |f|, floor)` between analytic
/// and central-difference gradients over every parameter, or `None` when the
/// instance sits too close to a ReLU kink or a sort-order swap.
pub fn finite_difference_check(inst: &GradientCheckInstance) -> Result<Option<f64>> {
    let cache = forward(&inst.input, &inst.model)?;
    if cache.kink_margin() < FD_KINK_MARGIN {
        return Ok(None);
    }
    let grads = backward(&inst.model, &inst.input, &cache, inst.label)?;
    let mut probe = inst.model.clone();
    let mut worst = 0.0_f64;
    for t in 0..probe.params().len() {
        for idx in 0..probe.params()[t].len() {
            let (r, c) = (idx / probe.params()[t].ncols(), idx % probe.params()[t].ncols());
            let orig = probe.params()[t][[r, c]];
            let loss_at = |value: f64, probe: &mut ModelState| -> Result<Option<f64>> {
                probe.params_mut()[t][[r, c]] = value;
                let out = forward(&inst.input, probe)?;
                Ok((out.order == cache.order).then(|| loss_bce(out.logit, inst.label)))
            };
            let plus = loss_at(orig + FD_STEP, &mut probe)?;
            let minus = loss_at(orig - FD_STEP, &mut probe)?;
            probe.params_mut()[t][[r, c]] = orig;
            let (Some(plus), Some(minus)) = (plus, minus) else {
                return Ok(None);
            };
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let analytic = grads.tensors[t][[r, c]];
            let denom = analytic.abs().max(numeric.abs()).max(FD_RELATIVE_FLOOR);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    Ok(Some(worst))
}

/// Functions under test; swapped out to confirm the oracles catch faults.
#[derive(Clone, Copy)]
pub struct Implementations {
    pub average_controllability: fn(&Graph) -> Result<Vec<f64>>,
    pub closeness: fn(&Graph) -> Vec<f64>,
    pub betweenness: fn(&Graph) -> Vec<f64>,
    pub eigenvector: fn(&Graph) -> Result<Vec<f64>>,
    pub auc: fn(&[f64], &[Label]) -> Result<f64>,
}

impl Default for Implementations {
    fn default() -> Self {
        Implementations {
            average_controllability: nct::average_controllability,
            closeness: centrality::closeness,
            betweenness: centrality::betweenness,
            eigenvector: centrality::eigenvector_centrality,
            auc: eval::roc_auc,
        }
    }
}

/// Deliberate bugs for exercising the oracle suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    BetweennessSign,
    ClosenessOffByOne,
    ControllabilityScale,
    AucTiesIgnored,
}

impl Fault {
    pub const ALL: [Fault; 4] = [Fault::BetweennessSign, Fault::ClosenessOffByOne, Fault::ControllabilityScale, Fault::AucTiesIgnored];

    pub fn as_str(self) -> &'static str {
        match self {
            Fault::BetweennessSign => "betweenness-sign",
            Fault::ClosenessOffByOne => "closeness-off-by-one",
            Fault::ControllabilityScale => "controllability-scale",
            Fault::AucTiesIgnored => "auc-ties-ignored",
        }
    }
}

impl std::str::FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Fault::ALL.into_iter().find(|f| f.as_str() == s).ok_or_else(|| Error::InvalidConfig(format!("unknown fault {s:?}")))
    }
}

fn faulty_betweenness(g: &Graph) -> Vec<f64> {
    centrality::betweenness(g).into_iter().map(|x| -x).collect()
}

fn faulty_closeness(g: &Graph) -> Vec<f64> {
    let n = g.node_count() as f64;
    centrality::closeness(g).into_iter().map(|x| x * (n - 1.0) / n).collect()
}

fn faulty_controllability(g: &Graph) -> Result<Vec<f64>> {
    Ok(nct::average_controllability(g)?.into_iter().map(|x| 2.0 * x).collect())
}

fn faulty_auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (s, l) in scores.iter().zip(labels) {
        for (t, m) in scores.iter().zip(labels) {
            if *l == Label::Positive && *m == Label::Negative {
                pairs += 1.0;
                if s > t {
                    wins += 1.0;
                }
            }
        }
    }
    if pairs == 0.0 {
        return Err(Error::SingleClass);
    }
    Ok(wins / pairs)
}

impl Implementations {
    pub fn with_fault(fault: Fault) -> Self {
        let mut imp = Implementations::default();
        match fault {
            Fault::BetweennessSign => imp.betweenness = faulty_betweenness,
            Fault::ClosenessOffByOne => imp.closeness = faulty_closeness,
            Fault::ControllabilityScale => imp.average_controllability = faulty_controllability,
            Fault::AucTiesIgnored => imp.auc = faulty_auc,
        }
        imp
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Exhaustive enumeration covers every graph up to this size.
    pub max_nodes: usize,
    pub random_graphs: usize,
    pub random_nodes: usize,
    pub auc_trials: usize,
    pub gradient_instances: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { max_nodes: 7, random_graphs: 200, random_nodes: 8, auc_trials: 1000, gradient_instances: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
    pub passed: bool,
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    cases: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Tally { name, tolerance, cases: 0, worst: 0.0 }
    }

    fn record(&mut self, deviation: f64) {
        self.cases += 1;
        // NaN counts as a failure
        self.worst = if deviation.is_nan() { f64::INFINITY } else { self.worst.max(deviation) };
    }

    fn finish(self) -> OracleCheck {
        OracleCheck { name: self.name.to_string(), cases: self.cases, max_deviation: self.worst, tolerance: self.tolerance, passed: self.worst <= self.tolerance }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs every cross-check and reports the worst deviation of each.
pub fn run_oracle_suite(imp: &Implementations, opts: &OracleOptions) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let enumerated = graphs_up_to(opts.max_nodes);
    let random: Vec<Graph> =
        (0..opts.random_graphs).map(|_| random_connected_graph(opts.random_nodes, 0.3, &mut rng)).collect();

    let mut ac = Tally::new("average-controllability-vs-kronecker", nct::LYAPUNOV_TOLERANCE);
    let mut close = Tally::new("closeness-vs-floyd-warshall", 1e-9);
    let mut betw = Tally::new("betweenness-vs-path-counting", 1e-9);
    let mut eig = Tally::new("eigenvector-residual", 1e-6);
    for g in enumerated.iter().chain(&random) {
        let got = (imp.average_controllability)(g)?;
        ac.record(max_abs_diff(&got, &reference_average_controllability(g)?));
        close.record(max_abs_diff(&(imp.closeness)(g), &brute_force_closeness(g)));
        betw.record(max_abs_diff(&(imp.betweenness)(g), &brute_force_betweenness(g)));
        if g.is_connected() && g.edge_count() > 0 {
            let v = ndarray::Array1::from((imp.eigenvector)(g)?);
            let a = g.adjacency_matrix();
            let av = a.dot(&v);
            let rayleigh = v.dot(&av);
            let residual = (&av - &(rayleigh * &v)).mapv(|x| x * x).sum().sqrt();
            let lambda = jacobi_eigenvalues(&a).last().copied().unwrap_or(0.0);
            eig.record(residual.max((rayleigh - lambda).abs()));
        }
    }

    let mut auc = Tally::new("auc-vs-exhaustive-pairs", 1e-12);
    let mut auc_rank = Tally::new("auc-rank-sum-vs-exhaustive-pairs", 1e-12);
    for _ in 0..opts.auc_trials {
        let len = rng.gen_range(2..=60);
        let levels = rng.gen_range(1..=8);
        let scores: Vec<f64> = (0..len).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let mut labels: Vec<Label> = (0..len).map(|_| if rng.gen_bool(0.5) { Label::Positive } else { Label::Negative }).collect();
        labels[0] = Label::Positive;
        labels[1] = Label::Negative;
        let want = exhaustive_pair_auc(&scores, &labels);
        auc.record(((imp.auc)(&scores, &labels)? - want).abs());
        auc_rank.record((eval::roc_auc_rank_sum(&scores, &labels)? - want).abs());
    }

    let mut checks = vec![ac.finish(), close.finish(), betw.finish(), eig.finish(), auc.finish(), auc_rank.finish()];
    for (kind, name) in [(ModelKind::Gcn, "gcn-gradient-vs-finite-differences"), (ModelKind::Sage, "sage-gradient-vs-finite-differences")] {
        let mut tally = Tally::new(name, 1e-4);
        let mut attempts = 0;
        while tally.cases < opts.gradient_instances {
            attempts += 1;
            if attempts > 100 * opts.gradient_instances.max(1) {
                return Err(Error::SamplingBudget { attempts });
            }
            if let Some(err) = finite_difference_check(&GradientCheckInstance::random(kind, &mut rng))? {
                tally.record(err);
            }
        }
        checks.push(tally.finish());
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(OracleReport { checks, passed })
}
