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

//! Network control theory metrics for the linear system `ẋ = A_s x + B u`.
//!
//! A raw adjacency matrix is never Hurwitz, so it is first mapped to
//! `A_s = A / (1 + λ_max) − I`, whose spectrum lies in
//! `[−2, −1/(1 + λ_max)]`. With `B = I` the infinite-horizon controllability
//! Gramian solves `A_s W + W A_sᵀ + I = 0`. `A_s` is symmetric, so with
//! `A_s = V diag(μ) Vᵀ` the solution is `W = V diag(1 / (−2μ)) Vᵀ`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectra::{spectral_radius_symmetric, sym_eigendecompose, SymmetricEigen};

/// Tag recorded in every output that carries controllability values.
pub const STABILIZATION_CONVENTION: &str = "continuous-gu-normalization";

pub const LYAPUNOV_TOLERANCE: f64 = 1e-8;

/// Hurwitz-stable system matrix derived from a graph.
#[derive(Debug, Clone)]
pub struct StabilizedSystem {
    /// `A / (1 + λ_max) − I`.
    pub matrix: Array2<f64>,
    /// Spectral radius of the raw adjacency.
    pub lambda_max: f64,
}

impl StabilizedSystem {
    pub fn convention(&self) -> &'static str {
        STABILIZATION_CONVENTION
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn stabilize(g: &Graph) -> Result<StabilizedSystem> {
    let adjacency = g.adjacency_matrix();
    let lambda_max = spectral_radius_symmetric(&adjacency)?.lambda_max;
    let mut matrix = adjacency / (1.0 + lambda_max);
    matrix.diag_mut().mapv_inplace(|x| x - 1.0);
    Ok(StabilizedSystem { matrix, lambda_max })
}

#[derive(Debug, Clone)]
pub struct GramianResult {
    pub gramian: Array2<f64>,
    pub lyapunov_residual: f64,
}

fn stable_eigen(s: &StabilizedSystem) -> Result<SymmetricEigen> {
    let eig = sym_eigendecompose(&s.matrix)?;
    if let Some(&top) = eig.eigenvalues.last() {
        if !(top < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "stabilized system is not Hurwitz (largest eigenvalue {top})"
            )));
        }
    }
    Ok(eig)
}

fn symmetrize(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }
}

/// Gramian for the full identity control set.
pub fn controllability_gramian(s: &StabilizedSystem) -> Result<GramianResult> {
    let eig = stable_eigen(s)?;
    let mut gramian = eig.spectral_map(|mu| 1.0 / (-2.0 * mu));
    symmetrize(&mut gramian);
    let lyapunov_residual = verify_lyapunov(s, &gramian);
    if !(lyapunov_residual <= LYAPUNOV_TOLERANCE) {
        return Err(Error::LyapunovResidual { residual: lyapunov_residual, tolerance: LYAPUNOV_TOLERANCE });
    }
    Ok(GramianResult { gramian, lyapunov_residual })
}

/// Gramian for the single-input control set `B = e_node`.
///
/// In the eigenbasis the right-hand side is `q qᵀ` with `q = Vᵀ e_node`, and
/// each entry solves independently: `W̃_jk = q_j q_k / −(μ_j + μ_k)`.
pub fn single_input_gramian(s: &StabilizedSystem, node: usize) -> Result<Array2<f64>> {
    let n = s.dim();
    if node >= n {
        return Err(Error::DimensionMismatch(format!("node {node} out of range for {n} nodes")));
    }
    let eig = stable_eigen(s)?;
    let v = &eig.eigenvectors;
    let q = v.row(node);
    let mu = &eig.eigenvalues;
    let inner = Array2::from_shape_fn((n, n), |(j, k)| q[j] * q[k] / -(mu[j] + mu[k]));
    let mut w = v.dot(&inner).dot(&v.t());
    symmetrize(&mut w);
    Ok(w)
}

/// `‖A_s W + W A_sᵀ + I‖_F / ‖I‖_F`.
///
/// # Panics
/// If `w` is not the same shape as the system matrix.
pub fn verify_lyapunov(s: &StabilizedSystem, w: &Array2<f64>) -> f64 {
    let n = s.dim();
    assert_eq!(w.dim(), (n, n), "Gramian shape must match the system");
    let aw = s.matrix.dot(w);
    let mut r = &aw + &w.dot(&s.matrix.t());
    r.diag_mut().mapv_inplace(|x| x + 1.0);
    let num = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / (n as f64).sqrt()
}

/// Per-node average controllability with the metadata the feature file keeps.
#[derive(Debug, Clone)]
pub struct AverageControllability {
    pub values: Array1<f64>,
    pub lambda_max: f64,
    pub lyapunov_residual: f64,
}

/// Average controllability of every node: the Gramian diagonal `W_ii`, which
/// equals the trace of the single-input Gramian for `B = e_i`.
pub fn average_controllability(g: &Graph) -> Result<Vec<f64>> {
    Ok(average_controllability_detailed(g)?.values.to_vec())
}

pub fn average_controllability_detailed(g: &Graph) -> Result<AverageControllability> {
    let system = stabilize(g)?;
    let gramian = controllability_gramian(&system)?;
    Ok(AverageControllability {
        values: gramian.gramian.diag().to_owned(),
        lambda_max: system.lambda_max,
        lyapunov_residual: gramian.lyapunov_residual,
    })
}
