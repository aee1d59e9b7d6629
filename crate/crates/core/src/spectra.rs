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

//! Dense symmetric eigensolvers.
//!
//! The full decomposition uses Householder reduction to tridiagonal form
//! followed by the implicit-shift QL iteration (the EISPACK `tred2`/`tql2`
//! pair), which costs O(n³) and is accurate to a few ulps of ‖A‖.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Absolute asymmetry accepted by the symmetric routines.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Eigen-residual required from power iteration.
pub const POWER_RESIDUAL_TOLERANCE: f64 = 1e-6;
/// Required change between successive Rayleigh quotients.
pub const POWER_RAYLEIGH_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITERATIONS: usize = 10_000;

/// Max QL sweeps spent on a single eigenvalue before giving up.
const QL_MAX_ITERATIONS: usize = 64;

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub eigenvalues: Array1<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Array2<f64>,
}

impl SymmetricEigen {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (mut col, &lambda) in scaled.axis_iter_mut(Axis(1)).zip(&self.eigenvalues) {
            col *= f(lambda);
        }
        scaled.dot(&v.t())
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        self.spectral_map(|l| l)
    }

    /// ‖VᵀV − I‖_max.
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self.eigenvectors.t().dot(&self.eigenvectors);
        max_abs_diff_identity(&gram.view())
    }

    /// ‖AV − VΛ‖_max.
    pub fn residual(&self, a: &Array2<f64>) -> f64 {
        let av = a.dot(&self.eigenvectors);
        let mut worst = 0.0_f64;
        for ((i, j), &x) in av.indexed_iter() {
            let want = self.eigenvectors[[i, j]] * self.eigenvalues[j];
            worst = worst.max((x - want).abs());
        }
        worst
    }
}

fn max_abs_diff_identity(m: &ArrayView2<f64>) -> f64 {
    m.indexed_iter()
        .map(|((i, j), &x)| (x - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

pub fn max_asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

fn check_square_symmetric(a: &Array2<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let asymmetry = max_asymmetry(a);
    if !(asymmetry <= SYMMETRY_TOLERANCE) {
        return Err(Error::NonSymmetric { asymmetry });
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn sym_eigendecompose(a: &Array2<f64>) -> Result<SymmetricEigen> {
    check_square_symmetric(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(SymmetricEigen { eigenvalues: Array1::zeros(0), eigenvectors: Array2::zeros((0, 0)) });
    }
    // Row-major working copy of the symmetrized input.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    tridiagonal_ql(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]));
    let eigenvalues = order.iter().map(|&k| d[k]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[[row, col]] = v[row * n + k];
        }
    }
    Ok(SymmetricEigen { eigenvalues, eigenvectors })
}

/// Householder reduction of the symmetric matrix in `v` to tridiagonal
/// form. On return `d` holds the diagonal, `e[1..]` the subdiagonal and `v`
/// the accumulated orthogonal transform.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let idx = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
                v[idx(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for x in e[..i].iter_mut() {
                *x = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in j + 1..i {
                    g += v[idx(k, j)] * d[k];
                    e[k] += v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = 0.0;
    }
    v[idx(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal (`d`, `e`), accumulating rotations
/// into `v`. Eigenvalues are left unsorted in `d`.
fn tridiagonal_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let idx = |r: usize, c: usize| r * n + c;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > QL_MAX_ITERATIONS {
                    return Err(Error::NoConvergence {
                        what: "symmetric QL iteration",
                        iterations: QL_MAX_ITERATIONS,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in d[l + 2..].iter_mut() {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let hk = v[idx(k, i + 1)];
                        v[idx(k, i + 1)] = s * v[idx(k, i)] + c * hk;
                        v[idx(k, i)] = c * v[idx(k, i)] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Dominant eigenpair of a symmetric nonnegative matrix.
#[derive(Debug, Clone)]
pub struct DominantEigen {
    pub lambda_max: f64,
    /// Unit L2 norm, entrywise nonnegative.
    pub vector: Array1<f64>,
    /// ‖Av − λv‖₂ at the returned vector.
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration on `A + I` from the uniform positive vector.
///
/// The unit shift makes every eigenvalue of the iterated matrix strictly
/// smaller in magnitude than the dominant one, so bipartite graphs (whose
/// spectrum is symmetric about zero) converge instead of oscillating.
pub fn spectral_radius_symmetric(a: &Array2<f64>) -> Result<DominantEigen> {
    spectral_radius_with_budget(a, POWER_MAX_ITERATIONS)
}

pub fn spectral_radius_with_budget(a: &Array2<f64>, max_iterations: usize) -> Result<DominantEigen> {
    check_square_symmetric(a)?;
    if a.iter().any(|&x| x < 0.0) {
        return Err(Error::NegativeEntries);
    }
    let n = a.nrows();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty matrix has no dominant eigenpair".into()));
    }
    let mut x = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut previous = f64::NAN;
    for iteration in 1..=max_iterations {
        let mut y = a.dot(&x);
        y += &x;
        let rayleigh = x.dot(&y);
        let residual = y
            .iter()
            .zip(&x)
            .map(|(yi, xi)| (yi - rayleigh * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        if (rayleigh - previous).abs() <= POWER_RAYLEIGH_TOLERANCE
            && residual <= POWER_RESIDUAL_TOLERANCE
        {
            return Ok(DominantEigen { lambda_max: rayleigh - 1.0, vector: x, residual, iterations: iteration });
        }
        previous = rayleigh;
        let norm = y.dot(&y).sqrt();
        x = y / norm;
    }
    Err(Error::NoConvergence { what: "shifted power iteration", iterations: max_iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn check_contract(a: &Array2<f64>, eig: &SymmetricEigen) {
        let scale = a.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        assert!(eig.orthogonality_error() <= 1e-8, "orthogonality {}", eig.orthogonality_error());
        assert!(eig.residual(a) <= 1e-8 * scale, "residual {}", eig.residual(a));
        assert!(eig.eigenvalues.windows(2).into_iter().all(|w| w[0] <= w[1]));
    }

    #[test]
    fn two_by_two_swap() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let eig = sym_eigendecompose(&a).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.eigenvalues[1], 1.0, epsilon = 1e-14);
        check_contract(&a, &eig);
    }

    #[test]
    fn identity_and_diagonal() {
        let a = Array2::eye(3);
        let eig = sym_eigendecompose(&a).unwrap();
        assert_eq!(eig.eigenvalues.to_vec(), [1.0, 1.0, 1.0]);
        check_contract(&a, &eig);

        let a = Array2::from_diag(&array![3.0, 1.0, 2.0]);
        let eig = sym_eigendecompose(&a).unwrap();
        assert_eq!(eig.eigenvalues.to_vec(), [1.0, 2.0, 3.0]);
        // columns are signed unit axes
        for x in eig.eigenvectors.iter() {
            assert!(x.abs() < 1e-15 || (x.abs() - 1.0).abs() < 1e-15);
        }
        check_contract(&a, &eig);
    }

    #[test]
    fn single_entry_and_empty() {
        let eig = sym_eigendecompose(&array![[-2.5]]).unwrap();
        assert_eq!(eig.eigenvalues.to_vec(), [-2.5]);
        assert_eq!(eig.eigenvectors, array![[1.0]]);
        assert_eq!(sym_eigendecompose(&Array2::zeros((0, 0))).unwrap().eigenvalues.len(), 0);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = array![[0.0, 1.0], [1.0 + 1e-9, 0.0]];
        assert!(matches!(sym_eigendecompose(&a), Err(Error::NonSymmetric { .. })));
        assert!(matches!(spectral_radius_symmetric(&a), Err(Error::NonSymmetric { .. })));
        assert!(matches!(
            sym_eigendecompose(&Array2::zeros((2, 3))),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn graph_adjacency_trace_is_zero() {
        for g in [Graph::star(7).unwrap(), Graph::cycle(9).unwrap(), Graph::complete(6).unwrap()] {
            let a = g.adjacency_matrix();
            let eig = sym_eigendecompose(&a).unwrap();
            assert!(eig.eigenvalues.sum().abs() <= 1e-8);
            check_contract(&a, &eig);
        }
    }

    #[test]
    fn power_iteration_examples() {
        let k2 = Graph::complete(2).unwrap().adjacency_matrix();
        let dom = spectral_radius_symmetric(&k2).unwrap();
        assert_abs_diff_eq!(dom.lambda_max, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(dom.vector[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-6);
        assert_abs_diff_eq!(dom.vector[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-6);

        let dom = spectral_radius_symmetric(&Array2::zeros((1, 1))).unwrap();
        assert_eq!(dom.lambda_max, 0.0);

        let k3 = Graph::complete(3).unwrap().adjacency_matrix();
        assert_abs_diff_eq!(spectral_radius_symmetric(&k3).unwrap().lambda_max, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn power_iteration_bipartite_converges() {
        // Even cycle and star: spectra symmetric about zero.
        for g in [Graph::cycle(10).unwrap(), Graph::star(6).unwrap(), Graph::path(7).unwrap()] {
            let a = g.adjacency_matrix();
            let dom = spectral_radius_symmetric(&a).unwrap();
            let top = *sym_eigendecompose(&a).unwrap().eigenvalues.last().unwrap();
            assert!((dom.lambda_max - top).abs() <= 1e-6);
            assert!(dom.residual <= POWER_RESIDUAL_TOLERANCE);
            assert!(dom.vector.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn power_iteration_budget_and_sign_checks() {
        let p = Graph::path(30).unwrap().adjacency_matrix();
        assert!(matches!(spectral_radius_with_budget(&p, 3), Err(Error::NoConvergence { .. })));
        assert!(matches!(
            spectral_radius_symmetric(&array![[0.0, -1.0], [-1.0, 0.0]]),
            Err(Error::NegativeEntries)
        ));
    }

    fn symmetric_matrix() -> impl Strategy<Value = Array2<f64>> {
        (1usize..=50).prop_flat_map(|n| {
            proptest::collection::vec(-10.0..10.0f64, n * n).prop_map(move |raw| {
                let m = Array2::from_shape_vec((n, n), raw).unwrap();
                (&m + &m.t()) * 0.5
            })
        })
    }

    fn random_graph() -> impl Strategy<Value = Graph> {
        (2usize..40).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 1..120).prop_map(move |pairs| {
                Graph::new(n, pairs.into_iter().filter(|(u, v)| u != v)).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reconstruction(a in symmetric_matrix()) {
            let eig = sym_eigendecompose(&a).unwrap();
            check_contract(&a, &eig);
            let diff = &eig.reconstruct() - &a;
            let num = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
            let den = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(den == 0.0 || num / den <= 1e-8);
        }

        #[test]
        fn power_matches_full_decomposition(g in random_graph()) {
            let a = g.adjacency_matrix();
            let dom = spectral_radius_symmetric(&a).unwrap();
            let top = *sym_eigendecompose(&a).unwrap().eigenvalues.last().unwrap();
            prop_assert!((dom.lambda_max - top).abs() <= 1e-6, "{} vs {}", dom.lambda_max, top);
        }
    }
}
