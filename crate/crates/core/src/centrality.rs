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

//! Unweighted closeness, betweenness and eigenvector centrality.

use std::collections::VecDeque;

use crate::error::Result;
use crate::graph::Graph;
use crate::spectra::spectral_radius_symmetric;

/// Normalization conventions, recorded alongside computed features.
pub const CLOSENESS_CONVENTION: &str = "reachable-set, scaled by (r-1)/(n-1)";
pub const BETWEENNESS_CONVENTION: &str = "endpoints excluded, normalized by (n-1)(n-2)/2";
pub const EIGENVECTOR_CONVENTION: &str = "unit L2 Perron vector of A via power iteration on A+I";

/// BFS hop distances from `source`; `usize::MAX` marks unreachable nodes.
fn bfs_distances(g: &Graph, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Closeness with the component-size correction for disconnected graphs:
/// `C(v) = ((r−1)/(n−1)) · ((r−1)/Σd)` over the `r` nodes reachable from `v`.
pub fn closeness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    (0..n)
        .map(|v| {
            let dist = bfs_distances(g, v);
            let (reached, total) = dist
                .iter()
                .filter(|&&d| d != usize::MAX)
                .fold((0usize, 0usize), |(r, s), &d| (r + 1, s + d));
            if reached <= 1 {
                return 0.0;
            }
            let others = (reached - 1) as f64;
            (others / (n - 1) as f64) * (others / total as f64)
        })
        .collect()
}

/// Brandes' algorithm. Every unordered pair is seen from both endpoints, so
/// the raw sum is halved before normalizing by `(n−1)(n−2)/2`.
pub fn betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut centrality = vec![0.0; n];
    if n <= 2 {
        return centrality;
    }
    let mut stack = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0_f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0_f64; n];

    for s in 0..n {
        stack.clear();
        for p in &mut predecessors {
            p.clear();
        }
        sigma.fill(0.0);
        dist.fill(usize::MAX);
        delta.fill(0.0);
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);

        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    predecessors[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &predecessors[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    let pairs = ((n - 1) * (n - 2)) as f64 / 2.0;
    for c in &mut centrality {
        *c /= 2.0 * pairs;
    }
    centrality
}

/// Result of [`eigenvector_centrality_detailed`].
#[derive(Debug, Clone)]
pub struct EigenvectorCentrality {
    pub values: Vec<f64>,
    pub lambda_max: f64,
    /// ‖Av − λv‖₂.
    pub residual: f64,
}

/// Dominant eigenvector of the adjacency, unit L2 norm and nonnegative.
///
/// Edgeless graphs have no dominant direction and get the uniform vector.
/// On disconnected graphs the iteration settles on the component with the
/// largest spectral radius; the others decay to zero up to tolerance.
pub fn eigenvector_centrality(g: &Graph) -> Result<Vec<f64>> {
    Ok(eigenvector_centrality_detailed(g)?.values)
}

pub fn eigenvector_centrality_detailed(g: &Graph) -> Result<EigenvectorCentrality> {
    let n = g.node_count();
    if g.edge_count() == 0 {
        return Ok(EigenvectorCentrality {
            values: vec![1.0 / (n as f64).sqrt(); n],
            lambda_max: 0.0,
            residual: 0.0,
        });
    }
    let dom = spectral_radius_symmetric(&g.adjacency_matrix())?;
    Ok(EigenvectorCentrality { values: dom.vector.to_vec(), lambda_max: dom.lambda_max, residual: dom.residual })
}
