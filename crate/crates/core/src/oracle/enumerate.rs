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

//! Exhaustive enumeration of small graphs up to isomorphism.
//!
//! Graphs on `n` nodes are grown from those on `n − 1` by attaching a new
//! node to every subset of the old ones, then deduplicated by a canonical
//! code: the smallest edge bitmask over all relabelings that list nodes by
//! non-increasing degree.

use std::collections::BTreeSet;

use rand::Rng;

use crate::graph::Graph;

/// Largest node count the 64-bit pair mask can hold.
pub const MAX_ENUMERATION_NODES: usize = 11;

fn pair_bit(i: usize, j: usize, n: usize) -> u64 {
    debug_assert!(i < j && j < n);
    // index of (i, j) in row-major upper-triangle order
    let idx = i * (2 * n - i - 1) / 2 + (j - i - 1);
    1u64 << idx
}

fn adjacency_bits(n: usize, edges: &[(usize, usize)]) -> Vec<u32> {
    let mut rows = vec![0u32; n];
    for &(u, v) in edges {
        rows[u] |= 1 << v;
        rows[v] |= 1 << u;
    }
    rows
}

/// Canonical code of a graph; equal codes iff isomorphic.
pub fn canonical_code(n: usize, edges: &[(usize, usize)]) -> u64 {
    let rows = adjacency_bits(n, edges);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| std::cmp::Reverse(rows[v].count_ones()));
    // blocks of equal degree, permuted independently
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for &v in &by_degree {
        match blocks.last_mut() {
            Some(b) if rows[b[0]].count_ones() == rows[v].count_ones() => b.push(v),
            _ => blocks.push(vec![v]),
        }
    }
    let mut best = u64::MAX;
    let mut order = Vec::with_capacity(n);
    search(&rows, n, &mut blocks, 0, &mut order, &mut best);
    best
}

fn search(rows: &[u32], n: usize, blocks: &mut [Vec<usize>], block: usize, order: &mut Vec<usize>, best: &mut u64) {
    if block == blocks.len() {
        let mut code = 0u64;
        for i in 0..n {
            for j in i + 1..n {
                if rows[order[i]] & (1 << order[j]) != 0 {
                    code |= pair_bit(i, j, n);
                }
            }
        }
        *best = (*best).min(code);
        return;
    }
    let members = blocks[block].clone();
    permute(&members, &mut |perm| {
        let before = order.len();
        order.extend_from_slice(perm);
        search(rows, n, blocks, block + 1, order, best);
        order.truncate(before);
    });
}

/// Calls `f` on every permutation of `items` (Heap's algorithm).
fn permute(items: &[usize], f: &mut dyn FnMut(&[usize])) {
    let mut a = items.to_vec();
    let k = a.len();
    let mut c = vec![0usize; k];
    f(&a);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn decode(n: usize, code: u64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if code & pair_bit(i, j, n) != 0 {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges).expect("decoded graphs are valid")
}

/// All pairwise non-isomorphic graphs on `n` nodes, connected or not.
pub fn non_isomorphic_graphs(n: usize) -> Vec<Graph> {
    assert!((1..=MAX_ENUMERATION_NODES).contains(&n), "enumeration supports 1..={MAX_ENUMERATION_NODES} nodes");
    let mut level: Vec<Graph> = vec![Graph::empty(1).unwrap()];
    for m in 2..=n {
        let mut codes = BTreeSet::new();
        for g in &level {
            for subset in 0u32..(1 << (m - 1)) {
                let mut edges = g.edges().to_vec();
                edges.extend((0..m - 1).filter(|&v| subset & (1 << v) != 0).map(|v| (v, m - 1)));
                codes.insert(canonical_code(m, &edges));
            }
        }
        level = codes.into_iter().map(|c| decode(m, c)).collect();
    }
    level
}

/// Every non-isomorphic graph with `1..=max_n` nodes.
pub fn graphs_up_to(max_n: usize) -> Vec<Graph> {
    (1..=max_n).flat_map(non_isomorphic_graphs).collect()
}

/// Random connected graph: a random spanning tree plus G(n, p) extras.
pub fn random_connected_graph<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.gen_range(0..v), v));
    }
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).expect("random graph is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_counts() {
        // OEIS A000088 and A001349.
        let all = [1, 2, 4, 11, 34, 156, 1044];
        let connected = [1, 1, 2, 6, 21, 112, 853];
        for n in 1..=7 {
            let graphs = non_isomorphic_graphs(n);
            assert_eq!(graphs.len(), all[n - 1], "n = {n}");
            assert_eq!(graphs.iter().filter(|g| g.is_connected()).count(), connected[n - 1], "n = {n}");
        }
    }

    #[test]
    fn canonical_code_is_label_free() {
        let path = canonical_code(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(path, canonical_code(4, &[(2, 0), (0, 3), (3, 1)]));
        assert_ne!(path, canonical_code(4, &[(0, 1), (0, 2), (0, 3)]));
    }
}
