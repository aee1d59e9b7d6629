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

//! Graph and dataset model plus the edge-list JSON / label CSV formats.
//!
//! Graphs are undirected, unweighted and simple. Node ids are contiguous
//! `0..n`. Datasets are always ordered by [`GraphId`], never by file position.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// String id of a graph inside a dataset.
///
/// Ordering is "natural": ids that parse as unsigned integers compare
/// numerically and sort before every non-numeric id, which compare as
/// strings. For the decimal ids of the public datasets this is plain
/// numeric order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GraphId(String);

impl GraphId {
    pub fn new(id: impl Into<String>) -> Self {
        GraphId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn numeric(&self) -> Option<u128> {
        if self.0.is_empty() || !self.0.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        self.0.parse().ok()
    }
}

impl Ord for GraphId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.numeric(), other.numeric()) {
            (Some(a), Some(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for GraphId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GraphId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GraphId {
    fn from(s: &str) -> Self {
        GraphId(s.to_owned())
    }
}

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Sorted, each pair stored once with `u < v`.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, collapsing duplicate and reversed pairs.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::build("<unnamed>", n, edges)
    }

    fn build(name: &str, n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph { graph: name.to_owned() });
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::SelfLoop { graph: name.to_owned(), node: u });
            }
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { graph: name.to_owned(), node, n });
                }
            }
            set.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Graph { n, edges, neighbors })
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, std::iter::empty())
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidConfig(format!("cycle needs at least 3 nodes, got {n}")));
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
    }

    /// Star on `n` nodes with center 0.
    pub fn star(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|leaf| (0, leaf)))
    }

    /// Circulant graph: node `i` is joined to `i ± o (mod n)` for every offset.
    pub fn circulant(n: usize, offsets: &[usize]) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for &o in offsets {
                let o = o % n;
                if o != 0 {
                    edges.push((i, (i + o) % n));
                }
            }
        }
        Self::new(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn degree_vector(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    /// Dense symmetric 0/1 adjacency matrix.
    pub fn adjacency_matrix(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(u, v) in &self.edges {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
        a
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.n, "permutation length must equal node count");
        Graph::new(self.n, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
            .expect("a permutation of a valid graph is valid")
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }
}

/// Binary graph label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.bit())
    }
}

/// Graphs keyed by id, before labels are joined on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnlabeledDataset {
    pub entries: Vec<(GraphId, Graph)>,
}

impl UnlabeledDataset {
    /// Sorts entries by id and rejects duplicates.
    pub fn from_entries(mut entries: Vec<(GraphId, Graph)>) -> Result<Self> {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateId(w[0].0.to_string()));
        }
        Ok(UnlabeledDataset { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &Graph> {
        self.entries.iter().map(|(_, g)| g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    pub id: GraphId,
    pub graph: Graph,
    pub label: Label,
}

/// Ordered labeled dataset; ids unique, sorted by [`GraphId`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GraphDataset {
    pub entries: Vec<LabeledGraph>,
}

impl GraphDataset {
    pub fn from_entries(mut entries: Vec<LabeledGraph>) -> Result<Self> {
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = entries.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId(w[0].id.to_string()));
        }
        Ok(GraphDataset { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn graphs(&self) -> impl Iterator<Item = &Graph> {
        self.entries.iter().map(|e| &e.graph)
    }

    pub fn unlabeled(&self) -> UnlabeledDataset {
        UnlabeledDataset {
            entries: self.entries.iter().map(|e| (e.id.clone(), e.graph.clone())).collect(),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

pub fn load_edge_list_json(path: impl AsRef<Path>) -> Result<UnlabeledDataset> {
    parse_edge_list_json(&read_file(path.as_ref())?)
}

/// Dense n×n matrices are allocated per graph; refuse ids that could not fit.
const MAX_NODE_ID: u64 = 1 << 20;

/// Parses `{"<graph_id>": [[u, v], ...], ...}`.
pub fn parse_edge_list_json(bytes: &[u8]) -> Result<UnlabeledDataset> {
    let root: serde_json::Map<String, Value> = serde_json::from_slice(bytes)?;
    let mut entries = Vec::with_capacity(root.len());
    for (key, value) in root {
        let graph = parse_graph_edges(&key, &value)?;
        entries.push((GraphId::new(key), graph));
    }
    UnlabeledDataset::from_entries(entries)
}

fn parse_graph_edges(name: &str, value: &Value) -> Result<Graph> {
    let malformed = |detail: String| Error::MalformedEdge { graph: name.to_owned(), detail };
    let pairs = value
        .as_array()
        .ok_or_else(|| malformed("expected an array of [u, v] pairs".into()))?;
    let mut edges = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let ends = pair
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| malformed(format!("expected a pair, found {pair}")))?;
        let mut ids = [0usize; 2];
        for (slot, end) in ids.iter_mut().zip(ends) {
            if let Some(id) = end.as_i64().filter(|&id| id < 0) {
                return Err(Error::NegativeId { graph: name.to_owned(), id });
            }
            let id = end
                .as_u64()
                .ok_or_else(|| malformed(format!("non-integer node id {end}")))?;
            if id > MAX_NODE_ID {
                return Err(malformed(format!("node id {id} too large")));
            }
            *slot = id as usize;
        }
        if ids[0] == ids[1] {
            return Err(Error::SelfLoop { graph: name.to_owned(), node: ids[0] });
        }
        edges.push((ids[0], ids[1]));
    }
    let Some(max_id) = edges.iter().map(|&(u, v)| u.max(v)).max() else {
        return Err(Error::EmptyGraph { graph: name.to_owned() });
    };
    let n = max_id + 1;
    let mut seen = vec![false; n];
    for &(u, v) in &edges {
        seen[u] = true;
        seen[v] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::NodeGap { graph: name.to_owned(), missing });
    }
    Graph::build(name, n, edges)
}

/// Serializes graphs back to the edge-list format, keys in id order.
pub fn to_edge_list_json<'a>(entries: impl IntoIterator<Item = (&'a GraphId, &'a Graph)>) -> String {
    let map: BTreeMap<&GraphId, &[(usize, usize)]> =
        entries.into_iter().map(|(id, g)| (id, g.edges())).collect();
    let mut out = String::from("{");
    for (i, (id, edges)) in map.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(id.as_str()).expect("strings serialize"));
        out.push_str(":[");
        for (j, (u, v)) in edges.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("[{u},{v}]"));
        }
        out.push(']');
    }
    out.push('}');
    out
}

pub fn load_targets_csv(path: impl AsRef<Path>, graphs: UnlabeledDataset) -> Result<GraphDataset> {
    join_targets_csv(&read_file(path.as_ref())?, graphs)
}

/// Joins an `id,target` CSV onto loaded graphs.
pub fn join_targets_csv(bytes: &[u8], graphs: UnlabeledDataset) -> Result<GraphDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers()?.clone();
    let column = |name: &'static str| {
        headers.iter().position(|h| h == name).ok_or(Error::MissingColumn(name))
    };
    let id_col = column("id")?;
    let target_col = column("target")?;

    let mut targets = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let id = GraphId::new(record.get(id_col).unwrap_or_default());
        let raw = record.get(target_col).unwrap_or_default();
        let label = raw
            .parse::<u8>()
            .ok()
            .and_then(Label::from_bit)
            .ok_or_else(|| Error::NonBinaryTarget { id: id.to_string(), value: raw.to_owned() })?;
        if targets.insert(id.clone(), label).is_some() {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }

    let known: BTreeSet<&GraphId> = graphs.entries.iter().map(|(id, _)| id).collect();
    if let Some(orphan) = targets.keys().find(|id| !known.contains(id)) {
        return Err(Error::MissingGraph(orphan.to_string()));
    }
    let mut entries = Vec::with_capacity(graphs.len());
    for (id, graph) in graphs.entries {
        let label = *targets.get(&id).ok_or_else(|| Error::MissingTarget(id.to_string()))?;
        entries.push(LabeledGraph { id, graph, label });
    }
    GraphDataset::from_entries(entries)
}

/// Writes the `id,target` CSV for a labeled dataset.
pub fn to_targets_csv(ds: &GraphDataset) -> String {
    let mut out = String::from("id,target\n");
    for e in &ds.entries {
        out.push_str(&format!("{},{}\n", e.id, e.label.bit()));
    }
    out
}
