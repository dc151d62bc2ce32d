//! Simple undirected graphs, synthetic generators, and dataset I/O.

mod generate;
mod io;
mod iso;

pub use generate::{enumerate_connected, gen_complete, gen_cycle, gen_erdos_renyi, gen_ring_pair, gen_sbm};
pub use io::{load_graphs, save_graphs};
pub use iso::brute_force_isomorphic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target label attached to a graph or its nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(usize),
    Scalar(f64),
    Vector(Vec<f64>),
}

/// A simple undirected graph: no self-loops, no multi-edges.
///
/// Edges are stored once as ordered pairs `(i, j)` with `i < j`. Node and
/// edge features are optional; widths are uniform when present.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub num_nodes: usize,
    edges: Vec<(usize, usize)>,
    pub node_features: Option<Vec<Vec<f64>>>,
    pub edge_features: Option<Vec<Vec<f64>>>,
    pub node_labels: Option<Vec<usize>>,
    pub graph_label: Option<Label>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::InvalidGraph("graph must have at least one node".into()));
        }
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a},{b}) out of range for {num_nodes} nodes"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Graph {
            num_nodes,
            edges: canon,
            node_features: None,
            edge_features: None,
            node_labels: None,
            graph_label: None,
        })
    }

    /// Edges as canonical `(i, j)` pairs with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search(&key).is_ok()
    }

    /// Neighbor lists, ascending per node.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Dense adjacency matrix, row-major.
    pub fn adjacency_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.num_nodes;
        let mut m = vec![vec![0.0; n]; n];
        for &(a, b) in &self.edges {
            m[a][b] = 1.0;
            m[b][a] = 1.0;
        }
        m
    }

    pub fn with_node_features(mut self, feats: Vec<Vec<f64>>) -> Result<Self> {
        if feats.len() != self.num_nodes {
            return Err(Error::InvalidGraph("node feature count != num_nodes".into()));
        }
        let w = feats.first().map_or(0, Vec::len);
        if feats.iter().any(|f| f.len() != w) {
            return Err(Error::InvalidGraph("non-uniform node feature width".into()));
        }
        self.node_features = Some(feats);
        Ok(self)
    }

    /// Per-edge features, one vector per canonical edge (same order as `edges()`).
    pub fn with_edge_features(mut self, feats: Vec<Vec<f64>>) -> Result<Self> {
        if feats.len() != self.edges.len() {
            return Err(Error::InvalidGraph("edge feature count != num_edges".into()));
        }
        let w = feats.first().map_or(0, Vec::len);
        if feats.iter().any(|f| f.len() != w) {
            return Err(Error::InvalidGraph("non-uniform edge feature width".into()));
        }
        self.edge_features = Some(feats);
        Ok(self)
    }

    pub fn node_feature_dim(&self) -> usize {
        self.node_features.as_ref().map_or(0, |f| f.first().map_or(0, Vec::len))
    }

    pub fn edge_feature_dim(&self) -> usize {
        self.edge_features.as_ref().map_or(0, |f| f.first().map_or(0, Vec::len))
    }

    /// Relabel nodes: node `i` becomes `perm[i]`. Features and labels follow.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.num_nodes {
            return Err(Error::InvalidArgument("permutation length != num_nodes".into()));
        }
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        // Re-canonicalize, then carry edge features in the new canonical order.
        let mut tagged: Vec<((usize, usize), usize)> = edges
            .iter()
            .enumerate()
            .map(|(idx, &(a, b))| ((a.min(b), a.max(b)), idx))
            .collect();
        tagged.sort_unstable();
        let mut g = Graph::new(self.num_nodes, edges)?;
        if let Some(nf) = &self.node_features {
            let mut moved = vec![Vec::new(); self.num_nodes];
            for (i, f) in nf.iter().enumerate() {
                moved[perm[i]] = f.clone();
            }
            g.node_features = Some(moved);
        }
        if let Some(ef) = &self.edge_features {
            g.edge_features = Some(tagged.iter().map(|&(_, idx)| ef[idx].clone()).collect());
        }
        if let Some(nl) = &self.node_labels {
            let mut moved = vec![0; self.num_nodes];
            for (i, &l) in nl.iter().enumerate() {
                moved[perm[i]] = l;
            }
            g.node_labels = Some(moved);
        }
        g.graph_label = self.graph_label.clone();
        Ok(g)
    }

    /// Connected components as node-index lists (BFS, deterministic order).
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.num_nodes];
        let mut comps = Vec::new();
        for start in 0..self.num_nodes {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &u in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }
}

/// Entry `j` counts the edges incident to node `j`.
pub fn degree_vector(g: &Graph) -> Vec<usize> {
    let mut deg = vec![0usize; g.num_nodes];
    for &(a, b) in g.edges() {
        deg[a] += 1;
        deg[b] += 1;
    }
    deg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "graph-regression")]
    GraphRegression,
    #[serde(rename = "graph-classification")]
    GraphClassification,
    #[serde(rename = "node-classification")]
    NodeClassification,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Task::GraphRegression => "graph-regression",
            Task::GraphClassification => "graph-classification",
            Task::NodeClassification => "node-classification",
        };
        f.write_str(s)
    }
}

/// Train/val/test split indices into a dataset's graph list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<Graph>,
    pub task: Task,
    pub split: Split,
}

impl Dataset {
    pub fn new(graphs: Vec<Graph>, task: Task, split: Split) -> Result<Self> {
        let n = graphs.len();
        let mut seen = vec![false; n];
        for idx in split.train.iter().chain(&split.val).chain(&split.test) {
            if *idx >= n {
                return Err(Error::InvalidArgument(format!("split index {idx} out of range")));
            }
            if seen[*idx] {
                return Err(Error::InvalidArgument(format!("split index {idx} appears twice")));
            }
            seen[*idx] = true;
        }
        for (i, g) in graphs.iter().enumerate() {
            let ok = match task {
                Task::NodeClassification => g.node_labels.is_some(),
                Task::GraphRegression | Task::GraphClassification => g.graph_label.is_some(),
            };
            if !ok && !split.train.is_empty() {
                return Err(Error::TaskMismatch(format!(
                    "graph {i} lacks the labels required by task {task}"
                )));
            }
        }
        Ok(Dataset { graphs, task, split })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> Graph {
        Graph::new(2, vec![(0, 1)]).unwrap()
    }

    #[test]
    fn degree_vector_examples() {
        assert_eq!(degree_vector(&p2()), vec![1, 1]);
        assert_eq!(degree_vector(&gen_complete(3).unwrap()), vec![2, 2, 2]);
        assert_eq!(degree_vector(&Graph::new(3, vec![]).unwrap()), vec![0, 0, 0]);
    }

    #[test]
    fn rejects_self_loops_and_bad_indices() {
        assert!(Graph::new(3, vec![(1, 1)]).is_err());
        assert!(Graph::new(3, vec![(0, 3)]).is_err());
    }

    #[test]
    fn dedups_and_symmetrizes_edges() {
        let g = Graph::new(3, vec![(1, 0), (0, 1), (2, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(g.has_edge(1, 0));
        assert!(!g.has_edge(0, 2));
    }

    #[test]
    fn components_of_disjoint_triangles() {
        let g = Graph::new(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let comps = g.connected_components();
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert!(!g.is_connected());
    }

    #[test]
    fn split_indices_must_be_disjoint() {
        let gs = vec![p2(), p2()];
        let split = Split { train: vec![0], val: vec![0], test: vec![] };
        assert!(Dataset::new(gs, Task::GraphRegression, split).is_err());
    }

    #[test]
    fn permuted_moves_labels_and_features() {
        let mut g = gen_cycle(4).unwrap();
        g.node_labels = Some(vec![0, 1, 2, 3]);
        let p = g.permuted(&[2, 3, 0, 1]).unwrap();
        assert_eq!(p.node_labels.as_ref().unwrap(), &vec![2, 3, 0, 1]);
        assert!(p.has_edge(2, 3) && p.has_edge(0, 1));
    }
}
