use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{config, QasError, Result};
use crate::rng::{stream_rng, Stream};

/// Simple undirected graph; edges are stored as `(u, v)` with `u < v`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Graph {
    n_vertices: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_vertices > 32 {
            return config(format!("graphs are limited to 32 vertices, got {n_vertices}"));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return config(format!("self-loop on vertex {a}"));
            }
            if a >= n_vertices || b >= n_vertices {
                return config(format!("edge ({a}, {b}) outside {n_vertices} vertices"));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return config(format!("duplicate edge ({a}, {b})"));
            }
        }
        Ok(Graph { n_vertices, edges: set })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
        Graph::new(n, edges).expect("complete graph is valid")
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn is_cubic(&self) -> bool {
        (0..self.n_vertices).all(|v| self.degree(v) == 3)
    }

    /// Neighbour bitmasks, one per vertex.
    pub fn adjacency(&self) -> Vec<u32> {
        let mut adj = vec![0u32; self.n_vertices];
        for &(a, b) in &self.edges {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.n_vertices == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = 1u32;
        let mut frontier = 1u32;
        while frontier != 0 {
            let mut next = 0;
            let mut f = frontier;
            while f != 0 {
                let v = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= adj[v];
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen.count_ones() as usize == self.n_vertices
    }

    /// Number of edges cut by the bipartition encoded in `z` (bit `v` = side of `v`).
    pub fn cut(&self, z: u64) -> usize {
        self.edges.iter().filter(|&&(a, b)| (z >> a ^ z >> b) & 1 == 1).count()
    }

    pub fn max_cut(&self) -> usize {
        (0..1u64 << self.n_vertices).map(|z| self.cut(z)).max().unwrap_or(0)
    }

    /// Edge-list text: a `# vertices N` header followed by one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# vertices {}\n", self.n_vertices);
        for (a, b) in self.edges() {
            let _ = writeln!(s, "{a} {b}");
        }
        s
    }

    /// Parses edge-list text. Without a header the vertex count is `max index + 1`.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if toks.first() == Some(&"vertices") {
                    n = toks.get(1).and_then(|t| t.parse().ok());
                    if n.is_none() {
                        return Err(QasError::Parse(format!("line {}: bad vertex header", ln + 1)));
                    }
                }
                continue;
            }
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| QasError::Parse(format!("line {}: bad vertex `{t}`", ln + 1))))
                .collect::<Result<_>>()?;
            if nums.len() != 2 {
                return Err(QasError::Parse(format!("line {}: expected `u v`", ln + 1)));
            }
            edges.push((nums[0], nums[1]));
        }
        let n = n.unwrap_or_else(|| edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0));
        Graph::new(n, edges)
    }
}

/// Writes several graphs separated by blank lines.
pub fn corpus_to_text(graphs: &[Graph]) -> String {
    graphs.iter().map(Graph::to_edge_list).collect::<Vec<_>>().join("\n")
}

pub fn corpus_from_text(text: &str) -> Result<Vec<Graph>> {
    text.split("\n\n")
        .filter(|chunk| !chunk.trim().is_empty())
        .map(Graph::from_edge_list)
        .collect()
}

/// Train/test partition of a graph corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSplit {
    pub train: Vec<Graph>,
    pub test: Vec<Graph>,
    pub seed: u64,
}

/// Seeded shuffle followed by a prefix split into `m` training and `k` test graphs.
pub fn split_instances(graphs: &[Graph], m: usize, k: usize, seed: u64) -> Result<InstanceSplit> {
    if m + k > graphs.len() {
        return config(format!("requested {m}+{k} instances from a corpus of {}", graphs.len()));
    }
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    order.shuffle(&mut stream_rng(seed, Stream::Corpus, &[]));
    let train = order[..m].iter().map(|&i| graphs[i].clone()).collect();
    let test = order[m..m + k].iter().map(|&i| graphs[i].clone()).collect();
    Ok(InstanceSplit { train, test, seed })
}
