//! Connected cubic graphs up to isomorphism.
//!
//! Labelled graphs are generated by a backtracking fill that always completes
//! the lowest-index vertex with missing degree and treats all untouched
//! vertices as interchangeable (only the smallest may be used). Each result is
//! reduced to a canonical code by individualization-refinement and duplicates
//! are dropped.

use std::collections::BTreeSet;

use super::graph::Graph;
use crate::error::{config, Result};

/// Canonical adjacency code: the lexicographically smallest row-mask vector
/// over all leaves of the individualization-refinement search tree.
///
/// Two graphs receive the same code iff they are isomorphic.
pub fn canonical_code(g: &Graph) -> Vec<u32> {
    let adj = g.adjacency();
    let n = adj.len();
    if n == 0 {
        return Vec::new();
    }
    let colors = refine(&adj, vec![0; n]);
    let mut best: Option<Vec<u32>> = None;
    search(&adj, colors, &mut best);
    best.expect("search visits at least one leaf")
}

/// Equitable refinement: recolour by (own colour, sorted neighbour colours)
/// until the number of cells stops growing. Colours are dense ranks, so the
/// result only depends on the graph structure and the input colouring.
fn refine(adj: &[u32], mut colors: Vec<u32>) -> Vec<u32> {
    let n = adj.len();
    let mut cells = count_cells(&colors);
    loop {
        let sigs: Vec<(u32, Vec<u32>)> = (0..n)
            .map(|v| {
                let mut nb: Vec<u32> = bits(adj[v]).map(|u| colors[u]).collect();
                nb.sort_unstable();
                (colors[v], nb)
            })
            .collect();
        let mut uniq: Vec<&(u32, Vec<u32>)> = sigs.iter().collect();
        uniq.sort();
        uniq.dedup();
        colors = sigs.iter().map(|s| uniq.binary_search(&s).unwrap() as u32).collect();
        let next = uniq.len();
        if next == cells {
            return colors;
        }
        cells = next;
    }
}

fn count_cells(colors: &[u32]) -> usize {
    colors.iter().collect::<BTreeSet<_>>().len()
}

fn bits(mut m: u32) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            return None;
        }
        let b = m.trailing_zeros() as usize;
        m &= m - 1;
        Some(b)
    })
}

fn search(adj: &[u32], colors: Vec<u32>, best: &mut Option<Vec<u32>>) {
    let n = adj.len();
    if count_cells(&colors) == n {
        let mut code = vec![0u32; n];
        for v in 0..n {
            code[colors[v] as usize] = bits(adj[v]).fold(0, |m, u| m | 1 << colors[u]);
        }
        if best.as_ref().is_none_or(|b| code < *b) {
            *best = Some(code);
        }
        return;
    }
    // Target cell: the smallest colour shared by more than one vertex.
    let mut sizes = vec![0usize; n];
    for &c in &colors {
        sizes[c as usize] += 1;
    }
    let target = sizes.iter().position(|&s| s > 1).expect("non-discrete colouring") as u32;
    for v in (0..n).filter(|&v| colors[v] == target) {
        let split: Vec<u32> = (0..n).map(|u| 2 * colors[u] + u32::from(u != v)).collect();
        search(adj, refine(adj, split), best);
    }
}

/// Every connected 3-regular graph on `n` vertices, one per isomorphism class,
/// in ascending canonical-code order. `n` must be even and in `4..=12`.
pub fn enumerate_cubic_graphs(n: usize) -> Result<Vec<Graph>> {
    if n % 2 != 0 || !(4..=12).contains(&n) {
        return config(format!("cubic graph enumeration needs even n in 4..=12, got {n}"));
    }
    let mut gen = Generator { n, adj: vec![0; n], deg: vec![0; n], seen: BTreeSet::new() };
    gen.fill(0, 1);
    Ok(gen
        .seen
        .into_iter()
        .map(|code| {
            let edges = (0..n).flat_map(|a| bits(code[a]).filter(move |&b| b > a).map(move |b| (a, b)));
            Graph::new(n, edges).expect("generated graph is simple")
        })
        .collect())
}

struct Generator {
    n: usize,
    adj: Vec<u32>,
    deg: Vec<u8>,
    seen: BTreeSet<Vec<u32>>,
}

impl Generator {
    /// Adds neighbours `>= start` to `v` until it has degree 3, then moves on
    /// to the next deficient vertex.
    fn fill(&mut self, v: usize, start: usize) {
        if self.deg[v] == 3 {
            match (v + 1..self.n).find(|&w| self.deg[w] < 3) {
                None => {
                    let edges = (0..self.n)
                        .flat_map(|a| bits(self.adj[a]).filter(move |&b| b > a).map(move |b| (a, b)));
                    let g = Graph::new(self.n, edges).expect("generated graph is simple");
                    self.seen.insert(canonical_code(&g));
                }
                // An untouched vertex next means the touched part is already a
                // closed component: the final graph would be disconnected.
                Some(w) if self.deg[w] == 0 => {}
                Some(w) => self.fill(w, w + 1),
            }
            return;
        }
        let first_untouched = (v + 1..self.n).find(|&u| self.deg[u] == 0);
        for u in start..self.n {
            if self.deg[u] >= 3 || self.adj[v] >> u & 1 == 1 {
                continue;
            }
            if self.deg[u] == 0 && Some(u) != first_untouched {
                continue;
            }
            self.link(v, u, true);
            self.fill(v, u + 1);
            self.link(v, u, false);
        }
    }

    fn link(&mut self, a: usize, b: usize, on: bool) {
        self.adj[a] ^= 1 << b;
        self.adj[b] ^= 1 << a;
        if on {
            self.deg[a] += 1;
            self.deg[b] += 1;
        } else {
            self.deg[a] -= 1;
            self.deg[b] -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relabel(g: &Graph, perm: &[usize]) -> Graph {
        Graph::new(g.n_vertices(), g.edges().map(|(a, b)| (perm[a], perm[b]))).unwrap()
    }

    #[test]
    fn canonical_code_is_label_invariant() {
        // Prism graph (two triangles joined by a matching).
        let g = Graph::new(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)]).unwrap();
        let perms = [[5, 3, 1, 0, 2, 4], [1, 0, 3, 2, 5, 4], [2, 4, 0, 5, 1, 3]];
        for p in perms {
            assert_eq!(canonical_code(&relabel(&g, &p)), canonical_code(&g));
        }
        assert_ne!(canonical_code(&g), canonical_code(&Graph::new(6, [(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)]).unwrap()));
    }

    #[test]
    fn small_counts() {
        assert_eq!(enumerate_cubic_graphs(4).unwrap().len(), 1);
        assert_eq!(enumerate_cubic_graphs(6).unwrap().len(), 2);
        assert_eq!(enumerate_cubic_graphs(8).unwrap().len(), 5);
    }

    #[test]
    fn bad_sizes_rejected() {
        assert!(enumerate_cubic_graphs(5).is_err());
        assert!(enumerate_cubic_graphs(2).is_err());
        assert!(enumerate_cubic_graphs(14).is_err());
    }

    #[test]
    fn generated_graphs_are_connected_cubic() {
        for g in enumerate_cubic_graphs(10).unwrap() {
            assert!(g.is_cubic() && g.is_connected());
        }
    }
}
