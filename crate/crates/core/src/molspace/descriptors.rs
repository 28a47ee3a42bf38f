use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::graph::MolecularGraph;

/// Topological descriptors consumed by the synthetic property oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Descriptors {
    pub n_carbons: usize,
    /// Sum of shortest-path distances over all unordered vertex pairs.
    pub wiener_index: u64,
    /// Vertices with exactly one heavy neighbor.
    pub n_methyl: usize,
}

pub fn descriptors(g: &MolecularGraph) -> Descriptors {
    let n = g.n_atoms();
    let mut total = 0u64;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    for source in 0..n {
        dist.fill(usize::MAX);
        dist[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for &(u, _) in g.neighbors(v) {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        total += dist
            .iter()
            .skip(source + 1)
            .filter(|&&d| d != usize::MAX)
            .map(|&d| d as u64)
            .sum::<u64>();
    }
    Descriptors {
        n_carbons: n,
        wiener_index: total,
        n_methyl: g.atoms().iter().filter(|a| a.heavy_degree == 1).count(),
    }
}
