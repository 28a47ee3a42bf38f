//! Centroid-rooted AHU canonicalization of alkane trees.
//!
//! The rooted code of a vertex is its own SMILES fragment: `C` followed by the
//! codes of its children in ascending order, every child but the last wrapped
//! in parentheses. Equal codes mean isomorphic rooted subtrees, so the code of
//! the centroid doubles as the canonical SMILES. With two centroids the
//! lexicographically smaller code wins.

use super::graph::{GraphError, MolecularGraph};
use super::smiles::CanonicalSmiles;

pub fn to_canonical_smiles(g: &MolecularGraph) -> Result<CanonicalSmiles, GraphError> {
    g.check_tree()?;
    if !g.is_alkane() {
        return Err(GraphError::NotAnAlkane);
    }
    Ok(CanonicalSmiles::from_canonical(canonical_tree_code(
        &g.neighbor_lists(),
    )))
}

/// Canonical code for an unlabeled tree given as neighbor lists.
///
/// The caller guarantees the input is a tree.
pub(crate) fn canonical_tree_code(adj: &[Vec<usize>]) -> String {
    let n = adj.len();
    if n == 1 {
        return "C".to_string();
    }
    let (order, parent) = dfs_order(adj, 0);
    let mut size = vec![1usize; n];
    for &v in order.iter().rev() {
        if let Some(p) = parent[v] {
            size[p] += size[v];
        }
    }
    let mut centroids = Vec::with_capacity(2);
    for v in 0..n {
        let mut heaviest = n - size[v];
        for &u in &adj[v] {
            if parent[u] == Some(v) {
                heaviest = heaviest.max(size[u]);
            }
        }
        if heaviest * 2 <= n {
            centroids.push(v);
        }
    }
    debug_assert!(matches!(centroids.len(), 1 | 2));
    centroids
        .into_iter()
        .map(|root| rooted_code(adj, root))
        .min()
        .expect("every tree has a centroid")
}

fn dfs_order(adj: &[Vec<usize>], root: usize) -> (Vec<usize>, Vec<Option<usize>>) {
    let n = adj.len();
    let mut parent = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut stack = vec![root];
    visited[root] = true;
    while let Some(v) = stack.pop() {
        order.push(v);
        for &u in &adj[v] {
            if !visited[u] {
                visited[u] = true;
                parent[u] = Some(v);
                stack.push(u);
            }
        }
    }
    (order, parent)
}

fn rooted_code(adj: &[Vec<usize>], root: usize) -> String {
    let (order, parent) = dfs_order(adj, root);
    let mut codes: Vec<String> = vec![String::new(); adj.len()];
    let mut children: Vec<String> = Vec::with_capacity(4);
    for &v in order.iter().rev() {
        children.clear();
        for &u in &adj[v] {
            if parent[u] == Some(v) {
                children.push(std::mem::take(&mut codes[u]));
            }
        }
        children.sort_unstable();
        let len = 1 + children.iter().map(|c| c.len() + 2).sum::<usize>();
        let mut code = String::with_capacity(len);
        code.push('C');
        if let Some((last, rest)) = children.split_last() {
            for c in rest {
                code.push('(');
                code.push_str(c);
                code.push(')');
            }
            code.push_str(last);
        }
        codes[v] = code;
    }
    std::mem::take(&mut codes[root])
}
