//! Reference implementations written without reusing the crate's algorithms.

use std::collections::BTreeSet;

use alms_core::mgk::MgkHyperparameters;
use alms_core::molspace::MolecularGraph;

/// Rooted-tree code: `(` + sorted child codes + `)`.
fn rooted(adj: &[Vec<usize>], v: usize, parent: usize) -> String {
    let mut kids: Vec<String> = adj[v]
        .iter()
        .filter(|&&u| u != parent)
        .map(|&u| rooted(adj, u, v))
        .collect();
    kids.sort();
    format!("({})", kids.concat())
}

/// One or two central vertices, found by repeatedly stripping leaves.
fn centers(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut layer: Vec<usize> = (0..n).filter(|&v| degree[v] <= 1).collect();
    let mut left = n;
    while left > 2 {
        left -= layer.len();
        let mut next = Vec::new();
        for &v in &layer {
            for &u in &adj[v] {
                degree[u] -= 1;
                if degree[u] == 1 {
                    next.push(u);
                }
            }
        }
        layer = next;
    }
    layer
}

/// Isomorphism-class code of a free tree: the smallest rooted code over its centers.
pub fn tree_code(adj: &[Vec<usize>]) -> String {
    centers(adj)
        .into_iter()
        .map(|r| rooted(adj, r, usize::MAX))
        .min()
        .expect("non-empty tree")
}

pub fn graph_code(g: &MolecularGraph) -> String {
    let adj: Vec<Vec<usize>> = (0..g.n_atoms())
        .map(|v| g.neighbors(v).iter().map(|&(u, _)| u).collect())
        .collect();
    tree_code(&adj)
}

/// Every labeled tree on `n` vertices, decoded from its Prüfer sequence,
/// keeping those with maximum degree 4; returns the distinct class codes.
pub fn brute_force_alkane_codes(n: usize) -> BTreeSet<String> {
    let mut codes = BTreeSet::new();
    if n == 1 {
        codes.insert("()".to_string());
        return codes;
    }
    if n == 2 {
        codes.insert(tree_code(&[vec![1], vec![0]]));
        return codes;
    }
    let len = n - 2;
    let mut seq = vec![0usize; len];
    loop {
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        if degree.iter().all(|&d| d <= 4) {
            let mut adj = vec![Vec::new(); n];
            let mut deg = degree.clone();
            for &s in &seq {
                let leaf = (0..n).find(|&v| deg[v] == 1).expect("leaf exists");
                adj[leaf].push(s);
                adj[s].push(leaf);
                deg[leaf] -= 1;
                deg[s] -= 1;
            }
            let rest: Vec<usize> = (0..n).filter(|&v| deg[v] == 1).collect();
            adj[rest[0]].push(rest[1]);
            adj[rest[1]].push(rest[0]);
            codes.insert(tree_code(&adj));
        }
        // next sequence in base n
        let mut i = 0;
        loop {
            if i == len {
                return codes;
            }
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
    }
}

fn vertex_sim(g1: &MolecularGraph, v: usize, g2: &MolecularGraph, w: usize, p: &MgkHyperparameters) -> f64 {
    let (a, b) = (g1.atoms()[v], g2.atoms()[w]);
    let mut k = 1.0;
    if a.element != b.element {
        k *= p.delta_element;
    }
    if a.heavy_degree != b.heavy_degree {
        k *= p.delta_degree;
    }
    k
}

fn edge_sim(g1: &MolecularGraph, e: usize, g2: &MolecularGraph, f: usize, p: &MgkHyperparameters) -> f64 {
    if g1.bonds()[e].order == g2.bonds()[f].order {
        1.0
    } else {
        p.delta_bond_order
    }
}

/// Sum over all pairs of simultaneous walks visiting at most `max_vertices`
/// vertices, accumulated forward by walk length.
pub fn walk_sum_forward(g1: &MolecularGraph, g2: &MolecularGraph, p: &MgkHyperparameters, max_vertices: usize) -> f64 {
    let (n1, n2) = (g1.n_atoms(), g2.n_atoms());
    let mut f = vec![vec![0.0; n2]; n1];
    for v in 0..n1 {
        for w in 0..n2 {
            f[v][w] = p.start_weight * p.start_weight * vertex_sim(g1, v, g2, w, p);
        }
    }
    let mut total = 0.0;
    for _ in 0..max_vertices {
        total += p.q * p.q * f.iter().flatten().sum::<f64>();
        let mut next = vec![vec![0.0; n2]; n1];
        for v in 0..n1 {
            for w in 0..n2 {
                if f[v][w] == 0.0 {
                    continue;
                }
                let (nv, nw) = (g1.neighbors(v), g2.neighbors(w));
                for &(u, e) in nv {
                    for &(x, b) in nw {
                        let pt = (1.0 - p.q) / nv.len() as f64 * (1.0 - p.q) / nw.len() as f64;
                        next[u][x] += f[v][w] * pt * vertex_sim(g1, u, g2, x, p) * edge_sim(g1, e, g2, b, p);
                    }
                }
            }
        }
        f = next;
    }
    total
}

/// The same sum by listing every walk of each graph explicitly; exponential,
/// so only for short walks.
pub fn walk_sum_explicit(g1: &MolecularGraph, g2: &MolecularGraph, p: &MgkHyperparameters, max_vertices: usize) -> f64 {
    // (vertices, bonds, probability of taking exactly these steps)
    fn walks(g: &MolecularGraph, q: f64, ps: f64, max: usize) -> Vec<Vec<(Vec<usize>, Vec<usize>, f64)>> {
        let mut by_len = vec![Vec::new(); max + 1];
        let mut frontier: Vec<(Vec<usize>, Vec<usize>, f64)> =
            (0..g.n_atoms()).map(|v| (vec![v], vec![], ps)).collect();
        for len in 1..=max {
            by_len[len] = frontier.clone();
            let mut next = Vec::new();
            for (vs, es, pr) in &frontier {
                let last = *vs.last().unwrap();
                let nb = g.neighbors(last);
                for &(u, e) in nb {
                    let mut vs2 = vs.clone();
                    vs2.push(u);
                    let mut es2 = es.clone();
                    es2.push(e);
                    next.push((vs2, es2, pr * (1.0 - q) / nb.len() as f64));
                }
            }
            frontier = next;
        }
        by_len
    }
    let w1 = walks(g1, p.q, p.start_weight, max_vertices);
    let w2 = walks(g2, p.q, p.start_weight, max_vertices);
    let mut total = 0.0;
    for len in 1..=max_vertices {
        for (v1, e1, p1) in &w1[len] {
            for (v2, e2, p2) in &w2[len] {
                let mut k = p1 * p2 * p.q * p.q;
                for (&a, &b) in v1.iter().zip(v2) {
                    k *= vertex_sim(g1, a, g2, b, p);
                }
                for (&a, &b) in e1.iter().zip(e2) {
                    k *= edge_sim(g1, a, g2, b, p);
                }
                total += k;
            }
        }
    }
    total
}
