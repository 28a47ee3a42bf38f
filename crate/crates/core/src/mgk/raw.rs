use super::{edge_kernel, vertex_kernel, MgkHyperparameters};
use crate::error::{Error, Result};
use crate::molspace::MolecularGraph;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointStats {
    pub iterations: usize,
    /// Max-norm of the last update.
    pub residual: f64,
}

/// Unnormalized marginalized graph kernel.
pub fn mgk_raw(g1: &MolecularGraph, g2: &MolecularGraph, p: &MgkHyperparameters) -> Result<f64> {
    mgk_raw_with_stats(g1, g2, p).map(|(k, _)| k)
}

pub fn mgk_raw_with_stats(
    g1: &MolecularGraph,
    g2: &MolecularGraph,
    p: &MgkHyperparameters,
) -> Result<(f64, FixedPointStats)> {
    let n1 = g1.n_atoms();
    let n2 = g2.n_atoms();
    let m = n1 * n2;
    let stop2 = p.q * p.q;
    let walk = 1.0 - p.q;

    let mut vertex = vec![0.0; m];
    for (v, a) in g1.atoms().iter().enumerate() {
        for (w, b) in g2.atoms().iter().enumerate() {
            vertex[v * n2 + w] = vertex_kernel(a, b, p);
        }
    }

    // Sparse transition operator on vertex pairs, rows = (v, v').
    let nnz: usize = 4 * g1.bonds().len() * g2.bonds().len();
    let mut offsets = Vec::with_capacity(m + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut weights = Vec::with_capacity(nnz);
    offsets.push(0);
    for v in 0..n1 {
        let nv = g1.neighbors(v);
        for w in 0..n2 {
            let nw = g2.neighbors(w);
            if !nv.is_empty() && !nw.is_empty() {
                let step = walk * walk / (nv.len() * nw.len()) as f64;
                for &(u, e) in nv {
                    for &(x, f) in nw {
                        let target = u * n2 + x;
                        let ke = edge_kernel(&g1.bonds()[e], &g2.bonds()[f], p);
                        cols.push(target as u32);
                        weights.push(step * vertex[target] * ke);
                    }
                }
            }
            offsets.push(cols.len());
        }
    }

    let mut r = vec![stop2; m];
    let mut next = vec![0.0; m];
    let mut stats = FixedPointStats {
        iterations: 0,
        residual: f64::INFINITY,
    };
    let mut converged = false;
    for it in 1..=p.fp_max_iters {
        let mut update = 0.0f64;
        for i in 0..m {
            let mut s = stop2;
            for k in offsets[i]..offsets[i + 1] {
                s += weights[k] * r[cols[k] as usize];
            }
            update = update.max((s - r[i]).abs());
            next[i] = s;
        }
        std::mem::swap(&mut r, &mut next);
        stats = FixedPointStats {
            iterations: it,
            residual: update,
        };
        if update < p.fp_tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: stats.iterations,
            residual: stats.residual,
        });
    }

    let start2 = p.start_weight * p.start_weight;
    let k = vertex
        .iter()
        .zip(&r)
        .map(|(kv, rv)| start2 * kv * rv)
        .sum();
    Ok((k, stats))
}
