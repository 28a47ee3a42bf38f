use std::collections::HashSet;

use rayon::prelude::*;

use super::canon::canonical_tree_code;
use super::graph::MolecularGraph;
use super::smiles::{parse_smiles, CanonicalSmiles};
use crate::error::{Error, Result};

/// Largest carbon count `enumerate_alkanes` accepts (2,278,658 isomers at 22).
pub const MAX_CARBONS_LIMIT: usize = 22;

/// One canonical representative per alkane isomer with `min_n..=max_n`
/// carbons, sorted by carbon count and then canonical string.
pub fn enumerate_alkanes(min_n: usize, max_n: usize) -> Result<Vec<MolecularGraph>> {
    Ok(enumerate_canonical(min_n, max_n)?
        .iter()
        .map(CanonicalSmiles::to_graph)
        .collect())
}

/// Same as [`enumerate_alkanes`] but returns the canonical strings only.
pub fn enumerate_canonical(min_n: usize, max_n: usize) -> Result<Vec<CanonicalSmiles>> {
    enumerate_with_limit(min_n, max_n, MAX_CARBONS_LIMIT)
}

pub fn enumerate_with_limit(
    min_n: usize,
    max_n: usize,
    limit: usize,
) -> Result<Vec<CanonicalSmiles>> {
    if min_n < 1 || min_n > max_n {
        return Err(Error::InvalidRange {
            min: min_n,
            max: max_n,
        });
    }
    if max_n > limit {
        return Err(Error::EnumerationLimit {
            requested: max_n,
            limit,
        });
    }
    let mut out = Vec::new();
    let mut level = vec!["C".to_string()];
    for n in 1..=max_n {
        if n > 1 {
            level = grow_level(&level);
        }
        if n >= min_n {
            out.extend(level.iter().cloned().map(CanonicalSmiles::from_canonical));
        }
        log::debug!("enumerated {} alkanes with {n} carbons", level.len());
    }
    Ok(out)
}

/// Adds one carbon to every attachable position of every parent.
fn grow_level(parents: &[String]) -> Vec<String> {
    let children: HashSet<String> = parents
        .par_iter()
        .fold(HashSet::new, |mut acc, parent| {
            let mut adj = parse_smiles(parent)
                .expect("canonical strings parse")
                .neighbor_lists();
            let leaf = adj.len();
            adj.push(Vec::with_capacity(1));
            for v in 0..leaf {
                if adj[v].len() >= 4 {
                    continue;
                }
                adj[v].push(leaf);
                adj[leaf].push(v);
                acc.insert(canonical_tree_code(&adj));
                adj[v].pop();
                adj[leaf].clear();
            }
            acc
        })
        .reduce(HashSet::new, |mut a, b| {
            if a.len() < b.len() {
                return reduce_into(b, a);
            }
            a.extend(b);
            a
        });
    let mut level: Vec<String> = children.into_iter().collect();
    level.par_sort_unstable();
    level
}

fn reduce_into(mut big: HashSet<String>, small: HashSet<String>) -> HashSet<String> {
    big.extend(small);
    big
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        let counts: Vec<usize> = (1..=10)
            .map(|n| enumerate_canonical(n, n).unwrap().len())
            .collect();
        assert_eq!(counts, [1, 1, 1, 2, 3, 5, 9, 18, 35, 75]);
    }

    #[test]
    fn output_is_sorted_by_size_then_string() {
        let all = enumerate_canonical(4, 7).unwrap();
        assert_eq!(all.len(), 2 + 3 + 5 + 9);
        for pair in all.windows(2) {
            let a = (pair[0].n_carbons(), pair[0].as_str());
            let b = (pair[1].n_carbons(), pair[1].as_str());
            assert!(a < b, "{a:?} !< {b:?}");
        }
    }

    #[test]
    fn range_errors() {
        assert!(matches!(
            enumerate_canonical(0, 3),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            enumerate_canonical(5, 4),
            Err(Error::InvalidRange { .. })
        ));
        assert!(matches!(
            enumerate_canonical(4, MAX_CARBONS_LIMIT + 1),
            Err(Error::EnumerationLimit { .. })
        ));
        assert!(matches!(
            enumerate_with_limit(4, 10, 9),
            Err(Error::EnumerationLimit { limit: 9, .. })
        ));
    }

    #[test]
    fn graphs_are_alkane_trees() {
        for g in enumerate_alkanes(1, 8).unwrap() {
            assert!(g.is_alkane());
            for a in g.atoms() {
                assert!((1..=4).contains(&a.heavy_degree) || g.n_atoms() == 1);
                assert_eq!(a.h_count, 4 - a.heavy_degree);
            }
        }
    }
}
