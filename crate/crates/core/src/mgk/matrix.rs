use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{mgk_raw, normalize, KernelCache, MgkHyperparameters};
use crate::error::{Error, Result};
use crate::gpr::Kernel;
use crate::molspace::{to_canonical_smiles, CanonicalSmiles, MolecularGraph};

/// Normalized MGK over a fixed table of molecules, addressed by table index.
#[derive(Debug)]
pub struct MgkKernel {
    params: MgkHyperparameters,
    molecules: Vec<CanonicalSmiles>,
    graphs: Vec<MolecularGraph>,
    index: HashMap<CanonicalSmiles, usize>,
    self_raw: Vec<OnceLock<f64>>,
    cache: Arc<KernelCache>,
}

impl MgkKernel {
    pub fn new(molecules: Vec<CanonicalSmiles>, params: MgkHyperparameters) -> Result<Self> {
        let cache = Arc::new(KernelCache::new(&params));
        MgkKernel::with_cache(molecules, params, cache)
    }

    pub fn with_cache(
        molecules: Vec<CanonicalSmiles>,
        params: MgkHyperparameters,
        cache: Arc<KernelCache>,
    ) -> Result<Self> {
        params.validate()?;
        if cache.fingerprint() != params.fingerprint() {
            return Err(Error::invalid("kernel cache belongs to other hyperparameters"));
        }
        let graphs = molecules.iter().map(CanonicalSmiles::to_graph).collect();
        let mut index = HashMap::with_capacity(molecules.len());
        for (i, m) in molecules.iter().enumerate() {
            index.entry(m.clone()).or_insert(i);
        }
        let self_raw = (0..molecules.len()).map(|_| OnceLock::new()).collect();
        Ok(MgkKernel {
            params,
            molecules,
            graphs,
            index,
            self_raw,
            cache,
        })
    }

    pub fn from_graphs(graphs: &[MolecularGraph], params: MgkHyperparameters) -> Result<Self> {
        let molecules = graphs
            .iter()
            .map(to_canonical_smiles)
            .collect::<Result<Vec<_>, _>>()?;
        MgkKernel::new(molecules, params)
    }

    pub fn params(&self) -> &MgkHyperparameters {
        &self.params
    }

    pub fn molecules(&self) -> &[CanonicalSmiles] {
        &self.molecules
    }

    pub fn len(&self) -> usize {
        self.molecules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molecules.is_empty()
    }

    pub fn index_of(&self, smiles: &CanonicalSmiles) -> Option<usize> {
        self.index.get(smiles).copied()
    }

    pub fn cache(&self) -> &Arc<KernelCache> {
        &self.cache
    }

    fn self_kernel(&self, i: usize) -> Result<f64> {
        if let Some(&k) = self.self_raw[i].get() {
            return Ok(k);
        }
        let k = mgk_raw(&self.graphs[i], &self.graphs[i], &self.params)?;
        Ok(*self.self_raw[i].get_or_init(|| k))
    }

    /// Normalized kernel between table entries `i` and `j`.
    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        let (a, b) = (self.molecules[i].as_str(), self.molecules[j].as_str());
        if a == b {
            return Ok(1.0);
        }
        if let Some(v) = self.cache.get(a, b) {
            return Ok(v);
        }
        // fixed argument order so the cached value does not depend on call order
        let (lo, hi) = if a < b { (i, j) } else { (j, i) };
        let k12 = mgk_raw(&self.graphs[lo], &self.graphs[hi], &self.params)?;
        let v = normalize(k12, self.self_kernel(i)?, self.self_kernel(j)?, self.params.lambda);
        self.cache.insert(a, b, v);
        Ok(v)
    }

    /// Fills the cache for every pair of table entries.
    pub fn precompute_all(&self) -> Result<()> {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..n).map(move |j| (i, j)))
            .try_for_each(|(i, j)| self.entry(i, j).map(|_| ()))
    }

    /// Labeled kernel matrix between two index lists.
    pub fn matrix(&self, rows: &[usize], cols: &[usize]) -> Result<KernelMatrix> {
        let mut values = self.block(rows, cols)?;
        if rows == cols {
            values = (&values + values.transpose()) * 0.5;
        }
        Ok(KernelMatrix {
            values,
            rows: rows.iter().map(|&i| self.molecules[i].clone()).collect(),
            cols: cols.iter().map(|&j| self.molecules[j].clone()).collect(),
        })
    }
}

impl Kernel<usize> for MgkKernel {
    fn block(&self, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
        let nc = cols.len();
        let flat: Vec<f64> = (0..rows.len() * nc)
            .into_par_iter()
            .map(|k| self.entry(rows[k / nc], cols[k % nc]))
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_row_slice(rows.len(), nc, &flat))
    }

    fn diag(&self, xs: &[usize]) -> Result<Vec<f64>> {
        Ok(vec![1.0; xs.len()])
    }
}

/// Dense normalized kernel matrix with its row and column molecule labels.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<f64>,
    pub rows: Vec<CanonicalSmiles>,
    pub cols: Vec<CanonicalSmiles>,
}

impl KernelMatrix {
    pub fn max_asymmetry(&self) -> f64 {
        (&self.values - self.values.transpose()).amax()
    }

    pub fn max_diagonal_error(&self) -> f64 {
        self.values
            .diagonal()
            .iter()
            .map(|d| (d - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of a square matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        assert!(self.values.is_square(), "eigenvalues need a square matrix");
        self.values
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Normalized kernel matrix between two molecule lists.
pub fn kernel_matrix(
    list_a: &[CanonicalSmiles],
    list_b: &[CanonicalSmiles],
    params: &MgkHyperparameters,
    cache: &Arc<KernelCache>,
) -> Result<KernelMatrix> {
    if list_a.is_empty() || list_b.is_empty() {
        return Err(Error::invalid("kernel_matrix needs non-empty lists"));
    }
    let mut table: Vec<CanonicalSmiles> = list_a.to_vec();
    table.extend_from_slice(list_b);
    let kernel = MgkKernel::with_cache(table, params.clone(), Arc::clone(cache))?;
    let rows: Vec<usize> = (0..list_a.len()).collect();
    let cols: Vec<usize> = if list_a == list_b {
        rows.clone()
    } else {
        (list_a.len()..list_a.len() + list_b.len()).collect()
    };
    kernel.matrix(&rows, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mgk::mgk_normalized;
    use crate::molspace::enumerate_canonical;

    #[test]
    fn entries_match_free_function() {
        let mols = enumerate_canonical(4, 6).unwrap();
        let p = MgkHyperparameters::default();
        let k = MgkKernel::new(mols.clone(), p.clone()).unwrap();
        for i in 0..mols.len() {
            for j in 0..mols.len() {
                let direct = mgk_normalized(&mols[i].to_graph(), &mols[j].to_graph(), &p).unwrap();
                assert!((k.entry(i, j).unwrap() - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_list_matrix_is_symmetric_with_unit_diagonal() {
        let mols = enumerate_canonical(4, 7).unwrap();
        let cache = Arc::new(KernelCache::new(&MgkHyperparameters::default()));
        let m = kernel_matrix(&mols, &mols, &MgkHyperparameters::default(), &cache).unwrap();
        assert_eq!(m.values.shape(), (mols.len(), mols.len()));
        assert!(m.max_asymmetry() < 1e-12);
        assert!(m.max_diagonal_error() < 1e-10);
        assert!(m.min_eigenvalue() > -1e-8);
        assert!(!cache.is_empty());
    }

    #[test]
    fn permutation_permutes_matrix() {
        let mols = enumerate_canonical(5, 6).unwrap();
        let p = MgkHyperparameters::default();
        let cache = Arc::new(KernelCache::new(&p));
        let m = kernel_matrix(&mols, &mols, &p, &cache).unwrap();
        let perm: Vec<usize> = (0..mols.len()).rev().collect();
        let shuffled: Vec<_> = perm.iter().map(|&i| mols[i].clone()).collect();
        let fresh = Arc::new(KernelCache::new(&p));
        let ms = kernel_matrix(&shuffled, &shuffled, &p, &fresh).unwrap();
        for (a, &i) in perm.iter().enumerate() {
            for (b, &j) in perm.iter().enumerate() {
                assert_eq!(ms.values[(a, b)], m.values[(i, j)]);
            }
        }
    }

    #[test]
    fn rectangular_blocks() {
        let a = enumerate_canonical(4, 4).unwrap();
        let b = enumerate_canonical(5, 5).unwrap();
        let p = MgkHyperparameters::default();
        let cache = Arc::new(KernelCache::new(&p));
        let m = kernel_matrix(&a, &b, &p, &cache).unwrap();
        assert_eq!(m.values.shape(), (2, 3));
        assert_eq!(m.rows, a);
        assert_eq!(m.cols, b);
        assert!(kernel_matrix(&[], &b, &p, &cache).is_err());
    }

    #[test]
    fn rejects_foreign_cache() {
        let p = MgkHyperparameters::default();
        let cache = Arc::new(KernelCache::new(&MgkHyperparameters { q: 0.3, ..p.clone() }));
        assert!(MgkKernel::with_cache(vec![], p, cache).is_err());
    }
}
