//! Exact Gaussian-process regression.
//!
//! Targets are standardized before fitting, so the posterior variance is on
//! the unit-prior scale whenever the kernel has a unit diagonal.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky};
use crate::mgk::MgkHyperparameters;

/// Covariance function over inputs of type `X`.
pub trait Kernel<X>: Sync {
    /// `rows × cols` covariance block.
    fn block(&self, rows: &[X], cols: &[X]) -> Result<DMatrix<f64>>;

    /// Prior variances `k(x, x)`.
    fn diag(&self, xs: &[X]) -> Result<Vec<f64>>;
}

impl<X, K: Kernel<X> + ?Sized> Kernel<X> for &K {
    fn block(&self, rows: &[X], cols: &[X]) -> Result<DMatrix<f64>> {
        (**self).block(rows, cols)
    }

    fn diag(&self, xs: &[X]) -> Result<Vec<f64>> {
        (**self).diag(xs)
    }
}

impl<X, K: Kernel<X> + Send + ?Sized> Kernel<X> for Arc<K> {
    fn block(&self, rows: &[X], cols: &[X]) -> Result<DMatrix<f64>> {
        (**self).block(rows, cols)
    }

    fn diag(&self, xs: &[X]) -> Result<Vec<f64>> {
        (**self).diag(xs)
    }
}

/// A molecule (by kernel table index) at a temperature in Kelvin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MolTemp {
    pub mol: usize,
    pub temperature: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeKernelConfig {
    pub mgk_params: MgkHyperparameters,
    /// Length scale of the squared-exponential temperature factor, K.
    pub temperature_length_scale: f64,
}

impl CompositeKernelConfig {
    pub fn validate(&self) -> Result<()> {
        self.mgk_params.validate()?;
        if !(self.temperature_length_scale > 0.0) {
            return Err(Error::Config("temperature_length_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Molecular kernel times `exp(-(T - T')² / (2 ℓ²))`.
#[derive(Clone, Debug)]
pub struct CompositeKernel<K> {
    pub molecular: K,
    pub length_scale: f64,
}

impl<K: Kernel<usize>> Kernel<MolTemp> for CompositeKernel<K> {
    fn block(&self, rows: &[MolTemp], cols: &[MolTemp]) -> Result<DMatrix<f64>> {
        let (row_mols, row_pos) = unique_mols(rows);
        let (col_mols, col_pos) = unique_mols(cols);
        let mol = self.molecular.block(&row_mols, &col_mols)?;
        let scale = -0.5 / (self.length_scale * self.length_scale);
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            let dt = rows[i].temperature - cols[j].temperature;
            mol[(row_pos[i], col_pos[j])] * (scale * dt * dt).exp()
        }))
    }

    fn diag(&self, xs: &[MolTemp]) -> Result<Vec<f64>> {
        let mols: Vec<usize> = xs.iter().map(|x| x.mol).collect();
        self.molecular.diag(&mols)
    }
}

fn unique_mols(xs: &[MolTemp]) -> (Vec<usize>, Vec<usize>) {
    let mut mols: Vec<usize> = xs.iter().map(|x| x.mol).collect();
    mols.sort_unstable();
    mols.dedup();
    let pos = xs
        .iter()
        .map(|x| mols.binary_search(&x.mol).expect("present"))
        .collect();
    (mols, pos)
}

const JITTER_START: f64 = 1e-10;
const JITTER_GROWTH: f64 = 10.0;
const JITTER_RETRIES: usize = 5;
const PREDICT_CHUNK: usize = 512;

/// Fitted Gaussian process.
#[derive(Debug)]
pub struct GprModel<X, K> {
    kernel: K,
    training: Vec<X>,
    chol: Arc<Cholesky>,
    alpha: Vec<f64>,
    noise: f64,
    jitter: f64,
    y_mean: f64,
    y_std: f64,
    clamped: AtomicUsize,
}

/// Cholesky factor of `K + (noise + jitter) I`, escalating jitter on failure.
pub(crate) fn factor_with_jitter(k: &DMatrix<f64>, noise: f64) -> Result<(Cholesky, f64)> {
    let n = k.nrows();
    let attempt = |extra: f64| {
        Cholesky::factor(n, |i, j| {
            if i == j {
                k[(i, j)] + extra
            } else {
                k[(i, j)]
            }
        })
    };
    if let Ok(chol) = attempt(noise) {
        return Ok((chol, 0.0));
    }
    let mut jitter = JITTER_START;
    for _ in 0..JITTER_RETRIES {
        if let Ok(chol) = attempt(noise + jitter) {
            log::debug!("Cholesky needed jitter {jitter:e}");
            return Ok((chol, jitter));
        }
        jitter *= JITTER_GROWTH;
    }
    Err(Error::Factorization {
        jitter: jitter / JITTER_GROWTH,
    })
}

fn standardization(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 0.0 && std.is_finite() {
        (mean, std)
    } else {
        (mean, 1.0)
    }
}

fn factor_training<X, K: Kernel<X>>(
    kernel: &K,
    inputs: &[X],
    targets: &[&[f64]],
    noise: f64,
) -> Result<(Cholesky, f64)> {
    if inputs.is_empty() {
        return Err(Error::invalid("GPR needs at least one training point"));
    }
    if !(noise >= 0.0) {
        return Err(Error::invalid(format!("noise must be non-negative, got {noise}")));
    }
    for t in targets {
        if t.len() != inputs.len() {
            return Err(Error::invalid(format!(
                "{} targets for {} inputs",
                t.len(),
                inputs.len()
            )));
        }
    }
    let k = kernel.block(inputs, inputs)?;
    let k = (&k + k.transpose()) * 0.5;
    factor_with_jitter(&k, noise)
}

impl<X: Clone + Sync, K: Kernel<X>> GprModel<X, K> {
    pub fn fit(kernel: K, inputs: Vec<X>, targets: &[f64], noise: f64) -> Result<Self> {
        let (chol, jitter) = factor_training(&kernel, &inputs, &[targets], noise)?;
        Ok(GprModel::assemble(kernel, inputs, Arc::new(chol), jitter, targets, noise))
    }

    /// Fits one model per target vector, sharing a single factorization.
    pub fn fit_many(kernel: K, inputs: Vec<X>, targets: &[&[f64]], noise: f64) -> Result<Vec<Self>>
    where
        K: Clone,
    {
        let (chol, jitter) = factor_training(&kernel, &inputs, targets, noise)?;
        let chol = Arc::new(chol);
        Ok(targets
            .iter()
            .map(|y| {
                GprModel::assemble(kernel.clone(), inputs.clone(), Arc::clone(&chol), jitter, y, noise)
            })
            .collect())
    }

    fn assemble(
        kernel: K,
        training: Vec<X>,
        chol: Arc<Cholesky>,
        jitter: f64,
        y: &[f64],
        noise: f64,
    ) -> Self {
        let (y_mean, y_std) = standardization(y);
        let z: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();
        GprModel {
            kernel,
            training,
            alpha: chol.solve(&z),
            chol,
            noise,
            jitter,
            y_mean,
            y_std,
            clamped: AtomicUsize::new(0),
        }
    }

    pub fn training_inputs(&self) -> &[X] {
        &self.training
    }

    pub fn dual_weights(&self) -> &[f64] {
        &self.alpha
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Jitter added on top of `noise` to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn y_std(&self) -> f64 {
        self.y_std
    }

    /// Number of negative variances clamped to zero so far.
    pub fn clamped_variances(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Posterior mean in target units.
    pub fn predict_mean(&self, queries: &[X]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(PREDICT_CHUNK) {
            let k_sq = self.kernel.block(&self.training, chunk)?;
            out.extend(
                k_sq.column_iter()
                    .map(|col| dot(col.as_slice(), &self.alpha) * self.y_std + self.y_mean),
            );
        }
        Ok(out)
    }

    /// Posterior variance on the standardized scale, clamped at zero.
    pub fn predict_variance(&self, queries: &[X]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(PREDICT_CHUNK) {
            let k_sq = self.kernel.block(&self.training, chunk)?;
            let prior = self.kernel.diag(chunk)?;
            let vars: Vec<f64> = (0..chunk.len())
                .into_par_iter()
                .map(|j| {
                    let v = self.chol.solve_lower(k_sq.column(j).as_slice());
                    prior[j] - dot(&v, &v)
                })
                .collect();
            for v in vars {
                if v < 0.0 {
                    self.clamped.fetch_add(1, Ordering::Relaxed);
                    out.push(0.0);
                } else {
                    out.push(v);
                }
            }
        }
        Ok(out)
    }
}
