//! Marginalized graph kernel.
//!
//! Two graphs are compared through simultaneous random walks: a walk starts
//! at every vertex with weight `start_weight`, stops with probability `q` at
//! each step and otherwise moves to a uniformly chosen neighbor. Every pair
//! of equal-length walks contributes the product of its vertex and edge
//! similarities. The infinite sum is evaluated as the fixed point of a
//! contraction on the vertex-pair product space, then normalized.

mod cache;
mod matrix;
mod raw;

pub use cache::KernelCache;
pub use matrix::{kernel_matrix, KernelMatrix, MgkKernel};
pub use raw::{mgk_raw, mgk_raw_with_stats, FixedPointStats};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::molspace::{Atom, Bond, MolecularGraph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgkHyperparameters {
    /// Stopping probability at every vertex.
    pub q: f64,
    /// Starting weight of every vertex.
    pub start_weight: f64,
    /// Off-diagonal value of the element delta kernel.
    pub delta_element: f64,
    /// Off-diagonal value of the heavy-degree delta kernel.
    pub delta_degree: f64,
    /// Off-diagonal value of the bond-order delta kernel.
    pub delta_bond_order: f64,
    /// Scale of the self-kernel mismatch penalty; infinity disables it.
    pub lambda: f64,
    pub fp_tolerance: f64,
    pub fp_max_iters: usize,
}

impl Default for MgkHyperparameters {
    fn default() -> Self {
        MgkHyperparameters {
            q: 0.05,
            start_weight: 1.0,
            delta_element: 0.3,
            delta_degree: 0.9,
            delta_bond_order: 0.9,
            lambda: f64::INFINITY,
            fp_tolerance: 1e-10,
            fp_max_iters: 2000,
        }
    }
}

impl MgkHyperparameters {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        open_unit("q", self.q)?;
        open_unit("delta_element", self.delta_element)?;
        open_unit("delta_degree", self.delta_degree)?;
        open_unit("delta_bond_order", self.delta_bond_order)?;
        if !(self.start_weight > 0.0 && self.start_weight.is_finite()) {
            return Err(Error::Config("start_weight must be positive".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config("lambda must be positive (or inf)".into()));
        }
        if !(self.fp_tolerance > 0.0) {
            return Err(Error::Config("fp_tolerance must be positive".into()));
        }
        if self.fp_max_iters == 0 {
            return Err(Error::Config("fp_max_iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Stable digest of every value that affects kernel entries.
    pub fn fingerprint(&self) -> String {
        let text = format!(
            "q={:e};ps={:e};de={:e};dd={:e};db={:e};lambda={:e};tol={:e};iters={}",
            self.q,
            self.start_weight,
            self.delta_element,
            self.delta_degree,
            self.delta_bond_order,
            self.lambda,
            self.fp_tolerance,
            self.fp_max_iters
        );
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[inline]
fn delta<T: PartialEq>(a: T, b: T, off: f64) -> f64 {
    if a == b {
        1.0
    } else {
        off
    }
}

/// Product of Kronecker-delta kernels over (element, heavy degree).
pub fn vertex_kernel(a: &Atom, b: &Atom, p: &MgkHyperparameters) -> f64 {
    delta(a.element, b.element, p.delta_element) * delta(a.heavy_degree, b.heavy_degree, p.delta_degree)
}

/// Kronecker-delta kernel over bond order.
pub fn edge_kernel(a: &Bond, b: &Bond, p: &MgkHyperparameters) -> f64 {
    delta(a.order, b.order, p.delta_bond_order)
}

/// Normalizes a raw cross kernel by the two self kernels.
pub fn normalize(k12: f64, k11: f64, k22: f64, lambda: f64) -> f64 {
    let cosine = k12 / (k11 * k22).sqrt();
    let gap = (k11 - k22) / lambda;
    cosine * (-gap * gap).exp()
}

/// Normalized kernel: equals 1 for isomorphic inputs and lies in `[0, 1]`.
pub fn mgk_normalized(
    g1: &MolecularGraph,
    g2: &MolecularGraph,
    p: &MgkHyperparameters,
) -> Result<f64> {
    let k12 = mgk_raw(g1, g2, p)?;
    let k11 = mgk_raw(g1, g1, p)?;
    let k22 = mgk_raw(g2, g2, p)?;
    Ok(normalize(k12, k11, k22, p.lambda))
}
