//! Shared fixtures for the criterion benchmarks.

use alms_core::molspace::{enumerate_canonical, CanonicalSmiles};
use alms_core::MgkKernel;

/// Every alkane with `min..=max` carbons.
pub fn molecules(min: usize, max: usize) -> Vec<CanonicalSmiles> {
    enumerate_canonical(min, max).expect("valid carbon range")
}

/// Kernel over C4..=`max` with the experiment hyperparameters.
pub fn experiment_kernel(max: usize) -> MgkKernel {
    let params = alms_core::MgkHyperparameters {
        q: 0.2,
        lambda: 1.0,
        ..Default::default()
    };
    MgkKernel::new(molecules(4, max), params).expect("valid hyperparameters")
}
