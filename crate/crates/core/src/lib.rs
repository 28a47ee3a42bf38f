//! Chemical-space exploration for acyclic alkanes.
//!
//! The crate is organised after the workflow it implements:
//!
//! * [`molspace`] parses, canonicalizes and enumerates alkane trees;
//! * [`mgk`] evaluates the marginalized graph kernel between molecules;
//! * [`gpr`] fits exact Gaussian-process regressors over any [`gpr::Kernel`];
//! * [`active_learning`] selects a representative training subset by
//!   uncertainty-driven exploration;
//! * [`thermo`] is a deterministic synthetic property oracle with the
//!   heat-capacity and vaporization-enthalpy combiners and QC gates;
//! * [`pipeline`] ties the stages together and evaluates predictions.

pub mod active_learning;
pub mod config;
pub mod error;
pub mod gpr;
pub mod linalg;
pub mod mgk;
pub mod molspace;
pub mod pipeline;
pub mod thermo;

pub use active_learning::{AlState, CheckpointFile};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use gpr::{GprModel, Kernel};
pub use mgk::{KernelCache, KernelMatrix, MgkHyperparameters, MgkKernel};
pub use molspace::{Atom, Bond, BondOrder, CanonicalSmiles, Descriptors, Element, MolecularGraph};
pub use pipeline::{EvalReport, Metrics};
pub use thermo::{PropertyRecord, QcStatus, ThermoSeries};
