//! Discontinuous Galerkin spectral-element solver for linear elastodynamics in
//! velocity-stress form, with a stabilized perfectly matched layer and ADER
//! time stepping.

// Index loops mirror the tensor notation; negated float comparisons are
// deliberate so that NaN fails validation.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod operators;
pub mod physics;
pub mod mesh;
pub mod flux;
pub mod pml;
pub mod solver;
pub mod sources;
pub mod diagnostics;
pub mod harness;

pub use error::{Error, Result};
