//! Local stability of the zero solution of a size-structured
//! aggregation-growth model, decided from the real root of a scalar
//! characteristic function and cross-checked by simulating the explicit
//! linear semigroup and the full nonlinear integro-PDE.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod fit;
pub mod model;
pub mod operators;
pub mod quad;
pub mod semigroup;
pub mod simulator;
pub mod spectral;

pub use error::{Error, Result};
pub use model::CoefficientSet;
pub use operators::{Discretization, StateVector};
pub use quad::{Grading, Mesh};
pub use semigroup::LinearSemigroup;
pub use simulator::{SimulationConfig, SimulationTrace};
pub use spectral::{Classification, SpectralContext, SpectralReport};
