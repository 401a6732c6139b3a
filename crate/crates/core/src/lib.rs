//! Numerical core for a nonisothermal nematic liquid-crystal flow model.

pub mod audit;
pub mod constitutive;
pub mod error;
pub mod galerkin;
pub mod grid;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod ops;
pub mod solvers;
pub mod state;

pub use constitutive::{CoefficientSet, CoefficientSpec, ThermoPointState};
pub use error::{Error, Result};
pub use grid::*;
pub use solvers::{coupled_step, StepParams};
pub use state::{Regularization, State};
