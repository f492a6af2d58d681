//! Block eigensolvers for sparse symmetric matrices with adaptive
//! shrink-and-expand block sizing.
//!
//! The crate is organised bottom-up:
//!
//! * [`matio`]: sparse symmetric storage, Matrix Market I/O, SPD shifting and
//!   synthetic generators.
//! * [`kernel`]: dense blocks, block SpMV, CGS2 orthonormalization, the small
//!   dense symmetric eigensolver, Cholesky factorizations and CG.
//! * [`rr`]: Rayleigh–Ritz projection, residuals and convergence tests.
//! * [`strategy`]: the `fix`, `slope` and `slopek` block-size controllers.
//! * [`solvers`]: subspace iteration (shift-and-invert), steepest descent,
//!   LOBPCG and TraceMIN, each with shrink/expand hooks.
//! * [`theory`]: numerical checks of the convergence-rate bounds behind the
//!   shrink-and-expand technique.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64` or `f32` for the common cases.

pub mod error;
pub mod kernel;
pub mod matio;
pub mod rr;
pub mod scalar;
pub mod solvers;
pub mod strategy;
pub mod theory;

pub use error::{Error, Result};
pub use kernel::{DenseBlock, SpdFactor};
pub use matio::SparseSym;
pub use rr::{ResidualReport, RitzSet};
pub use scalar::Real;
pub use solvers::{
    BlockState, ConvergenceRecord, Event, ExpansionMode, Preconditioner, SolveResult, SolveStatus,
    SolverConfig, SolverKind, WorkUnits,
};
pub use strategy::{Decision, StrategyConfig, StrategyKind, StrategyState};

/// Sparse symmetric matrix over `f64`.
pub type SparseSym64 = SparseSym<f64>;
/// Sparse symmetric matrix over `f32`.
pub type SparseSym32 = SparseSym<f32>;
/// Dense column-major block over `f64`.
pub type Block64 = DenseBlock<f64>;
/// Dense column-major block over `f32`.
pub type Block32 = DenseBlock<f32>;
/// Solver configuration over `f64`.
pub type SolverConfig64 = SolverConfig<f64>;
/// Strategy configuration over `f64`.
pub type StrategyConfig64 = StrategyConfig<f64>;
/// Solver output over `f64`.
pub type SolveResult64 = SolveResult<f64>;
/// Solver output over `f32`.
pub type SolveResult32 = SolveResult<f32>;
