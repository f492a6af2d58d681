use thiserror::Error;

use crate::kernel::KernelError;
use crate::matio::MatioError;
use crate::rr::RrError;
use crate::solvers::SolverError;
use crate::strategy::StrategyError;
use crate::theory::TheoryError;

/// Crate-level error wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Matio(#[from] MatioError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Rr(#[from] RrError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
