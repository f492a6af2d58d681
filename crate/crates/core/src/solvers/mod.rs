//! Block eigensolvers (SI, SD, LOBPCG, TraceMIN) with shrink/expand hooks.
//!
//! Every solver targets the algebraically smallest eigenpairs. A run keeps a
//! per-iteration [`ConvergenceRecord`] log and hardware-independent
//! [`WorkUnits`].

mod common;
mod lobpcg;
mod sd;
mod si;
mod tracemin;

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::kernel::{DenseBlock, KernelError, DEFAULT_DENSE_THRESHOLD, DEFAULT_DROP_TOL};
use crate::matio::SparseSym;
use crate::rr::{ResidualReport, RrError};
use crate::scalar::Real;
use crate::strategy::{StrategyConfig, StrategyError, StrategyKind};

pub use common::{soft_lock, BlockState};
pub use lobpcg::{hl_trick, solve_lobpcg, HlBasis};
pub use sd::solve_sd;
pub use si::solve_si;
pub use tracemin::solve_tracemin;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Rr(#[from] RrError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Si,
    Sd,
    Lobpcg,
    Tracemin,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [SolverKind::Si, SolverKind::Sd, SolverKind::Lobpcg, SolverKind::Tracemin];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Si => "si",
            SolverKind::Sd => "sd",
            SolverKind::Lobpcg => "lobpcg",
            SolverKind::Tracemin => "tracemin",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SolverError::Config(format!("unknown solver {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    Identity,
    /// `T = diag(A)⁻¹`, with diagonal magnitudes clamped below at 1e-12.
    Diagonal,
}

impl FromStr for Preconditioner {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Preconditioner::Identity),
            "diagonal" => Ok(Preconditioner::Diagonal),
            _ => Err(SolverError::Config(format!("unknown preconditioner {s:?}"))),
        }
    }
}

/// Source of the columns appended at an expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionMode {
    /// The columns split off at the last shrink.
    Xdrop,
    /// The dropped columns, multiplied by `(A − ζI)⁻¹` once per iteration
    /// while the block is shrunk (SI only).
    Powered,
    /// Fresh standard normal columns from the run's generator.
    Random,
}

impl FromStr for ExpansionMode {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xdrop" => Ok(ExpansionMode::Xdrop),
            "powered" => Ok(ExpansionMode::Powered),
            "random" => Ok(ExpansionMode::Random),
            _ => Err(SolverError::Config(format!("unknown expansion mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig<T> {
    pub n_ev: usize,
    pub n_ex: usize,
    pub n_es: usize,
    pub tol: T,
    pub max_iters: usize,
    pub seed: u64,
    /// Shift of the SI solves.
    pub zeta: T,
    /// Inner CG steps of TraceMIN.
    pub cg_iters: usize,
    pub preconditioner: Preconditioner,
    pub expansion_mode: ExpansionMode,
    /// Relative drop tolerance of every orthonormalization.
    pub drop_tol: T,
    /// Stagnation window in iterations; 0 disables the guard. Defaults to 50
    /// for SI and 0 for the other solvers.
    pub stagnation_window: usize,
    /// Required improvement of `log10 r` over one window.
    pub stagnation_decades: T,
    /// Largest dimension factorized densely.
    pub dense_threshold: usize,
    /// LOBPCG: drop the search directions of soft-locked pairs along with
    /// their residuals. When false, locked pairs keep their directions.
    pub deflate_locked_p: bool,
}

/// Default expanded block size: `ceil(1.5·n_ev)` for LOBPCG, `2·n_ev` otherwise.
pub fn default_n_ex(kind: SolverKind, n_ev: usize) -> usize {
    match kind {
        SolverKind::Lobpcg => (3 * n_ev).div_ceil(2),
        _ => 2 * n_ev,
    }
}

/// Default shrunken block size: `n_ev + 5` when that is below `n_ex`,
/// otherwise the midpoint `(n_ev + n_ex) / 2`.
pub fn default_n_es(n_ev: usize, n_ex: usize) -> usize {
    if n_ev + 5 < n_ex {
        n_ev + 5
    } else {
        (n_ev + n_ex) / 2
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn new(kind: SolverKind, n_ev: usize) -> Self {
        let n_ex = default_n_ex(kind, n_ev);
        Self {
            n_ev,
            n_ex,
            n_es: default_n_es(n_ev, n_ex),
            tol: T::lit(1e-10),
            max_iters: 2000,
            seed: 0,
            zeta: T::zero(),
            cg_iters: 5,
            preconditioner: Preconditioner::Identity,
            expansion_mode: ExpansionMode::Xdrop,
            drop_tol: T::lit(DEFAULT_DROP_TOL),
            stagnation_window: if kind == SolverKind::Si { 50 } else { 0 },
            stagnation_decades: T::lit(1e-2),
            dense_threshold: DEFAULT_DENSE_THRESHOLD,
            deflate_locked_p: true,
        }
    }

    /// Sets `n_ex` and re-derives the default `n_es`.
    pub fn with_n_ex(mut self, n_ex: usize) -> Self {
        self.n_ex = n_ex;
        self.n_es = default_n_es(self.n_ev, n_ex);
        self
    }

    pub fn validate(&self, kind: SolverKind, n: usize, strategy: &StrategyConfig<T>) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if self.n_ev == 0 {
            return bad("n_ev must be at least 1".into());
        }
        if !(self.n_ev <= self.n_es && self.n_es <= self.n_ex && self.n_ex <= n) {
            return bad(format!(
                "block sizes must satisfy n_ev <= n_es <= n_ex <= n, got n_ev={}, n_es={}, n_ex={}, n={n}",
                self.n_ev, self.n_es, self.n_ex
            ));
        }
        if strategy.kind != StrategyKind::None && self.n_es >= self.n_ex {
            return bad(format!(
                "shrinking needs n_es < n_ex, got n_es={}, n_ex={}",
                self.n_es, self.n_ex
            ));
        }
        if !(self.tol > T::zero()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if kind == SolverKind::Tracemin && self.cg_iters == 0 {
            return bad("TraceMIN needs at least one CG step".into());
        }
        if self.expansion_mode == ExpansionMode::Powered && kind != SolverKind::Si {
            return bad(format!("powered expansion requires the si solver, not {kind}"));
        }
        if !(self.drop_tol > T::zero() && self.drop_tol < T::one()) {
            return bad(format!("drop_tol must lie in (0, 1), got {}", self.drop_tol));
        }
        strategy.validate()?;
        Ok(())
    }
}

/// Cumulative cost counters of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WorkUnits {
    /// Columns multiplied by `A`.
    pub spmv_cols: u64,
    /// Columns pushed through the factorized solve.
    pub solve_cols: u64,
    /// `n·(m² + 2mq)` per orthonormalization of `m` columns against `q` fixed ones.
    pub ortho_flops: u64,
    /// Projection, small eigensolve and lifting flops of the Rayleigh–Ritz steps.
    pub rr_flops: u64,
    /// Projected-problem dimension of the latest Rayleigh–Ritz step.
    pub rr_dim: usize,
}

impl WorkUnits {
    /// Scalar cost given the per-column price of an SpMV and of a solve.
    pub fn total(&self, spmv_col_cost: u64, solve_col_cost: u64) -> u64 {
        self.spmv_cols * spmv_col_cost + self.solve_cols * solve_col_cost + self.ortho_flops + self.rr_flops
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    None,
    Shrink,
    Expand,
    /// The number of leading locked pairs changed to `k`.
    Lock(usize),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::None => f.write_str("none"),
            Event::Shrink => f.write_str("shrink"),
            Event::Expand => f.write_str("expand"),
            Event::Lock(k) => write!(f, "lock:{k}"),
        }
    }
}

impl Serialize for Event {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord<T> {
    pub iteration: usize,
    pub overall_residual: T,
    /// Block size at the start of the iteration.
    pub n_now: usize,
    pub event: Event,
    /// Cumulative work at the end of the iteration.
    pub work: WorkUnits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Stagnated,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::Stagnated => "stagnated",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub status: SolveStatus,
    /// First `n_ev` Ritz values, ascending.
    pub values: Vec<T>,
    /// Matching Ritz vectors.
    pub vectors: DenseBlock<T>,
    pub history: Vec<ConvergenceRecord<T>>,
    /// Residual report of the last assessed iterate.
    pub report: Option<ResidualReport<T>>,
    /// Cost of one SpMV column: nonzeros of the full matrix.
    pub spmv_col_cost: u64,
    /// Cost of one solve column: twice the nonzeros of the factor.
    pub solve_col_cost: u64,
    /// CG steps that broke down (TraceMIN).
    pub cg_breakdowns: usize,
}

impl<T: Real> SolveResult<T> {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn work(&self) -> WorkUnits {
        self.history.last().map(|r| r.work).unwrap_or_default()
    }

    pub fn total_work(&self) -> u64 {
        self.work().total(self.spmv_col_cost, self.solve_col_cost)
    }

    pub fn final_residual(&self) -> Option<T> {
        self.history.last().map(|r| r.overall_residual)
    }
}

/// Runs the solver `kind`.
pub fn solve<T: Real>(
    kind: SolverKind,
    a: &SparseSym<T>,
    cfg: &SolverConfig<T>,
    strategy: &StrategyConfig<T>,
    x0: Option<&DenseBlock<T>>,
) -> Result<SolveResult<T>, SolverError> {
    match kind {
        SolverKind::Si => solve_si(a, cfg, strategy, x0),
        SolverKind::Sd => solve_sd(a, cfg, strategy, x0),
        SolverKind::Lobpcg => solve_lobpcg(a, cfg, strategy, x0),
        SolverKind::Tracemin => solve_tracemin(a, cfg, strategy, x0),
    }
}
