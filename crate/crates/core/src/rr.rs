//! Rayleigh–Ritz projection, residual blocks and the relative-residual
//! convergence test.

use serde::Serialize;
use thiserror::Error;

use crate::kernel::{estimate_norm2, spmv_block, sym_eig_small, DenseBlock, KernelError};
use crate::matio::SparseSym;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum RrError {
    #[error("requested {requested} pairs but only {available} are available")]
    TooFewPairs { requested: usize, available: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Ritz values (ascending), Ritz vectors `S·Z` and the projected eigenvectors `Z`.
#[derive(Debug, Clone)]
pub struct RitzSet<T> {
    pub values: Vec<T>,
    pub vectors: DenseBlock<T>,
    pub coeffs: DenseBlock<T>,
}

impl<T: Real> RitzSet<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A Ritz set together with `A·vectors`, obtained without another SpMV.
#[derive(Debug, Clone)]
pub struct Projected<T> {
    pub ritz: RitzSet<T>,
    pub a_vectors: DenseBlock<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport<T> {
    /// `‖Rᵢ‖ / (‖A‖‖vᵢ‖ + ‖vᵢ‖|λᵢ|)` for every available pair.
    pub per_pair: Vec<T>,
    /// Maximum of `per_pair` over the first `n_ev` pairs.
    pub overall: T,
    /// Length of the leading run of pairs with `per_pair <= tol`.
    pub converged_count: usize,
}

/// Rayleigh–Ritz on the orthonormal basis `s`.
pub fn rayleigh_ritz<T: Real>(a: &SparseSym<T>, s: &DenseBlock<T>) -> Result<RitzSet<T>, RrError> {
    let as_ = spmv_block(a, s)?;
    Ok(project(s, &as_, s.cols())?.ritz)
}

/// Rayleigh–Ritz from a basis and its image `as_ = A·s`, keeping the `keep`
/// smallest pairs. `coeffs` holds the matching columns of `Z`.
pub fn project<T: Real>(
    s: &DenseBlock<T>,
    as_: &DenseBlock<T>,
    keep: usize,
) -> Result<Projected<T>, RrError> {
    let h = s.gemm_tn(as_)?;
    let (values, z) = sym_eig_small(&h)?;
    let keep = keep.min(values.len());
    let zk = z.columns(0..keep);
    Ok(Projected {
        ritz: RitzSet {
            values: values[..keep].to_vec(),
            vectors: s.gemm_nn(&zk)?,
            coeffs: zk.clone(),
        },
        a_vectors: as_.gemm_nn(&zk)?,
    })
}

/// `R = A·V − V·diag(λ)`.
pub fn residual_block<T: Real>(a: &SparseSym<T>, ritz: &RitzSet<T>) -> Result<DenseBlock<T>, RrError> {
    let av = spmv_block(a, &ritz.vectors)?;
    residual_from(&av, ritz)
}

/// `R = AV − V·diag(λ)` from a precomputed `AV`.
pub fn residual_from<T: Real>(av: &DenseBlock<T>, ritz: &RitzSet<T>) -> Result<DenseBlock<T>, RrError> {
    if av.cols() != ritz.values.len() || av.rows() != ritz.vectors.rows() {
        return Err(KernelError::DimensionMismatch {
            op: "residual",
            expected: ritz.values.len(),
            found: av.cols(),
        }
        .into());
    }
    Ok(av.sub(&ritz.vectors.scale_cols(&ritz.values))?)
}

/// Relative residuals with the cached norm estimate of `a`.
pub fn assess_convergence<T: Real>(
    a: &SparseSym<T>,
    ritz: &RitzSet<T>,
    r: &DenseBlock<T>,
    n_ev: usize,
    tol: T,
) -> Result<ResidualReport<T>, RrError> {
    assess_with_norm(estimate_norm2(a), &ritz.values, &ritz.vectors, r, n_ev, tol)
}

/// Relative residuals for an explicit `‖A‖₂`.
pub fn assess_with_norm<T: Real>(
    a_norm: T,
    values: &[T],
    vectors: &DenseBlock<T>,
    r: &DenseBlock<T>,
    n_ev: usize,
    tol: T,
) -> Result<ResidualReport<T>, RrError> {
    let available = values.len().min(vectors.cols()).min(r.cols());
    if n_ev > available {
        return Err(RrError::TooFewPairs { requested: n_ev, available });
    }
    let per_pair: Vec<T> = (0..available)
        .map(|i| {
            let rn = r.col_norm(i);
            let vn = vectors.col_norm(i);
            let denom = a_norm * vn + vn * values[i].abs();
            if denom > T::zero() {
                rn / denom
            } else if rn == T::zero() {
                T::zero()
            } else {
                T::infinity()
            }
        })
        .collect();
    let overall = per_pair[..n_ev].iter().fold(T::zero(), |m, &p| if p > m || p.is_nan() { p } else { m });
    let converged_count = per_pair.iter().take_while(|&&p| p <= tol).count();
    Ok(ResidualReport { per_pair, overall, converged_count })
}
