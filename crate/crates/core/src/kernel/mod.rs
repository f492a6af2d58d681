//! Dense and sparse primitives shared by every solver.

mod cg;
mod chol;
mod dense;
mod eig;
mod ortho;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use cg::{cg_solve, CgOutcome};
pub use chol::{minimum_degree_order, SpdFactor, DEFAULT_DENSE_THRESHOLD};
pub use dense::{axpy, dot, norm, DenseBlock};
pub use eig::sym_eig_small;
pub use ortho::{cgs2, orthonormalize, project_orthonormalize, Orthonormalized, DEFAULT_DROP_TOL};

use crate::matio::SparseSym;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("{op}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch { op: &'static str, expected: usize, found: usize },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not positive definite (non-positive pivot at index {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("{0} failed to converge")]
    NoConvergence(&'static str),
}

/// `A·X` for symmetric `A` held as its lower triangle. Every stored
/// off-diagonal entry contributes to both triangles, visited in row order.
pub fn spmv_block<T: Real>(a: &SparseSym<T>, x: &DenseBlock<T>) -> Result<DenseBlock<T>, KernelError> {
    let n = a.n();
    if x.rows() != n {
        return Err(KernelError::DimensionMismatch { op: "spmv_block", expected: n, found: x.rows() });
    }
    let (row_ptr, col_idx, values) = (a.row_ptr(), a.col_idx(), a.values());
    let mut y = DenseBlock::zeros(n, x.cols());
    for j in 0..x.cols() {
        let xj = x.col(j);
        let yj = y.col_mut(j);
        for i in 0..n {
            let xi = xj[i];
            let mut acc = yj[i];
            for p in row_ptr[i]..row_ptr[i + 1] {
                let c = col_idx[p];
                let v = values[p];
                if c == i {
                    acc = acc + v * xi;
                } else {
                    acc = acc + v * xj[c];
                    yj[c] = yj[c] + v * xi;
                }
            }
            yj[i] = acc;
        }
    }
    Ok(y)
}

const NORM_SEED: u64 = 0x6e6f_726d;
const NORM_POWER_STEPS: usize = 30;

/// Estimate of `‖A‖₂` from 30 power steps on `A²` with a fixed seed. The
/// result is cached on `a`.
pub fn estimate_norm2<T: Real>(a: &SparseSym<T>) -> T {
    if let Some(v) = a.norm_est() {
        return v;
    }
    let n = a.n();
    if n == 0 {
        return a.cache_norm_est(T::zero());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
    let mut v = DenseBlock::<T>::random_normal(n, 1, &mut rng);
    let normalize = |b: &mut DenseBlock<T>| -> bool {
        let s = b.col_norm(0);
        if !(s > T::zero()) || !s.is_finite() {
            return false;
        }
        for x in b.col_mut(0) {
            *x = *x / s;
        }
        true
    };
    let mut est = T::zero();
    if normalize(&mut v) {
        for _ in 0..NORM_POWER_STEPS {
            let w = spmv_block(a, &v).expect("square");
            let mut u = spmv_block(a, &w).expect("square");
            if !normalize(&mut u) {
                break;
            }
            v = u;
        }
        est = spmv_block(a, &v).expect("square").col_norm(0);
    }
    a.cache_norm_est(est)
}
