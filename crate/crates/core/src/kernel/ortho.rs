use super::dense::{axpy, dot, norm, DenseBlock};
use crate::scalar::Real;

/// Default relative drop tolerance for rank-deficient columns.
pub const DEFAULT_DROP_TOL: f64 = 1e-8;

/// Outcome of an orthonormalization: the basis and the indices of the input
/// columns that survived.
#[derive(Debug, Clone)]
pub struct Orthonormalized<T> {
    pub q: DenseBlock<T>,
    pub kept: Vec<usize>,
}

/// Classical Gram–Schmidt applied twice (CGS2) to the columns of `x`.
///
/// A column is dropped when its norm after both projection passes falls below
/// `drop_tol` times its original norm.
pub fn orthonormalize<T: Real>(x: &DenseBlock<T>, drop_tol: T) -> (DenseBlock<T>, usize) {
    let out = cgs2(x, None, drop_tol);
    let kept = out.kept.len();
    (out.q, kept)
}

/// Orthonormalizes `w` against the orthonormal block `q` and internally.
/// Each column is projected twice against `[q, accepted columns]`.
pub fn project_orthonormalize<T: Real>(
    w: &DenseBlock<T>,
    q: &DenseBlock<T>,
    drop_tol: T,
) -> (DenseBlock<T>, usize) {
    let out = cgs2(w, Some(q), drop_tol);
    let kept = out.kept.len();
    (out.q, kept)
}

/// CGS2 with the surviving column indices reported.
pub fn cgs2<T: Real>(
    w: &DenseBlock<T>,
    q: Option<&DenseBlock<T>>,
    drop_tol: T,
) -> Orthonormalized<T> {
    let n = w.rows();
    if let Some(q) = q {
        assert_eq!(q.rows(), n, "row mismatch in projection");
    }
    let mut basis = DenseBlock::zeros(n, 0);
    let mut kept = Vec::new();
    let mut coeffs = Vec::new();
    for j in 0..w.cols() {
        let mut v = w.col(j).to_vec();
        let before = norm(&v);
        if before == T::zero() || !before.is_finite() {
            continue;
        }
        for _ in 0..2 {
            if let Some(q) = q {
                project_out(q, &mut v, &mut coeffs);
            }
            project_out(&basis, &mut v, &mut coeffs);
        }
        let after = norm(&v);
        if !(after > drop_tol * before) {
            continue;
        }
        let inv = T::one() / after;
        for x in &mut v {
            *x = *x * inv;
        }
        basis.push_col(&v);
        kept.push(j);
    }
    Orthonormalized { q: basis, kept }
}

/// One classical Gram–Schmidt pass: all coefficients first, then the update.
fn project_out<T: Real>(q: &DenseBlock<T>, v: &mut [T], coeffs: &mut Vec<T>) {
    coeffs.clear();
    coeffs.extend((0..q.cols()).map(|i| dot(q.col(i), v)));
    for (i, &c) in coeffs.iter().enumerate() {
        axpy(-c, q.col(i), v);
    }
}
