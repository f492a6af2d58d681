use std::collections::BTreeSet;

use super::dense::DenseBlock;
use super::KernelError;
use crate::matio::SparseSym;
use crate::scalar::Real;

/// Matrices up to this many rows are factorized densely.
pub const DEFAULT_DENSE_THRESHOLD: usize = 2000;

/// Cholesky factorization `A − ζI = L·Lᵀ` reused across many solves.
#[derive(Debug, Clone)]
pub struct SpdFactor<T> {
    n: usize,
    repr: Repr<T>,
}

#[derive(Debug, Clone)]
enum Repr<T> {
    /// Lower factor, column-major n×n.
    Dense(Vec<T>),
    /// `P(A − ζI)Pᵀ = L·Lᵀ` with L stored by rows, diagonal last in each row.
    Sparse {
        perm: Vec<usize>,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    },
}

impl<T: Real> SpdFactor<T> {
    /// Factorizes `A − ζI`, densely when `n <= 2000`.
    pub fn new(a: &SparseSym<T>, zeta: T) -> Result<Self, KernelError> {
        Self::with_threshold(a, zeta, DEFAULT_DENSE_THRESHOLD)
    }

    pub fn with_threshold(a: &SparseSym<T>, zeta: T, dense_threshold: usize) -> Result<Self, KernelError> {
        let n = a.n();
        let repr = if n <= dense_threshold { dense_cholesky(a, zeta)? } else { sparse_cholesky(a, zeta)? };
        Ok(Self { n, repr })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.repr, Repr::Sparse { .. })
    }

    /// Number of nonzeros in the triangular factor.
    pub fn nnz_l(&self) -> usize {
        match &self.repr {
            Repr::Dense(l) => l.iter().filter(|v| **v != T::zero()).count(),
            Repr::Sparse { values, .. } => values.len(),
        }
    }

    /// Solves `(A − ζI)·Y = B` column by column.
    pub fn solve(&self, b: &DenseBlock<T>) -> Result<DenseBlock<T>, KernelError> {
        if b.rows() != self.n {
            return Err(KernelError::DimensionMismatch { op: "solve", expected: self.n, found: b.rows() });
        }
        let n = self.n;
        let mut out = b.clone();
        match &self.repr {
            Repr::Dense(l) => {
                for j in 0..b.cols() {
                    let y = out.col_mut(j);
                    for k in 0..n {
                        let mut s = y[k];
                        for i in 0..k {
                            s = s - l[k + i * n] * y[i];
                        }
                        y[k] = s / l[k + k * n];
                    }
                    for k in (0..n).rev() {
                        let yk = y[k] / l[k + k * n];
                        y[k] = yk;
                        for i in 0..k {
                            y[i] = y[i] - l[k + i * n] * yk;
                        }
                    }
                }
            }
            Repr::Sparse { perm, row_ptr, col_idx, values } => {
                let mut work = vec![T::zero(); n];
                for j in 0..b.cols() {
                    let src = b.col(j);
                    for (k, w) in work.iter_mut().enumerate() {
                        *w = src[perm[k]];
                    }
                    for k in 0..n {
                        let (lo, hi) = (row_ptr[k], row_ptr[k + 1] - 1);
                        let mut s = work[k];
                        for p in lo..hi {
                            s = s - values[p] * work[col_idx[p]];
                        }
                        work[k] = s / values[hi];
                    }
                    for k in (0..n).rev() {
                        let (lo, hi) = (row_ptr[k], row_ptr[k + 1] - 1);
                        let xk = work[k] / values[hi];
                        work[k] = xk;
                        for p in lo..hi {
                            let i = col_idx[p];
                            work[i] = work[i] - values[p] * xk;
                        }
                    }
                    let dst = out.col_mut(j);
                    for (k, &w) in work.iter().enumerate() {
                        dst[perm[k]] = w;
                    }
                }
            }
        }
        Ok(out)
    }
}

fn dense_cholesky<T: Real>(a: &SparseSym<T>, zeta: T) -> Result<Repr<T>, KernelError> {
    let n = a.n();
    let mut l = a.to_dense_col_major();
    for i in 0..n {
        l[i + i * n] = l[i + i * n] - zeta;
    }
    for j in 0..n {
        let mut d = l[j + j * n];
        for k in 0..j {
            d = d - l[j + k * n] * l[j + k * n];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(KernelError::NotPositiveDefinite { pivot: j });
        }
        let d = d.sqrt();
        l[j + j * n] = d;
        for i in j + 1..n {
            let mut s = l[i + j * n];
            for k in 0..j {
                s = s - l[i + k * n] * l[j + k * n];
            }
            l[i + j * n] = s / d;
        }
        for i in 0..j {
            l[i + j * n] = T::zero();
        }
    }
    Ok(Repr::Dense(l))
}

/// Symmetric adjacency (off-diagonal) of the stored pattern.
fn adjacency<T: Real>(a: &SparseSym<T>) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); a.n()];
    for i in 0..a.n() {
        for (j, _) in a.row(i) {
            if j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
    }
    adj
}

/// Minimum-degree ordering on the explicit elimination graph. Ties go to the
/// smallest index. Returns `perm` with `perm[new] = old`.
pub fn minimum_degree_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut graph: Vec<BTreeSet<usize>> = adj.iter().map(|r| r.iter().copied().collect()).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (graph[v].len(), v)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut graph[v]).into_iter().collect();
        for &u in &nbrs {
            queue.remove(&(graph[u].len(), u));
            graph[u].remove(&v);
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                graph[u].insert(w);
                graph[w].insert(u);
            }
        }
        for &u in &nbrs {
            queue.insert((graph[u].len(), u));
        }
    }
    perm
}

/// Up-looking sparse Cholesky: row k of L comes from a sparse triangular
/// solve whose pattern is the elimination-tree reach of row k of the
/// permuted matrix.
fn sparse_cholesky<T: Real>(a: &SparseSym<T>, zeta: T) -> Result<Repr<T>, KernelError> {
    let n = a.n();
    let adj = adjacency(a);
    let perm = minimum_degree_order(&adj);
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }

    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut mark = vec![usize::MAX; n];
    let mut x = vec![T::zero(); n];
    let mut row_ptr = vec![0];
    let mut col_idx: Vec<usize> = Vec::new();
    let mut values: Vec<T> = Vec::new();
    let mut pattern: Vec<usize> = Vec::new();

    for k in 0..n {
        let old = perm[k];
        pattern.clear();
        mark[k] = k;
        let mut diag = a.get(old, old) - zeta;
        for &o in &adj[old] {
            let j = inv[o];
            if j > k {
                continue;
            }
            x[j] = a.get(old, o);
            let mut i = j;
            while mark[i] != k {
                mark[i] = k;
                pattern.push(i);
                match parent[i] {
                    Some(p) => i = p,
                    None => {
                        parent[i] = Some(k);
                        break;
                    }
                }
            }
        }
        pattern.sort_unstable();
        for &j in &pattern {
            let (lo, hi) = (row_ptr[j], row_ptr[j + 1] - 1);
            let mut s = x[j];
            for p in lo..hi {
                s = s - values[p] * x[col_idx[p]];
            }
            let lkj = s / values[hi];
            x[j] = lkj;
            diag = diag - lkj * lkj;
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return Err(KernelError::NotPositiveDefinite { pivot: old });
        }
        for &j in &pattern {
            col_idx.push(j);
            values.push(x[j]);
            x[j] = T::zero();
        }
        col_idx.push(k);
        values.push(diag.sqrt());
        row_ptr.push(col_idx.len());
    }
    Ok(Repr::Sparse { perm, row_ptr, col_idx, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matio::{gen_diag, gen_laplacian_1d};

    #[test]
    fn diagonal_solve() {
        let a = gen_diag::<f64>(&[1.0, 10.0, 100.0]).unwrap();
        let f = SpdFactor::new(&a, 0.0).unwrap();
        let y = f.solve(&DenseBlock::eye(3, 3).columns(1..2)).unwrap();
        for (got, want) in y.col(0).iter().zip([0.0, 0.1, 0.0]) {
            assert!((got - want).abs() < 1e-16);
        }
    }

    #[test]
    fn indefinite_shift_rejected() {
        let a = gen_diag(&[1.0, 2.0]).unwrap();
        let err = SpdFactor::new(&a, 1.5).unwrap_err();
        assert!(matches!(err, KernelError::NotPositiveDefinite { pivot: 0 }));
        let err = SpdFactor::with_threshold(&a, 1.5, 0).unwrap_err();
        assert!(matches!(err, KernelError::NotPositiveDefinite { pivot: 0 }));
    }

    #[test]
    fn sparse_path_on_tridiagonal_has_no_fill() {
        let a = gen_laplacian_1d::<f64>(30).unwrap();
        let f = SpdFactor::with_threshold(&a, 0.0, 0).unwrap();
        assert!(f.is_sparse());
        assert_eq!(f.nnz_l(), 2 * 30 - 1);
    }

    #[test]
    fn min_degree_is_a_permutation() {
        let adj = vec![vec![1, 2, 3], vec![0], vec![0], vec![0]];
        let mut p = minimum_degree_order(&adj);
        assert_eq!(p[0], 1);
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3]);
    }
}
