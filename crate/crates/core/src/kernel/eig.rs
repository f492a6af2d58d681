use super::dense::DenseBlock;
use super::KernelError;
use crate::scalar::Real;

/// Eigendecomposition of a small dense symmetric matrix.
///
/// The input is symmetrized as `(H + Hᵀ)/2`, reduced to tridiagonal form by
/// Householder reflections and diagonalized by implicit QL with shifts.
/// Eigenvalues are returned in ascending algebraic order (stable on ties)
/// together with orthonormal eigenvectors as columns.
pub fn sym_eig_small<T: Real>(h: &DenseBlock<T>) -> Result<(Vec<T>, DenseBlock<T>), KernelError> {
    let n = h.rows();
    if h.cols() != n {
        return Err(KernelError::DimensionMismatch { op: "sym_eig_small", expected: n, found: h.cols() });
    }
    if !h.is_finite() {
        return Err(KernelError::NonFinite("sym_eig_small input"));
    }
    if n == 0 {
        return Ok((Vec::new(), DenseBlock::zeros(0, 0)));
    }
    let half = T::lit(0.5);
    let mut v: Vec<T> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            (h[(i, j)] + h[(j, i)]) * half
        })
        .collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("finite eigenvalues"));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut z = DenseBlock::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        z.col_mut(dst).copy_from_slice(&v[src * n..(src + 1) * n]);
    }
    Ok((values, z))
}

// Column-major accessor: element (i, j) of the n×n work matrix.
#[inline(always)]
fn at(n: usize, i: usize, j: usize) -> usize {
    i + j * n
}

fn tred2<T: Real>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) {
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for dk in d.iter().take(i) {
            scale = scale + dk.abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = T::zero();
                v[at(n, j, i)] = T::zero();
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk = *dk / scale;
                h = h + *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[at(n, j, i)] = f;
                g = e[j] + v[at(n, j, j)] * f;
                for k in j + 1..i {
                    g = g + v[at(n, k, j)] * d[k];
                    e[k] = e[k] + v[at(n, k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let idx = at(n, k, j);
                    v[idx] = v[idx] - (f * e[k] + g * d[k]);
                }
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n, n - 1, i)] = v[at(n, i, i)];
        v[at(n, i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[at(n, k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g = g + v[at(n, k, i + 1)] * v[at(n, k, j)];
                }
                for k in 0..=i {
                    let idx = at(n, k, j);
                    v[idx] = v[idx] - g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(n, k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
        v[at(n, n - 1, j)] = T::zero();
    }
    v[at(n, n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

fn tql2<T: Real>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) -> Result<(), KernelError> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    let two = T::lit(2.0);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > 60 {
                    return Err(KernelError::NoConvergence("tridiagonal QL"));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let a = at(n, k, i);
                        let b = at(n, k, i + 1);
                        h = v[b];
                        v[b] = s * v[a] + c * h;
                        v[a] = c * v[a] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if !(e[l].abs() > eps * tst1) {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = T::zero();
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(KernelError::NonFinite("sym_eig_small eigenvalues"));
    }
    Ok(())
}
