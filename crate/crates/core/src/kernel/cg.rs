use super::dense::{axpy, dot, DenseBlock};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub x: DenseBlock<T>,
    /// CG steps taken (operator applications).
    pub steps: usize,
    /// A column met a non-positive or non-finite curvature; its last finite
    /// iterate was kept.
    pub breakdown: bool,
}

/// Unpreconditioned block CG from a zero start, each column with its own
/// step lengths. Runs `max_iters` steps unless every column's residual drops
/// below `1e-14·‖b‖` earlier.
pub fn cg_solve<T, F>(mut apply: F, b: &DenseBlock<T>, max_iters: usize) -> CgOutcome<T>
where
    T: Real,
    F: FnMut(&DenseBlock<T>) -> DenseBlock<T>,
{
    let (n, m) = (b.rows(), b.cols());
    let mut x = DenseBlock::zeros(n, m);
    let mut r = b.clone();
    let mut p = b.clone();
    let stop: Vec<T> = b.col_norms().iter().map(|&nb| T::lit(1e-14) * nb).collect();
    let mut rr: Vec<T> = (0..m).map(|j| dot(r.col(j), r.col(j))).collect();
    let mut active: Vec<bool> = (0..m).map(|j| rr[j].sqrt() >= stop[j] && rr[j] > T::zero()).collect();
    let mut breakdown = false;
    let mut steps = 0;

    while steps < max_iters && active.iter().any(|&a| a) {
        for j in 0..m {
            if !active[j] {
                p.col_mut(j).iter_mut().for_each(|v| *v = T::zero());
            }
        }
        let ap = apply(&p);
        steps += 1;
        for j in 0..m {
            if !active[j] {
                continue;
            }
            let curv = dot(p.col(j), ap.col(j));
            let alpha = rr[j] / curv;
            if !(curv > T::zero()) || !alpha.is_finite() {
                breakdown = true;
                active[j] = false;
                continue;
            }
            let trial_x: Vec<T> = x.col(j).iter().zip(p.col(j)).map(|(&xi, &pi)| xi + alpha * pi).collect();
            if trial_x.iter().any(|v| !v.is_finite()) {
                breakdown = true;
                active[j] = false;
                continue;
            }
            x.col_mut(j).copy_from_slice(&trial_x);
            axpy(-alpha, ap.col(j), r.col_mut(j));
            let rr_new = dot(r.col(j), r.col(j));
            let beta = rr_new / rr[j];
            rr[j] = rr_new;
            if rr_new.sqrt() < stop[j] {
                active[j] = false;
                continue;
            }
            let rj = r.col(j).to_vec();
            for (pi, ri) in p.col_mut(j).iter_mut().zip(rj) {
                *pi = ri + beta * *pi;
            }
        }
    }
    CgOutcome { x, steps, breakdown }
}
