use super::common::Ctx;
use super::{Event, SolveResult, SolveStatus, SolverConfig, SolverError, SolverKind};
use crate::kernel::{axpy, dot, norm, DenseBlock};
use crate::matio::SparseSym;
use crate::scalar::Real;
use crate::strategy::{Decision, StrategyConfig};

/// New iterate and search directions lifted from a Rayleigh–Ritz step.
#[derive(Debug, Clone)]
pub struct HlBasis<T> {
    pub x: DenseBlock<T>,
    pub ax: DenseBlock<T>,
    /// Unit directions orthogonal to `x`, one per owning column of `x`.
    /// They are not orthogonal to each other.
    pub p: DenseBlock<T>,
    pub ap: DenseBlock<T>,
    /// Column of `x` each column of `p` belongs to.
    pub p_owner: Vec<usize>,
}

/// Builds `X = S·Z_k` and implicit search directions `P = S·Z_p`, where
/// column `i` of `Z_p` is column `i` of `Z_k` with the rows of the previous
/// `X` zeroed and then projected against `Z_k`, so that `XᵀP = 0`.
pub fn hl_trick<T: Real>(
    s: &DenseBlock<T>,
    as_: &DenseBlock<T>,
    z_k: &DenseBlock<T>,
    n_old_x: usize,
    drop_tol: T,
) -> Result<HlBasis<T>, SolverError> {
    let x = s.gemm_nn(z_k)?;
    let ax = as_.gemm_nn(z_k)?;
    let (p, ap, p_owner) = directions(s, as_, z_k, n_old_x, drop_tol)?;
    Ok(HlBasis { x, ax, p, ap, p_owner })
}

type Directions<T> = (DenseBlock<T>, DenseBlock<T>, Vec<usize>);

fn directions<T: Real>(
    s: &DenseBlock<T>,
    as_: &DenseBlock<T>,
    z_k: &DenseBlock<T>,
    n_old_x: usize,
    drop_tol: T,
) -> Result<Directions<T>, SolverError> {
    let mut z_p = DenseBlock::zeros(z_k.rows(), 0);
    let mut owner = Vec::new();
    for j in 0..z_k.cols() {
        let mut v = z_k.col(j).to_vec();
        for e in &mut v[..n_old_x.min(z_k.rows())] {
            *e = T::zero();
        }
        let before = norm(&v);
        if before == T::zero() {
            continue;
        }
        for _ in 0..2 {
            let c: Vec<T> = (0..z_k.cols()).map(|i| dot(z_k.col(i), &v)).collect();
            for (i, &ci) in c.iter().enumerate() {
                axpy(-ci, z_k.col(i), &mut v);
            }
        }
        let after = norm(&v);
        if !(after > drop_tol * before) {
            continue;
        }
        let inv = T::one() / after;
        v.iter_mut().for_each(|e| *e = *e * inv);
        z_p.push_col(&v);
        owner.push(j);
    }
    Ok((s.gemm_nn(&z_p)?, as_.gemm_nn(&z_p)?, owner))
}

/// CGS2 on the columns of `p` with every operation mirrored on `ap`, so the
/// result `q` comes with `A·q` without another SpMV.
pub fn orthonormalize_pair<T: Real>(
    p: &DenseBlock<T>,
    ap: &DenseBlock<T>,
    drop_tol: T,
) -> (DenseBlock<T>, DenseBlock<T>) {
    let n = p.rows();
    let mut q = DenseBlock::zeros(n, 0);
    let mut aq = DenseBlock::zeros(n, 0);
    for j in 0..p.cols() {
        let mut v = p.col(j).to_vec();
        let mut av = ap.col(j).to_vec();
        let before = norm(&v);
        if before == T::zero() || !before.is_finite() {
            continue;
        }
        for _ in 0..2 {
            let c: Vec<T> = (0..q.cols()).map(|i| dot(q.col(i), &v)).collect();
            for (i, &ci) in c.iter().enumerate() {
                axpy(-ci, q.col(i), &mut v);
                axpy(-ci, aq.col(i), &mut av);
            }
        }
        let after = norm(&v);
        if !(after > drop_tol * before) {
            continue;
        }
        let inv = T::one() / after;
        v.iter_mut().for_each(|e| *e = *e * inv);
        av.iter_mut().for_each(|e| *e = *e * inv);
        q.push_col(&v);
        aq.push_col(&av);
    }
    (q, aq)
}

/// Block LOBPCG with soft locking: Rayleigh–Ritz on `[X, P, W]`, where `W`
/// is the preconditioned residual of the pairs outside the leading
/// converged run.
pub fn solve_lobpcg<T: Real>(
    a: &SparseSym<T>,
    cfg: &SolverConfig<T>,
    strategy: &StrategyConfig<T>,
    x0: Option<&DenseBlock<T>>,
) -> Result<SolveResult<T>, SolverError> {
    let mut ctx = Ctx::new(SolverKind::Lobpcg, a, cfg, strategy)?;
    let mut state = ctx.initial_state(x0)?;
    let mut last_report = None;
    let mut locked_prev = 0;

    for j in 1..=cfg.max_iters {
        let (r_block, report) = ctx.assess(&state)?;
        let r = report.overall;
        let n_now = state.n_now();
        if report.converged_count >= cfg.n_ev {
            ctx.record(j, r, n_now, Event::None);
            return Ok(ctx.finish(SolveStatus::Converged, &state, Some(report)));
        }
        let decision = ctx.advance(r);

        let locked = report.converged_count.min(n_now);
        let mut event = if locked != locked_prev { Event::Lock(locked) } else { Event::None };
        locked_prev = locked;
        if cfg.deflate_locked_p && state.p.cols() > 0 {
            let keep: Vec<usize> = (0..state.p.cols()).filter(|&i| state.p_owner[i] >= locked).collect();
            state.p = state.p.select_cols(&keep);
            state.ap = state.ap.select_cols(&keep);
            state.p_owner = keep.iter().map(|&i| state.p_owner[i]).collect();
        }

        let (p_o, ap_o) = orthonormalize_pair(&state.p, &state.ap, cfg.drop_tol);
        ctx.work.ortho_flops += 2 * ctx.n as u64 * (state.p.cols() * state.p.cols()) as u64;
        let w = ctx.precondition(&r_block.columns(locked..n_now));
        let xp = state.x.hcat(&p_o)?;
        let w = ctx.ortho(&w, Some(&xp)).q;
        if w.cols() == 0 {
            ctx.record(j, r, n_now, event);
            return Ok(ctx.finish(SolveStatus::Stagnated, &state, Some(report)));
        }
        let aw = ctx.spmv(&w)?;

        let mut x_part = state.x.clone();
        let mut ax_part = state.ax.clone();
        let mut keep = n_now;
        if decision == Decision::Expand {
            let extra = ctx.expansion_block(&mut state);
            let basis = DenseBlock::hcat_all(ctx.n, &[&xp, &w])?;
            let fresh = ctx.ortho(&extra, Some(&basis)).q;
            if fresh.cols() > 0 {
                let a_fresh = ctx.spmv(&fresh)?;
                x_part = x_part.hcat(&fresh)?;
                ax_part = ax_part.hcat(&a_fresh)?;
                keep = cfg.n_ex.min(n_now + fresh.cols());
                ctx.strategy.on_expand();
                event = Event::Expand;
            }
        }

        let n_old_x = x_part.cols();
        let s = DenseBlock::hcat_all(ctx.n, &[&x_part, &p_o, &w])?;
        let as_ = DenseBlock::hcat_all(ctx.n, &[&ax_part, &ap_o, &aw])?;
        let proj = ctx.rr(&s, &as_, keep)?;
        let (p, ap, owner) = directions(&s, &as_, &proj.ritz.coeffs, n_old_x, cfg.drop_tol)?;
        ctx.work.rr_flops += 2 * (ctx.n as u64 * s.cols() as u64 * p.cols() as u64);
        state.set_projection(proj);
        state.p = p;
        state.ap = ap;
        state.p_owner = owner;

        if decision == Decision::Shrink {
            state.shrink(cfg.n_es);
            ctx.strategy.on_shrink();
            event = Event::Shrink;
        }

        ctx.record(j, r, n_now, event);
        last_report = Some(report);
        if ctx.stagnated(r) {
            return Ok(ctx.finish(SolveStatus::Stagnated, &state, last_report));
        }
    }
    Ok(ctx.finish(SolveStatus::MaxIters, &state, last_report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{orthonormalize, spmv_block};
    use crate::matio::gen_diag;
    use crate::rr::project;

    #[test]
    fn hl_directions_are_orthogonal_to_x() {
        let a = gen_diag::<f64>(&(1..=30).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
        let raw = DenseBlock::from_fn(30, 9, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + (i == j) as u8 as f64);
        let (s, _) = orthonormalize(&raw, 1e-8);
        let as_ = spmv_block(&a, &s).unwrap();
        let proj = project(&s, &as_, 3).unwrap();
        let hl = hl_trick(&s, &as_, &proj.ritz.coeffs, 3, 1e-8).unwrap();
        assert_eq!(hl.p.cols(), 3);
        assert_eq!(hl.p_owner, vec![0, 1, 2]);
        assert!(hl.x.gemm_tn(&hl.p).unwrap().max_abs() < 1e-13);
        assert!(hl.p.col_norms().iter().all(|c| (c - 1.0).abs() < 1e-13));
        assert!(spmv_block(&a, &hl.p).unwrap().sub(&hl.ap).unwrap().max_abs() < 1e-12);

        let (q, aq) = orthonormalize_pair(&hl.p, &hl.ap, 1e-8);
        assert!(hl.x.hcat(&q).unwrap().orthonormality_error() < 1e-12);
        assert!(spmv_block(&a, &q).unwrap().sub(&aq).unwrap().max_abs() < 1e-12);
    }
}
