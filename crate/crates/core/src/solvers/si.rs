use super::common::Ctx;
use super::{Event, ExpansionMode, SolveResult, SolveStatus, SolverConfig, SolverError, SolverKind};
use crate::kernel::{DenseBlock, SpdFactor};
use crate::matio::SparseSym;
use crate::scalar::Real;
use crate::strategy::{Decision, StrategyConfig};

/// Subspace iteration with shift-and-invert: `X ← (A − ζI)⁻¹X`, then
/// orthonormalization and Rayleigh–Ritz. The factorization is computed once.
pub fn solve_si<T: Real>(
    a: &SparseSym<T>,
    cfg: &SolverConfig<T>,
    strategy: &StrategyConfig<T>,
    x0: Option<&DenseBlock<T>>,
) -> Result<SolveResult<T>, SolverError> {
    let mut ctx = Ctx::new(SolverKind::Si, a, cfg, strategy)?;
    let factor = SpdFactor::with_threshold(a, cfg.zeta, cfg.dense_threshold)?;
    ctx.solve_col_cost = 2 * factor.nnz_l() as u64;
    let mut state = ctx.initial_state(x0)?;
    let mut last_report = None;

    for j in 1..=cfg.max_iters {
        let (_, report) = ctx.assess(&state)?;
        let r = report.overall;
        let n_now = state.n_now();
        if report.converged_count >= cfg.n_ev {
            ctx.record(j, r, n_now, Event::None);
            return Ok(ctx.finish(SolveStatus::Converged, &state, Some(report)));
        }
        let decision = ctx.advance(r);

        ctx.work.solve_cols += state.x.cols() as u64;
        let mut y = factor.solve(&state.x)?;
        if cfg.expansion_mode == ExpansionMode::Powered && state.x_drop.cols() > 0 {
            ctx.work.solve_cols += state.x_drop.cols() as u64;
            let mut powered = factor.solve(&state.x_drop)?;
            normalize_columns(&mut powered);
            state.x_drop = powered;
        }

        let mut event = Event::None;
        if decision == Decision::Expand {
            let extra = ctx.expansion_block(&mut state);
            if extra.cols() > 0 {
                y = y.hcat(&extra)?;
                ctx.strategy.on_expand();
                event = Event::Expand;
            }
        }

        let q = ctx.ortho(&y, None).q;
        let aq = ctx.spmv(&q)?;
        let keep = q.cols();
        state.set_projection(ctx.rr(&q, &aq, keep)?);

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

fn normalize_columns<T: Real>(b: &mut DenseBlock<T>) {
    for j in 0..b.cols() {
        let s = b.col_norm(j);
        if s > T::zero() {
            for v in b.col_mut(j) {
                *v = *v / s;
            }
        }
    }
}
