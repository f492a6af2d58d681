use super::common::Ctx;
use super::{Event, SolveResult, SolveStatus, SolverConfig, SolverError, SolverKind};
use crate::kernel::DenseBlock;
use crate::matio::SparseSym;
use crate::scalar::Real;
use crate::strategy::{Decision, StrategyConfig};

/// Block steepest descent: Rayleigh–Ritz on `[X, W]` with `W = T·R`
/// orthonormalized against `X`, keeping the leading `n_now` pairs.
pub fn solve_sd<T: Real>(
    a: &SparseSym<T>,
    cfg: &SolverConfig<T>,
    strategy: &StrategyConfig<T>,
    x0: Option<&DenseBlock<T>>,
) -> Result<SolveResult<T>, SolverError> {
    let mut ctx = Ctx::new(SolverKind::Sd, a, cfg, strategy)?;
    let mut state = ctx.initial_state(x0)?;
    let mut last_report = None;

    for j in 1..=cfg.max_iters {
        let (r_block, report) = ctx.assess(&state)?;
        let r = report.overall;
        let n_now = state.n_now();
        if report.converged_count >= cfg.n_ev {
            ctx.record(j, r, n_now, Event::None);
            return Ok(ctx.finish(SolveStatus::Converged, &state, Some(report)));
        }
        let decision = ctx.advance(r);

        let mut event = Event::None;
        if decision == Decision::Expand {
            let extra = ctx.expansion_block(&mut state);
            let fresh = ctx.ortho(&extra, Some(&state.x)).q;
            if fresh.cols() > 0 {
                let a_fresh = ctx.spmv(&fresh)?;
                state.x = state.x.hcat(&fresh)?;
                state.ax = state.ax.hcat(&a_fresh)?;
                ctx.strategy.on_expand();
                event = Event::Expand;
            }
        }
        let keep = state.x.cols();

        let w = ctx.precondition(&r_block);
        let w = ctx.ortho(&w, Some(&state.x)).q;
        if w.cols() == 0 {
            ctx.record(j, r, n_now, event);
            return Ok(ctx.finish(SolveStatus::Stagnated, &state, Some(report)));
        }
        let aw = ctx.spmv(&w)?;
        let s = state.x.hcat(&w)?;
        let as_ = state.ax.hcat(&aw)?;
        let proj = ctx.rr(&s, &as_, keep)?;
        state.set_projection(proj);

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
