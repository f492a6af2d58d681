use super::common::Ctx;
use super::{Event, SolveResult, SolveStatus, SolverConfig, SolverError, SolverKind};
use crate::kernel::{cg_solve, spmv_block, DenseBlock};
use crate::matio::SparseSym;
use crate::scalar::Real;
use crate::strategy::{Decision, StrategyConfig};

/// Trace minimization: `X ← X − Δ` where `Δ` approximately solves
/// `P_X A P_X Δ = P_X R` by a few unpreconditioned CG steps, with
/// `P_X = I − XXᵀ` applied as an operator.
pub fn solve_tracemin<T: Real>(
    a: &SparseSym<T>,
    cfg: &SolverConfig<T>,
    strategy: &StrategyConfig<T>,
    x0: Option<&DenseBlock<T>>,
) -> Result<SolveResult<T>, SolverError> {
    let mut ctx = Ctx::new(SolverKind::Tracemin, a, cfg, strategy)?;
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

        let x = &state.x;
        let (n, m) = (x.rows() as u64, x.cols() as u64);
        let project = |v: &DenseBlock<T>| -> DenseBlock<T> {
            let c = x.gemm_tn(v).expect("rows agree");
            v.sub(&x.gemm_nn(&c).expect("inner dims agree")).expect("shapes agree")
        };
        let rhs = project(&r_block);
        let mut applications = 0u64;
        let outcome = cg_solve(
            |p: &DenseBlock<T>| {
                applications += 1;
                project(&spmv_block(a, &project(p)).expect("square operator"))
            },
            &rhs,
            cfg.cg_iters,
        );
        ctx.work.spmv_cols += applications * m;
        // two projector applications per CG step plus one for the right-hand side
        ctx.work.ortho_flops += (2 * applications + 1) * 4 * n * m * m;
        if outcome.breakdown {
            ctx.cg_breakdowns += 1;
        }
        let mut y = state.x.sub(&outcome.x)?;

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
