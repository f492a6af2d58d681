use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    ConvergenceRecord, Event, ExpansionMode, Preconditioner, SolveResult, SolveStatus, SolverConfig, SolverError,
    SolverKind, WorkUnits,
};
use crate::kernel::{cgs2, estimate_norm2, spmv_block, DenseBlock, Orthonormalized};
use crate::matio::SparseSym;
use crate::rr::{assess_with_norm, project, residual_from, Projected, ResidualReport};
use crate::scalar::Real;
use crate::strategy::{Decision, StrategyConfig, StrategyState};

/// Iterate of a block solver: Ritz block `X` with `A·X` and `Λ`, the columns
/// split off at the last shrink, and the LOBPCG search directions `P`
/// together with the directions set aside at the last shrink.
#[derive(Debug, Clone)]
pub struct BlockState<T> {
    pub x: DenseBlock<T>,
    pub ax: DenseBlock<T>,
    pub lambda: Vec<T>,
    pub x_drop: DenseBlock<T>,
    pub p: DenseBlock<T>,
    pub ap: DenseBlock<T>,
    /// Column of `X` each column of `P` was derived from.
    pub p_owner: Vec<usize>,
    pub p_drop: DenseBlock<T>,
}

impl<T: Real> BlockState<T> {
    pub fn from_projection(proj: Projected<T>) -> Self {
        let n = proj.ritz.vectors.rows();
        Self {
            x: proj.ritz.vectors,
            ax: proj.a_vectors,
            lambda: proj.ritz.values,
            x_drop: DenseBlock::zeros(n, 0),
            p: DenseBlock::zeros(n, 0),
            ap: DenseBlock::zeros(n, 0),
            p_owner: Vec::new(),
            p_drop: DenseBlock::zeros(n, 0),
        }
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn n_now(&self) -> usize {
        self.x.cols()
    }

    pub fn set_projection(&mut self, proj: Projected<T>) {
        self.x = proj.ritz.vectors;
        self.ax = proj.a_vectors;
        self.lambda = proj.ritz.values;
    }

    /// `A·X − X·Λ` from the stored `A·X`.
    pub fn residual(&self) -> Result<DenseBlock<T>, SolverError> {
        let ritz = crate::rr::RitzSet {
            values: self.lambda.clone(),
            vectors: self.x.clone(),
            coeffs: DenseBlock::zeros(0, 0),
        };
        Ok(residual_from(&self.ax, &ritz)?)
    }

    /// Keeps the leading `n_es` Ritz pairs. The trailing columns of `X` become
    /// `X_drop` and the `P` columns derived from them become `P_drop`.
    pub fn shrink(&mut self, n_es: usize) {
        let m = self.n_now();
        if n_es >= m {
            return;
        }
        self.x_drop = self.x.columns(n_es..m);
        self.x = self.x.columns(0..n_es);
        self.ax = self.ax.columns(0..n_es);
        self.lambda.truncate(n_es);
        if self.p.cols() > 0 {
            let keep: Vec<usize> = (0..self.p.cols()).filter(|&i| self.p_owner[i] < n_es).collect();
            let gone: Vec<usize> = (0..self.p.cols()).filter(|&i| self.p_owner[i] >= n_es).collect();
            self.p_drop = self.p.select_cols(&gone);
            self.p = self.p.select_cols(&keep);
            self.ap = self.ap.select_cols(&keep);
            self.p_owner = keep.iter().map(|&i| self.p_owner[i]).collect();
        }
    }

    /// Takes `[X_drop, P_drop]`, leaving both empty.
    pub fn take_drop(&mut self) -> DenseBlock<T> {
        let n = self.n();
        let x = std::mem::replace(&mut self.x_drop, DenseBlock::zeros(n, 0));
        let p = std::mem::replace(&mut self.p_drop, DenseBlock::zeros(n, 0));
        x.hcat(&p).expect("row counts agree")
    }
}

/// Indices of the pairs that stay active: everything after the leading run
/// of pairs with residual at most `tol`.
pub fn soft_lock<T: Real>(report: &ResidualReport<T>, tol: T) -> Vec<usize> {
    let locked = report.per_pair.iter().take_while(|&&p| p <= tol).count();
    (locked..report.per_pair.len()).collect()
}

/// Shared bookkeeping of one solver run.
pub(crate) struct Ctx<'a, T: Real> {
    pub a: &'a SparseSym<T>,
    pub cfg: &'a SolverConfig<T>,
    pub scfg: &'a StrategyConfig<T>,
    pub strategy: StrategyState<T>,
    pub work: WorkUnits,
    pub history: Vec<ConvergenceRecord<T>>,
    pub rng: ChaCha8Rng,
    pub n: usize,
    pub solve_col_cost: u64,
    pub cg_breakdowns: usize,
    a_norm: T,
    log_r: Vec<T>,
    inv_diag: Option<Vec<T>>,
}

impl<'a, T: Real> Ctx<'a, T> {
    pub fn new(
        kind: SolverKind,
        a: &'a SparseSym<T>,
        cfg: &'a SolverConfig<T>,
        scfg: &'a StrategyConfig<T>,
    ) -> Result<Self, SolverError> {
        cfg.validate(kind, a.n(), scfg)?;
        let inv_diag = match cfg.preconditioner {
            Preconditioner::Identity => None,
            Preconditioner::Diagonal => {
                let floor = T::lit(1e-12);
                Some(a.diagonal().iter().map(|d| T::one() / d.abs().max(floor)).collect())
            }
        };
        Ok(Self {
            a,
            cfg,
            scfg,
            strategy: StrategyState::new(cfg.n_es, cfg.n_ex),
            work: WorkUnits::default(),
            history: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            n: a.n(),
            solve_col_cost: 0,
            cg_breakdowns: 0,
            a_norm: estimate_norm2(a),
            log_r: Vec::new(),
            inv_diag,
        })
    }

    pub fn advance(&mut self, r: T) -> Decision {
        self.strategy.advance(self.scfg, r)
    }

    pub fn spmv(&mut self, x: &DenseBlock<T>) -> Result<DenseBlock<T>, SolverError> {
        self.work.spmv_cols += x.cols() as u64;
        Ok(spmv_block(self.a, x)?)
    }

    /// CGS2 of `w` against `q` (if any) and internally, with flop accounting.
    pub fn ortho(&mut self, w: &DenseBlock<T>, q: Option<&DenseBlock<T>>) -> Orthonormalized<T> {
        let (m, k) = (w.cols() as u64, q.map_or(0, |q| q.cols()) as u64);
        self.work.ortho_flops += self.n as u64 * (m * m + 2 * m * k);
        cgs2(w, q, self.cfg.drop_tol)
    }

    /// Rayleigh–Ritz on orthonormal `s` with `as_ = A·s`, keeping `keep` pairs.
    pub fn rr(&mut self, s: &DenseBlock<T>, as_: &DenseBlock<T>, keep: usize) -> Result<Projected<T>, SolverError> {
        let (n, m) = (self.n as u64, s.cols() as u64);
        let k = keep.min(s.cols()) as u64;
        self.work.rr_flops += n * m * m + m * m * m + 2 * n * m * k;
        self.work.rr_dim = s.cols();
        Ok(project(s, as_, keep)?)
    }

    pub fn assess(&self, state: &BlockState<T>) -> Result<(DenseBlock<T>, ResidualReport<T>), SolverError> {
        let r = state.residual()?;
        let report = assess_with_norm(self.a_norm, &state.lambda, &state.x, &r, self.cfg.n_ev, self.cfg.tol)?;
        Ok((r, report))
    }

    pub fn precondition(&self, r: &DenseBlock<T>) -> DenseBlock<T> {
        match &self.inv_diag {
            None => r.clone(),
            Some(d) => r.scale_rows(d),
        }
    }

    /// Orthonormal `n × n_ex` starting block: `x0` when given, otherwise a
    /// seeded standard normal block. Deficient columns are replaced by random
    /// ones.
    pub fn initial_basis(&mut self, x0: Option<&DenseBlock<T>>) -> Result<DenseBlock<T>, SolverError> {
        let (n, n_ex) = (self.n, self.cfg.n_ex);
        let start = match x0 {
            Some(x0) => {
                if x0.rows() != n || x0.cols() != n_ex {
                    return Err(SolverError::Config(format!(
                        "initial block must be {n}x{n_ex}, got {}x{}",
                        x0.rows(),
                        x0.cols()
                    )));
                }
                x0.clone()
            }
            None => DenseBlock::random_normal(n, n_ex, &mut self.rng),
        };
        let mut q = self.ortho(&start, None).q;
        let mut attempts = 0;
        while q.cols() < n_ex {
            attempts += 1;
            if attempts > 10 {
                return Err(SolverError::Config("could not build a full-rank initial block".into()));
            }
            let extra = DenseBlock::random_normal(n, n_ex - q.cols(), &mut self.rng);
            let fill = self.ortho(&extra, Some(&q)).q;
            q = q.hcat(&fill)?;
        }
        Ok(q)
    }

    /// Initial Rayleigh–Ritz step.
    pub fn initial_state(&mut self, x0: Option<&DenseBlock<T>>) -> Result<BlockState<T>, SolverError> {
        let q = self.initial_basis(x0)?;
        let aq = self.spmv(&q)?;
        let keep = q.cols();
        Ok(BlockState::from_projection(self.rr(&q, &aq, keep)?))
    }

    /// Columns to append at an expansion; empty when none are available.
    pub fn expansion_block(&mut self, state: &mut BlockState<T>) -> DenseBlock<T> {
        match self.cfg.expansion_mode {
            ExpansionMode::Xdrop | ExpansionMode::Powered => state.take_drop(),
            ExpansionMode::Random => {
                let want = self.cfg.n_ex.saturating_sub(state.n_now());
                state.take_drop();
                DenseBlock::random_normal(self.n, want, &mut self.rng)
            }
        }
    }

    pub fn record(&mut self, iteration: usize, r: T, n_now: usize, event: Event) {
        self.history.push(ConvergenceRecord { iteration, overall_residual: r, n_now, event, work: self.work });
    }

    /// True once the best `log10 r` of the last window fails to beat the best
    /// before it by the configured margin.
    pub fn stagnated(&mut self, r: T) -> bool {
        if !r.is_finite() {
            return true;
        }
        self.log_r.push(r.max(T::min_positive_value()).log10());
        let w = self.cfg.stagnation_window;
        let len = self.log_r.len();
        if w == 0 || len <= w {
            return false;
        }
        let min = |s: &[T]| s.iter().copied().fold(T::infinity(), T::min);
        let earlier = min(&self.log_r[..len - w]);
        let recent = min(&self.log_r[len - w..]);
        recent > earlier - self.cfg.stagnation_decades
    }

    pub fn finish(
        self,
        status: SolveStatus,
        state: &BlockState<T>,
        report: Option<ResidualReport<T>>,
    ) -> SolveResult<T> {
        let k = self.cfg.n_ev.min(state.n_now());
        SolveResult {
            status,
            values: state.lambda[..k].to_vec(),
            vectors: state.x.columns(0..k),
            history: self.history,
            report,
            spmv_col_cost: self.a.nnz_full() as u64,
            solve_col_cost: self.solve_col_cost,
            cg_breakdowns: self.cg_breakdowns,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::orthonormalize;

    #[test]
    fn soft_lock_prefix_rule() {
        let rep = ResidualReport { per_pair: vec![1e-12, 1e-12, 1e-6, 1e-12], overall: 1e-6, converged_count: 2 };
        assert_eq!(soft_lock(&rep, 1e-10), vec![2, 3]);
        let none = ResidualReport { per_pair: vec![1.0, 1.0], overall: 1.0, converged_count: 0 };
        assert_eq!(soft_lock(&none, 1e-10), vec![0, 1]);
        let all = ResidualReport { per_pair: vec![0.0; 3], overall: 0.0, converged_count: 3 };
        assert!(soft_lock(&all, 1e-10).is_empty());
    }

    #[test]
    fn shrink_splits_block_and_directions() {
        let n = 8;
        let (q, _) = orthonormalize(&DenseBlock::<f64>::from_fn(n, 6, |i, j| ((i + 1) * (j + 2)) as f64 % 7.0 + (i == j) as u8 as f64), 1e-8);
        let mut st = BlockState {
            x: q.columns(0..4),
            ax: q.columns(0..4),
            lambda: vec![1.0, 2.0, 3.0, 4.0],
            x_drop: DenseBlock::zeros(n, 0),
            p: q.columns(4..6),
            ap: q.columns(4..6),
            p_owner: vec![1, 3],
            p_drop: DenseBlock::zeros(n, 0),
        };
        st.shrink(2);
        assert_eq!(st.n_now(), 2);
        assert_eq!(st.lambda, vec![1.0, 2.0]);
        assert_eq!(st.x_drop.cols(), 2);
        assert_eq!(st.x_drop.col(1), q.col(3));
        assert_eq!(st.p_owner, vec![1]);
        assert_eq!(st.p.col(0), q.col(4));
        assert_eq!(st.p_drop.col(0), q.col(5));
        assert_eq!(st.take_drop().cols(), 3);
        assert_eq!(st.x_drop.cols() + st.p_drop.cols(), 0);
    }
}
