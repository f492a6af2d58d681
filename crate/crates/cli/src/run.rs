use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use blockeig::matio::{apply_spd_shift, read_matrix_market, write_matrix_market, GeneratorSpec};
use blockeig::solvers::solve as run_solver;
use blockeig::{
    ConvergenceRecord, ExpansionMode, Preconditioner, SolveResult, SolveStatus, SolverConfig, SolverKind, SparseSym,
    StrategyConfig, StrategyKind, WorkUnits,
};
use serde::Serialize;

use crate::{Format, GenArgs, Outcome, RunArgs};

type CmdResult = Result<Outcome, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn load_matrix(args: &RunArgs) -> Result<SparseSym<f64>, String> {
    let a = match (&args.source.matrix, &args.source.generator) {
        (Some(path), _) => read_matrix_market(path).map_err(|e| format!("{}: {e}", path.display()))?,
        (None, Some(spec)) => spec.parse::<GeneratorSpec>().map_err(err)?.build().map_err(err)?,
        (None, None) => return Err("one of --matrix or --gen is required".into()),
    };
    Ok(match args.shift_spd {
        Some(lambda1) => apply_spd_shift(&a, lambda1),
        None => a,
    })
}

fn configs(args: &RunArgs, kind: SolverKind, strategy: StrategyKind) -> Result<(SolverConfig<f64>, StrategyConfig<f64>), String> {
    let mut cfg = SolverConfig::new(kind, args.nev);
    if let Some(n_ex) = args.nex {
        cfg = cfg.with_n_ex(n_ex);
    }
    if let Some(n_es) = args.nes {
        cfg.n_es = n_es;
    }
    cfg.tol = args.tol;
    cfg.max_iters = args.max_iters;
    cfg.seed = args.seed;
    cfg.zeta = args.zeta;
    cfg.cg_iters = args.cg_iters;
    cfg.expansion_mode = args.expand_mode.parse::<ExpansionMode>().map_err(err)?;
    cfg.preconditioner = args.precond.parse::<Preconditioner>().map_err(err)?;
    let scfg = StrategyConfig {
        kind: strategy,
        j_e: args.je,
        j_s: args.js,
        mu: args.mu,
        j_p: args.jp,
        j_warm: args.jwarm,
        r_warm: args.rwarm,
    };
    Ok((cfg, scfg))
}

fn open_out(path: &Path) -> Result<BufWriter<File>, String> {
    File::create(path).map(BufWriter::new).map_err(|e| format!("{}: {e}", path.display()))
}

/// One CSV row of the convergence history.
#[derive(Debug, Serialize)]
struct HistoryRow {
    iteration: usize,
    r_overall: f64,
    n_now: usize,
    event: String,
    spmv_cols_cum: u64,
    solve_cols_cum: u64,
    ortho_flops_cum: u64,
    rr_dim: usize,
}

impl From<&ConvergenceRecord<f64>> for HistoryRow {
    fn from(r: &ConvergenceRecord<f64>) -> Self {
        Self {
            iteration: r.iteration,
            r_overall: r.overall_residual,
            n_now: r.n_now,
            event: r.event.to_string(),
            spmv_cols_cum: r.work.spmv_cols,
            solve_cols_cum: r.work.solve_cols,
            ortho_flops_cum: r.work.ortho_flops,
            rr_dim: r.work.rr_dim,
        }
    }
}

#[derive(Debug, Serialize)]
struct SolveOutput<'a> {
    solver: SolverKind,
    strategy: StrategyKind,
    status: SolveStatus,
    iterations: usize,
    final_residual: Option<f64>,
    eigenvalues: &'a [f64],
    work: WorkUnits,
    total_work: u64,
    spmv_col_cost: u64,
    solve_col_cost: u64,
    cg_breakdowns: usize,
    history: Vec<HistoryRow>,
}

fn write_history(w: impl Write, res: &SolveResult<f64>) -> Result<(), String> {
    let mut csv = csv::Writer::from_writer(w);
    for rec in &res.history {
        csv.serialize(HistoryRow::from(rec)).map_err(err)?;
    }
    csv.flush().map_err(err)
}

fn status_outcome(status: SolveStatus) -> Outcome {
    if status == SolveStatus::Converged {
        Outcome::Ok
    } else {
        Outcome::NotConverged
    }
}

pub fn solve(args: &RunArgs) -> CmdResult {
    let kind: SolverKind = args.solver.parse().map_err(err)?;
    let strategy: StrategyKind = args.strategy.parse().map_err(err)?;
    let a = load_matrix(args)?;
    let (cfg, scfg) = configs(args, kind, strategy)?;
    let res = run_solver(kind, &a, &cfg, &scfg, None).map_err(err)?;

    if let Some(path) = &args.out {
        let mut w = open_out(path)?;
        match args.format {
            Format::Csv => write_history(&mut w, &res)?,
            Format::Json => {
                let out = SolveOutput {
                    solver: kind,
                    strategy,
                    status: res.status,
                    iterations: res.iterations(),
                    final_residual: res.final_residual(),
                    eigenvalues: &res.values,
                    work: res.work(),
                    total_work: res.total_work(),
                    spmv_col_cost: res.spmv_col_cost,
                    solve_col_cost: res.solve_col_cost,
                    cg_breakdowns: res.cg_breakdowns,
                    history: res.history.iter().map(HistoryRow::from).collect(),
                };
                serde_json::to_writer_pretty(&mut w, &out).map_err(err)?;
                writeln!(w).map_err(err)?;
            }
        }
        w.flush().map_err(err)?;
    }

    let w = res.work();
    println!(
        "solver={kind} strategy={strategy} status={} iterations={} r={:.3e} work={} spmv_cols={} solve_cols={} ortho_flops={} rr_flops={}",
        res.status,
        res.iterations(),
        res.final_residual().unwrap_or(f64::NAN),
        res.total_work(),
        w.spmv_cols,
        w.solve_cols,
        w.ortho_flops,
        w.rr_flops,
    );
    for (i, v) in res.values.iter().enumerate() {
        println!("lambda[{i}] = {v:.16e}");
    }
    Ok(status_outcome(res.status))
}

/// One row of the strategy comparison.
#[derive(Debug, Clone, Serialize)]
struct CompareRow {
    strategy: StrategyKind,
    status: SolveStatus,
    iterations: usize,
    total_work: u64,
    spmv_cols: u64,
    solve_cols: u64,
    ortho_flops: u64,
    rr_flops: u64,
    save_pct: f64,
    /// Largest relative eigenvalue difference against the `none` run.
    max_rel_diff: f64,
}

fn thread_cap() -> usize {
    std::env::var("BLOCKEIG_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(usize::from).unwrap_or(1))
}

pub fn compare(args: &RunArgs) -> CmdResult {
    let kind: SolverKind = args.solver.parse().map_err(err)?;
    let a = load_matrix(args)?;
    let jobs = StrategyKind::ALL
        .iter()
        .map(|&s| configs(args, kind, s))
        .collect::<Result<Vec<_>, _>>()?;
    for (cfg, scfg) in &jobs {
        cfg.validate(kind, a.n(), scfg).map_err(err)?;
    }

    let mut results: Vec<Option<SolveResult<f64>>> = jobs.iter().map(|_| None).collect();
    for (chunk_jobs, chunk_out) in jobs.chunks(thread_cap()).zip(results.chunks_mut(thread_cap())) {
        let done = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk_jobs
                .iter()
                .map(|(cfg, scfg)| scope.spawn(|| run_solver(kind, &a, cfg, scfg, None)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect::<Vec<_>>()
        });
        for (slot, r) in chunk_out.iter_mut().zip(done) {
            *slot = Some(r.map_err(err)?);
        }
    }
    let results: Vec<SolveResult<f64>> = results.into_iter().flatten().collect();

    let base = &results[0];
    let base_work = base.total_work() as f64;
    let rows: Vec<CompareRow> = results
        .iter()
        .zip(StrategyKind::ALL)
        .map(|(r, s)| {
            let w = r.work();
            let max_rel_diff = r
                .values
                .iter()
                .zip(&base.values)
                .map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            CompareRow {
                strategy: s,
                status: r.status,
                iterations: r.iterations(),
                total_work: r.total_work(),
                spmv_cols: w.spmv_cols,
                solve_cols: w.solve_cols,
                ortho_flops: w.ortho_flops,
                rr_flops: w.rr_flops,
                save_pct: if base_work > 0.0 { 100.0 * (1.0 - r.total_work() as f64 / base_work) } else { 0.0 },
                max_rel_diff,
            }
        })
        .collect();

    println!(
        "{:<8} {:<10} {:>10} {:>16} {:>16} {:>8} {:>12}",
        "strategy", "status", "iterations", "work", "ortho+rr", "save%", "max_rel_diff"
    );
    for r in &rows {
        println!(
            "{:<8} {:<10} {:>10} {:>16} {:>16} {:>8.2} {:>12.3e}",
            r.strategy.to_string(),
            r.status.to_string(),
            r.iterations,
            r.total_work,
            r.ortho_flops + r.rr_flops,
            r.save_pct,
            r.max_rel_diff
        );
    }

    if let Some(path) = &args.out {
        let mut w = open_out(path)?;
        match args.format {
            Format::Csv => {
                let mut csv = csv::Writer::from_writer(&mut w);
                for r in &rows {
                    csv.serialize(r).map_err(err)?;
                }
                csv.flush().map_err(err)?;
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut w, &rows).map_err(err)?;
                writeln!(w).map_err(err)?;
            }
        }
        w.flush().map_err(err)?;
    }

    let all_converged = rows.iter().all(|r| r.status == SolveStatus::Converged);
    Ok(if all_converged { Outcome::Ok } else { Outcome::NotConverged })
}

pub fn generate(args: &GenArgs) -> CmdResult {
    let spec: GeneratorSpec = args.generator.parse().map_err(err)?;
    let a: SparseSym<f64> = spec.build().map_err(err)?;
    let text = write_matrix_market(&a);
    match &args.out {
        Some(path) => {
            let mut w = open_out(path)?;
            w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(err)?;
        }
        None => io::stdout().write_all(text.as_bytes()).map_err(err)?,
    }
    Ok(Outcome::Ok)
}
