//! Acceptance criteria 1 to 10. Every test prints one `PASS`/`FAIL` line to
//! stderr (outside the test harness capture) and then asserts the outcome.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use blockeig::matio::{gen_diag_geom, gen_laplacian_1d};
use blockeig::solvers::solve;
use blockeig::strategy::StrategyState;
use blockeig::theory::{
    check_3x3, fuzz_decomp, fuzz_perturbation, fuzz_rate, main_sweep, reproduce_3x3, MainInstance,
};
use blockeig::{
    Decision, ExpansionMode, SolveResult, SolveStatus, SolverConfig, SolverKind, SparseSym, StrategyConfig,
    StrategyKind,
};
use nalgebra::{DMatrix, SymmetricEigen};

fn verdict(n: u32, pass: bool, detail: String) {
    let line = format!("acceptance criterion {n:>2}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn run(kind: SolverKind, a: &SparseSym<f64>, cfg: &SolverConfig<f64>, s: StrategyKind) -> SolveResult<f64> {
    solve(kind, a, cfg, &StrategyConfig::new(s), None).unwrap()
}

fn dense_oracle(a: &SparseSym<f64>) -> Vec<f64> {
    let m = DMatrix::from_column_slice(a.n(), a.n(), &a.to_dense_col_major());
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

const GOLDEN_TIME: Duration = Duration::from_secs(1);

#[test]
fn criterion_01_golden_3x3() {
    let t = Instant::now();
    let ex = reproduce_3x3().unwrap();
    let checks = check_3x3(&ex);
    let elapsed = t.elapsed();
    let bad: Vec<_> = checks.iter().filter(|c| !c.holds).map(|c| c.name.clone()).collect();
    verdict(
        1,
        bad.is_empty() && elapsed < GOLDEN_TIME,
        format!(
            "rho1={:.4e} rho_power={:.4e} rho2={:.4e} asymptotic={:.1e}, {} of {} values match, {:.3}s (limit 1s), mismatches {:?}",
            ex.rho1,
            ex.rho_power,
            ex.rho2,
            ex.asymptotic,
            checks.len() - bad.len(),
            checks.len(),
            elapsed.as_secs_f64(),
            bad
        ),
    );
}

#[test]
fn criterion_02_rate_bound() {
    const TRIALS: usize = 200;
    let t = Instant::now();
    let s = fuzz_rate(TRIALS, 2);
    let elapsed = t.elapsed();
    verdict(
        2,
        s.trials == TRIALS && s.failures.is_empty() && s.passed + s.inconclusive == TRIALS && elapsed < Duration::from_secs(30),
        format!(
            "{} trials, {} passed, {} inconclusive, {} violations (slack 1e-12), worst measured-bound {:.3e}, {:.2}s (limit 30s)",
            s.trials,
            s.passed,
            s.inconclusive,
            s.failures.len(),
            s.worst_slack,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_03_decomposition_and_perturbation_bounds() {
    const TRIALS: usize = 100;
    let t = Instant::now();
    let d = fuzz_decomp(TRIALS, 3);
    let p = fuzz_perturbation(TRIALS, 3);
    let elapsed = t.elapsed();
    verdict(
        3,
        d.failures.is_empty() && p.failures.is_empty() && d.trials == TRIALS && p.trials == TRIALS && elapsed < Duration::from_secs(60),
        format!(
            "E-blocks: {} passed, {} inconclusive, {} violations; dC-blocks: {} passed, {} inconclusive, {} violations; {:.2}s (limit 60s)",
            d.passed,
            d.inconclusive,
            d.failures.len(),
            p.passed,
            p.inconclusive,
            p.failures.len(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_04_main_bound_limit_and_scaling() {
    const LIMIT_TOL: f64 = 1e-10;
    const SLOPE: f64 = 1.0;
    const SLOPE_TOL: f64 = 0.3;
    let inst = MainInstance::generate(4, 30, 3, 6).unwrap();
    let exact = inst.check(0.0).unwrap();
    let sweep = main_sweep(&inst, &[1e-5, 1e-4, 1e-3]).unwrap();
    let limit_ok = exact.report.measured <= exact.floor + LIMIT_TOL;
    let slope_ok = (sweep.slope - SLOPE).abs() <= SLOPE_TOL;
    verdict(
        4,
        limit_ok && slope_ok && sweep.reports.iter().all(|r| r.holds),
        format!(
            "eps=0: rate {:.6e} <= sigma_(l+1)/sigma_k {:.6e} (+1e-10); contamination {:?} at eps {:?}, log-log slope {:.4} (target 1 +- 0.3)",
            exact.report.measured,
            exact.floor,
            sweep.contamination.iter().map(|c| format!("{c:.3e}")).collect::<Vec<_>>(),
            sweep.eps.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>(),
            sweep.slope
        ),
    );
}

#[test]
fn criterion_05_oracle_correctness() {
    const TOL: f64 = 1e-8;
    const TRACEMIN_TOL: f64 = 1e-6;
    const N_EV: usize = 10;
    let t = Instant::now();
    let a = gen_laplacian_1d::<f64>(400).unwrap();
    let exact = dense_oracle(&a);
    let mut failures = Vec::new();
    let mut runs = 0;
    for kind in [SolverKind::Si, SolverKind::Sd, SolverKind::Lobpcg] {
        for s in StrategyKind::ALL {
            let mut cfg = SolverConfig::new(kind, N_EV);
            cfg.max_iters = 20000;
            let r = run(kind, &a, &cfg, s);
            runs += 1;
            let worst = r.values.iter().zip(&exact).map(|(v, e)| (v - e).abs() / e).fold(0.0, f64::max);
            if r.status != SolveStatus::Converged || r.values.len() != N_EV || worst > TOL {
                failures.push(format!("{kind}/{s}: {} worst {worst:.2e}", r.status));
            }
        }
    }
    let mut tm_mismatch = 0;
    let mut tm_total = 0;
    for s in StrategyKind::ALL {
        let mut cfg = SolverConfig::new(SolverKind::Tracemin, N_EV);
        cfg.max_iters = 20000;
        let r = run(SolverKind::Tracemin, &a, &cfg, s);
        runs += 1;
        if r.status != SolveStatus::Converged {
            failures.push(format!("tracemin/{s}: {}", r.status));
        }
        tm_total += N_EV;
        tm_mismatch += r.values.iter().zip(&exact).filter(|(v, e)| ((**v - **e) / **e).abs() > TRACEMIN_TOL).count();
    }
    let tm_ok = tm_mismatch as f64 <= 0.01 * tm_total as f64;
    let elapsed = t.elapsed();
    verdict(
        5,
        failures.is_empty() && tm_ok && elapsed < Duration::from_secs(120),
        format!(
            "{runs} runs on laplacian1d:400 n_ev=10; si/sd/lobpcg within 1e-8: {}; tracemin mismatches beyond 1e-6: {tm_mismatch}/{tm_total} (allowed 1%); {:.1}s (limit 120s); {failures:?}",
            if failures.is_empty() { "all" } else { "not all" },
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_06_shrink_expand_effect() {
    const RATIO: f64 = 1.3;
    const SAVING: f64 = 0.10;
    let problems = [
        ("diag-geom:500,1.02", gen_diag_geom::<f64>(500, 1.02).unwrap()),
        ("laplacian1d:400", gen_laplacian_1d::<f64>(400).unwrap()),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (name, a) in &problems {
        let mut cfg = SolverConfig::new(SolverKind::Lobpcg, 10);
        cfg.max_iters = 10000;
        let results: Vec<SolveResult<f64>> = std::thread::scope(|scope| {
            let hs: Vec<_> = [StrategyKind::None, StrategyKind::Fix, StrategyKind::Slopek]
                .into_iter()
                .map(|s| {
                    let cfg = &cfg;
                    scope.spawn(move || run(SolverKind::Lobpcg, a, cfg, s))
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let (none, fix, slopek) = (&results[0], &results[1], &results[2]);
        let converged = results.iter().all(|r| r.status == SolveStatus::Converged);
        let ratio = fix.iterations() as f64 / none.iterations() as f64;
        let dense = |r: &SolveResult<f64>| r.work().ortho_flops + r.work().rr_flops;
        let save = |r: &SolveResult<f64>| 1.0 - r.total_work() as f64 / none.total_work() as f64;
        let ok = converged && ratio <= RATIO && dense(fix) < dense(none) && (save(fix) >= SAVING || save(slopek) >= SAVING);
        pass &= ok;
        details.push(format!(
            "{name}: iterations none {} fix {} slopek {} (fix ratio {ratio:.3}, limit 1.3), ortho+rr none {} fix {}, work saving fix {:.1}% slopek {:.1}% (need 10%)",
            none.iterations(),
            fix.iterations(),
            slopek.iterations(),
            dense(none),
            dense(fix),
            100.0 * save(fix),
            100.0 * save(slopek)
        ));
    }
    verdict(6, pass, details.join("; "));
}

#[test]
fn criterion_07_block_size_monotonicity() {
    let a = gen_diag_geom::<f64>(300, 1.05).unwrap();
    let iters: Vec<usize> = [5, 10, 20]
        .into_iter()
        .map(|n_ex| {
            let cfg = SolverConfig::new(SolverKind::Si, 5).with_n_ex(n_ex);
            let r = run(SolverKind::Si, &a, &cfg, StrategyKind::None);
            assert_eq!(r.status, SolveStatus::Converged);
            r.iterations()
        })
        .collect();
    verdict(
        7,
        iters.windows(2).all(|w| w[1] <= w[0]),
        format!("si on diag-geom:300,1.05, n_ev=5: iterations at n_ex=5/10/20 = {iters:?}"),
    );
}

/// `log10 r` decays at 0.2 decades per iteration with a ±0.15 zig-zag,
/// starting below the warm-up threshold.
fn oscillating_residuals(len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| {
            let zig = if j % 2 == 0 { 0.15 } else { -0.15 };
            10f64.powf(-4.5 - 0.2 * j as f64 + zig)
        })
        .collect()
}

fn count_expansions(kind: StrategyKind, residuals: &[f64]) -> usize {
    let mut cfg = StrategyConfig::<f64>::new(kind);
    cfg.mu = 1.1;
    cfg.j_p = 10;
    let mut st = StrategyState::new(15, 20);
    let mut expansions = 0;
    for &r in residuals {
        let d = st.advance(&cfg, r);
        expansions += usize::from(d == Decision::Expand);
        st.apply(d);
    }
    expansions
}

#[test]
fn criterion_08_strategy_robustness() {
    let fixture = oscillating_residuals(60);
    let slope = count_expansions(StrategyKind::Slope, &fixture);
    let slopek = count_expansions(StrategyKind::Slopek, &fixture);
    verdict(
        8,
        slope >= 1 && slopek == 0,
        format!("60-step zig-zag residual fixture: slope (mu=1.1) expands {slope} times, slopek (j_p=10) {slopek} times"),
    );
}

#[test]
fn criterion_09_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["--gen", "laplacian1d:200", "--solver", "lobpcg", "--nev", "5", "--strategy", "slopek"],
        &["--gen", "diag-geom:200,1.05", "--solver", "si", "--nev", "5", "--strategy", "fix", "--expand-mode", "random", "--seed", "3"],
        &["--gen", "laplacian1d:150", "--solver", "sd", "--nev", "3", "--strategy", "slope"],
        &["--gen", "laplacian1d:150", "--solver", "tracemin", "--nev", "3", "--strategy", "fix"],
    ];
    let mut identical = 0;
    for (i, case) in cases.iter().enumerate() {
        let outs: Vec<Vec<u8>> = (0..2)
            .map(|k| {
                let path = dir.path().join(format!("h{i}_{k}.csv"));
                let status = Command::new(env!("CARGO_BIN_EXE_blockeig"))
                    .arg("solve")
                    .args(*case)
                    .arg("--out")
                    .arg(&path)
                    .output()
                    .unwrap()
                    .status;
                assert_eq!(status.code(), Some(0), "{case:?}");
                std::fs::read(&path).unwrap()
            })
            .collect();
        identical += usize::from(!outs[0].is_empty() && outs[0] == outs[1]);
    }
    verdict(
        9,
        identical == cases.len(),
        format!("{identical} of {} repeated solve runs wrote byte-identical CSV", cases.len()),
    );
}

#[test]
fn criterion_10_expansion_vector_ordering() {
    let a = gen_diag_geom::<f64>(300, 1.05).unwrap();
    let seeds = 0..5u64;
    let iters = |mode: ExpansionMode, seed: u64| {
        let mut cfg = SolverConfig::new(SolverKind::Si, 5);
        cfg.expansion_mode = mode;
        cfg.seed = seed;
        let r = run(SolverKind::Si, &a, &cfg, StrategyKind::Fix);
        assert_eq!(r.status, SolveStatus::Converged);
        r.iterations()
    };
    let xdrop: Vec<usize> = seeds.clone().map(|s| iters(ExpansionMode::Xdrop, s)).collect();
    let random: Vec<usize> = seeds.clone().map(|s| iters(ExpansionMode::Random, s)).collect();
    let powered: Vec<usize> = seeds.map(|s| iters(ExpansionMode::Powered, s)).collect();
    let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / v.len() as f64;
    let powered_wins = powered.iter().zip(&xdrop).filter(|(p, x)| p <= x).count();
    verdict(
        10,
        mean(&xdrop) <= mean(&random) && powered_wins >= 3,
        format!(
            "si fix on diag-geom:300,1.05 seeds 0-4: xdrop {xdrop:?} (mean {:.1}), random {random:?} (mean {:.1}), powered {powered:?}, powered <= xdrop on {powered_wins}/5",
            mean(&xdrop),
            mean(&random)
        ),
    );
}
