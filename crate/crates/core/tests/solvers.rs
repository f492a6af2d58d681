use blockeig::matio::{gen_diag_geom, gen_laplacian_1d, laplacian_1d_eigenvalues};
use blockeig::solvers::solve;
use blockeig::{
    Event, ExpansionMode, Preconditioner, SolveResult, SolveStatus, SolverConfig, SolverKind, SparseSym,
    StrategyConfig, StrategyKind,
};

const KINDS: [SolverKind; 3] = [SolverKind::Si, SolverKind::Sd, SolverKind::Lobpcg];

fn cfg(kind: SolverKind, n_ev: usize) -> SolverConfig<f64> {
    let mut c = SolverConfig::new(kind, n_ev);
    c.max_iters = 5000;
    c
}

fn run(kind: SolverKind, a: &SparseSym<f64>, c: &SolverConfig<f64>, s: StrategyKind) -> SolveResult<f64> {
    solve(kind, a, c, &StrategyConfig::new(s), None).unwrap()
}

#[test]
fn every_iterate_is_orthonormal_and_sorted() {
    let a = gen_laplacian_1d::<f64>(120).unwrap();
    for kind in SolverKind::ALL {
        let mut c = cfg(kind, 4);
        for j in [1, 2, 3, 7, 12, 20, 33] {
            c.max_iters = j;
            let r = run(kind, &a, &c, StrategyKind::Fix);
            assert!(r.vectors.is_finite());
            assert!(r.vectors.orthonormality_error() < 1e-12, "{kind} j={j}");
            assert!(r.values.windows(2).all(|w| w[0] <= w[1]), "{kind} j={j}");
            assert!(r.history.iter().all(|h| h.n_now == c.n_es || h.n_now == c.n_ex));
        }
    }
}

#[test]
fn none_equals_fix_with_unreachable_warmup() {
    let a = gen_laplacian_1d::<f64>(150).unwrap();
    for kind in SolverKind::ALL {
        let c = cfg(kind, 4);
        let none = run(kind, &a, &c, StrategyKind::None);
        let mut fix = StrategyConfig::new(StrategyKind::Fix);
        fix.j_warm = usize::MAX;
        let held = solve(kind, &a, &c, &fix, None).unwrap();
        assert_eq!(none.values, held.values, "{kind}");
        assert_eq!(none.vectors, held.vectors, "{kind}");
        assert_eq!(none.iterations(), held.iterations());
        assert_eq!(none.work(), held.work());
    }
}

#[test]
fn shrink_and_expand_preserve_converged_values() {
    let a = gen_laplacian_1d::<f64>(200).unwrap();
    for kind in KINDS {
        let mut c = cfg(kind, 5);
        c.max_iters = 20000;
        let base = run(kind, &a, &c, StrategyKind::None);
        assert_eq!(base.status, SolveStatus::Converged);
        for s in [StrategyKind::Fix, StrategyKind::Slope, StrategyKind::Slopek] {
            let r = run(kind, &a, &c, s);
            assert_eq!(r.status, SolveStatus::Converged, "{kind} {s}");
            for (x, y) in r.values.iter().zip(&base.values) {
                assert!((x - y).abs() <= 1e-8 * y.abs(), "{kind} {s}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn shrink_leaves_n_es_pairs_and_expand_restores_n_ex() {
    let a = gen_laplacian_1d::<f64>(200).unwrap();
    for kind in KINDS {
        let c = cfg(kind, 5);
        let r = run(kind, &a, &c, StrategyKind::Fix);
        let shrinks: Vec<usize> = r.history.iter().filter(|h| h.event == Event::Shrink).map(|h| h.iteration).collect();
        assert!(!shrinks.is_empty(), "{kind}");
        for w in r.history.windows(2) {
            match w[0].event {
                Event::Shrink => assert_eq!(w[1].n_now, c.n_es, "{kind}"),
                Event::Expand => assert_eq!(w[1].n_now, c.n_ex, "{kind}"),
                _ => assert_eq!(w[1].n_now, w[0].n_now, "{kind}"),
            }
        }
    }
}

#[test]
fn si_terminal_rate_matches_spectral_ratio() {
    let a = gen_diag_geom::<f64>(300, 1.05).unwrap();
    let mut diag = a.diagonal();
    diag.sort_by(f64::total_cmp);
    let (n_ev, n_ex) = (5, 10);
    let mut c = cfg(SolverKind::Si, n_ev).with_n_ex(n_ex);
    c.tol = 1e-13;
    let r = run(SolverKind::Si, &a, &c, StrategyKind::None);
    let predicted = (diag[n_ex] / diag[n_ev - 1]).log10();
    let logs: Vec<f64> = r.history.iter().map(|h| h.overall_residual.log10()).collect();
    let tail = &logs[logs.len() - 11..logs.len() - 1];
    let measured = (tail[0] - tail[tail.len() - 1]) / (tail.len() - 1) as f64;
    assert!((measured - predicted).abs() <= 0.2 * predicted, "measured {measured}, predicted {predicted}");
}

#[test]
fn runs_are_deterministic() {
    let a = gen_laplacian_1d::<f64>(100).unwrap();
    for kind in SolverKind::ALL {
        let mut c = cfg(kind, 3);
        c.seed = 42;
        let mut s = StrategyConfig::new(StrategyKind::Slope);
        s.r_warm = 1e-2;
        let r1 = solve(kind, &a, &c, &s, None).unwrap();
        let r2 = solve(kind, &a, &c, &s, None).unwrap();
        assert_eq!(r1.values, r2.values);
        assert_eq!(r1.vectors, r2.vectors);
        assert_eq!(r1.iterations(), r2.iterations());
        c.seed = 43;
        let r3 = solve(kind, &a, &c, &s, None).unwrap();
        assert_ne!(r1.vectors, r3.vectors);
    }
}

#[test]
fn work_counters_are_nondecreasing() {
    let a = gen_laplacian_1d::<f64>(150).unwrap();
    for kind in SolverKind::ALL {
        let r = run(kind, &a, &cfg(kind, 4), StrategyKind::Slopek);
        for w in r.history.windows(2) {
            let (p, q) = (w[0].work, w[1].work);
            assert!(q.spmv_cols >= p.spmv_cols && q.solve_cols >= p.solve_cols);
            assert!(q.ortho_flops >= p.ortho_flops && q.rr_flops >= p.rr_flops);
        }
        assert!(r.total_work() > 0);
        assert_eq!(r.work().solve_cols > 0, kind == SolverKind::Si, "{kind}");
    }
}

#[test]
fn expansion_modes_converge() {
    let a = gen_diag_geom::<f64>(200, 1.05).unwrap();
    for mode in [ExpansionMode::Xdrop, ExpansionMode::Random, ExpansionMode::Powered] {
        let mut c = cfg(SolverKind::Si, 5);
        c.expansion_mode = mode;
        let r = run(SolverKind::Si, &a, &c, StrategyKind::Fix);
        assert_eq!(r.status, SolveStatus::Converged, "{mode:?}");
    }
    let mut c = cfg(SolverKind::Lobpcg, 5);
    c.expansion_mode = ExpansionMode::Random;
    let l = gen_laplacian_1d::<f64>(200).unwrap();
    assert_eq!(run(SolverKind::Lobpcg, &l, &c, StrategyKind::Fix).status, SolveStatus::Converged);
}

#[test]
fn diagonal_preconditioner_converges() {
    let a = gen_diag_geom::<f64>(200, 1.05).unwrap();
    for kind in [SolverKind::Sd, SolverKind::Lobpcg] {
        let mut c = cfg(kind, 4);
        c.preconditioner = Preconditioner::Diagonal;
        let r = run(kind, &a, &c, StrategyKind::None);
        assert_eq!(r.status, SolveStatus::Converged, "{kind}");
    }
}

#[test]
fn single_precision_solves() {
    let a = gen_laplacian_1d::<f32>(60).unwrap();
    let exact = laplacian_1d_eigenvalues(60);
    for kind in [SolverKind::Si, SolverKind::Lobpcg] {
        let mut c = SolverConfig::<f32>::new(kind, 3);
        c.tol = 1e-5;
        c.max_iters = 5000;
        let r = solve(kind, &a, &c, &StrategyConfig::new(StrategyKind::Fix), None).unwrap();
        assert_eq!(r.status, SolveStatus::Converged, "{kind}");
        for (v, e) in r.values.iter().zip(&exact) {
            assert!((f64::from(*v) - e).abs() <= 1e-4 * e, "{kind}: {v} vs {e}");
        }
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let a = gen_laplacian_1d::<f64>(20).unwrap();
    let fix = StrategyConfig::new(StrategyKind::Fix);
    let mut c = cfg(SolverKind::Si, 12);
    assert!(solve(SolverKind::Si, &a, &c, &fix, None).is_err());
    c = cfg(SolverKind::Si, 0);
    assert!(solve(SolverKind::Si, &a, &c, &fix, None).is_err());
    c = cfg(SolverKind::Sd, 2);
    c.expansion_mode = ExpansionMode::Powered;
    assert!(solve(SolverKind::Sd, &a, &c, &fix, None).is_err());
    let mut bad = fix;
    bad.mu = 1.0;
    assert!(solve(SolverKind::Si, &a, &cfg(SolverKind::Si, 2), &bad, None).is_err());
}

#[test]
fn exact_start_converges_immediately() {
    let a = gen_laplacian_1d::<f64>(50).unwrap();
    let warm = run(SolverKind::Si, &a, &cfg(SolverKind::Si, 3), StrategyKind::None);
    let mut c = cfg(SolverKind::Lobpcg, 3);
    c.n_ex = 3;
    c.n_es = 3;
    let x0 = warm.vectors.columns(0..3);
    let r = solve(SolverKind::Lobpcg, &a, &c, &StrategyConfig::new(StrategyKind::None), Some(&x0)).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert_eq!(r.iterations(), 1);
}
