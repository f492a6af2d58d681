use blockeig::kernel::{orthonormalize, spmv_block};
use blockeig::matio::{gen_diag, parse_matrix_market_str, write_matrix_market};
use blockeig::rr::{assess_convergence, project, residual_block};
use blockeig::strategy::{slope_avg, StrategyState};
use blockeig::theory::{inverse_rho, random_spd, RHO_IDENTITY_TOL};
use blockeig::{BlockState, Decision, DenseBlock, SparseSym, StrategyConfig, StrategyKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sparse_strategy() -> impl Strategy<Value = SparseSym<f64>> {
    (1usize..25).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, -1e3f64..1e3), 0..60).prop_map(move |t| {
            let lower = t.into_iter().map(|(i, j, v)| (i.max(j), i.min(j), v));
            SparseSym::from_triplets(n, lower).unwrap()
        })
    })
}

fn block(rows: usize, cols: usize, seed: u64) -> DenseBlock<f64> {
    DenseBlock::random_normal(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn diag_matrix(n: usize, seed: u64) -> SparseSym<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 + rand::Rng::random::<f64>(&mut rng)).collect();
    gen_diag(&d).unwrap()
}

/// Largest entry of `QQᵀ − PPᵀ` for orthonormal `q`, `p`.
fn projector_gap(q: &DenseBlock<f64>, p: &DenseBlock<f64>) -> f64 {
    let pq = q.gemm_nn(&q.transpose()).unwrap();
    let pp = p.gemm_nn(&p.transpose()).unwrap();
    pq.sub(&pp).unwrap().max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_market_round_trip(a in sparse_strategy()) {
        let back = parse_matrix_market_str::<f64>(&write_matrix_market(&a)).unwrap();
        prop_assert_eq!(back.n(), a.n());
        prop_assert_eq!(back.row_ptr(), a.row_ptr());
        prop_assert_eq!(back.col_idx(), a.col_idx());
        prop_assert_eq!(back.values(), a.values());
    }

    #[test]
    fn spmv_is_linear(a in sparse_strategy(), alpha in -10.0f64..10.0, beta in -10.0f64..10.0, seed in any::<u64>()) {
        let n = a.n();
        let x = block(n, 2, seed);
        let y = block(n, 2, seed.wrapping_add(1));
        let combo = x.scale(alpha).add(&y.scale(beta)).unwrap();
        let lhs = spmv_block(&a, &combo).unwrap();
        let rhs = spmv_block(&a, &x).unwrap().scale(alpha).add(&spmv_block(&a, &y).unwrap().scale(beta)).unwrap();
        let scale = lhs.max_abs().max(rhs.max_abs()).max(1.0);
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-13 * scale);
    }

    #[test]
    fn spmv_matches_dense_product(a in sparse_strategy(), seed in any::<u64>()) {
        let n = a.n();
        let x = block(n, 3, seed);
        let dense = DenseBlock::from_col_major(n, n, a.to_dense_col_major()).unwrap();
        let want = dense.gemm_nn(&x).unwrap();
        let got = spmv_block(&a, &x).unwrap();
        prop_assert!(got.sub(&want).unwrap().max_abs() <= 1e-12 * want.max_abs().max(1.0));
    }

    #[test]
    fn orthonormalize_is_idempotent(rows in 5usize..40, cols in 1usize..5, seed in any::<u64>()) {
        let (q, kept) = orthonormalize(&block(rows, cols, seed), 1e-8);
        prop_assert_eq!(kept, cols);
        prop_assert!(q.orthonormality_error() <= 1e-13);
        let (q2, _) = orthonormalize(&q, 1e-8);
        prop_assert!(q2.sub(&q).unwrap().max_abs() <= 1e-13);
    }

    #[test]
    fn orthonormalize_drops_dependent_columns(rows in 6usize..30, seed in any::<u64>()) {
        let x = block(rows, 3, seed);
        let dup = x.hcat(&x.columns(0..2)).unwrap();
        let (q, kept) = orthonormalize(&dup, 1e-8);
        prop_assert_eq!(kept, 3);
        prop_assert_eq!(q.cols(), 3);
        prop_assert!(projector_gap(&q, &orthonormalize(&x, 1e-8).0) <= 1e-12);
    }

    #[test]
    fn ritz_values_invariant_under_rotation(n in 10usize..40, m in 2usize..6, seed in any::<u64>()) {
        let a = diag_matrix(n, seed);
        let (s, _) = orthonormalize(&block(n, m, seed), 1e-8);
        let (rot, _) = orthonormalize(&block(m, m, seed ^ 0x5a5a), 1e-8);
        let s2 = s.gemm_nn(&rot).unwrap();
        let p1 = project(&s, &spmv_block(&a, &s).unwrap(), m).unwrap();
        let p2 = project(&s2, &spmv_block(&a, &s2).unwrap(), m).unwrap();
        for (x, y) in p1.ritz.values.iter().zip(&p2.ritz.values) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn converged_count_is_monotone_in_tol(n in 10usize..40, m in 2usize..6, seed in any::<u64>(), t1 in -14.0f64..0.0, t2 in -14.0f64..0.0) {
        let a = diag_matrix(n, seed);
        let (s, _) = orthonormalize(&block(n, m, seed), 1e-8);
        let ritz = project(&s, &spmv_block(&a, &s).unwrap(), m).unwrap().ritz;
        let r = residual_block(&a, &ritz).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let c_lo = assess_convergence(&a, &ritz, &r, m, 10f64.powf(lo)).unwrap().converged_count;
        let c_hi = assess_convergence(&a, &ritz, &r, m, 10f64.powf(hi)).unwrap().converged_count;
        prop_assert!(c_lo <= c_hi);
    }

    #[test]
    fn invariant_subspace_has_tiny_residuals(n in 6usize..40, seed in any::<u64>()) {
        let m = 3.min(n);
        let (a, eig) = random_spd((0..n).map(|i| 1.0 + i as f64).collect(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let (rot, _) = orthonormalize(&block(m, m, seed), 1e-8);
        let s = eig.v.columns(0..m).gemm_nn(&rot).unwrap();
        let ritz = project(&s, &spmv_block(&a, &s).unwrap(), m).unwrap().ritz;
        let r = residual_block(&a, &ritz).unwrap();
        let report = assess_convergence(&a, &ritz, &r, m, 1e-12).unwrap();
        prop_assert!(report.per_pair.iter().all(|&p| p <= 1e-12), "{:?}", report.per_pair);
        prop_assert_eq!(report.converged_count, m);
    }

    #[test]
    fn shrink_then_expand_restores_span(n in 12usize..40, n_es in 1usize..4, extra in 1usize..4, seed in any::<u64>()) {
        let n_ex = n_es + extra;
        let a = diag_matrix(n, seed);
        let (s, _) = orthonormalize(&block(n, n_ex, seed), 1e-8);
        let proj = project(&s, &spmv_block(&a, &s).unwrap(), n_ex).unwrap();
        let mut state = BlockState::from_projection(proj);
        let before = state.x.clone();
        state.shrink(n_es);
        prop_assert_eq!(state.lambda.len(), n_es);
        prop_assert_eq!(state.x.cols(), n_es);
        prop_assert_eq!(state.x_drop.cols(), n_ex - n_es);
        let dropped = state.take_drop();
        let restored = state.x.hcat(&dropped).unwrap();
        prop_assert!(projector_gap(&before, &restored) <= 1e-10);
        prop_assert_eq!(state.x_drop.cols(), 0);
    }

    #[test]
    fn block_size_stays_in_range(
        kind in prop::sample::select(StrategyKind::ALL.to_vec()),
        logs in prop::collection::vec(-12.0f64..0.0, 1..120),
        n_es in 1usize..6,
        extra in 1usize..6,
    ) {
        let cfg = StrategyConfig::<f64>::new(kind);
        let mut st = StrategyState::new(n_es, n_es + extra);
        for l in logs {
            let d = st.advance(&cfg, 10f64.powf(l));
            st.apply(d);
            prop_assert!(st.n_now() == n_es || st.n_now() == n_es + extra);
            if kind == StrategyKind::None {
                prop_assert_eq!(d, Decision::Hold);
            }
        }
    }

    #[test]
    fn fix_is_periodic_after_warmup(
        logs in prop::collection::vec(-12.0f64..-5.0, 30..150),
        j_e in 3usize..15,
        j_s_frac in 0.0f64..1.0,
    ) {
        let mut cfg = StrategyConfig::<f64>::new(StrategyKind::Fix);
        cfg.j_e = j_e;
        cfg.j_s = 1 + ((j_e - 2) as f64 * j_s_frac) as usize;
        let mut st = StrategyState::new(2, 4);
        let mut warm_at = None;
        for (i, l) in logs.into_iter().enumerate() {
            let j = i + 1;
            let before = st.n_now();
            let d = st.advance(&cfg, 10f64.powf(l));
            st.apply(d);
            match warm_at {
                None => {
                    if d == Decision::Shrink {
                        prop_assert_eq!(j, cfg.j_warm);
                        warm_at = Some(j);
                    } else {
                        prop_assert_eq!(d, Decision::Hold);
                    }
                }
                Some(_) => {
                    let expected = if before == 2 {
                        if j % j_e == 0 { Decision::Expand } else { Decision::Hold }
                    } else if (j + j_e - cfg.j_s).is_multiple_of(j_e) {
                        Decision::Shrink
                    } else {
                        Decision::Hold
                    };
                    prop_assert_eq!(d, expected, "j={}", j);
                }
            }
        }
        prop_assert!(warm_at.is_some());
    }

    #[test]
    fn slopek_recovers_geometric_rate(beta in 0.01f64..2.0, j_p in 1usize..12, len in 13usize..40) {
        let hist: Vec<f64> = (0..len).map(|j| -beta * j as f64).collect();
        let c = slope_avg(&hist, j_p).unwrap();
        prop_assert!((c - beta).abs() <= 1e-12 * beta.max(1.0));
    }

    #[test]
    fn inverse_rho_matches_measured_step(n in 3usize..30, seed in any::<u64>()) {
        let sigma: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.7).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, eig) = random_spd(sigma.clone(), &mut rng).unwrap();
        // `eig` is sorted by descending σ, so the smallest eigenpair is last.
        let v1 = eig.v.col(n - 1).to_vec();
        let x = block(n, 1, seed ^ 7);
        let out = inverse_rho(&a, x.col(0), &v1, sigma[0]).unwrap();
        prop_assert!((out.rho - out.step_ratio).abs() <= RHO_IDENTITY_TOL * out.rho.max(1.0));
        prop_assert!(out.rho < 1.0 + 1e-12);
    }
}
