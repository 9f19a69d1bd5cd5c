//! Randomised invariants across the public API.

use eagl_core::apps::benchmark::BenchmarkConfig;
use eagl_core::eigen::sym_eigenvalues;
use eagl_core::estimators::{estimate_eagl, estimate_glasso, gridge_closed_form, t_gridge_closed_form, default_target};
use eagl_core::glasso::GlassoAlgorithm;
use eagl_core::matrix::{invert_pd, log_det_pd, sample_covariance};
use eagl_core::models::generate_model;
use eagl_core::oracle::{proximal_oracle, OracleProblem};
use eagl_core::rng::{derive_seed, rng_from_seed, standard_normal};
use eagl_core::{
    solve_glasso, EstimatorConfig, GlassoProblem, Matrix, Method, ModelId, ModelSpec, SolverOptions, SymMatrix,
};
use proptest::prelude::*;

fn data(n: usize, p: usize, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    Matrix::from_fn(n, p, |_, _| standard_normal(&mut rng))
}

fn cov(p: usize, n: usize, seed: u64) -> SymMatrix {
    sample_covariance(&data(n, p, seed)).unwrap()
}

fn pd(p: usize, seed: u64) -> SymMatrix {
    cov(p, p + 5, seed).shift_diag(0.05)
}

fn inf_norm(m: &SymMatrix) -> f64 {
    (0..m.dim()).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn offdiag_nonzero(m: &SymMatrix) -> usize {
    m.count_offdiag_nonzero(1e-8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cholesky_round_trip(seed in any::<u64>(), p in 1usize..30) {
        let a = pd(p, seed);
        let l = a.cholesky().unwrap().factor();
        let llt = SymMatrix::symmetric_part(&l.matmul(&l.transpose()).unwrap());
        prop_assert!(inf_norm(&llt.sub(&a).unwrap()) <= 1e-10 * inf_norm(&a));
    }

    #[test]
    fn log_det_matches_eigenvalues(seed in any::<u64>(), p in 1usize..30) {
        let a = pd(p, seed);
        let direct: f64 = sym_eigenvalues(&a).unwrap().iter().map(|l| l.ln()).sum();
        prop_assert!((log_det_pd(&a).unwrap() - direct).abs() <= 1e-8);
    }

    #[test]
    fn double_inverse(seed in any::<u64>(), p in 1usize..30) {
        let a = pd(p, seed);
        let back = invert_pd(&invert_pd(&a).unwrap()).unwrap();
        prop_assert!(back.sub(&a).unwrap().max_abs() <= 1e-6 * inf_norm(&a));
    }

    #[test]
    fn glasso_solution_properties(seed in any::<u64>(), p in 2usize..12, n in 5usize..40, gamma in 0.02f64..0.8, bcd in any::<bool>()) {
        let s = cov(p, n, seed);
        let algorithm = if bcd { GlassoAlgorithm::BlockCoordinate } else { GlassoAlgorithm::Newton };
        let rep = solve_glasso(&GlassoProblem::new(&s, gamma).algorithm(algorithm), None).unwrap();
        prop_assert!(rep.converged);
        prop_assert!(rep.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        prop_assert!(rep.omega.is_positive_definite());
        let w = invert_pd(&rep.omega).unwrap();
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    prop_assert!((s.get(i, j) - w.get(i, j)).abs() <= gamma + 1e-4);
                }
            }
        }
    }

    #[test]
    fn sparsity_shrinks_along_grid(seed in any::<u64>(), p in 3usize..12) {
        let s = cov(p, 2 * p, seed);
        let top = s.max_abs_offdiag();
        let counts: Vec<usize> = [0.05, 0.2, 0.6]
            .iter()
            .map(|f| offdiag_nonzero(&solve_glasso(&GlassoProblem::new(&s, f * top), None).unwrap().omega))
            .collect();
        prop_assert!(counts.windows(2).all(|c| c[1] <= c[0]), "{:?}", counts);
    }

    #[test]
    fn eagl_alpha_one_is_glasso(seed in any::<u64>(), p in 2usize..10, gamma in 0.01f64..1.0) {
        let s = cov(p, 3 * p, seed);
        let opts = SolverOptions::default();
        let a = estimate_eagl(&s, gamma, 1.0, &opts, None).unwrap();
        let b = estimate_glasso(&s, gamma, &opts, None).unwrap();
        prop_assert!(a.omega.sub(&b.omega).unwrap().max_abs() <= 1e-8);
    }

    #[test]
    fn ridge_stationarity(seed in any::<u64>(), p in 1usize..12, gamma in 0.01f64..3.0) {
        let s = cov(p, p + 2, seed);
        let r = gridge_closed_form(&s, gamma).unwrap();
        let g = s.sub(&invert_pd(&r).unwrap()).unwrap().add(&r.scale(2.0 * gamma)).unwrap();
        prop_assert!(inf_norm(&g) <= 1e-8);
        let t = default_target(&s).unwrap();
        let r = t_gridge_closed_form(&s, gamma, &t).unwrap();
        let g = s.sub(&invert_pd(&r).unwrap()).unwrap().add(&r.sub(&t).unwrap().scale(gamma)).unwrap();
        prop_assert!(inf_norm(&g) <= 1e-8);
    }

    #[test]
    fn every_estimate_is_pd(seed in any::<u64>(), p in 2usize..8, gamma in 0.05f64..1.0) {
        let x = data(3 * p, p, seed);
        for method in Method::ALL {
            let est = EstimatorConfig::new(method).gamma(gamma).fit_data(&x, None).unwrap();
            prop_assert!(est.omega.is_positive_definite(), "{method}");
        }
    }

    #[test]
    fn models_pd_unit_diagonal(seed in any::<u64>(), k in 1u8..=7, blocks in 1usize..4) {
        let p = 20 * blocks;
        let truth = generate_model(&ModelSpec::new(ModelId::from_index(k).unwrap(), p, seed)).unwrap();
        prop_assert!(truth.omega.is_positive_definite());
        prop_assert!(truth.omega.diag().iter().all(|d| (d - 1.0).abs() <= 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn glasso_matches_oracle(seed in any::<u64>(), p in 2usize..9, gamma in 0.05f64..0.5) {
        let s = cov(p, 2 * p, seed);
        let ours = solve_glasso(&GlassoProblem::new(&s, gamma), None).unwrap();
        let oracle = proximal_oracle(&OracleProblem::new(&s).l1(gamma)).unwrap();
        prop_assert!((ours.objective - oracle.objective).abs() <= 1e-5);
    }
}

#[test]
fn erdos_renyi_edge_count() {
    let p = 60;
    let pairs = (p * (p - 1) / 2) as f64;
    let (mean, sd) = (0.05 * pairs, (pairs * 0.05 * 0.95).sqrt());
    for k in 0..20 {
        let truth = generate_model(&ModelSpec::new(ModelId::M5, p, derive_seed(11, k))).unwrap();
        assert!((truth.edge_count() as f64 - mean).abs() <= 4.0 * sd, "draw {k}: {}", truth.edge_count());
    }
}

#[test]
fn benchmark_sd_matches_replications() {
    let mut cfg = BenchmarkConfig::new(
        vec![ModelId::M1, ModelId::M2],
        8,
        30,
        vec![EstimatorConfig::new(Method::Eagl), EstimatorConfig::new(Method::GRidge)],
        4,
        5,
    );
    cfg.plan.grid_count = 6;
    cfg.plan.folds = 3;
    let result = cfg.run().unwrap();
    for row in &result.rows {
        let v = result.values(row.model, row.estimator, &row.metric);
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
        assert!((row.mean - m).abs() <= 1e-12 * m.abs().max(1.0));
        assert!((row.sd.unwrap() - sd).abs() <= 1e-12 * sd.max(1.0));
    }
}
