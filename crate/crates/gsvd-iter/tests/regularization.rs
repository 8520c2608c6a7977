mod common;

use common::{gsv_oracle, randn, randv, rng};
use gsvd_iter::gdgsvd::PartialGsvd;
use gsvd_iter::operator::MatrixPair;
use gsvd_iter::problems::RegProblem;
use gsvd_iter::regularization::{
    complement_basis, discrepancy, discrepancy_select_mu, eta, run_tikhonov, solve_tikhonov,
    split_nullspace_solution, tgsvd_filter_solution, TikhonovConfig, TikhonovProblem, MU_RANGE,
};
use gsvd_iter::GsvdError;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Full GSVD in factored form from the independent pencil oracle.
fn oracle_partial(a: &DMatrix<f64>, b: &DMatrix<f64>) -> PartialGsvd {
    let (c2, x) = gsv_oracle(a, b);
    let c: Vec<f64> = c2.iter().map(|v| v.clamp(0.0, 1.0).sqrt()).collect();
    let s: Vec<f64> = c2.iter().map(|v| (1.0 - v.clamp(0.0, 1.0)).sqrt()).collect();
    let unit = |v: DVector<f64>| {
        let n = v.norm();
        if n > 0.0 { v / n } else { v }
    };
    let u: Vec<DVector<f64>> = (0..x.ncols()).map(|i| unit(a * x.column(i))).collect();
    let v: Vec<DVector<f64>> = (0..x.ncols()).map(|i| unit(b * x.column(i))).collect();
    PartialGsvd::from_diagonal(c, s, DMatrix::from_columns(&u), DMatrix::from_columns(&v), &x)
}

fn first_difference(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n - 1, n, |i, j| if j == i { 1.0 } else if j == i + 1 { -1.0 } else { 0.0 })
}

fn tikhonov_direct(a: &DMatrix<f64>, b: &DMatrix<f64>, rhs: &DVector<f64>, mu: f64) -> DVector<f64> {
    let lhs = a.transpose() * a + b.transpose() * b * mu;
    lhs.lu().solve(&(a.transpose() * rhs)).unwrap()
}

fn well_conditioned(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    randn(n, n, &mut r) + DMatrix::identity(n, n) * (2.0 * n as f64).sqrt()
}

#[test]
fn unfiltered_limit_solves_the_system() {
    let a = well_conditioned(5, 1);
    let g = oracle_partial(&a, &DMatrix::identity(5, 5));
    let b = randv(5, &mut rng(2));
    let sol = tgsvd_filter_solution(&g, &b, 0.0);
    assert_eq!(sol.skipped, 0);
    assert!((&a * &sol.x - &b).norm() <= 1e-10 * b.norm());
}

#[test]
fn over_smoothing_limit_vanishes() {
    let a = well_conditioned(5, 3);
    let g = oracle_partial(&a, &DMatrix::identity(5, 5));
    let b = randv(5, &mut rng(4));
    let x0 = tgsvd_filter_solution(&g, &b, 0.0).x;
    let big = tgsvd_filter_solution(&g, &b, 1e12).x;
    assert!(big.norm() < 1e-8 * x0.norm());
}

#[test]
fn filtered_solution_matches_normal_equations() {
    let mut r = rng(5);
    let a = randn(6, 6, &mut r);
    let bm = randn(6, 6, &mut r);
    let g = oracle_partial(&a, &bm);
    let rhs = randv(6, &mut r);
    for mu in [1e-3, 0.1, 1.0, 10.0] {
        let got = tgsvd_filter_solution(&g, &rhs, mu).x;
        let want = tikhonov_direct(&a, &bm, &rhs, mu);
        assert!((&got - &want).norm() <= 1e-9 * want.norm(), "mu {mu}");
    }
}

#[test]
fn zero_cosine_term_is_skipped_at_zero_mu() {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 0.0]));
    let g = oracle_partial(&a, &DMatrix::identity(3, 3));
    let b = DVector::from_vec(vec![1.0, 1.0, 1.0]);
    let sol = tgsvd_filter_solution(&g, &b, 0.0);
    assert_eq!(sol.skipped, 1);
    assert!(sol.x.iter().all(|v| v.is_finite()));
    assert_eq!(tgsvd_filter_solution(&g, &b, 1e-3).skipped, 0);
}

#[test]
fn safety_factor_at_1024() {
    assert!((eta(1024) - 1.0682846).abs() < 1e-6);
    assert!((eta(1024) - 1.068_285_125_082_49).abs() < 1e-14);
    assert!((eta(1024) - (1.0 + 3.090232 / 2048f64.sqrt())).abs() < 1e-15);
}

#[test]
fn discrepancy_is_nondecreasing_in_mu() {
    let mut r = rng(6);
    let a = randn(6, 6, &mut r);
    let bm = randn(5, 6, &mut r);
    let g = oracle_partial(&a, &bm);
    let rhs = randv(6, &mut r);
    let scan: Vec<f64> = (-24..=24).map(|k| discrepancy(&g, &rhs, 10f64.powf(k as f64 / 4.0))).collect();
    for w in scan.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-12), "{scan:?}");
    }
    for (k, d) in (-6..=6).zip(scan.iter().step_by(4)) {
        let x = tikhonov_direct(&a, &bm, &rhs, 10f64.powi(k));
        assert!(((&a * x - &rhs).norm() - d).abs() < 1e-9 * rhs.norm());
    }
}

#[test]
fn selected_mu_hits_the_target() {
    let mut r = rng(7);
    let a = randn(8, 8, &mut r);
    let bm = first_difference(8);
    let g = oracle_partial(&a, &bm);
    let rhs = randv(8, &mut r);
    let target = 0.5 * (discrepancy(&g, &rhs, MU_RANGE.0) + discrepancy(&g, &rhs, MU_RANGE.1));
    let sel = discrepancy_select_mu(&g, &rhs, target);
    assert!(sel.bracketed);
    assert!((sel.discrepancy - target).abs() <= 1e-8 * target);
    assert!(sel.mu > MU_RANGE.0 && sel.mu < MU_RANGE.1);
    let x = tikhonov_direct(&a, &bm, &rhs, sel.mu);
    assert!(((&a * x - &rhs).norm() - target).abs() <= 1e-7 * target);
}

#[test]
fn unreachable_target_flags_the_boundary() {
    let mut r = rng(8);
    let a = randn(6, 6, &mut r);
    let g = oracle_partial(&a, &first_difference(6));
    let rhs = randv(6, &mut r);
    let sel = discrepancy_select_mu(&g, &rhs, 2.0 * rhs.norm());
    assert!(!sel.bracketed);
    assert_eq!(sel.mu, MU_RANGE.1);
}

#[test]
fn tikhonov_problem_validation() {
    let pair = MatrixPair::from_dense(DMatrix::identity(3, 3), DMatrix::identity(3, 3)).unwrap();
    assert!(matches!(
        TikhonovProblem::new(pair.clone(), DVector::zeros(2), 1.0, None),
        Err(GsvdError::DimensionMismatch { .. })
    ));
    assert!(matches!(
        TikhonovProblem::new(pair.clone(), DVector::zeros(3), 0.0, None),
        Err(GsvdError::InvalidOptions(_))
    ));
    let a = well_conditioned(3, 9);
    let pair = MatrixPair::from_dense(a.clone(), DMatrix::identity(3, 3)).unwrap();
    let xs = DVector::from_vec(vec![1.0, -1.0, 2.0]);
    let rhs = &a * &xs + DVector::from_vec(vec![1e-2, -1e-2, 1e-2]);
    let prob = TikhonovProblem::new(pair, rhs, 1e-2, Some(xs)).unwrap();
    let sol = solve_tikhonov(&prob, &oracle_partial(&a, &DMatrix::identity(3, 3)));
    assert!(sol.bracketed);
    assert!((sol.discrepancy - 1e-2).abs() <= 1e-10);
    assert!(sol.rel_err.unwrap() < 0.1);
}

#[test]
fn constant_vector_spans_difference_nullspace() {
    let b = first_difference(8);
    assert_eq!(b * DVector::from_element(8, 1.0), DVector::zeros(7));
}

#[test]
fn split_solution_matches_direct_solve() {
    let n = 6;
    let mut r = rng(10);
    let a = randn(n, n, &mut r);
    let bm = first_difference(n);
    let pair = MatrixPair::from_dense(a.clone(), bm.clone()).unwrap();
    let rhs = randv(n, &mut r);
    let w1 = DMatrix::from_element(n, 1, 1.0 / (n as f64).sqrt());
    let w2 = complement_basis(&w1);
    assert_eq!(w2.ncols(), n - 1);
    assert!((w2.transpose() * &w1).amax() < 1e-14);
    for mu in [1e-2, 1.0, 1e2] {
        let direct = tikhonov_direct(&a, &bm, &rhs, mu);
        let y2 = w2.transpose() * &direct;
        let split = split_nullspace_solution(&pair, &rhs, &w1, &w2, &y2).unwrap();
        assert!((&split - &direct).norm() <= 1e-9 * direct.norm(), "mu {mu}");
    }
}

#[test]
fn split_solution_when_data_is_orthogonal_to_the_unpenalized_image() {
    let n = 5;
    let mut r = rng(11);
    let a = randn(n, n, &mut r);
    let pair = MatrixPair::from_dense(a.clone(), first_difference(n)).unwrap();
    let w1 = DMatrix::from_element(n, 1, 1.0 / (n as f64).sqrt());
    let w2 = complement_basis(&w1);
    let aw1 = (&a * &w1).column(0).normalize();
    let mut rhs = randv(n, &mut r);
    rhs -= &aw1 * aw1.dot(&rhs);
    let y2 = randv(n - 1, &mut r);
    let x = split_nullspace_solution(&pair, &rhs, &w1, &w2, &y2).unwrap();
    let aw2y2 = &a * &w2 * &y2;
    let y1_expect = -aw1.dot(&aw2y2) / (&a * &w1).norm();
    let y1_got = w1.column(0).dot(&x);
    assert!((y1_got - y1_expect).abs() < 1e-12 * aw2y2.norm().max(1.0));
}

#[test]
fn split_solution_rejects_degenerate_nullspace() {
    let mut a = DMatrix::identity(4, 4);
    a.column_mut(0).fill(0.0);
    let pair = MatrixPair::from_dense(a, DMatrix::identity(4, 4)).unwrap();
    let mut w1 = DMatrix::zeros(4, 1);
    w1[(0, 0)] = 1.0;
    let w2 = complement_basis(&w1);
    let res = split_nullspace_solution(&pair, &DVector::zeros(4), &w1, &w2, &DVector::zeros(3));
    assert!(matches!(res, Err(GsvdError::NullspaceDegenerate)));
}

#[test]
fn small_pipeline_tracks_the_dense_truncation() {
    let cfg = TikhonovConfig::new(RegProblem::Shaw, 64);
    let rep = run_tikhonov(&cfg).unwrap();
    assert!(rep.converged);
    assert!(rep.bracketed);
    assert_eq!(rep.sigma.len(), cfg.pairs);
    assert!(rep.sigma[0].is_infinite());
    assert!(rep.rel_err_exact_tgsvd < 1e-2, "{}", rep.rel_err_exact_tgsvd);
    assert!((rep.discrepancy - rep.eta_eps).abs() <= 1e-8 * rep.eta_eps);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_weights_are_finite_for_positive_mu(
        n in 2usize..8,
        mu_exp in -12.0f64..12.0,
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let mut a = randn(n, n, &mut r);
        a.column_mut(0).fill(0.0);
        let g = oracle_partial(&a, &DMatrix::identity(n, n));
        let rhs = randv(n, &mut r);
        let sol = tgsvd_filter_solution(&g, &rhs, 10f64.powf(mu_exp));
        prop_assert_eq!(sol.skipped, 0);
        prop_assert!(sol.x.iter().all(|v| v.is_finite()));
    }
}
