mod common;

use common::{max_sine, orth, randn, randv, rng};
use gsvd_iter::dense::Order;
use gsvd_iter::gdgsvd::{expansion_vector, extract, SearchState, SolverOptions, Variant, Which};
use gsvd_iter::mdgsvd::{fast_truncate, md_expand, mdgsvd_solve, rs_matrices, truncation_plan};
use gsvd_iter::operator::MatrixPair;
use gsvd_iter::problems::gen_example;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn diag(d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_row_slice(d))
}

fn random_pair(m: usize, p: usize, n: usize, seed: u64) -> (MatrixPair, DMatrix<f64>, DMatrix<f64>) {
    let mut r = rng(seed);
    let a = randn(m, n, &mut r);
    let b = randn(p, n, &mut r);
    (MatrixPair::from_dense(a.clone(), b.clone()).unwrap(), a, b)
}

fn reflector(z: &Option<DVector<f64>>, n: usize) -> DMatrix<f64> {
    match z {
        Some(z) => DMatrix::identity(n, n) - z * z.transpose() * 2.0,
        None => DMatrix::identity(n, n),
    }
}

/// Squared cosine between `x` and the span of the columns of `m`.
fn cos2(x: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    let q = orth(m);
    (q.transpose() * x).norm_squared() / x.norm_squared()
}

#[test]
fn expansion_span_contains_residual() {
    let (pair, _, _) = random_pair(30, 30, 20, 1);
    let mut r = rng(2);
    let mut st = SearchState::from_basis(&pair, &randn(20, 4, &mut r)).unwrap();
    let (_, ritz) = extract(&st, Order::DescendingC).unwrap();
    let (rt, _) = expansion_vector(&ritz, &pair);
    let rep = md_expand(&mut st, &pair, &ritz.u1, &ritz.v1);
    assert_eq!(rep.added, 2);
    assert_eq!(st.dim(), 6);
    let proj = &st.w * (st.w.transpose() * &rt);
    assert!((&rt - proj).norm() < 1e-12 * rt.norm());
}

#[test]
fn expansion_flags_dependent_directions_on_exact_triplet() {
    let pair = MatrixPair::from_dense(diag(&[4.0, 3.0, 2.0, 1.0]), DMatrix::identity(4, 4)).unwrap();
    let mut e = DMatrix::zeros(4, 1);
    e[(0, 0)] = 1.0;
    let mut st = SearchState::from_basis(&pair, &e).unwrap();
    let (_, ritz) = extract(&st, Order::DescendingC).unwrap();
    let rep = md_expand(&mut st, &pair, &ritz.u1, &ritz.v1);
    assert_eq!(rep.dependent, 2);
    assert!(rep.random);
    assert_eq!(st.dim(), 2);
}

fn grown_state(seed: u64, n: usize, k: usize) -> (MatrixPair, DMatrix<f64>, DMatrix<f64>, SearchState) {
    let (pair, a, b) = random_pair(n + 4, n + 2, n, seed);
    let mut r = rng(seed + 100);
    let st = SearchState::from_basis(&pair, &randn(n, k, &mut r)).unwrap();
    (pair, a, b, st)
}

#[test]
fn truncation_bottom_rows_are_multiples_of_last_unit_vector() {
    let (_, _, _, st) = grown_state(3, 15, 6);
    let (g, _) = extract(&st, Order::DescendingC).unwrap();
    let plan = truncation_plan(&g).unwrap();
    let k = 6;
    let p = reflector(&plan.p, k);
    let q = reflector(&plan.q, k);
    let z = reflector(&plan.z, k);
    let ph = p.transpose() * st.h() * &z;
    let qk = q.transpose() * st.k() * &z;
    let rkk = g.r[(k - 1, k - 1)];
    let scale = st.h().norm() + st.k().norm();
    for j in 0..k {
        let (eh, ek) = if j == k - 1 { (g.c[j] * rkk, g.s[j] * rkk) } else { (0.0, 0.0) };
        assert!((ph[(k - 1, j)] - eh).abs() < 1e-12 * scale);
        assert!((qk[(k - 1, j)] - ek).abs() < 1e-12 * scale);
    }
    assert!((p.column(k - 1) - g.u.column(k - 1)).norm() < 1e-14);
    assert!((q.column(k - 1) - g.v.column(k - 1)).norm() < 1e-14);
    assert!((z.column(k - 1) - g.w.column(k - 1)).norm() < 1e-14);
}

#[test]
fn truncation_with_aligned_last_vectors_is_column_drop() {
    let pair = MatrixPair::from_dense(diag(&[5.0, 4.0, 3.0, 2.0, 1.0]), DMatrix::identity(5, 5)).unwrap();
    let mut st = SearchState::from_basis(&pair, &DMatrix::identity(5, 3)).unwrap();
    let (mut g, _) = extract(&st, Order::DescendingC).unwrap();
    g.u = DMatrix::identity(3, 3);
    g.v = DMatrix::identity(3, 3);
    g.w = DMatrix::identity(3, 3);
    let before = st.clone();
    let plan = fast_truncate(&mut st, &g).unwrap();
    assert!(plan.p.is_none() && plan.q.is_none() && plan.z.is_none());
    assert_eq!(plan.drop_index, 2);
    assert_eq!(st.w, before.w.columns(0, 2).into_owned());
    assert_eq!(st.au.q, before.au.q.columns(0, 2).into_owned());
    assert_eq!(*st.h(), before.h().view((0, 0), (2, 2)).into_owned());
    assert_eq!(*st.k(), before.k().view((0, 0), (2, 2)).into_owned());
}

#[test]
fn truncation_span_matches_explicit_restart() {
    let (_, a, b, mut st) = grown_state(4, 20, 6);
    let (g, _) = extract(&st, Order::DescendingC).unwrap();
    let explicit = &st.w * g.w.columns(0, 5);
    fast_truncate(&mut st, &g).unwrap();
    assert_eq!(st.dim(), 5);
    assert!(max_sine(&st.w, &explicit) < 1e-10);
    assert!((&a * &st.w - &st.au.q * st.h()).amax() < 1e-10 * a.norm());
    assert!((&b * &st.w - &st.bv.q * st.k()).amax() < 1e-10 * b.norm());
}

#[test]
fn truncation_conserves_leading_ritz_values() {
    let (_, _, _, st) = grown_state(5, 20, 7);
    for order in [Order::DescendingC, Order::AscendingC] {
        let (g, _) = extract(&st, order).unwrap();
        let mut t = st.clone();
        fast_truncate(&mut t, &g).unwrap();
        let (g2, _) = extract(&t, order).unwrap();
        for i in 0..6 {
            assert!((g.c[i] - g2.c[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn rs_matrices_orthogonality() {
    let (pair, a, b, st) = grown_state(6, 12, 5);
    let (r, s) = rs_matrices(&st, &pair).unwrap();
    let scale = (a.transpose() * &a).norm() + (b.transpose() * &b).norm();
    assert!((st.w.transpose() * &r).amax() < 1e-11 * scale);
    assert!((st.w.transpose() * &s).amax() < 1e-10 * s.norm().max(1.0));
    assert!((r.transpose() * &s).amax() < 1e-10 * (r.norm() * s.norm()).max(1.0));
}

/// Leading right vector of the pencil `(AᵀA, AᵀA + BᵀB)`, from a Cholesky
/// reduction independent of the library.
fn leading_vector(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    let ata = a.transpose() * a;
    let m = &ata + b.transpose() * b;
    let l = m.cholesky().unwrap().l();
    let li = l.clone().try_inverse().unwrap();
    let s = &li * &ata * li.transpose();
    let e = ((&s + s.transpose()) * 0.5).symmetric_eigen();
    let i = e.eigenvalues.imax();
    li.transpose() * e.eigenvectors.column(i)
}

#[test]
fn optimal_combination_maximizes_cosine() {
    let (pair, a, b, st) = grown_state(7, 12, 4);
    let (r, s) = rs_matrices(&st, &pair).unwrap();
    let x1 = leading_vector(&a, &b);
    let c = r.clone().pseudo_inverse(1e-12).unwrap() * &x1;
    let d = s.clone().pseudo_inverse(1e-12).unwrap() * &x1;
    let with = |c: &DVector<f64>, d: &DVector<f64>| {
        let mut m = st.w.clone().resize_horizontally(6, 0.0);
        m.set_column(4, &(&r * c));
        m.set_column(5, &(&s * d));
        cos2(&x1, &m)
    };
    let best = with(&c, &d);
    let mut g = rng(8);
    for _ in 0..200 {
        let rc = randv(4, &mut g);
        let rd = randv(4, &mut g);
        assert!(with(&rc, &rd) <= best + 1e-12);
    }
}

#[test]
fn single_combined_direction_is_optimal_at_unit_scale() {
    let (pair, a, b, st) = grown_state(10, 12, 4);
    let (r, s) = rs_matrices(&st, &pair).unwrap();
    let x1 = leading_vector(&a, &b);
    let c = r.clone().pseudo_inverse(1e-12).unwrap() * &x1;
    let d = s.clone().pseudo_inverse(1e-12).unwrap() * &x1;
    let (rc, sd) = (&r * &c, &s * &d);
    let mut two = st.w.clone().resize_horizontally(6, 0.0);
    two.set_column(4, &rc);
    two.set_column(5, &sd);
    let best = cos2(&x1, &two);
    let w_part = (st.w.transpose() * &x1).norm_squared();
    let (pr, ps) = (x1.dot(&rc), x1.dot(&sd));
    let xx = x1.norm_squared();
    for t in [1e-2, 0.5, 1.0, 2.0, 1e2] {
        let mut one = st.w.clone().resize_horizontally(5, 0.0);
        one.set_column(4, &(&rc + &sd * t));
        let got = cos2(&x1, &one);
        let want = (w_part + (pr + t * ps).powi(2) / (rc.norm_squared() + t * t * sd.norm_squared())) / xx;
        assert!((got - want).abs() < 1e-10, "t = {t}: {got} vs {want}");
        assert!(got <= best + 1e-12);
        if t == 1.0 {
            assert!((got - best).abs() < 1e-10);
        }
    }
}

#[test]
fn directional_split_is_orthogonal_to_target() {
    let mut g = rng(9);
    for _ in 0..20 {
        let x = randv(10, &mut g);
        let r = randv(10, &mut g);
        let s = randv(10, &mut g);
        let perp = &r * x.dot(&s) - &s * x.dot(&r);
        let scale = x.norm() * x.norm() * r.norm() * s.norm();
        assert!(perp.dot(&x).abs() <= 1e-14 * scale);
    }
}

#[test]
fn md_solves_small_diagonal_pair() {
    let pair = MatrixPair::from_dense(diag(&[4.0, 3.0, 2.0, 1.0]), DMatrix::identity(4, 4)).unwrap();
    let opts = SolverOptions { min_dim: 1, max_dim: 4, tol: 1e-10, variant: Variant::Md, ..SolverOptions::default() };
    let out = mdgsvd_solve(&pair, &opts).unwrap();
    assert!(out.converged);
    assert!((out.gsvd.sigma()[0] - 4.0).abs() < 1e-9);
    let x = out.gsvd.x().column(0).normalize();
    assert!((x[0].abs() - 1.0).abs() < 1e-9);
}

#[test]
fn md_counts_six_products_per_two_direction_step() {
    let inst = gen_example("1", 200, 0).unwrap();
    let opts = SolverOptions { variant: Variant::Md, ..SolverOptions::default() };
    let out = mdgsvd_solve(&inst.pair, &opts).unwrap();
    let mv: Vec<usize> = out.record.entries.iter().map(|e| e.mv).collect();
    let steps: Vec<usize> = mv.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps.iter().all(|&d| d == 4 || d == 6), "{steps:?}");
    assert!(steps.iter().filter(|&&d| d == 6).count() * 2 > steps.len());
    assert_eq!(out.mv_count, *mv.last().unwrap());
}

#[test]
fn md_finds_smallest_of_example_one() {
    let inst = gen_example("1", 200, 0).unwrap();
    let opts = SolverOptions { which: Which::Smallest, variant: Variant::Md, tol: 1e-9, ..SolverOptions::default() };
    let out = mdgsvd_solve(&inst.pair, &opts).unwrap();
    assert!(out.converged);
    let (c, s) = inst.exact_pair(Which::Smallest).unwrap();
    assert!((out.gsvd.sigma()[0] - c / s).abs() < 1e-7 * c / s);
    assert_eq!(out.record.monotonicity_violations(Which::Smallest, 1e-12), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn truncate_then_extract_keeps_invariants(n in 8usize..24, k in 3usize..7, seed in any::<u64>()) {
        let (_, a, b, mut st) = grown_state(seed, n, k);
        let (g, _) = extract(&st, Order::DescendingC).unwrap();
        fast_truncate(&mut st, &g).unwrap();
        prop_assert!(common::orth_defect(&st.w) < 1e-12);
        prop_assert!(common::orth_defect(&st.au.q) < 1e-12);
        prop_assert!((&a * &st.w - &st.au.q * st.h()).amax() < 1e-10 * a.norm());
        prop_assert!((&b * &st.w - &st.bv.q * st.k()).amax() < 1e-10 * b.norm());
        let (g2, _) = extract(&st, Order::DescendingC).unwrap();
        for i in 0..k - 1 {
            prop_assert!((g.c[i] - g2.c[i]).abs() < 1e-12);
        }
    }
}
