mod common;

use std::io::Cursor;
use std::sync::Arc;

use common::{randn, randv, rng, unit};
use gsvd_iter::deflation::{RestrictedOperator, RowAction, TransformedOperator};
use gsvd_iter::operator::{
    parse_matrix_market, read_matrix_market, write_matrix_market_csr, write_matrix_market_dense,
    CsrMatrix, DenseOperator, DiagonalOperator, FirstDifference, HouseholderComposed,
    LinearOperator, MarketMatrix, MatrixPair, OperatorKind, SharedOperator,
};
use gsvd_iter::GsvdError;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn random_csr(rows: usize, cols: usize, density: f64, seed: u64) -> (CsrMatrix, DMatrix<f64>) {
    let mut r = rng(seed);
    let mut trip = Vec::new();
    let mut dense = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            if r.random::<f64>() < density {
                let v: f64 = r.random_range(-1.0..1.0);
                trip.push((i, j, v));
                dense[(i, j)] += v;
            }
        }
    }
    (CsrMatrix::from_triplets(rows, cols, &trip).unwrap(), dense)
}

fn adjoint_gap(op: &dyn LinearOperator, probes: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x = randv(op.cols(), &mut r);
        let y = randv(op.rows(), &mut r);
        let ax = op.apply(&x).unwrap();
        let aty = op.apply_adjoint(&y).unwrap();
        let lhs = ax.dot(&y);
        let rhs = x.dot(&aty);
        let scale = ax.norm() * y.norm() + x.norm() * aty.norm();
        worst = worst.max((lhs - rhs).abs() / scale.max(1e-300));
    }
    worst
}

fn reflector(z: &DVector<f64>) -> DMatrix<f64> {
    let n = z.len();
    DMatrix::identity(n, n) - z * z.transpose() * 2.0
}

#[test]
fn identity_apply_returns_input() {
    let op = DenseOperator::identity(3);
    let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    assert_eq!(op.apply(&x).unwrap(), x);
    assert_eq!(op.apply_adjoint(&x).unwrap(), x);
}

#[test]
fn diagonal_apply_with_zero() {
    let op = DiagonalOperator::square(vec![2.0, 0.0]);
    let y = op.apply(&DVector::from_vec(vec![1.0, 1.0])).unwrap();
    assert_eq!(y.as_slice(), &[2.0, 0.0]);
    assert_eq!(op.kind(), OperatorKind::Diagonal);
}

#[test]
fn rectangular_adjoint_pads_with_zero() {
    let op = DenseOperator::new(DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
    let x = op.apply_adjoint(&DVector::from_vec(vec![1.0, 1.0])).unwrap();
    assert_eq!(x.as_slice(), &[1.0, 1.0, 0.0]);
}

#[test]
fn dimension_mismatch_is_reported() {
    let op = DenseOperator::identity(3);
    let err = op.apply(&DVector::zeros(2)).unwrap_err();
    assert!(matches!(err, GsvdError::DimensionMismatch { expected: 3, found: 2, .. }));
    let err = op.apply_adjoint(&DVector::zeros(4)).unwrap_err();
    assert!(matches!(err, GsvdError::DimensionMismatch { .. }));
    let pair = MatrixPair::from_dense(DMatrix::identity(3, 3), DMatrix::identity(3, 2));
    assert!(pair.is_err());
}

#[test]
fn csr_matches_dense_replica() {
    let (csr, dense) = random_csr(20, 10, 0.3, 7);
    let mut r = rng(8);
    let x = randv(10, &mut r);
    let y = randv(20, &mut r);
    assert!((csr.apply(&x).unwrap() - &dense * &x).amax() <= 1e-14);
    assert!((csr.apply_adjoint(&y).unwrap() - dense.transpose() * &y).amax() <= 1e-14);
    assert_eq!(csr.to_dense_matrix(), dense);
}

#[test]
fn adjoint_probe_on_every_kind() {
    let mut r = rng(11);
    let (csr, _) = random_csr(30, 12, 0.2, 12);
    let dense: SharedOperator = Arc::new(DenseOperator::new(randn(15, 12, &mut r)));
    let ops: Vec<SharedOperator> = vec![
        dense.clone(),
        Arc::new(csr),
        Arc::new(DiagonalOperator::rectangular(15, 12, (0..12).map(|i| i as f64 - 3.0).collect()).unwrap()),
        Arc::new(FirstDifference::new(12)),
        Arc::new(
            HouseholderComposed::new(Some(randv(15, &mut r)), dense.clone(), Some(randv(12, &mut r))).unwrap(),
        ),
        Arc::new(
            RestrictedOperator::new(
                dense.clone(),
                common::orth(&randn(15, 3, &mut r)),
                common::orth(&randn(12, 2, &mut r)),
            )
            .unwrap(),
        ),
        Arc::new(TransformedOperator::new(
            dense.clone(),
            RowAction::Drop(Some(unit(15, &mut r))),
            Some(unit(12, &mut r)),
        )),
        Arc::new(TransformedOperator::new(dense, RowAction::Keep, None)),
    ];
    for (i, op) in ops.iter().enumerate() {
        let gap = adjoint_gap(op.as_ref(), 50, 100 + i as u64);
        assert!(gap < 1e-12, "{:?}: gap {gap:e}", op.kind());
    }
}

#[test]
fn householder_composed_matches_dense_product() {
    let mut r = rng(21);
    for &(m, n) in &[(50, 50), (30, 20), (7, 11)] {
        let mat = randn(m, n, &mut r);
        let p = unit(m, &mut r);
        let z = unit(n, &mut r);
        let op = HouseholderComposed::new(
            Some(p.clone()),
            Arc::new(DenseOperator::new(mat.clone())),
            Some(z.clone()),
        )
        .unwrap();
        let expect = reflector(&p) * &mat * reflector(&z);
        let x = randv(n, &mut r);
        let got = op.apply(&x).unwrap();
        let want = &expect * &x;
        assert!((got - &want).norm() <= 1e-12 * want.norm().max(1.0));
        assert!((op.to_dense() - &expect).amax() <= 1e-12 * expect.amax());
    }
}

#[test]
fn householder_composed_rejects_zero_vector() {
    let inner: SharedOperator = Arc::new(DenseOperator::identity(3));
    let err = HouseholderComposed::new(Some(DVector::zeros(3)), inner, None).unwrap_err();
    assert!(matches!(err, GsvdError::NotUnit(_)));
}

#[test]
fn market_coordinate_diagonal() {
    let text = "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 1.0\n2 2 2.0\n";
    let m = parse_matrix_market(Cursor::new(text)).unwrap();
    assert!(matches!(m, MarketMatrix::Sparse(_)));
    assert_eq!(m.to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
}

#[test]
fn market_duplicates_are_summed() {
    let text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 0.5\n";
    let m = parse_matrix_market(Cursor::new(text)).unwrap().to_dense();
    assert_eq!(m[(0, 0)], 1.5);
}

#[test]
fn market_array_is_dense() {
    let text = "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n";
    let m = parse_matrix_market(Cursor::new(text)).unwrap();
    assert!(matches!(m, MarketMatrix::Dense(_)));
    assert_eq!(m.to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]));
}

#[test]
fn market_rejects_complex_and_pattern() {
    for field in ["complex", "pattern"] {
        let text = format!("%%MatrixMarket matrix coordinate {field} general\n1 1 1\n1 1 1 0\n");
        assert!(matches!(
            parse_matrix_market(Cursor::new(text)),
            Err(GsvdError::Unsupported(_))
        ));
    }
}

#[test]
fn market_parse_error_carries_line() {
    let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n";
    match parse_matrix_market(Cursor::new(text)) {
        Err(GsvdError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn market_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (csr, dense) = random_csr(17, 9, 0.25, 3);
    let path = dir.path().join("a.mtx");
    write_matrix_market_csr(&path, &csr).unwrap();
    let back = read_matrix_market(&path).unwrap();
    match &back {
        MarketMatrix::Sparse(m) => assert_eq!(m.triplets(), csr.triplets()),
        MarketMatrix::Dense(_) => panic!("coordinate file read as dense"),
    }
    assert_eq!(back.to_dense(), dense);

    let mut r = rng(4);
    let d = randn(5, 4, &mut r);
    let path = dir.path().join("d.mtx");
    write_matrix_market_dense(&path, &d).unwrap();
    assert_eq!(read_matrix_market(&path).unwrap().to_dense(), d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn adjoint_consistency_dense(m in 1usize..20, n in 1usize..20, seed in any::<u64>()) {
        let mut r = rng(seed);
        let op = DenseOperator::new(randn(m, n, &mut r));
        prop_assert!(adjoint_gap(&op, 5, seed ^ 1) < 1e-12);
    }

    #[test]
    fn adjoint_consistency_householder(m in 2usize..20, n in 2usize..20, seed in any::<u64>()) {
        let mut r = rng(seed);
        let inner: SharedOperator = Arc::new(DenseOperator::new(randn(m, n, &mut r)));
        let op = HouseholderComposed::new(Some(randv(m, &mut r)), inner, Some(randv(n, &mut r))).unwrap();
        prop_assert!(adjoint_gap(&op, 5, seed ^ 2) < 1e-12);
    }

    #[test]
    fn adjoint_consistency_csr(m in 1usize..25, n in 1usize..25, seed in any::<u64>()) {
        let (csr, _) = random_csr(m, n, 0.3, seed);
        prop_assert!(adjoint_gap(&csr, 5, seed ^ 3) < 1e-12);
    }

    #[test]
    fn adjoint_consistency_restricted(n in 3usize..15, k in 0usize..3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let inner: SharedOperator = Arc::new(DenseOperator::new(randn(n + 2, n, &mut r)));
        let left = common::orth(&randn(n + 2, k, &mut r));
        let right = common::orth(&randn(n, k, &mut r));
        let op = RestrictedOperator::new(inner, left, right).unwrap();
        prop_assert!(adjoint_gap(&op, 5, seed ^ 4) < 1e-12);
    }
}
