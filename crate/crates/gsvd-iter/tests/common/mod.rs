#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn randv(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    randv(n, rng).normalize()
}

pub fn upper(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = randn(k, k, rng);
    for j in 0..k {
        for i in j + 1..k {
            m[(i, j)] = 0.0;
        }
        m[(j, j)] = m[(j, j)].abs() + 1.0;
    }
    m
}

/// Orthonormal basis of the column span via nalgebra's QR.
pub fn orth(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

pub fn orth_defect(q: &DMatrix<f64>) -> f64 {
    let k = q.ncols();
    (q.transpose() * q - DMatrix::identity(k, k)).amax()
}

/// Descending eigenvalues of a symmetric matrix.
pub fn sym_eigs_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

/// Generalized eigenvalues of the symmetric definite pencil `(n, m)`, descending,
/// from `L⁻¹ n L⁻ᵀ` with `m = L Lᵀ`.
pub fn pencil_eigs_desc(n: &DMatrix<f64>, m: &DMatrix<f64>) -> Vec<f64> {
    let l = m.clone().cholesky().expect("definite").l();
    let li = l.try_inverse().expect("invertible");
    let s = &li * n * li.transpose();
    sym_eigs_desc(&((&s + s.transpose()) * 0.5))
}

/// Largest sine of the principal angles between two column-orthonormal bases.
pub fn max_sine(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    let r = q1 - q2 * (q2.transpose() * q1);
    r.singular_values().amax()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Eigenpairs of the definite pencil `(n, m)`, eigenvalues descending and
/// eigenvectors `m`-orthonormal.
pub fn pencil_eig_vectors(n: &DMatrix<f64>, m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let l = m.clone().cholesky().expect("definite").l();
    let li = l.try_inverse().expect("invertible");
    let s = &li * n * li.transpose();
    let e = ((&s + s.transpose()) * 0.5).symmetric_eigen();
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n.nrows(), idx.len(), |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, li.transpose() * vecs)
}

/// Generalized singular pairs of a dense pair: `c²` descending and the
/// matching right vectors, from the pencil `(AᵀA, AᵀA + BᵀB)`.
pub fn gsv_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let ata = a.transpose() * a;
    let m = &ata + b.transpose() * b;
    pencil_eig_vectors(&ata, &m)
}
