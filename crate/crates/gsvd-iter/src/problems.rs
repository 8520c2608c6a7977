//! Seeded test-problem generators.
//!
//! The synthetic pairs have analytically known generalized singular values.
//! The regularization problems are midpoint or Galerkin discretizations of
//! classical first-kind integral equations with `b = A x★` and the first
//! difference operator as `B`.

use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

use crate::error::{GsvdError, Result};
use crate::gdgsvd::Which;
use crate::operator::{
    write_matrix_market_csr, write_matrix_market_dense, write_vectors, CsrMatrix, DenseOperator,
    DiagonalOperator, FirstDifference, HouseholderComposed, LinearOperator, MatrixPair,
    OperatorKind,
};

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub label: String,
    pub pair: MatrixPair,
    /// Known generalized singular pairs `(c, s)` sorted by decreasing `c`.
    pub exact: Option<Vec<(f64, f64)>>,
    pub b: Option<DVector<f64>>,
    pub x_star: Option<DVector<f64>>,
}

impl ProblemInstance {
    /// The known extremal pair on the requested side.
    pub fn exact_pair(&self, which: Which) -> Option<(f64, f64)> {
        let e = self.exact.as_ref()?;
        match which {
            Which::Largest => e.first().copied(),
            Which::Smallest => e.last().copied(),
        }
    }

    pub fn n(&self) -> usize {
        self.pair.cols()
    }

    /// Write `A.mtx`, `B.mtx` and, when present, `b.mtx` and `x_star.mtx`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_operator(&dir.join("A.mtx"), self.pair.a.as_ref())?;
        write_operator(&dir.join("B.mtx"), self.pair.b.as_ref())?;
        if let Some(b) = &self.b {
            write_vectors(dir.join("b.mtx"), std::slice::from_ref(b))?;
        }
        if let Some(x) = &self.x_star {
            write_vectors(dir.join("x_star.mtx"), std::slice::from_ref(x))?;
        }
        Ok(())
    }
}

fn write_operator(path: &Path, op: &dyn LinearOperator) -> Result<()> {
    let dense = op.to_dense();
    match op.kind() {
        OperatorKind::CsrSparse | OperatorKind::Diagonal | OperatorKind::DifferenceOperator => {
            write_matrix_market_csr(path, &CsrMatrix::from_dense(&dense, 0.0))
        }
        _ => write_matrix_market_dense(path, &dense),
    }
}

fn cosines(n: usize) -> (Vec<f64>, Vec<f64>) {
    let c: Vec<f64> = (1..=n)
        .map(|j| (n - j + 1) as f64 / (2 * n) as f64)
        .collect();
    let s = c.iter().map(|c| (1.0 - c * c).sqrt()).collect();
    (c, s)
}

fn scales(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let quarter = n as f64 / 4.0;
    (1..=n)
        .map(|j| {
            let r: f64 = Open01.sample(rng);
            (j as f64 / quarter).ceil() + r
        })
        .collect()
}

fn shifted_scales(d: &[f64], kappa_exp: i32) -> Vec<f64> {
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    d.iter().map(|x| x - dmin + 10f64.powi(-kappa_exp)).collect()
}

fn check_n(n: usize) -> Result<()> {
    if n < 4 || n % 4 != 0 {
        return Err(GsvdError::InvalidOptions(format!(
            "n must be a positive multiple of 4, got {n}"
        )));
    }
    Ok(())
}

fn exact_from_cs(c: &[f64], s: &[f64]) -> Vec<(f64, f64)> {
    c.iter().copied().zip(s.iter().copied()).collect()
}

/// `A = C D`, `B = S D` with linearly spaced cosines and random block scales.
pub fn gen_diag(n: usize, seed: u64) -> Result<ProblemInstance> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, s) = cosines(n);
    let d = scales(n, &mut rng);
    let a: Vec<f64> = c.iter().zip(&d).map(|(c, d)| c * d).collect();
    let b: Vec<f64> = s.iter().zip(&d).map(|(s, d)| s * d).collect();
    Ok(ProblemInstance {
        label: format!("diag-n{n}"),
        pair: MatrixPair::new(
            Arc::new(DiagonalOperator::square(a)),
            Arc::new(DiagonalOperator::square(b)),
        )?,
        exact: Some(exact_from_cs(&c, &s)),
        b: None,
        x_star: None,
    })
}

/// Orthogonal factor from the QR of a Gaussian matrix with a sign-fixed `R`.
pub fn haar_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `A = U C D̃ Wᵀ`, `B = V S D̃ Wᵀ` with random orthogonal `U`, `V`, `W` and
/// `min d̃ = 10^(-kappa_exp)`.
pub fn gen_orth(n: usize, kappa_exp: i32, seed: u64) -> Result<ProblemInstance> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, s) = cosines(n);
    let dt = shifted_scales(&scales(n, &mut rng), kappa_exp);
    let u = haar_orthogonal(n, &mut rng);
    let v = haar_orthogonal(n, &mut rng);
    let w = haar_orthogonal(n, &mut rng);
    let cd = DVector::from_fn(n, |j, _| c[j] * dt[j]);
    let sd = DVector::from_fn(n, |j, _| s[j] * dt[j]);
    let wt = w.transpose();
    let a = u * DMatrix::from_diagonal(&cd) * &wt;
    let b = v * DMatrix::from_diagonal(&sd) * &wt;
    Ok(ProblemInstance {
        label: format!("orth-n{n}-k{kappa_exp}"),
        pair: MatrixPair::from_dense(a, b)?,
        exact: Some(exact_from_cs(&c, &s)),
        b: None,
        x_star: None,
    })
}

fn unit_sphere(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let nrm = v.norm();
    v / nrm
}

/// Matrix-free `A = (I − 2ffᵀ) C D̃ (I − 2hhᵀ)`, `B = (I − 2ggᵀ) S D̃ (I − 2hhᵀ)`.
pub fn gen_householder(n: usize, kappa_exp: i32, seed: u64) -> Result<ProblemInstance> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, s) = cosines(n);
    let dt = shifted_scales(&scales(n, &mut rng), kappa_exp);
    let f = unit_sphere(n, &mut rng);
    let g = unit_sphere(n, &mut rng);
    let h = unit_sphere(n, &mut rng);
    let cd = c.iter().zip(&dt).map(|(c, d)| c * d).collect();
    let sd = s.iter().zip(&dt).map(|(s, d)| s * d).collect();
    let a = HouseholderComposed::new(
        Some(f),
        Arc::new(DiagonalOperator::square(cd)),
        Some(h.clone()),
    )?;
    let b = HouseholderComposed::new(Some(g), Arc::new(DiagonalOperator::square(sd)), Some(h))?;
    Ok(ProblemInstance {
        label: format!("householder-n{n}-k{kappa_exp}"),
        pair: MatrixPair::new(Arc::new(a), Arc::new(b))?,
        exact: Some(exact_from_cs(&c, &s)),
        b: None,
        x_star: None,
    })
}

/// Random sparse `n × n` matrix with singular values spaced geometrically
/// from 1 down to `rc`, returned with those singular values.
///
/// A diagonal matrix is mixed by random plane rotations applied alternately
/// from the left and the right until at least `density · n²` entries are
/// nonzero, so the singular values are exact.
pub fn sparse_random(n: usize, density: f64, rc: f64, seed: u64) -> Result<(CsrMatrix, Vec<f64>)> {
    if !(density > 0.0 && density <= 1.0) || !(rc > 0.0 && rc <= 1.0) || n < 2 {
        return Err(GsvdError::InvalidOptions(format!(
            "need n >= 2, density in (0, 1] and rc in (0, 1], got {n}, {density}, {rc}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                1.0
            } else {
                rc.powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect();
    let mut m = DMatrix::from_diagonal(&DVector::from_vec(sigma.clone()));
    let target = ((density * (n * n) as f64).ceil() as usize).min(n * n);
    let mut nnz = n;
    let mut left = true;
    let count_row = |m: &DMatrix<f64>, i: usize| m.row(i).iter().filter(|x| **x != 0.0).count();
    let count_col = |m: &DMatrix<f64>, j: usize| m.column(j).iter().filter(|x| **x != 0.0).count();
    while nnz < target {
        let i = rng.random_range(0..n);
        let mut k = rng.random_range(0..n - 1);
        if k >= i {
            k += 1;
        }
        let theta: f64 = rng.random_range(0.0..2.0 * PI);
        let (sn, cs) = theta.sin_cos();
        if left {
            let before = count_row(&m, i) + count_row(&m, k);
            for j in 0..n {
                let (a, b) = (m[(i, j)], m[(k, j)]);
                m[(i, j)] = cs * a - sn * b;
                m[(k, j)] = sn * a + cs * b;
            }
            nnz = nnz + count_row(&m, i) + count_row(&m, k) - before;
        } else {
            let before = count_col(&m, i) + count_col(&m, k);
            for r in 0..n {
                let (a, b) = (m[(r, i)], m[(r, k)]);
                m[(r, i)] = cs * a - sn * b;
                m[(r, k)] = sn * a + cs * b;
            }
            nnz = nnz + count_col(&m, i) + count_col(&m, k) - before;
        }
        left = !left;
    }
    Ok((CsrMatrix::from_dense(&m, 0.0), sigma))
}

/// Sparse pair with `A` orthogonal (`rc = 1`) and `B` of reciprocal
/// condition `rc_b`; both with the given density.
pub fn gen_sparse_random(n: usize, density: f64, rc_b: f64, seed: u64) -> Result<ProblemInstance> {
    let (a, sa) = sparse_random(n, density, 1.0, seed)?;
    let (b, sb) = sparse_random(n, density, rc_b, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))?;
    debug_assert!(sa.iter().all(|s| *s == 1.0));
    // AᵀA = I, so the generalized singular values are 1 / σ_i(B).
    let mut exact: Vec<(f64, f64)> = sb
        .iter()
        .map(|sbi| {
            let h = sbi.hypot(1.0);
            (1.0 / h, sbi / h)
        })
        .collect();
    exact.sort_by(|x, y| y.0.total_cmp(&x.0));
    Ok(ProblemInstance {
        label: format!("sprand-n{n}"),
        pair: MatrixPair::new(Arc::new(a), Arc::new(b))?,
        exact: Some(exact),
        b: None,
        x_star: None,
    })
}

/// Named synthetic benchmark example: `1`, `2a`..`2c`, `3a`..`3c`, `4`.
pub fn gen_example(id: &str, n: usize, seed: u64) -> Result<ProblemInstance> {
    let kappa = |c: char| match c {
        'a' => Some(6),
        'b' => Some(9),
        'c' => Some(12),
        _ => None,
    };
    let mut chars = id.chars();
    let head = chars.next();
    let tail: Vec<char> = chars.collect();
    match (head, tail.as_slice()) {
        (Some('1'), []) => gen_diag(n, seed),
        (Some('2'), [k]) => gen_orth(n, kappa(*k).ok_or_else(|| unknown(id))?, seed),
        (Some('3'), [k]) => gen_householder(n, kappa(*k).ok_or_else(|| unknown(id))?, seed),
        (Some('4'), []) => gen_sparse_random(n, 0.1, 1e-2, seed),
        _ => Err(unknown(id)),
    }
}

fn unknown(id: &str) -> GsvdError {
    GsvdError::UnknownProblem(id.to_string())
}

/// Discrete ill-posed test problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegProblem {
    Shaw,
    Baart,
    Deriv2(u8),
    Gravity(u8),
    Foxgood,
    Wing,
    Phillips,
}

impl RegProblem {
    pub const ALL: [RegProblem; 11] = [
        RegProblem::Shaw,
        RegProblem::Baart,
        RegProblem::Deriv2(1),
        RegProblem::Deriv2(2),
        RegProblem::Deriv2(3),
        RegProblem::Gravity(1),
        RegProblem::Gravity(2),
        RegProblem::Gravity(3),
        RegProblem::Foxgood,
        RegProblem::Wing,
        RegProblem::Phillips,
    ];

    pub fn name(self) -> String {
        match self {
            RegProblem::Shaw => "shaw".into(),
            RegProblem::Baart => "baart".into(),
            RegProblem::Deriv2(k) => format!("deriv2-{k}"),
            RegProblem::Gravity(k) => format!("gravity-{k}"),
            RegProblem::Foxgood => "foxgood".into(),
            RegProblem::Wing => "wing".into(),
            RegProblem::Phillips => "phillips".into(),
        }
    }
}

impl FromStr for RegProblem {
    type Err = GsvdError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let variant = |prefix: &str| -> Option<u8> {
            let rest = lower.strip_prefix(prefix)?;
            match rest {
                "" => Some(1),
                "-1" => Some(1),
                "-2" => Some(2),
                "-3" => Some(3),
                _ => None,
            }
        };
        Ok(match lower.as_str() {
            "shaw" => RegProblem::Shaw,
            "baart" => RegProblem::Baart,
            "foxgood" => RegProblem::Foxgood,
            "wing" => RegProblem::Wing,
            "phillips" => RegProblem::Phillips,
            _ => {
                if let Some(k) = variant("deriv2") {
                    RegProblem::Deriv2(k)
                } else if let Some(k) = variant("gravity") {
                    RegProblem::Gravity(k)
                } else {
                    return Err(GsvdError::UnknownProblem(s.to_string()));
                }
            }
        })
    }
}

fn midpoints(n: usize, a: f64, b: f64) -> Vec<f64> {
    let h = (b - a) / n as f64;
    (0..n).map(|i| a + (i as f64 + 0.5) * h).collect()
}

fn shaw(n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let h = PI / n as f64;
    let t = midpoints(n, -PI / 2.0, PI / 2.0);
    let co: Vec<f64> = t.iter().map(|t| t.cos()).collect();
    let psi: Vec<f64> = t.iter().map(|t| PI * t.sin()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let ss = psi[i] + psi[j];
        let sinc = if ss == 0.0 { 1.0 } else { ss.sin() / ss };
        let v = (co[i] + co[j]) * sinc;
        h * v * v
    });
    let x = DVector::from_fn(n, |i, _| {
        2.0 * (-6.0 * (t[i] - 0.8).powi(2)).exp() + (-2.0 * (t[i] + 0.5).powi(2)).exp()
    });
    (a, x)
}

fn baart(n: usize) -> (DMatrix<f64>, DVector<f64>) {
    // Kernel exp(s cos t) on [0, π/2] × [0, π], orthonormal box basis,
    // Simpson's rule in t and exact integration in s.
    let hs = PI / (2 * n) as f64;
    let ht = PI / n as f64;
    let scale = 1.0 / (hs * ht).sqrt();
    let in_s = |i: usize, co: f64| {
        let (s0, s1) = (i as f64 * hs, (i + 1) as f64 * hs);
        if co.abs() < 1e-14 {
            hs
        } else {
            ((s1 * co).exp() - (s0 * co).exp()) / co
        }
    };
    let a = DMatrix::from_fn(n, n, |i, j| {
        let t0 = j as f64 * ht;
        let c0 = t0.cos();
        let cm = (t0 + 0.5 * ht).cos();
        let c1 = (t0 + ht).cos();
        scale * ht / 6.0 * (in_s(i, c0) + 4.0 * in_s(i, cm) + in_s(i, c1))
    });
    let x = DVector::from_fn(n, |j, _| {
        let t0 = j as f64 * ht;
        (t0.cos() - (t0 + ht).cos()) / ht.sqrt()
    });
    (a, x)
}

fn deriv2(n: usize, example: u8) -> (DMatrix<f64>, DVector<f64>) {
    // Green's function of the second derivative on [0, 1], Galerkin with
    // orthonormal box functions.
    let h = 1.0 / n as f64;
    let h2 = h * h;
    let mut a = DMatrix::zeros(n, n);
    for i in 1..=n {
        let fi = i as f64;
        a[(i - 1, i - 1)] = h2 * ((fi * fi - fi + 0.25) * h - (fi - 2.0 / 3.0));
        for j in 1..i {
            let v = h2 * (j as f64 - 0.5) * ((fi - 0.5) * h - 1.0);
            a[(i - 1, j - 1)] = v;
            a[(j - 1, i - 1)] = v;
        }
    }
    let antiderivative = |t: f64| -> f64 {
        match example {
            1 => t * t / 2.0,
            2 => t.exp(),
            _ => {
                if t <= 0.5 {
                    t * t / 2.0
                } else {
                    0.125 + (t - 0.5) - (t * t - 0.25) / 2.0
                }
            }
        }
    };
    let sq = h.sqrt();
    let x = DVector::from_fn(n, |i, _| {
        (antiderivative((i + 1) as f64 * h) - antiderivative(i as f64 * h)) / sq
    });
    (a, x)
}

fn gravity(n: usize, example: u8) -> (DMatrix<f64>, DVector<f64>) {
    let d: f64 = 0.25;
    let dt = 1.0 / n as f64;
    let t = midpoints(n, 0.0, 1.0);
    let a = DMatrix::from_fn(n, n, |i, j| {
        let diff = t[i] - t[j];
        dt * d / (d * d + diff * diff).powf(1.5)
    });
    let x = DVector::from_fn(n, |i, _| {
        let ti = t[i];
        match example {
            1 => (PI * ti).sin() + 0.5 * (2.0 * PI * ti).sin(),
            // Piecewise linear hat.
            2 => 1.0 - (2.0 * ti - 1.0).abs(),
            // Piecewise constant steps.
            _ => {
                if ti < 1.0 / 3.0 {
                    2.0
                } else if ti < 2.0 / 3.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    });
    (a, x)
}

fn foxgood(n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let h = 1.0 / n as f64;
    let t = midpoints(n, 0.0, 1.0);
    let a = DMatrix::from_fn(n, n, |i, j| h * (t[i] * t[i] + t[j] * t[j]).sqrt());
    (a, DVector::from_vec(t))
}

fn wing(n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let h = 1.0 / n as f64;
    let t = midpoints(n, 0.0, 1.0);
    let a = DMatrix::from_fn(n, n, |i, j| h * t[j] * (-t[i] * t[j] * t[j]).exp());
    let x = DVector::from_fn(n, |i, _| {
        if t[i] > 1.0 / 3.0 && t[i] < 2.0 / 3.0 {
            1.0
        } else {
            0.0
        }
    });
    (a, x)
}

fn phillips(n: usize) -> (DMatrix<f64>, DVector<f64>) {
    // Kernel φ(s − t) with φ(x) = 1 + cos(πx/3) on |x| < 3, Galerkin on
    // [−6, 6] with orthonormal box functions; the double cell integral is a
    // second difference of the second antiderivative of φ.
    let h = 12.0 / n as f64;
    let k = 9.0 / (PI * PI);
    let phi2 = |x: f64| -> f64 {
        let ax = x.abs();
        if ax <= 3.0 {
            ax * ax / 2.0 + k * (1.0 - (PI * ax / 3.0).cos())
        } else {
            4.5 + 2.0 * k + 3.0 * (ax - 3.0)
        }
    };
    let a = DMatrix::from_fn(n, n, |i, j| {
        let delta = (i as f64 - j as f64) * h;
        (phi2(delta + h) - 2.0 * phi2(delta) + phi2(delta - h)) / h
    });
    let f1 = |t: f64| -> f64 {
        let tc = t.clamp(-3.0, 3.0);
        tc + (3.0 / PI) * (PI * tc / 3.0).sin()
    };
    let sq = h.sqrt();
    let x = DVector::from_fn(n, |i, _| {
        let t0 = -6.0 + i as f64 * h;
        (f1(t0 + h) - f1(t0)) / sq
    });
    (a, x)
}

/// Dense `A`, exact solution `x★`, clean data `b = A x★`, and `B` the first
/// difference operator.
pub fn gen_regu_problem(problem: RegProblem, n: usize) -> Result<ProblemInstance> {
    if n < 4 || n % 4 != 0 {
        return Err(GsvdError::InvalidOptions(format!(
            "n must be a positive multiple of 4, got {n}"
        )));
    }
    let (a, x) = match problem {
        RegProblem::Shaw => shaw(n),
        RegProblem::Baart => baart(n),
        RegProblem::Deriv2(k) => deriv2(n, k),
        RegProblem::Gravity(k) => gravity(n, k),
        RegProblem::Foxgood => foxgood(n),
        RegProblem::Wing => wing(n),
        RegProblem::Phillips => phillips(n),
    };
    let b = &a * &x;
    Ok(ProblemInstance {
        label: format!("{}-n{n}", problem.name()),
        pair: MatrixPair::new(
            Arc::new(DenseOperator::new(a)),
            Arc::new(FirstDifference::new(n)),
        )?,
        exact: None,
        b: Some(b),
        x_star: Some(x),
    })
}

/// Gaussian noise scaled to `‖e‖ = level · ‖b_clean‖`; returns `(b, e)`.
pub fn add_noise(b_clean: &DVector<f64>, level: f64, seed: u64) -> (DVector<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: DVector<f64> = DVector::from_fn(b_clean.len(), |_, _| StandardNormal.sample(&mut rng));
    let scale = level * b_clean.norm() / e.norm();
    let e = e * scale;
    (b_clean + &e, e)
}
