//! Dense reference decompositions and Rayleigh–Ritz error bounds for
//! symmetric definite pencils `(N, M)`, measured in the `M`-geometry.
//!
//! Everything here is meant for small dense problems where the full
//! spectrum is affordable.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::Serialize;

use crate::error::{GsvdError, Result};

fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or(GsvdError::NotPositiveDefinite)
}

/// Full GSVD of a small dense pair with `XᵀMX = I`, `M = AᵀA + BᵀB`,
/// ordered by descending `c`.
#[derive(Clone, Debug)]
pub struct DenseGsvd {
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub x: DMatrix<f64>,
}

impl DenseGsvd {
    pub fn sigma(&self) -> Vec<f64> {
        self.c.iter().zip(&self.s).map(|(c, s)| c / s).collect()
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }
}

/// Eigenvalues (descending) and `M`-orthonormal eigenvectors of `N x = λ M x`.
pub fn pencil_eigen(n: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = cholesky(m)?;
    let l = chol.l();
    let li_n = l
        .solve_lower_triangular(n)
        .ok_or(GsvdError::NotPositiveDefinite)?;
    let c = l
        .solve_lower_triangular(&li_n.transpose())
        .ok_or(GsvdError::NotPositiveDefinite)?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let q = DMatrix::from_fn(idx.len(), idx.len(), |r, k| eig.eigenvectors[(r, idx[k])]);
    let x = l
        .transpose()
        .solve_upper_triangular(&q)
        .ok_or(GsvdError::NotPositiveDefinite)?;
    Ok((idx.iter().map(|&i| eig.eigenvalues[i]).collect(), x))
}

/// Dense GSVD via the pencil `(AᵀA, AᵀA + BᵀB)`. The pairs are recomputed
/// as `(‖Ax‖, ‖Bx‖)` so small cosines and sines keep relative accuracy.
pub fn dense_gsvd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DenseGsvd> {
    let ata = a.tr_mul(a);
    let m = &ata + b.tr_mul(b);
    let (_, mut x) = pencil_eigen(&ata, &m)?;
    let n = x.ncols();
    let mut pairs: Vec<(f64, f64, usize)> = Vec::with_capacity(n);
    for j in 0..n {
        let xj = x.column(j).into_owned();
        let c = (a * &xj).norm();
        let s = (b * &xj).norm();
        let h = c.hypot(s);
        x.column_mut(j).scale_mut(1.0 / h);
        pairs.push((c / h, s / h, j));
    }
    pairs.sort_by(|p, q| q.0.total_cmp(&p.0));
    Ok(DenseGsvd {
        c: pairs.iter().map(|p| p.0).collect(),
        s: pairs.iter().map(|p| p.1).collect(),
        x: DMatrix::from_fn(x.nrows(), n, |r, k| x[(r, pairs[k].2)]),
    })
}

/// `‖X‖²` for `XᵀMX = I`, i.e. `1 / λ_min(AᵀA + BᵀB)`.
pub fn x_norm_squared(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let m = a.tr_mul(a) + b.tr_mul(b);
    let lmin = SymmetricEigen::new(m).eigenvalues.min();
    if lmin <= 0.0 {
        return Err(GsvdError::NotPositiveDefinite);
    }
    Ok(1.0 / lmin)
}

fn m_inner(m: &dyn Fn(&DVector<f64>) -> DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(&m(b))
}

pub fn m_cos(w: &DVector<f64>, x: &DVector<f64>, m: &dyn Fn(&DVector<f64>) -> DVector<f64>) -> Result<f64> {
    let ww = m_inner(m, w, w);
    let xx = m_inner(m, x, x);
    if ww <= 0.0 || xx <= 0.0 {
        return Err(GsvdError::MDegenerate);
    }
    Ok((m_inner(m, w, x).abs() / (ww.sqrt() * xx.sqrt())).min(1.0))
}

/// `‖(I − w wᵀM / wᵀMw) x‖_M / ‖x‖_M`
pub fn m_sin(w: &DVector<f64>, x: &DVector<f64>, m: &dyn Fn(&DVector<f64>) -> DVector<f64>) -> Result<f64> {
    let mw = m(w);
    let ww = w.dot(&mw);
    let xx = m_inner(m, x, x);
    if ww <= 0.0 || xx <= 0.0 {
        return Err(GsvdError::MDegenerate);
    }
    let d = x - w * (mw.dot(x) / ww);
    Ok((m_inner(m, &d, &d).max(0.0) / xx).sqrt().min(1.0))
}

pub fn m_tan(w: &DVector<f64>, x: &DVector<f64>, m: &dyn Fn(&DVector<f64>) -> DVector<f64>) -> Result<f64> {
    Ok(m_sin(w, x, m)? / m_cos(w, x, m)?)
}

fn m_project(
    basis: &DMatrix<f64>,
    x: &DVector<f64>,
    m: &dyn Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<DVector<f64>> {
    let k = basis.ncols();
    let mut mw = DMatrix::zeros(basis.nrows(), k);
    for j in 0..k {
        mw.set_column(j, &m(&basis.column(j).into_owned()));
    }
    let gram = basis.tr_mul(&mw);
    let gram = (&gram + gram.transpose()) * 0.5;
    let dmax = gram.diagonal().amax();
    let chol = Cholesky::new(gram).ok_or(GsvdError::RankDeficient)?;
    let lmin = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    if lmin * lmin <= k as f64 * f64::EPSILON * dmax {
        return Err(GsvdError::RankDeficient);
    }
    let y = chol.solve(&mw.tr_mul(x));
    Ok(basis * y)
}

/// `M`-sine between `span(W)` and `x`.
pub fn m_sin_subspace(
    basis: &DMatrix<f64>,
    x: &DVector<f64>,
    m: &dyn Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<f64> {
    let xx = m_inner(m, x, x);
    if xx <= 0.0 {
        return Err(GsvdError::MDegenerate);
    }
    let d = x - m_project(basis, x, m)?;
    Ok((m_inner(m, &d, &d).max(0.0) / xx).sqrt().min(1.0))
}

pub fn m_cos_subspace(
    basis: &DMatrix<f64>,
    x: &DVector<f64>,
    m: &dyn Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<f64> {
    let xx = m_inner(m, x, x);
    if xx <= 0.0 {
        return Err(GsvdError::MDegenerate);
    }
    let p = m_project(basis, x, m)?;
    Ok((m_inner(m, &p, &p).max(0.0) / xx).sqrt().min(1.0))
}

pub fn m_tan_subspace(
    basis: &DMatrix<f64>,
    x: &DVector<f64>,
    m: &dyn Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<f64> {
    Ok(m_sin_subspace(basis, x, m)? / m_cos_subspace(basis, x, m)?)
}

/// Euclidean sine between two vectors.
pub fn sin_angle(w: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let wn = w.norm();
    let xn = x.norm();
    let d = x - w * (w.dot(x) / (wn * wn));
    (d.norm() / xn).min(1.0)
}

/// Sine of the largest principal angle between the spans of two
/// orthonormal bases of equal dimension.
pub fn max_principal_sine(q1: &DMatrix<f64>, q2: &DMatrix<f64>) -> f64 {
    let proj = q1 - q2 * q2.tr_mul(q1);
    proj.singular_values().max()
}

/// `‖r‖_{M⁻¹}` by a direct solve with `M`.
pub fn m_inv_norm(r: &DVector<f64>, m: &DMatrix<f64>) -> Result<f64> {
    let y = cholesky(m)?.solve(r);
    Ok(r.dot(&y).max(0.0).sqrt())
}

/// Exact spectrum of a pencil together with the leading Ritz value.
#[derive(Clone, Debug, Serialize)]
pub struct PencilSpectrum {
    pub lambdas: Vec<f64>,
    pub theta1: f64,
}

/// Angle and residual quantities entering the bounds.
#[derive(Clone, Debug, Serialize)]
pub struct BoundInputs {
    /// Search space dimension.
    pub k: usize,
    /// `sin_M(w₁, x₁)`
    pub sin_w1: f64,
    /// `tan_M(w₁, x₁)`
    pub tan_w1: f64,
    /// `sin_M(W, x₁)`
    pub sin_space: f64,
    /// `tan_M(W, x₁)`
    pub tan_space: f64,
    /// Smallest `sin_M(w_j, x₁)` over all Ritz vectors.
    pub delta_space: f64,
    /// `‖(N − θ₁M) w₁‖_{M⁻¹}` with `‖w₁‖_M = 1`.
    pub rho_m: f64,
    /// Euclidean `sin(w₁, x₁)`.
    pub sin_euclid: f64,
    /// Condition number of `M`.
    pub kappa_m: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub applicable: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundCheck {
    fn new(name: &'static str, applicable: bool, lhs: f64, rhs: f64) -> Self {
        Self {
            name,
            applicable,
            lhs,
            rhs,
        }
    }

    /// `rhs − lhs`, or `+∞` when the hypothesis fails.
    pub fn slack(&self) -> f64 {
        if self.applicable {
            self.rhs - self.lhs
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn violations(&self, slack: f64) -> Vec<&BoundCheck> {
        self.checks.iter().filter(|c| c.slack() < slack).collect()
    }

    pub fn min_slack(&self) -> f64 {
        self.checks.iter().map(BoundCheck::slack).fold(f64::INFINITY, f64::min)
    }
}

/// `½(1 + ε²) − ½√((1 − ε²)² − κε²)`
pub fn sharp_delta_squared(eps: f64, kappa: f64) -> f64 {
    let e2 = eps * eps;
    let disc = ((1.0 - e2).powi(2) - kappa * e2).max(0.0);
    0.5 * (1.0 + e2) - 0.5 * disc.sqrt()
}

/// Evaluate the Rayleigh–Ritz bounds for the largest eigenpair. Each bound
/// is reported as `lhs ≤ rhs`; bounds whose hypothesis fails are marked
/// not applicable.
pub fn bound_suite(spectrum: &PencilSpectrum, q: &BoundInputs) -> BoundReport {
    let l = &spectrum.lambdas;
    let (l1, l2, ln) = (l[0], l[1], l[l.len() - 1]);
    let t1 = spectrum.theta1;
    let gap = l1 - l2;
    let spread = l1 - ln;
    let separated = gap > 0.0;
    let sw2 = q.sin_w1 * q.sin_w1;
    let ss2 = q.sin_space * q.sin_space;
    let mut checks = vec![
        BoundCheck::new("sin_w1_by_value_gap", separated, sw2, (l1 - t1) / gap),
        BoundCheck::new("value_by_space_sine", true, l1 - t1, spread * ss2),
        BoundCheck::new("sin_w1_by_space_sine", separated, sw2, spread / gap * ss2),
    ];

    let kappa = if separated { (l2 - ln).powi(2) / (spread * gap) } else { f64::NAN };
    let sharp_ok =
        separated && q.k >= 2 && q.k < l.len() && q.sin_space < gap / spread;
    let delta_rhs = if sharp_ok { sharp_delta_squared(q.sin_space, kappa) } else { f64::NAN };
    checks.push(BoundCheck::new(
        "sharp_delta",
        sharp_ok,
        q.delta_space * q.delta_space,
        delta_rhs,
    ));
    checks.push(BoundCheck::new(
        "sharp_corollary",
        sharp_ok,
        sw2,
        ss2 + 0.5 * kappa * q.tan_space * q.tan_space,
    ));

    let se2 = q.sin_euclid * q.sin_euclid;
    checks.push(BoundCheck::new("kappa_sandwich_lower", true, se2 / q.kappa_m, sw2));
    checks.push(BoundCheck::new(
        "kappa_sandwich_upper",
        true,
        sw2,
        0.25 * (q.kappa_m + 1.0).powi(2) * se2,
    ));

    let parlett_ok = l1 - t1 < t1 - l2;
    let rho = q.rho_m;
    checks.extend([
        BoundCheck::new("residual_sin_lower", parlett_ok, rho / spread, q.sin_w1),
        BoundCheck::new("sin_le_tan", parlett_ok, q.sin_w1, q.tan_w1),
        BoundCheck::new("residual_tan_upper", parlett_ok, q.tan_w1, rho / (t1 - l2)),
        BoundCheck::new("residual_value_lower", parlett_ok, rho * rho / spread, l1 - t1),
        BoundCheck::new("residual_value_upper", parlett_ok, l1 - t1, rho * rho / (t1 - l2)),
    ]);
    BoundReport { checks }
}

/// All bound inputs for the pencil `(N, M)` and the search space `span(W)`.
pub fn rayleigh_ritz_inputs(
    n_mat: &DMatrix<f64>,
    m_mat: &DMatrix<f64>,
    basis: &DMatrix<f64>,
) -> Result<(PencilSpectrum, BoundInputs)> {
    let (lambdas, x) = pencil_eigen(n_mat, m_mat)?;
    let (thetas, y) = pencil_eigen(&basis.tr_mul(&(n_mat * basis)), &basis.tr_mul(&(m_mat * basis)))?;
    let ritz = basis * y;
    let x1 = x.column(0).into_owned();
    let w1 = ritz.column(0).into_owned();
    let mop = |v: &DVector<f64>| m_mat * v;
    let delta = (0..ritz.ncols())
        .map(|j| m_sin(&ritz.column(j).into_owned(), &x1, &mop))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let w1m = &w1 / w1.dot(&(m_mat * &w1)).sqrt();
    let res = n_mat * &w1m - m_mat * &w1m * thetas[0];
    let meig = SymmetricEigen::new(m_mat.clone()).eigenvalues;
    let inputs = BoundInputs {
        k: basis.ncols(),
        sin_w1: m_sin(&w1, &x1, &mop)?,
        tan_w1: m_tan(&w1, &x1, &mop)?,
        sin_space: m_sin_subspace(basis, &x1, &mop)?,
        tan_space: m_tan_subspace(basis, &x1, &mop)?,
        delta_space: delta,
        rho_m: m_inv_norm(&res, m_mat)?,
        sin_euclid: sin_angle(&w1, &x1),
        kappa_m: meig.max() / meig.min(),
    };
    Ok((
        PencilSpectrum {
            lambdas,
            theta1: thetas[0],
        },
        inputs,
    ))
}

/// Right-hand side `‖X‖² ‖r‖ / ‖x̃‖`; some exact pair `(c★, s★)` satisfies
/// `|s̃²c★² − c̃²s★²|` at most this value.
pub fn bauer_fike_gsvd(_c: f64, _s: f64, x: &DVector<f64>, r: &DVector<f64>, x_norm: f64) -> f64 {
    x_norm * x_norm * r.norm() / x.norm()
}

/// Contraction factor `((κ − 1)/(κ + 1))²` of the squared sine.
pub fn asym_rate(kappa: f64) -> Result<f64> {
    if !(kappa >= 1.0) {
        return Err(GsvdError::InvalidKappa(kappa));
    }
    Ok(((kappa - 1.0) / (kappa + 1.0)).powi(2))
}

/// Condition number of `s₁²AᵀA − c₁²BᵀB` restricted to the complement of
/// `(AᵀA + BᵀB) x₁`, where `(c₁, s₁, x₁)` is the smallest pair.
pub fn asym_kappa(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let g = dense_gsvd(a, b)?;
    let last = g.len() - 1;
    let (c1, s1) = (g.c[last], g.s[last]);
    let x1 = g.x.column(last).into_owned();
    let ata = a.tr_mul(a);
    let btb = b.tr_mul(b);
    let op = &ata * (s1 * s1) - &btb * (c1 * c1);
    let y = (&ata + &btb) * x1;
    let y = &y / y.norm();
    let n = op.nrows();
    let p = DMatrix::identity(n, n) - &y * y.transpose();
    let restricted = &p * op * &p;
    let restricted = (&restricted + restricted.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(restricted).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    // The complement direction contributes one spurious zero.
    ev.pop();
    let lmin = *ev.last().ok_or(GsvdError::RankDeficient)?;
    if lmin <= 0.0 {
        return Err(GsvdError::NotPositiveDefinite);
    }
    Ok(ev[0] / lmin)
}
