//! Small dense kernels for the projected problem.
//!
//! Everything here works on matrices whose dimension is the search-space
//! size (at most a few dozen), except the Gram–Schmidt helpers, which touch
//! the tall bases.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GsvdError, Result};

/// Relative norm below which an appended column counts as dependent (2⁻²⁶).
pub const EPS_HALF: f64 = 1.490_116_119_384_765_6e-8;

const EPS: f64 = f64::EPSILON;

pub(crate) fn push_column(m: &mut DMatrix<f64>, v: &DVector<f64>) {
    let k = m.ncols();
    let old = std::mem::replace(m, DMatrix::zeros(0, 0));
    let mut grown = old.resize_horizontally(k + 1, 0.0);
    grown.set_column(k, v);
    *m = grown;
}

/// Modified Gram–Schmidt of `v` against the columns of `q`, repeated until
/// the norm stops collapsing (at least two passes). Returns the accumulated
/// coefficients and the remaining norm.
pub(crate) fn orthogonalize(q: &DMatrix<f64>, v: &mut DVector<f64>) -> (DVector<f64>, f64) {
    let k = q.ncols();
    let mut h = DVector::zeros(k);
    let mut prev = v.norm();
    for pass in 0..4 {
        for j in 0..k {
            let c = q.column(j).dot(v);
            v.axpy(-c, &q.column(j), 1.0);
            h[j] += c;
        }
        let now = v.norm();
        if pass >= 1 && now >= prev * std::f64::consts::FRAC_1_SQRT_2 {
            return (h, now);
        }
        prev = now;
    }
    (h, prev)
}

/// Orthogonalize `v` against several bases in turn; `None` if it is
/// numerically dependent on their joint span.
pub(crate) fn orthonormalize_against(
    bases: &[&DMatrix<f64>],
    v: &DVector<f64>,
) -> Option<DVector<f64>> {
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let mut w = v.clone();
    for _ in 0..2 {
        for q in bases {
            orthogonalize(q, &mut w);
        }
    }
    let rho = w.norm();
    if rho <= EPS_HALF * norm {
        return None;
    }
    Some(w / rho)
}

/// A unit vector orthogonal to the columns of `q`, chosen deterministically.
pub(crate) fn complement_vector(q: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = q.nrows();
    if q.ncols() >= n {
        return None;
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..n {
        let r = 1.0 - q.row(i).norm_squared();
        if r > best.1 {
            best = (i, r);
        }
    }
    let mut e = DVector::zeros(n);
    e[best.0] = 1.0;
    let (_, rho) = orthogonalize(q, &mut e);
    if rho <= EPS {
        return None;
    }
    Some(e / rho)
}

/// Thin QR factor `Q R` grown one column at a time.
#[derive(Clone, Debug)]
pub struct QrFactor {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Raised by [`QrFactor::append`] when the new column lies in the current span.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DependentColumn {
    pub residual: f64,
    pub norm: f64,
}

impl QrFactor {
    pub fn empty(n: usize) -> Self {
        Self {
            q: DMatrix::zeros(n, 0),
            r: DMatrix::zeros(0, 0),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    fn push(&mut self, h: &DVector<f64>, q_new: &DVector<f64>, rho: f64) {
        let k = self.dim();
        push_column(&mut self.q, q_new);
        let old = std::mem::replace(&mut self.r, DMatrix::zeros(0, 0));
        let mut r = old.resize(k + 1, k + 1, 0.0);
        for i in 0..k {
            r[(i, k)] = h[i];
        }
        r[(k, k)] = rho;
        self.r = r;
    }

    /// Append `v`; refuses (and leaves the factor untouched) when the
    /// orthogonalized remainder is below `EPS_HALF · ‖v‖`.
    pub fn append(&mut self, v: &DVector<f64>) -> std::result::Result<f64, DependentColumn> {
        let norm = v.norm();
        let mut w = v.clone();
        let (h, rho) = orthogonalize(&self.q, &mut w);
        if rho <= EPS_HALF * norm || rho == 0.0 {
            return Err(DependentColumn { residual: rho, norm });
        }
        self.push(&h, &(w / rho), rho);
        Ok(rho)
    }

    /// Append `v`, always adding a column. A remainder at rounding level is
    /// replaced by a deterministic complement direction.
    pub fn append_or_complete(&mut self, v: &DVector<f64>) -> f64 {
        let norm = v.norm();
        let mut w = v.clone();
        let (h, rho) = orthogonalize(&self.q, &mut w);
        if rho > 8.0 * EPS * norm && rho > f64::MIN_POSITIVE {
            self.push(&h, &(w / rho), rho);
            return rho;
        }
        let q_new = complement_vector(&self.q).expect("basis already spans the space");
        let rho = q_new.dot(&w);
        self.push(&h, &q_new, rho);
        rho
    }

    /// Keep the leading columns `Q W̃₁` with a new small factor `r`.
    pub(crate) fn replace(&mut self, q: DMatrix<f64>, r: DMatrix<f64>) {
        self.q = q;
        self.r = r;
    }
}

/// Reflection vector `z` with `(I − 2zzᵀ) e_i = w`; `None` when `w = e_i`.
///
/// The pivot entry of `z` is formed without cancellation, so the
/// reflection stays accurate for `w` arbitrarily close to `e_i`.
pub fn householder_from_target(w: &DVector<f64>, i: usize) -> Result<Option<DVector<f64>>> {
    let nrm = w.norm();
    if (nrm - 1.0).abs() > 1e-12 {
        return Err(GsvdError::NotUnit(nrm));
    }
    if i >= w.len() {
        return Err(GsvdError::DimensionMismatch {
            context: "householder_from_target",
            expected: w.len(),
            found: i,
        });
    }
    let s2: f64 = w
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, x)| x * x)
        .sum();
    let wi = w[i];
    if s2 == 0.0 && wi > 0.0 {
        return Ok(None);
    }
    let mut z = w.clone();
    z[i] = if wi > 0.0 { -s2 / (1.0 + wi) } else { wi - 1.0 };
    let zn = z.norm();
    Ok(Some(z / -zn))
}

/// `m ← (I − 2zzᵀ) m`.
pub(crate) fn reflect_rows(z: &DVector<f64>, m: &mut DMatrix<f64>) {
    let t = m.tr_mul(z);
    m.ger(-2.0, z, &t, 1.0);
}

/// `m ← m (I − 2zzᵀ)`.
pub(crate) fn reflect_cols(m: &mut DMatrix<f64>, z: &DVector<f64>) {
    let t = &*m * z;
    m.ger(-2.0, &t, z, 1.0);
}

/// Householder QR of a tall matrix: thin `Q` and square upper-triangular `R`.
pub(crate) fn householder_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, k) = a.shape();
    assert!(m >= k, "householder_qr needs rows >= cols");
    let mut r = a.clone();
    let mut vs: Vec<Option<DVector<f64>>> = Vec::with_capacity(k);
    for j in 0..k {
        let x = r.view((j, j), (m - j, 1)).column(0).into_owned();
        let alpha = x.norm();
        if alpha == 0.0 {
            vs.push(None);
            continue;
        }
        let mut v = x;
        v[0] += if v[0] >= 0.0 { alpha } else { -alpha };
        let vn = v.norm();
        v /= vn;
        let mut sub = r.view_mut((j, j), (m - j, k - j));
        let t = sub.tr_mul(&v);
        sub.ger(-2.0, &v, &t, 1.0);
        for i in j + 1..m {
            r[(i, j)] = 0.0;
        }
        vs.push(Some(v));
    }
    let mut q = DMatrix::zeros(m, k);
    for j in 0..k {
        q[(j, j)] = 1.0;
    }
    for j in (0..k).rev() {
        if let Some(v) = &vs[j] {
            let mut sub = q.view_mut((j, j), (m - j, k - j));
            let t = sub.tr_mul(v);
            sub.ger(-2.0, v, &t, 1.0);
        }
    }
    (q, r.rows(0, k).into_owned())
}

/// `m = R Q` with `R` upper triangular (nonnegative diagonal) and `Q` orthogonal.
pub(crate) fn rq(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = m.nrows();
    assert_eq!(k, m.ncols(), "rq needs a square matrix");
    let mt = DMatrix::from_fn(k, k, |i, j| m[(k - 1 - j, i)]);
    let (qp, rp) = householder_qr(&mt);
    let mut r = DMatrix::from_fn(k, k, |i, j| rp[(k - 1 - j, k - 1 - i)]);
    let mut q = DMatrix::from_fn(k, k, |i, j| qp[(j, k - 1 - i)]);
    for i in 0..k {
        if r[(i, i)] < 0.0 {
            r.column_mut(i).neg_mut();
            q.row_mut(i).neg_mut();
        }
    }
    (r, q)
}

/// Normalize the columns of `m` (whose norms are `norms`) into an orthonormal
/// set, processing larger columns first and completing columns that carry
/// no direction.
fn orthonormal_from_scaled(m: &DMatrix<f64>, norms: &[f64]) -> DMatrix<f64> {
    let (n, k) = m.shape();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut accepted = DMatrix::zeros(n, 0);
    let mut out = DMatrix::zeros(n, k);
    let mut deferred = Vec::new();
    for &j in &order {
        let raw = norms[j];
        let mut v = m.column(j).into_owned();
        let (_, rho) = orthogonalize(&accepted, &mut v);
        if raw > 1e-290 && rho > 1e-8 * raw {
            let v = v / rho;
            out.set_column(j, &v);
            push_column(&mut accepted, &v);
        } else {
            deferred.push(j);
        }
    }
    for j in deferred {
        let v = complement_vector(&accepted).expect("square basis has room");
        out.set_column(j, &v);
        push_column(&mut accepted, &v);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    DescendingC,
    AscendingC,
    Unsorted,
}

/// Triangular-form GSVD of a small pair: `H = Ũ C̃ R̃ W̃ᵀ`, `K = Ṽ S̃ R̃ W̃ᵀ`.
#[derive(Clone, Debug)]
pub struct ProjectedGsvd {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub r: DMatrix<f64>,
    pub order: Order,
}

impl ProjectedGsvd {
    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.c.iter().zip(&self.s).map(|(c, s)| c / s).collect()
    }

    /// `Ũ C̃ R̃ W̃ᵀ`
    pub fn reconstruct_h(&self) -> DMatrix<f64> {
        let cr = DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.c[i] * self.r[(i, j)]);
        &self.u * cr * self.w.transpose()
    }

    /// `Ṽ S̃ R̃ W̃ᵀ`
    pub fn reconstruct_k(&self) -> DMatrix<f64> {
        let sr = DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.s[i] * self.r[(i, j)]);
        &self.v * sr * self.w.transpose()
    }
}

/// One-sided Jacobi on the column pairs of `[q1; q2]` diagonalizing
/// `q1ᵀq1` (equivalently `q2ᵀq2`); rotations are accumulated in `z`.
///
/// A pair whose columns are both short in one block is rotated from that
/// block's Gram entries with a relative stopping test, so short columns end
/// up orthogonal to working precision relative to their own length.
fn cs_jacobi(q1: &mut DMatrix<f64>, q2: &mut DMatrix<f64>, z: &mut DMatrix<f64>) {
    let k = q1.ncols();
    let tol = (k as f64).max(1.0) * EPS;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let (a1, b1) = (q1.column(i).norm_squared(), q1.column(j).norm_squared());
                let (a2, b2) = (q2.column(i).norm_squared(), q2.column(j).norm_squared());
                let (a, b, g, skip) = if a1.max(b1) <= 0.5 || a2.max(b2) <= 0.5 {
                    let (qq, a, b) = if a1.max(b1) <= 0.5 { (&*q1, a1, b1) } else { (&*q2, a2, b2) };
                    let g = qq.column(i).dot(&qq.column(j));
                    (a, b, g, g.abs() <= tol * (a * b).sqrt())
                } else {
                    let g = q1.column(i).dot(&q1.column(j)) - q2.column(i).dot(&q2.column(j));
                    (a1 - a2, b1 - b2, g, g.abs() <= tol)
                };
                if g == 0.0 || skip {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_pair(q1, i, j, cs, sn);
                rotate_pair(q2, i, j, cs, sn);
                rotate_pair(z, i, j, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate_pair(m: &mut DMatrix<f64>, i: usize, j: usize, cs: f64, sn: f64) {
    for r in 0..m.nrows() {
        let xi = m[(r, i)];
        let xj = m[(r, j)];
        m[(r, i)] = cs * xi - sn * xj;
        m[(r, j)] = sn * xi + cs * xj;
    }
}

fn permute_columns(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), perm.len(), |i, j| m[(i, perm[j])])
}

/// Triangular-form GSVD of `(h, k_mat)`, both `k × k`.
///
/// The stacked matrix is QR-factored, the orthonormal factor is split by a
/// CS-type Jacobi iteration, and `ZᵀT` is brought to the form `R̃ W̃ᵀ` by an RQ
/// factorization. Pairs are sorted according to `order`.
pub fn triangular_gsvd(h: &DMatrix<f64>, k_mat: &DMatrix<f64>, order: Order) -> Result<ProjectedGsvd> {
    let k = h.ncols();
    for (ctx, found) in [
        ("triangular_gsvd h", h.nrows()),
        ("triangular_gsvd k rows", k_mat.nrows()),
        ("triangular_gsvd k cols", k_mat.ncols()),
    ] {
        if found != k {
            return Err(GsvdError::DimensionMismatch {
                context: ctx,
                expected: k,
                found,
            });
        }
    }
    if k == 0 {
        return Ok(ProjectedGsvd {
            u: DMatrix::zeros(0, 0),
            v: DMatrix::zeros(0, 0),
            w: DMatrix::zeros(0, 0),
            c: vec![],
            s: vec![],
            r: DMatrix::zeros(0, 0),
            order,
        });
    }

    // Balance the blocks so that both are resolved to the same relative accuracy.
    let (hn, kn) = (h.norm(), k_mat.norm());
    let alpha = if hn > 0.0 && kn > 0.0 && hn.is_finite() && kn.is_finite() { kn / hn } else { 1.0 };
    let mut stacked = DMatrix::zeros(2 * k, k);
    stacked.view_mut((0, 0), (k, k)).copy_from(&(h * alpha));
    stacked.view_mut((k, 0), (k, k)).copy_from(k_mat);
    let (q, t) = householder_qr(&stacked);
    let tnorm = t.norm();
    let tmin = (0..k).map(|i| t[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if tnorm == 0.0 || !tnorm.is_finite() || tmin <= EPS * k as f64 * tnorm {
        return Err(GsvdError::SingularPencil);
    }

    let mut q1 = q.rows(0, k).into_owned();
    let mut q2 = q.rows(k, k).into_owned();
    let mut z = DMatrix::identity(k, k);
    cs_jacobi(&mut q1, &mut q2, &mut z);

    let mut c = Vec::with_capacity(k);
    let mut s = Vec::with_capacity(k);
    let mut scale = Vec::with_capacity(k);
    for i in 0..k {
        let cr = q1.column(i).norm() / alpha;
        let sr = q2.column(i).norm();
        let hyp = cr.hypot(sr);
        scale.push(hyp);
        if cr >= sr {
            let si = sr / hyp;
            s.push(si);
            c.push((1.0 - si * si).sqrt());
        } else {
            let ci = cr / hyp;
            c.push(ci);
            s.push((1.0 - ci * ci).sqrt());
        }
    }

    let mut perm: Vec<usize> = (0..k).collect();
    match order {
        Order::DescendingC => perm.sort_by(|&a, &b| c[b].total_cmp(&c[a])),
        Order::AscendingC => perm.sort_by(|&a, &b| c[a].total_cmp(&c[b])),
        Order::Unsorted => {}
    }
    let q1 = permute_columns(&q1, &perm);
    let q2 = permute_columns(&q2, &perm);
    let z = permute_columns(&z, &perm);
    let c: Vec<f64> = perm.iter().map(|&i| c[i]).collect();
    let s: Vec<f64> = perm.iter().map(|&i| s[i]).collect();

    let col_norms = |m: &DMatrix<f64>| -> Vec<f64> { m.column_iter().map(|c| c.norm()).collect() };
    let u = orthonormal_from_scaled(&q1, &col_norms(&q1));
    let v = orthonormal_from_scaled(&q2, &col_norms(&q2));
    let mut zt = z.transpose() * t;
    for (i, &p) in perm.iter().enumerate() {
        zt.row_mut(i).scale_mut(scale[p]);
    }
    let (r, wt) = rq(&zt);
    Ok(ProjectedGsvd {
        u,
        v,
        w: wt.transpose(),
        c,
        s,
        r,
        order,
    })
}

/// Reorder the pairs so that new position `i` holds old pair `perm[i]`,
/// re-triangularizing `R̃` and absorbing the rotation into `W̃`.
pub fn reorder_gsvd(g: &ProjectedGsvd, perm: &[usize]) -> Result<ProjectedGsvd> {
    let k = g.dim();
    let mut seen = vec![false; k];
    if perm.len() != k {
        return Err(GsvdError::InvalidPermutation);
    }
    for &p in perm {
        if p >= k || seen[p] {
            return Err(GsvdError::InvalidPermutation);
        }
        seen[p] = true;
    }
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return Ok(g.clone());
    }
    let pr = DMatrix::from_fn(k, k, |i, j| g.r[(perm[i], j)]);
    let (r, q) = rq(&pr);
    Ok(ProjectedGsvd {
        u: permute_columns(&g.u, perm),
        v: permute_columns(&g.v, perm),
        w: &g.w * q.transpose(),
        c: perm.iter().map(|&i| g.c[i]).collect(),
        s: perm.iter().map(|&i| g.s[i]).collect(),
        r,
        order: Order::Unsorted,
    })
}

/// SVD of a small square matrix by one-sided Jacobi: `m = u diag(σ) vᵀ`,
/// `σ` descending.
pub fn small_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (rows, k) = m.shape();
    let mut a = m.clone();
    let mut v = DMatrix::identity(k, k);
    let tol = (rows.max(1) as f64) * EPS;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let aa = a.column(i).norm_squared();
                let bb = a.column(j).norm_squared();
                let g = a.column(i).dot(&a.column(j));
                if g == 0.0 || g.abs() <= tol * (aa * bb).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (bb - aa) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_pair(&mut a, i, j, cs, sn);
                rotate_pair(&mut v, i, j, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    let sig: Vec<f64> = (0..k).map(|i| a.column(i).norm()).collect();
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by(|&x, &y| sig[y].total_cmp(&sig[x]));
    let a = permute_columns(&a, &perm);
    let v = permute_columns(&v, &perm);
    let sig: Vec<f64> = perm.iter().map(|&i| sig[i]).collect();
    let u = orthonormal_from_scaled(&a, &sig);
    (u, sig, v)
}

fn sign_vector(y: &DVector<f64>) -> DVector<f64> {
    y.map(|x| if x >= 0.0 { 1.0 } else { -1.0 })
}

fn parallel(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    a.dot(b).abs() >= a.len() as f64 - 0.5
}

/// Block 1-norm estimate of an `n × n` operator given by `apply` (`x ↦ M x`)
/// and `apply_t` (`x ↦ Mᵀ x`), using `t` probe columns and at most five
/// sweeps. The result is always a lower bound of `‖M‖₁`.
pub fn one_norm_estimate<F, G>(n: usize, t: usize, seed: u64, mut apply: F, mut apply_t: G) -> f64
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
    G: FnMut(&DVector<f64>) -> DVector<f64>,
{
    if n == 0 {
        return 0.0;
    }
    let t = t.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_signs = |rng: &mut ChaCha8Rng| {
        DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
    };

    let mut x: Vec<DVector<f64>> = Vec::with_capacity(t);
    x.push(DVector::from_element(n, 1.0));
    while x.len() < t {
        let cand = random_signs(&mut rng);
        if x.iter().all(|c| !parallel(c, &cand)) || n <= 2 {
            x.push(cand);
        }
    }
    for col in x.iter_mut() {
        *col /= n as f64;
    }

    let mut est_old = 0.0;
    let mut est = 0.0;
    let mut ind: Vec<usize> = vec![0; t];
    let mut ind_best = 0usize;
    let mut hist: Vec<usize> = Vec::new();
    let mut s_old: Vec<DVector<f64>> = Vec::new();

    for k in 1..=5 {
        let y: Vec<DVector<f64>> = x.iter().map(&mut apply).collect();
        let (jbest, est_k) = y
            .iter()
            .map(|c| c.lp_norm(1))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
        est = est_k;
        if est > est_old || k == 2 {
            if k >= 2 {
                ind_best = ind[jbest];
            }
        }
        if k >= 2 && est <= est_old {
            est = est_old;
            break;
        }
        est_old = est;

        let mut s: Vec<DVector<f64>> = y.iter().map(sign_vector).collect();
        if k > 1 && s.iter().all(|c| s_old.iter().any(|o| parallel(c, o))) {
            break;
        }
        if t > 1 {
            for j in 0..t {
                let mut tries = 0;
                while tries < 32
                    && (s[..j].iter().any(|o| parallel(o, &s[j]))
                        || s_old.iter().any(|o| parallel(o, &s[j])))
                {
                    s[j] = random_signs(&mut rng);
                    tries += 1;
                }
            }
        }

        let zt: Vec<DVector<f64>> = s.iter().map(&mut apply_t).collect();
        let h: Vec<f64> = (0..n)
            .map(|i| zt.iter().map(|c| c[i].abs()).fold(0.0, f64::max))
            .collect();
        let hmax = h.iter().cloned().fold(0.0, f64::max);
        if k >= 2 && hmax == h[ind_best] {
            break;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| h[b].total_cmp(&h[a]));
        if t > 1 && order[..t].iter().all(|i| hist.contains(i)) {
            break;
        }
        let fresh: Vec<usize> = order.iter().copied().filter(|i| !hist.contains(i)).collect();
        if fresh.is_empty() {
            break;
        }
        ind = fresh.iter().copied().cycle().take(t).collect();
        for (j, &i) in ind.iter().enumerate() {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            x[j] = e;
        }
        hist.extend(ind.iter().copied());
        s_old = s;
    }
    est
}
