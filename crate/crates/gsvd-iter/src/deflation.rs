//! Locking converged pairs, either by restricting the operators to the
//! complement of the locked vectors or by Householder transformations that
//! split off a leading block, and the driver that computes several pairs.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dense::{
    householder_from_target, orthogonalize, push_column, triangular_gsvd, Order, EPS_HALF,
};
use crate::error::{GsvdError, Result};
use crate::gdgsvd::{
    pair_norm_estimates, run_bb_gd, run_gd, DeflationMode, PartialGsvd, SearchState, SolveOutput,
    SolveSetup, SolverOptions, Variant,
};
use crate::mdgsvd::run_md;
use crate::operator::{reflect_slice, LinearOperator, MatrixPair, OperatorKind, SharedOperator};

/// One generalized singular triplet `A w = c u r`, `B w = s v r`.
#[derive(Clone, Debug)]
pub struct GsvdTriplet {
    pub c: f64,
    pub s: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
    pub r: f64,
}

impl GsvdTriplet {
    pub fn x(&self) -> DVector<f64> {
        &self.w / self.r
    }

    /// Leading triplet of a partial factorization.
    pub fn leading(g: &PartialGsvd) -> Self {
        Self {
            c: g.c[0],
            s: g.s[0],
            u: g.u.column(0).into_owned(),
            v: g.v.column(0).into_owned(),
            w: g.w.column(0).into_owned(),
            r: g.r[(0, 0)],
        }
    }

    /// Normwise backward error computed from the explicit homogeneous
    /// residual (four MVs).
    pub fn backward_error(&self, pair: &MatrixPair, norm_aa: f64, norm_bb: f64) -> f64 {
        let x = self.x();
        let (c2, s2) = (self.c * self.c, self.s * self.s);
        let r = pair.a.tmul(&pair.a.mul(&x)) * s2 - pair.b.tmul(&pair.b.mul(&x)) * c2;
        let n = pair.cols() as f64;
        n.sqrt() * self.r.abs() * r.norm() / (s2 * norm_aa + c2 * norm_bb)
    }
}

/// Locked part of a partial GSVD: `A W₁ = U₁ C₁ R₁₁`, `B W₁ = V₁ S₁ R₁₁`.
///
/// Columns of `U₁` (or `V₁`) belonging to pairs with `c = 0` (or `s = 0`)
/// are zero.
#[derive(Clone, Debug)]
pub struct DeflationSet {
    pub w1: DMatrix<f64>,
    pub u1: DMatrix<f64>,
    pub v1: DMatrix<f64>,
    pub c1: Vec<f64>,
    pub s1: Vec<f64>,
    pub r11: DMatrix<f64>,
    at_u1: DMatrix<f64>,
    bt_v1: DMatrix<f64>,
}

impl DeflationSet {
    pub fn empty(n: usize, m: usize, p: usize) -> Self {
        Self {
            w1: DMatrix::zeros(n, 0),
            u1: DMatrix::zeros(m, 0),
            v1: DMatrix::zeros(p, 0),
            c1: Vec::new(),
            s1: Vec::new(),
            r11: DMatrix::zeros(0, 0),
            at_u1: DMatrix::zeros(n, 0),
            bt_v1: DMatrix::zeros(n, 0),
        }
    }

    pub fn for_pair(pair: &MatrixPair) -> Self {
        Self::empty(pair.cols(), pair.a.rows(), pair.b.rows())
    }

    pub fn len(&self) -> usize {
        self.c1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c1.is_empty()
    }

    /// `R₁₂ = C₁ (AᵀU₁)ᵀ Y + S₁ (BᵀV₁)ᵀ Y` for new right columns `Y`.
    pub fn coupling(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = self.at_u1.tr_mul(y);
        let mut b = self.bt_v1.tr_mul(y);
        for i in 0..self.len() {
            a.row_mut(i).scale_mut(self.c1[i]);
            b.row_mut(i).scale_mut(self.s1[i]);
        }
        a + b
    }

    /// Lock a triplet computed on the deflated problem (vectors already in
    /// original coordinates). Returns the number of MVs spent.
    pub fn lock(&mut self, pair: &MatrixPair, t: &GsvdTriplet) -> Result<usize> {
        let mut w = t.w.clone();
        orthogonalize(&self.w1, &mut w);
        let wn = w.norm();
        if wn <= EPS_HALF {
            return Err(GsvdError::DegenerateLock);
        }
        w /= wn;
        let unit_or_zero = |q: &DMatrix<f64>, v: &DVector<f64>, active: bool| {
            if !active {
                return Ok(DVector::zeros(v.len()));
            }
            let mut v = v.clone();
            orthogonalize(q, &mut v);
            let nrm = v.norm();
            if nrm <= EPS_HALF {
                return Err(GsvdError::DegenerateLock);
            }
            Ok(v / nrm)
        };
        let u = unit_or_zero(&self.u1, &t.u, t.c > 0.0)?;
        let v = unit_or_zero(&self.v1, &t.v, t.s > 0.0)?;
        let r12 = self.coupling(&DMatrix::from_column_slice(w.len(), 1, w.as_slice()));
        self.push(pair, w, u, v, t.c, t.s, r12.column(0).into_owned(), t.r / wn);
        Ok(2)
    }

    /// Lock a known vector of `Null(B)` as the pair `(1, 0)`.
    pub fn lock_null_vector(&mut self, pair: &MatrixPair, w: &DVector<f64>) -> Result<usize> {
        let mut w = w.clone();
        orthogonalize(&self.w1, &mut w);
        let wn = w.norm();
        if wn <= EPS_HALF {
            return Err(GsvdError::DegenerateLock);
        }
        w /= wn;
        let r12 = self.coupling(&DMatrix::from_column_slice(w.len(), 1, w.as_slice()));
        let r12 = r12.column(0).into_owned();
        let mut a_rem = pair.a.mul(&w);
        for i in 0..self.len() {
            let f = self.c1[i] * r12[i];
            a_rem.axpy(-f, &self.u1.column(i).into_owned(), 1.0);
        }
        let mut u = a_rem.clone();
        orthogonalize(&self.u1, &mut u);
        let rho = u.norm();
        if rho <= EPS_HALF * pair.a.mul(&w).norm().max(f64::MIN_POSITIVE) {
            return Err(GsvdError::SingularPencil);
        }
        u /= rho;
        let v = DVector::zeros(pair.b.rows());
        self.push(pair, w, u, v, 1.0, 0.0, r12, rho);
        Ok(2)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        pair: &MatrixPair,
        w: DVector<f64>,
        u: DVector<f64>,
        v: DVector<f64>,
        c: f64,
        s: f64,
        r12: DVector<f64>,
        rho: f64,
    ) {
        let d = self.len();
        let at_u = if c > 0.0 { pair.a.tmul(&u) } else { DVector::zeros(w.len()) };
        let bt_v = if s > 0.0 { pair.b.tmul(&v) } else { DVector::zeros(w.len()) };
        push_column(&mut self.w1, &w);
        push_column(&mut self.u1, &u);
        push_column(&mut self.v1, &v);
        push_column(&mut self.at_u1, &at_u);
        push_column(&mut self.bt_v1, &bt_v);
        self.c1.push(c);
        self.s1.push(s);
        let mut r = DMatrix::zeros(d + 1, d + 1);
        r.view_mut((0, 0), (d, d)).copy_from(&self.r11);
        r.view_mut((0, d), (d, 1)).copy_from(&r12);
        r[(d, d)] = rho;
        self.r11 = r;
    }

    /// The locked block as a partial GSVD.
    pub fn to_partial(&self) -> PartialGsvd {
        PartialGsvd {
            c: self.c1.clone(),
            s: self.s1.clone(),
            u: self.u1.clone(),
            v: self.v1.clone(),
            w: self.w1.clone(),
            r: self.r11.clone(),
        }
    }

    /// Locked block followed by a block computed on the deflated problem.
    pub fn combine(&self, tail: &PartialGsvd) -> PartialGsvd {
        let d = self.len();
        let k = tail.len();
        let r12 = self.coupling(&tail.w);
        let mut r = DMatrix::zeros(d + k, d + k);
        r.view_mut((0, 0), (d, d)).copy_from(&self.r11);
        r.view_mut((0, d), (d, k)).copy_from(&r12);
        r.view_mut((d, d), (k, k)).copy_from(&tail.r);
        let cat = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
            let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
            m.columns_mut(0, a.ncols()).copy_from(a);
            m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
            m
        };
        let mut c = self.c1.clone();
        c.extend_from_slice(&tail.c);
        let mut s = self.s1.clone();
        s.extend_from_slice(&tail.s);
        PartialGsvd {
            c,
            s,
            u: cat(&self.u1, &tail.u),
            v: cat(&self.v1, &tail.v),
            w: cat(&self.w1, &tail.w),
            r,
        }
    }
}

/// `(I − L Lᵀ) M (I − R Rᵀ)`.
#[derive(Clone, Debug)]
pub struct RestrictedOperator {
    inner: SharedOperator,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl RestrictedOperator {
    pub fn new(inner: SharedOperator, left: DMatrix<f64>, right: DMatrix<f64>) -> Result<Self> {
        if left.nrows() != inner.rows() || right.nrows() != inner.cols() {
            return Err(GsvdError::DimensionMismatch {
                context: "RestrictedOperator",
                expected: inner.rows(),
                found: left.nrows(),
            });
        }
        Ok(Self { inner, left, right })
    }
}

fn project_out(q: &DMatrix<f64>, x: &mut [f64]) {
    if q.ncols() == 0 {
        return;
    }
    let mut xv = DVector::from_column_slice(x);
    let h = q.tr_mul(&xv);
    xv.gemv(-1.0, q, &h, 1.0);
    x.copy_from_slice(xv.as_slice());
}

impl LinearOperator for RestrictedOperator {
    fn rows(&self) -> usize {
        self.inner.rows()
    }
    fn cols(&self) -> usize {
        self.inner.cols()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::DeflatedWrapper
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut t = x.to_vec();
        project_out(&self.right, &mut t);
        self.inner.apply_into(&t, y);
        project_out(&self.left, y);
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        let mut t = y.to_vec();
        project_out(&self.left, &mut t);
        self.inner.apply_adjoint_into(&t, x);
        project_out(&self.right, x);
    }
}

/// Operators restricted to the complement of the locked vectors.
pub fn deflate_restrict(pair: &MatrixPair, set: &DeflationSet) -> Result<MatrixPair> {
    MatrixPair::new(
        Arc::new(RestrictedOperator::new(
            pair.a.clone(),
            set.u1.clone(),
            set.w1.clone(),
        )?),
        Arc::new(RestrictedOperator::new(
            pair.b.clone(),
            set.v1.clone(),
            set.w1.clone(),
        )?),
    )
}

/// Row action of one transformation step.
#[derive(Clone, Debug)]
pub enum RowAction {
    /// Reflect (`None` is the identity) and drop the first row.
    Drop(Option<DVector<f64>>),
    /// Keep all rows; used when the locked cosine or sine is zero.
    Keep,
}

/// `[M̂ᵀ ...]`: the trailing block of `P M Z` acting on `[0; x]`.
#[derive(Clone, Debug)]
pub struct TransformedOperator {
    inner: SharedOperator,
    left: RowAction,
    right: Option<DVector<f64>>,
}

impl TransformedOperator {
    pub fn new(inner: SharedOperator, left: RowAction, right: Option<DVector<f64>>) -> Self {
        Self { inner, left, right }
    }

    fn drops_row(&self) -> bool {
        matches!(self.left, RowAction::Drop(_))
    }
}

impl LinearOperator for TransformedOperator {
    fn rows(&self) -> usize {
        self.inner.rows() - usize::from(self.drops_row())
    }
    fn cols(&self) -> usize {
        self.inner.cols() - 1
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::DeflatedWrapper
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut full = vec![0.0; self.inner.cols()];
        full[1..].copy_from_slice(x);
        if let Some(z) = &self.right {
            reflect_slice(z, &mut full);
        }
        let mut out = vec![0.0; self.inner.rows()];
        self.inner.apply_into(&full, &mut out);
        match &self.left {
            RowAction::Drop(p) => {
                if let Some(p) = p {
                    reflect_slice(p, &mut out);
                }
                y.copy_from_slice(&out[1..]);
            }
            RowAction::Keep => y.copy_from_slice(&out),
        }
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        let mut full = vec![0.0; self.inner.rows()];
        match &self.left {
            RowAction::Drop(p) => {
                full[1..].copy_from_slice(y);
                if let Some(p) = p {
                    reflect_slice(p, &mut full);
                }
            }
            RowAction::Keep => full.copy_from_slice(y),
        }
        let mut out = vec![0.0; self.inner.cols()];
        self.inner.apply_adjoint_into(&full, &mut out);
        if let Some(z) = &self.right {
            reflect_slice(z, &mut out);
        }
        x.copy_from_slice(&out[1..]);
    }
}

/// Reflections of one transformation step, in the coordinates of the pair
/// it was applied to.
#[derive(Clone, Debug)]
pub struct TransformStep {
    pub a_rows: RowAction,
    pub b_rows: RowAction,
    pub z: Option<DVector<f64>>,
}

impl TransformStep {
    fn lift_cols(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(x.len() + 1);
        full.rows_mut(1, x.len()).copy_from(x);
        if let Some(z) = &self.z {
            reflect_slice(z, full.as_mut_slice());
        }
        full
    }

    fn lift_rows(action: &RowAction, y: &DVector<f64>) -> DVector<f64> {
        match action {
            RowAction::Keep => y.clone(),
            RowAction::Drop(p) => {
                let mut full = DVector::zeros(y.len() + 1);
                full.rows_mut(1, y.len()).copy_from(y);
                if let Some(p) = p {
                    reflect_slice(p, full.as_mut_slice());
                }
                full
            }
        }
    }
}

fn reflection_to(v: &DVector<f64>) -> Result<Option<DVector<f64>>> {
    let nrm = v.norm();
    householder_from_target(&(v / nrm), 0)
}

/// Split a converged triplet off the pair: returns the trailing blocks of
/// `P A Z` and `Q B Z`, one column smaller, and the step that produced them.
pub fn deflate_transform(
    pair: &MatrixPair,
    t: &GsvdTriplet,
    tol: f64,
    norms: (f64, f64),
) -> Result<(MatrixPair, TransformStep)> {
    let n = pair.cols();
    if pair.a.rows() < n || pair.b.rows() < n {
        return Err(GsvdError::Unsupported(
            "transformation deflation needs both operators to have at least as many rows as columns"
                .into(),
        ));
    }
    let be = t.backward_error(pair, norms.0, norms.1);
    if !(be <= 2.0 * tol) {
        return Err(GsvdError::NotConverged(be));
    }
    let row_action = |active: bool, v: &DVector<f64>| -> Result<RowAction> {
        Ok(if active {
            RowAction::Drop(reflection_to(v)?)
        } else {
            RowAction::Keep
        })
    };
    let step = TransformStep {
        a_rows: row_action(t.c > 0.0, &t.u)?,
        b_rows: row_action(t.s > 0.0, &t.v)?,
        z: reflection_to(&t.w)?,
    };
    let a = TransformedOperator::new(pair.a.clone(), step.a_rows.clone(), step.z.clone());
    let b = TransformedOperator::new(pair.b.clone(), step.b_rows.clone(), step.z.clone());
    Ok((MatrixPair::new(Arc::new(a), Arc::new(b))?, step))
}

/// A chain of transformation steps from the original pair.
#[derive(Clone, Debug, Default)]
pub struct TransformChain {
    pub steps: Vec<TransformStep>,
}

impl TransformChain {
    /// Map right, left-A and left-B vectors of the innermost pair back to
    /// original coordinates.
    pub fn lift(&self, t: &GsvdTriplet) -> GsvdTriplet {
        let mut out = t.clone();
        for step in self.steps.iter().rev() {
            out.w = step.lift_cols(&out.w);
            out.u = TransformStep::lift_rows(&step.a_rows, &out.u);
            out.v = TransformStep::lift_rows(&step.b_rows, &out.v);
        }
        out
    }

    pub fn lift_partial(&self, g: &PartialGsvd) -> PartialGsvd {
        let k = g.len();
        let mut cols_w = Vec::with_capacity(k);
        let mut cols_u = Vec::with_capacity(k);
        let mut cols_v = Vec::with_capacity(k);
        for i in 0..k {
            let t = self.lift(&GsvdTriplet {
                c: g.c[i],
                s: g.s[i],
                u: g.u.column(i).into_owned(),
                v: g.v.column(i).into_owned(),
                w: g.w.column(i).into_owned(),
                r: g.r[(i, i)],
            });
            cols_w.push(t.w);
            cols_u.push(t.u);
            cols_v.push(t.v);
        }
        PartialGsvd {
            c: g.c.clone(),
            s: g.s.clone(),
            u: DMatrix::from_columns(&cols_u),
            v: DMatrix::from_columns(&cols_v),
            w: DMatrix::from_columns(&cols_w),
            r: g.r.clone(),
        }
    }
}

/// Ritz approximation of the next pair when the leading `d` columns of the
/// search basis are locked vectors, computed from the projected pair only.
#[derive(Clone, Debug)]
pub struct LockedRitz {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
    pub x: DVector<f64>,
    pub r12: DVector<f64>,
}

impl LockedRitz {
    /// `β Aᵀũ − α Bᵀṽ`.
    pub fn expansion_vector(&self, pair: &MatrixPair) -> DVector<f64> {
        pair.a.tmul(&self.u) * self.beta - pair.b.tmul(&self.v) * self.alpha
    }
}

pub fn locked_extract(state: &SearchState, d: usize, order: Order) -> Result<LockedRitz> {
    let k = state.dim();
    if d >= k {
        return Err(GsvdError::InvalidOptions(format!(
            "need more search directions ({k}) than locked ones ({d})"
        )));
    }
    let h = state.h();
    let kk = state.k();
    let rest = k - d;
    let h22 = h.view((d, d), (rest, rest)).into_owned();
    let k22 = kk.view((d, d), (rest, rest)).into_owned();
    let g2 = triangular_gsvd(&h22, &k22, order)?;
    let w_new = g2.w.column(0).into_owned();
    let rho = g2.r[(0, 0)];

    let (r12, lock_part) = if d > 0 {
        let g1 = triangular_gsvd(
            &h.view((0, 0), (d, d)).into_owned(),
            &kk.view((0, 0), (d, d)).into_owned(),
            Order::Unsorted,
        )?;
        let h12 = h.view((0, d), (d, rest)) * &w_new;
        let k12 = kk.view((0, d), (d, rest)) * &w_new;
        let mut r12 = g1.u.tr_mul(&h12);
        let kpart = g1.v.tr_mul(&k12);
        for i in 0..d {
            r12[i] = g1.c[i] * r12[i] + g1.s[i] * kpart[i];
        }
        let y = g1
            .r
            .solve_upper_triangular(&r12)
            .ok_or(GsvdError::DegenerateLock)?;
        let lock_part = state.w.columns(0, d) * (&g1.w * y);
        (r12, lock_part)
    } else {
        (DVector::zeros(0), DVector::zeros(state.w.nrows()))
    };

    let u = state.au.q.columns(d, rest) * g2.u.column(0);
    let v = state.bv.q.columns(d, rest) * g2.v.column(0);
    let w = state.w.columns(d, rest) * &w_new;
    let x = (&w - lock_part) / rho;
    Ok(LockedRitz {
        alpha: g2.c[0],
        beta: g2.s[0],
        rho,
        u,
        v,
        w,
        x,
        r12,
    })
}

/// Which pairs to compute and how the search space is seeded.
#[derive(Clone, Debug)]
pub struct TgsvdPlan {
    /// Number of sequential solves; each but the last locks one pair.
    pub solves: usize,
    /// Total number of pairs returned, including seeds and harvested ones.
    pub total: usize,
    /// Vectors of `Null(B)` locked as the pair `(1, 0)` before solving.
    pub seeds: Vec<DVector<f64>>,
}

impl TgsvdPlan {
    pub fn count(count: usize) -> Self {
        Self {
            solves: count,
            total: count,
            seeds: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub mv_count: usize,
    pub restarts: usize,
    pub converged: bool,
    pub final_backward_error: f64,
}

#[derive(Clone, Debug)]
pub struct TgsvdOutput {
    pub gsvd: PartialGsvd,
    pub solves: Vec<SolveSummary>,
    pub records: Vec<crate::gdgsvd::ConvergenceRecord>,
    /// MVs spent inside the solver loops.
    pub mv_count: usize,
    /// MVs spent on locking bookkeeping.
    pub lock_mv: usize,
    pub converged: bool,
}

pub(crate) fn run_variant(pair: &MatrixPair, opts: &SolverOptions, setup: &SolveSetup) -> Result<SolveOutput> {
    match opts.variant {
        Variant::Gd => run_gd(pair, opts, setup),
        Variant::BbGd => run_bb_gd(pair, opts, setup),
        Variant::Md => run_md(pair, opts, setup),
    }
}

fn summary(out: &SolveOutput) -> SolveSummary {
    SolveSummary {
        mv_count: out.mv_count,
        restarts: out.restarts,
        converged: out.converged,
        final_backward_error: out.record.last().map_or(f64::NAN, |e| e.backward_error),
    }
}

/// Compute several leading pairs one at a time, locking each converged pair
/// with the deflation mode of `opts`.
pub fn tgsvd_solve(pair: &MatrixPair, plan: &TgsvdPlan, opts: &SolverOptions) -> Result<TgsvdOutput> {
    let n = pair.cols();
    opts.validate(n)?;
    if plan.solves == 0 || plan.total < plan.seeds.len() + plan.solves || plan.total > n {
        return Err(GsvdError::InvalidOptions(format!(
            "inconsistent plan: {} solves, {} seeds, {} pairs in total",
            plan.solves,
            plan.seeds.len(),
            plan.total
        )));
    }
    if opts.deflation == DeflationMode::Transform && !plan.seeds.is_empty() {
        return Err(GsvdError::Unsupported(
            "seed vectors require restriction deflation".into(),
        ));
    }
    let norms = pair_norm_estimates(pair, opts.seed ^ 0x5eed);
    let mut set = DeflationSet::for_pair(pair);
    let mut lock_mv = 0;
    for seed in &plan.seeds {
        lock_mv += set.lock_null_vector(pair, seed)?;
    }

    let mut chain = TransformChain::default();
    let mut current = pair.clone();
    let mut solves = Vec::new();
    let mut records = Vec::new();
    let mut mv = 0;
    let mut all_converged = true;

    for i in 0..plan.solves {
        let last = i + 1 == plan.solves;
        let keep = if last { plan.total - set.len() } else { 1 };
        let mut sub_opts = opts.clone();
        sub_opts.seed = opts.seed.wrapping_add(i as u64);
        let (work, locked) = match opts.deflation {
            DeflationMode::Restrict => (deflate_restrict(pair, &set)?, Some(&set.w1)),
            DeflationMode::Transform => (current.clone(), None),
        };
        if opts.deflation == DeflationMode::Transform {
            sub_opts.start = Vec::new();
        }
        let setup = SolveSetup {
            locked: locked.filter(|w| w.ncols() > 0),
            norms: Some(norms),
            keep: Some(keep),
        };
        let out = run_variant(&work, &sub_opts, &setup)?;
        mv += out.mv_count;
        all_converged &= out.converged;
        solves.push(summary(&out));
        records.push(out.record.clone());

        if last {
            let tail = match opts.deflation {
                DeflationMode::Restrict => out.gsvd,
                DeflationMode::Transform => chain.lift_partial(&out.gsvd),
            };
            let mut tail = tail;
            truncate_partial(&mut tail, keep);
            return Ok(TgsvdOutput {
                gsvd: set.combine(&tail),
                solves,
                records,
                mv_count: mv,
                lock_mv,
                converged: all_converged,
            });
        }

        let t = GsvdTriplet::leading(&out.gsvd);
        match opts.deflation {
            DeflationMode::Restrict => {
                lock_mv += set.lock(pair, &t)?;
            }
            DeflationMode::Transform => {
                let tol = if out.converged { opts.tol } else { f64::INFINITY };
                let (next, step) = deflate_transform(&current, &t, tol, norms)?;
                lock_mv += 4;
                let lifted = chain.lift(&t);
                chain.steps.push(step);
                current = next;
                lock_mv += set.lock(pair, &lifted)?;
            }
        }
    }
    unreachable!("the last solve returns")
}

fn truncate_partial(g: &mut PartialGsvd, k: usize) {
    if g.len() <= k {
        return;
    }
    g.c.truncate(k);
    g.s.truncate(k);
    g.u = g.u.columns(0, k).into_owned();
    g.v = g.v.columns(0, k).into_owned();
    g.w = g.w.columns(0, k).into_owned();
    g.r = g.r.view((0, 0), (k, k)).into_owned();
}

/// Compute `opts.count` extremal pairs: a single solve for one pair, a
/// deflation chain otherwise.
pub fn compute_gsvd(pair: &MatrixPair, opts: &SolverOptions) -> Result<TgsvdOutput> {
    if opts.count == 1 {
        opts.validate(pair.cols())?;
        let out = run_variant(pair, opts, &SolveSetup::default())?;
        let mut gsvd = out.gsvd.clone();
        truncate_partial(&mut gsvd, 1);
        return Ok(TgsvdOutput {
            gsvd,
            solves: vec![summary(&out)],
            records: vec![out.record],
            mv_count: out.mv_count,
            lock_mv: 0,
            converged: out.converged,
        });
    }
    tgsvd_solve(pair, &TgsvdPlan::count(opts.count), opts)
}
