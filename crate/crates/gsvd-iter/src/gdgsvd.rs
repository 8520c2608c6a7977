//! Generalized Davidson iteration for a few extremal generalized singular
//! pairs, plus the variant that keeps the search basis `BᵀB`-orthonormal.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::dense::{
    householder_qr, one_norm_estimate, orthogonalize, orthonormalize_against, push_column,
    small_svd, triangular_gsvd, Order, ProjectedGsvd, QrFactor, EPS_HALF,
};
use crate::error::{GsvdError, Result};
use crate::operator::MatrixPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    Largest,
    Smallest,
}

impl Which {
    pub fn order(self) -> Order {
        match self {
            Which::Largest => Order::DescendingC,
            Which::Smallest => Order::AscendingC,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Gd,
    #[value(name = "bbgd")]
    #[serde(rename = "bbgd")]
    BbGd,
    Md,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DeflationMode {
    Transform,
    Restrict,
}

/// When a solve stops.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum StopRule {
    /// Normwise backward error of the leading Ritz pair below `tol`.
    BackwardError,
    /// `|s̃²c★² − c̃²s★²| < tol` against a known pair (benchmark protocol).
    ValueError { c: f64, s: f64 },
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub which: Which,
    pub count: usize,
    pub min_dim: usize,
    pub max_dim: usize,
    pub max_restarts: usize,
    pub tol: f64,
    pub seed: u64,
    pub variant: Variant,
    pub deflation: DeflationMode,
    pub stop: StopRule,
    /// Starting vectors; random ones are drawn when empty.
    pub start: Vec<DVector<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            which: Which::Largest,
            count: 1,
            min_dim: 10,
            max_dim: 30,
            max_restarts: 100,
            tol: 1e-6,
            seed: 0,
            variant: Variant::Gd,
            deflation: DeflationMode::Restrict,
            stop: StopRule::BackwardError,
            start: Vec::new(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(GsvdError::InvalidOptions(m));
        if self.min_dim < 1 || self.min_dim >= self.max_dim {
            return bad(format!(
                "need 1 <= min_dim < max_dim, got {} and {}",
                self.min_dim, self.max_dim
            ));
        }
        if self.max_dim > n {
            return bad(format!("max_dim {} exceeds n = {n}", self.max_dim));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if self.count < 1 || self.count > n {
            return bad(format!("count must be in 1..={n}, got {}", self.count));
        }
        for v in &self.start {
            if v.len() != n {
                return Err(GsvdError::DimensionMismatch {
                    context: "starting vector",
                    expected: n,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }

    /// Dimensions actually usable on a pair with shapes `m × n`, `p × n`.
    pub(crate) fn effective_dims(&self, n: usize, m: usize, p: usize) -> (usize, usize) {
        let l = self.max_dim.min(n).min(m).min(p).max(2);
        let j = self.min_dim.min(l - 1).max(1);
        (j, l)
    }
}

/// Orthonormal search basis `W_k` with `A W_k = U_k H_k`, `B W_k = V_k K_k`.
#[derive(Clone, Debug)]
pub struct SearchState {
    pub w: DMatrix<f64>,
    pub au: QrFactor,
    pub bv: QrFactor,
}

impl SearchState {
    pub fn new(n: usize, m: usize, p: usize) -> Self {
        Self {
            w: DMatrix::zeros(n, 0),
            au: QrFactor::empty(m),
            bv: QrFactor::empty(p),
        }
    }

    /// State spanned by the orthonormalized columns of `basis`.
    pub fn from_basis(pair: &MatrixPair, basis: &DMatrix<f64>) -> Result<Self> {
        let mut st = Self::new(pair.cols(), pair.a.rows(), pair.b.rows());
        for col in basis.column_iter() {
            let w = orthonormalize_against(&[&st.w], &col.into_owned())
                .ok_or(GsvdError::RankDeficient)?;
            let aw = pair.a.mul(&w);
            let bw = pair.b.mul(&w);
            st.push(&w, &aw, &bw);
        }
        Ok(st)
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    /// Append a unit vector `w` orthogonal to the basis together with `A w`, `B w`.
    pub fn push(&mut self, w: &DVector<f64>, aw: &DVector<f64>, bw: &DVector<f64>) {
        push_column(&mut self.w, w);
        self.au.append_or_complete(aw);
        self.bv.append_or_complete(bw);
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.au.r
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.bv.r
    }
}

/// Leading Ritz approximation of a search space.
#[derive(Clone, Debug)]
pub struct RitzApprox {
    pub c1: f64,
    pub s1: f64,
    pub u1: DVector<f64>,
    pub v1: DVector<f64>,
    pub w1: DVector<f64>,
    pub r11: f64,
    pub x1: DVector<f64>,
}

impl RitzApprox {
    pub fn sigma(&self) -> f64 {
        self.c1 / self.s1
    }
}

/// Triangular GSVD of the projected pair ordered toward the target, and the
/// leading Ritz approximation.
pub fn extract(state: &SearchState, order: Order) -> Result<(ProjectedGsvd, RitzApprox)> {
    if state.dim() == 0 {
        return Err(GsvdError::InvalidOptions("empty search space".into()));
    }
    let g = triangular_gsvd(state.h(), state.k(), order)?;
    let ritz = ritz_from(state, &g, 0);
    Ok((g, ritz))
}

pub(crate) fn ritz_from(state: &SearchState, g: &ProjectedGsvd, i: usize) -> RitzApprox {
    let u1 = &state.au.q * g.u.column(i);
    let v1 = &state.bv.q * g.v.column(i);
    let w1 = &state.w * g.w.column(i);
    let r11 = g.r[(i, i)];
    let x1 = &w1 / r11;
    RitzApprox {
        c1: g.c[i],
        s1: g.s[i],
        u1,
        v1,
        w1,
        r11,
        x1,
    }
}

/// `r̃ = s̃₁ Aᵀũ₁ − c̃₁ Bᵀṽ₁` and whether it signals breakdown.
pub fn expansion_vector(ritz: &RitzApprox, pair: &MatrixPair) -> (DVector<f64>, bool) {
    let at_u = pair.a.tmul(&ritz.u1);
    let bt_v = pair.b.tmul(&ritz.v1);
    combine_expansion(ritz, &at_u, &bt_v)
}

pub(crate) fn combine_expansion(
    ritz: &RitzApprox,
    at_u: &DVector<f64>,
    bt_v: &DVector<f64>,
) -> (DVector<f64>, bool) {
    let rt = at_u * ritz.s1 - bt_v * ritz.c1;
    let scale = ritz.s1 * at_u.norm() + ritz.c1 * bt_v.norm();
    let breakdown = rt.norm() <= 1e3 * f64::EPSILON * scale;
    (rt, breakdown)
}

/// Normwise backward error of the Ritz pair from the norm of `r̃`.
pub fn backward_error(ritz: &RitzApprox, n: usize, rt_norm: f64, norm_aa: f64, norm_bb: f64) -> f64 {
    let r = ritz.c1 * ritz.s1 * rt_norm;
    let denom = ritz.s1 * ritz.s1 * norm_aa + ritz.c1 * ritz.c1 * norm_bb;
    (n as f64).sqrt() * ritz.r11.abs() * r / denom
}

/// 1-norm estimates of `AᵀA` and `BᵀB`.
pub fn pair_norm_estimates(pair: &MatrixPair, seed: u64) -> (f64, f64) {
    let n = pair.cols();
    let a = &pair.a;
    let b = &pair.b;
    let aa = one_norm_estimate(n, 2, seed, |x| a.tmul(&a.mul(x)), |x| a.tmul(&a.mul(x)));
    let bb = one_norm_estimate(
        n,
        2,
        seed.wrapping_add(1),
        |x| b.tmul(&b.mul(x)),
        |x| b.tmul(&b.mul(x)),
    );
    (aa, bb)
}

/// Shrink the state to the leading `j` Ritz directions of `g`.
pub fn thick_restart(state: &mut SearchState, g: &ProjectedGsvd, j: usize) {
    let j = j.min(state.dim());
    let r11 = g.r.view((0, 0), (j, j)).into_owned();
    let h = DMatrix::from_fn(j, j, |a, b| g.c[a] * r11[(a, b)]);
    let k = DMatrix::from_fn(j, j, |a, b| g.s[a] * r11[(a, b)]);
    state.w = &state.w * g.w.columns(0, j);
    let uq = &state.au.q * g.u.columns(0, j);
    let vq = &state.bv.q * g.v.columns(0, j);
    state.au.replace(uq, h);
    state.bv.replace(vq, k);
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterationRecord {
    pub mv: usize,
    pub dim: usize,
    pub c1: f64,
    pub s1: f64,
    pub residual_norm: f64,
    pub backward_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_error: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConvergenceRecord {
    pub entries: Vec<IterationRecord>,
}

impl ConvergenceRecord {
    /// Number of steps where `c̃₁` moved away from the target by more than `slack`.
    pub fn monotonicity_violations(&self, which: Which, slack: f64) -> usize {
        self.entries
            .windows(2)
            .filter(|w| match which {
                Which::Largest => w[1].c1 < w[0].c1 - slack,
                Which::Smallest => w[1].c1 > w[0].c1 + slack,
            })
            .count()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.entries.last()
    }
}

/// A partial GSVD in triangular form: `A W = U C R`, `B W = V S R`.
#[derive(Clone, Debug)]
pub struct PartialGsvd {
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl PartialGsvd {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.c.iter().zip(&self.s).map(|(c, s)| c / s).collect()
    }

    /// Leading block of the restarted state.
    pub(crate) fn from_state(state: &SearchState, g: &ProjectedGsvd, j: usize) -> Self {
        let j = j.min(state.dim());
        Self {
            c: g.c[..j].to_vec(),
            s: g.s[..j].to_vec(),
            u: &state.au.q * g.u.columns(0, j),
            v: &state.bv.q * g.v.columns(0, j),
            w: &state.w * g.w.columns(0, j),
            r: g.r.view((0, 0), (j, j)).into_owned(),
        }
    }

    /// Convert a diagonal-form factorization `A X = U C`, `B X = V S`.
    pub fn from_diagonal(c: Vec<f64>, s: Vec<f64>, u: DMatrix<f64>, v: DMatrix<f64>, x: &DMatrix<f64>) -> Self {
        let (w, rx) = householder_qr(x);
        let r = rx
            .try_inverse()
            .expect("right vectors are linearly independent");
        Self { c, s, u, v, w, r }
    }

    /// Right vectors `X = W R⁻¹`.
    pub fn x(&self) -> DMatrix<f64> {
        let k = self.r.nrows();
        let rinv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .expect("R is nonsingular");
        &self.w * rinv
    }

    pub fn to_diagonal(&self) -> DiagonalGsvd {
        DiagonalGsvd {
            c: self.c.clone(),
            s: self.s.clone(),
            u: self.u.clone(),
            v: self.v.clone(),
            x: self.x(),
        }
    }
}

/// Diagonal form `A X = U C`, `B X = V S`.
#[derive(Clone, Debug)]
pub struct DiagonalGsvd {
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

impl DiagonalGsvd {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub gsvd: PartialGsvd,
    pub record: ConvergenceRecord,
    pub mv_count: usize,
    pub restarts: usize,
    pub converged: bool,
}

/// Extra inputs used when a solve runs inside a deflation chain.
#[derive(Clone, Debug, Default)]
pub(crate) struct SolveSetup<'a> {
    /// Search directions are kept orthogonal to these columns.
    pub locked: Option<&'a DMatrix<f64>>,
    /// Cached `(‖AᵀA‖₁, ‖BᵀB‖₁)` of the undeflated pair.
    pub norms: Option<(f64, f64)>,
    /// Number of leading Ritz pairs to keep in the result.
    pub keep: Option<usize>,
}

/// Shared machinery of the solvers: MV accounting, random directions,
/// orthogonalization and the stopping test.
pub(crate) struct Engine<'a> {
    pub pair: &'a MatrixPair,
    pub n: usize,
    pub mv: usize,
    pub norm_aa: f64,
    pub norm_bb: f64,
    pub rng: ChaCha8Rng,
    pub locked: Option<&'a DMatrix<f64>>,
    pub tol: f64,
    pub stop: StopRule,
}

impl<'a> Engine<'a> {
    pub fn new(pair: &'a MatrixPair, opts: &SolverOptions, setup: &SolveSetup<'a>) -> Self {
        let (norm_aa, norm_bb) = setup
            .norms
            .unwrap_or_else(|| pair_norm_estimates(pair, opts.seed ^ 0x5eed));
        Self {
            pair,
            n: pair.cols(),
            mv: 0,
            norm_aa,
            norm_bb,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            locked: setup.locked,
            tol: opts.tol,
            stop: opts.stop,
        }
    }

    pub fn a(&mut self, x: &DVector<f64>) -> DVector<f64> {
        self.mv += 1;
        self.pair.a.mul(x)
    }

    pub fn b(&mut self, x: &DVector<f64>) -> DVector<f64> {
        self.mv += 1;
        self.pair.b.mul(x)
    }

    pub fn at(&mut self, y: &DVector<f64>) -> DVector<f64> {
        self.mv += 1;
        self.pair.a.tmul(y)
    }

    pub fn bt(&mut self, y: &DVector<f64>) -> DVector<f64> {
        self.mv += 1;
        self.pair.b.tmul(y)
    }

    pub fn random_normal(&mut self) -> DVector<f64> {
        let v: DVector<f64> = DVector::from_fn(self.n, |_, _| StandardNormal.sample(&mut self.rng));
        let nrm = v.norm();
        v / nrm
    }

    /// Orthonormalize `v` against the basis and the locked columns.
    pub fn direction(&self, basis: &DMatrix<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        match self.locked {
            Some(l) => orthonormalize_against(&[l, basis], v),
            None => orthonormalize_against(&[basis], v),
        }
    }

    pub fn random_direction(&mut self, basis: &DMatrix<f64>) -> DVector<f64> {
        loop {
            let v = self.random_normal();
            if let Some(w) = self.direction(basis, &v) {
                return w;
            }
        }
    }

    /// Append `w` to the state (two MVs).
    pub fn expand(&mut self, state: &mut SearchState, w: &DVector<f64>) {
        let aw = self.a(w);
        let bw = self.b(w);
        state.push(w, &aw, &bw);
    }

    pub fn value_error(&self, c1: f64, s1: f64) -> Option<f64> {
        match self.stop {
            StopRule::ValueError { c, s } => Some((s1 * s1 * c * c - c1 * c1 * s * s).abs()),
            StopRule::BackwardError => None,
        }
    }

    pub fn converged(&self, backward: f64, value: Option<f64>) -> bool {
        match (self.stop, value) {
            (StopRule::ValueError { .. }, Some(v)) => v < self.tol,
            _ => backward <= self.tol,
        }
    }

    pub fn record(
        &self,
        record: &mut ConvergenceRecord,
        dim: usize,
        ritz: &RitzApprox,
        rt_norm: f64,
    ) -> (f64, Option<f64>) {
        let be = backward_error(ritz, self.n, rt_norm, self.norm_aa, self.norm_bb);
        let ve = self.value_error(ritz.c1, ritz.s1);
        record.entries.push(IterationRecord {
            mv: self.mv,
            dim,
            c1: ritz.c1,
            s1: ritz.s1,
            residual_norm: ritz.c1 * ritz.s1 * rt_norm,
            backward_error: be,
            value_error: ve,
        });
        (be, ve)
    }
}

/// Generalized Davidson for one extremal generalized singular pair.
pub fn gdgsvd_solve(pair: &MatrixPair, opts: &SolverOptions) -> Result<SolveOutput> {
    opts.validate(pair.cols())?;
    run_gd(pair, opts, &SolveSetup::default())
}

pub(crate) fn run_gd(pair: &MatrixPair, opts: &SolverOptions, setup: &SolveSetup) -> Result<SolveOutput> {
    let mut eng = Engine::new(pair, opts, setup);
    let (j, l) = opts.effective_dims(pair.cols(), pair.a.rows(), pair.b.rows());
    let j = j.max(setup.keep.unwrap_or(1)).min(l - 1);
    let order = opts.which.order();
    let mut state = SearchState::new(pair.cols(), pair.a.rows(), pair.b.rows());
    let mut record = ConvergenceRecord::default();
    let mut next = match opts.start.first() {
        Some(v) => v.clone(),
        None => eng.random_normal(),
    };
    let mut restarts = 0;
    let mut converged = false;
    let mut breakdown = false;

    let g = loop {
        let w = if breakdown {
            None
        } else {
            eng.direction(&state.w, &next)
        };
        let w = match w {
            Some(w) => w,
            None => eng.random_direction(&state.w),
        };
        eng.expand(&mut state, &w);

        let (g, ritz) = extract(&state, order)?;
        let at_u = eng.at(&ritz.u1);
        let bt_v = eng.bt(&ritz.v1);
        let (rt, brk) = combine_expansion(&ritz, &at_u, &bt_v);
        let (be, ve) = eng.record(&mut record, state.dim(), &ritz, rt.norm());

        if state.dim() >= j && eng.converged(be, ve) {
            converged = true;
            break g;
        }
        if state.dim() >= l {
            if restarts >= opts.max_restarts {
                break g;
            }
            thick_restart(&mut state, &g, j);
            restarts += 1;
        }
        breakdown = brk;
        next = rt;
    };

    let keep = setup.keep.unwrap_or(j);
    Ok(SolveOutput {
        gsvd: PartialGsvd::from_state(&state, &g, keep),
        record,
        mv_count: eng.mv,
        restarts,
        converged,
    })
}

/// Variant keeping `Ŵ` `BᵀB`-orthonormal, so that the projected problem is
/// an ordinary SVD. Requires `BᵀB` to be nonsingular.
pub fn bb_gdgsvd_solve(pair: &MatrixPair, opts: &SolverOptions) -> Result<SolveOutput> {
    opts.validate(pair.cols())?;
    run_bb_gd(pair, opts, &SolveSetup::default())
}

struct BbState {
    w: DMatrix<f64>,
    v: DMatrix<f64>,
    au: QrFactor,
}

pub(crate) fn run_bb_gd(pair: &MatrixPair, opts: &SolverOptions, setup: &SolveSetup) -> Result<SolveOutput> {
    let mut eng = Engine::new(pair, opts, setup);
    let n = pair.cols();
    let (j, l) = opts.effective_dims(n, pair.a.rows(), pair.b.rows());
    let j = j.max(setup.keep.unwrap_or(1)).min(l - 1);
    let b_scale = eng.norm_bb.sqrt().max(f64::MIN_POSITIVE);
    let mut st = BbState {
        w: DMatrix::zeros(n, 0),
        v: DMatrix::zeros(pair.b.rows(), 0),
        au: QrFactor::empty(pair.a.rows()),
    };
    let mut record = ConvergenceRecord::default();
    let mut next = match opts.start.first() {
        Some(v) => v.clone(),
        None => eng.random_normal(),
    };
    let mut restarts = 0;
    let mut converged = false;

    let final_svd = loop {
        let mut w = match euclidean_direction(&eng, &st.w, &next) {
            Some(w) => w,
            None => loop {
                let r = eng.random_normal();
                if let Some(w) = euclidean_direction(&eng, &st.w, &r) {
                    break w;
                }
            },
        };
        let mut v = eng.b(&w);
        for _ in 0..2 {
            let h = st.v.tr_mul(&v);
            w -= &st.w * &h;
            v -= &st.v * &h;
        }
        let vn = v.norm();
        if vn <= EPS_HALF * b_scale * w.norm() {
            return Err(GsvdError::IllConditionedBtB);
        }
        w /= vn;
        v /= vn;
        push_column(&mut st.w, &w);
        push_column(&mut st.v, &v);
        let aw = eng.a(&w);
        st.au.append_or_complete(&aw);

        let (us, sig, vs) = ordered_svd(&st.au.r, opts.which);
        let sigma = sig[0];
        let u1 = &st.au.q * us.column(0);
        let w1 = &st.w * vs.column(0);
        let v1 = &st.v * vs.column(0);
        let at_u = eng.at(&u1);
        let bt_v = eng.bt(&v1);
        let rhat = at_u - bt_v * sigma;
        let r_norm = sigma * rhat.norm();

        let k = st.w.ncols();
        let denom = (eng.norm_aa + sigma * sigma * eng.norm_bb) * w1.norm();
        let be = (n as f64).sqrt() * r_norm / denom;
        let c1 = sigma / sigma.hypot(1.0);
        let s1 = 1.0 / sigma.hypot(1.0);
        let ve = eng.value_error(c1, s1);
        record.entries.push(IterationRecord {
            mv: eng.mv,
            dim: k,
            c1,
            s1,
            residual_norm: r_norm,
            backward_error: be,
            value_error: ve,
        });

        if k >= j && eng.converged(be, ve) {
            converged = true;
            break (us, sig, vs);
        }
        if k >= l {
            if restarts >= opts.max_restarts {
                break (us, sig, vs);
            }
            st.au.replace(
                &st.au.q * us.columns(0, j),
                DMatrix::from_diagonal(&DVector::from_row_slice(&sig[..j])),
            );
            st.w = &st.w * vs.columns(0, j);
            st.v = &st.v * vs.columns(0, j);
            restarts += 1;
        }
        next = rhat;
    };

    let (us, sig, vs) = final_svd;
    let keep = setup.keep.unwrap_or(j).min(sig.len());
    let c: Vec<f64> = sig[..keep].iter().map(|s| s / s.hypot(1.0)).collect();
    let s: Vec<f64> = sig[..keep].iter().map(|s| 1.0 / s.hypot(1.0)).collect();
    let u = &st.au.q * us.columns(0, keep);
    let v = &st.v * vs.columns(0, keep);
    let mut x = &st.w * vs.columns(0, keep);
    for (i, si) in s.iter().enumerate() {
        x.column_mut(i).scale_mut(*si);
    }
    Ok(SolveOutput {
        gsvd: PartialGsvd::from_diagonal(c, s, u, v, &x),
        record,
        mv_count: eng.mv,
        restarts,
        converged,
    })
}

/// Euclidean orthogonalization against a (not orthonormal) basis through its
/// Gram matrix, followed by the locked columns.
fn euclidean_direction(eng: &Engine, basis: &DMatrix<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let mut w = v.clone();
    if let Some(l) = eng.locked {
        orthogonalize(l, &mut w);
    }
    if basis.ncols() > 0 {
        let gram = basis.tr_mul(basis);
        let chol = gram.cholesky()?;
        for _ in 0..2 {
            let c = chol.solve(&basis.tr_mul(&w));
            w -= basis * c;
        }
    }
    let rho = w.norm();
    if rho <= EPS_HALF * norm {
        return None;
    }
    Some(w / rho)
}

/// SVD of the projected matrix ordered toward the target.
fn ordered_svd(h: &DMatrix<f64>, which: Which) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (u, s, v) = small_svd(h);
    match which {
        Which::Largest => (u, s, v),
        Which::Smallest => {
            let k = s.len();
            let rev: Vec<usize> = (0..k).rev().collect();
            let pick = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), k, |i, j| m[(i, rev[j])]);
            (pick(&u), rev.iter().map(|&i| s[i]).collect(), pick(&v))
        }
    }
}
