//! Multidirectional expansion: two new directions per iteration, followed by
//! an `O(nk)` Householder truncation that discards the Ritz direction
//! furthest from the target.

use nalgebra::{DMatrix, DVector};

use crate::dense::{householder_from_target, reflect_cols, reflect_rows, ProjectedGsvd};
use crate::error::{GsvdError, Result};
use crate::gdgsvd::{
    combine_expansion, extract, thick_restart, ConvergenceRecord, Engine, PartialGsvd,
    SearchState, SolveOutput, SolveSetup, SolverOptions,
};
use crate::operator::MatrixPair;

/// Reflections mapping the last unit vector onto the last columns of
/// `Ũ`, `Ṽ`, `W̃`; `None` is the identity.
#[derive(Clone, Debug)]
pub struct TruncationPlan {
    pub p: Option<DVector<f64>>,
    pub q: Option<DVector<f64>>,
    pub z: Option<DVector<f64>>,
    pub drop_index: usize,
}

fn unit_reflection(col: DVector<f64>, i: usize) -> Result<Option<DVector<f64>>> {
    let nrm = col.norm();
    householder_from_target(&(col / nrm), i)
}

pub fn truncation_plan(g: &ProjectedGsvd) -> Result<TruncationPlan> {
    let k = g.dim();
    if k < 2 {
        return Err(GsvdError::InvalidOptions(
            "truncation needs at least two directions".into(),
        ));
    }
    let last = k - 1;
    Ok(TruncationPlan {
        p: unit_reflection(g.u.column(last).into_owned(), last)?,
        q: unit_reflection(g.v.column(last).into_owned(), last)?,
        z: unit_reflection(g.w.column(last).into_owned(), last)?,
        drop_index: last,
    })
}

fn drop_last_col(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.columns(0, m.ncols() - 1).into_owned()
}

fn drop_last(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.ncols() - 1;
    m.view((0, 0), (k, k)).into_owned()
}

/// Remove the direction of the last pair of `g` from the state.
pub fn fast_truncate(state: &mut SearchState, g: &ProjectedGsvd) -> Result<TruncationPlan> {
    let plan = truncation_plan(g)?;
    let mut u = state.au.q.clone();
    let mut v = state.bv.q.clone();
    let mut h = state.au.r.clone();
    let mut k = state.bv.r.clone();
    if let Some(p) = &plan.p {
        reflect_cols(&mut u, p);
        reflect_rows(p, &mut h);
    }
    if let Some(q) = &plan.q {
        reflect_cols(&mut v, q);
        reflect_rows(q, &mut k);
    }
    if let Some(z) = &plan.z {
        reflect_cols(&mut state.w, z);
        reflect_cols(&mut h, z);
        reflect_cols(&mut k, z);
    }
    state.w = drop_last_col(&state.w);
    state.au.replace(drop_last_col(&u), drop_last(&h));
    state.bv.replace(drop_last_col(&v), drop_last(&k));
    Ok(plan)
}

/// Outcome of a multidirectional expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpansionReport {
    pub added: usize,
    pub dependent: usize,
    pub random: bool,
}

/// Append the orthonormalized `Aᵀũ₁` and `Bᵀṽ₁` (or only `r̃` when a single
/// slot is left below `max_dim`).
pub(crate) fn md_expand_with(
    eng: &mut Engine,
    state: &mut SearchState,
    dirs: &[DVector<f64>],
) -> ExpansionReport {
    let mut report = ExpansionReport {
        added: 0,
        dependent: 0,
        random: false,
    };
    for d in dirs {
        match eng.direction(&state.w, d) {
            Some(w) => {
                eng.expand(state, &w);
                report.added += 1;
            }
            None => report.dependent += 1,
        }
    }
    if report.added == 0 {
        let w = eng.random_direction(&state.w);
        eng.expand(state, &w);
        report.added = 1;
        report.random = true;
    }
    report
}

/// Public form of the expansion used by tests: the directions `Aᵀũ₁`, `Bᵀṽ₁`
/// of the leading Ritz pair are appended without MV bookkeeping.
pub fn md_expand(
    state: &mut SearchState,
    pair: &MatrixPair,
    u1: &DVector<f64>,
    v1: &DVector<f64>,
) -> ExpansionReport {
    let opts = SolverOptions::default();
    let setup = SolveSetup {
        norms: Some((1.0, 1.0)),
        ..Default::default()
    };
    let mut eng = Engine::new(pair, &opts, &setup);
    let dirs = [pair.a.tmul(u1), pair.b.tmul(v1)];
    md_expand_with(&mut eng, state, &dirs)
}

pub fn mdgsvd_solve(pair: &MatrixPair, opts: &SolverOptions) -> Result<SolveOutput> {
    opts.validate(pair.cols())?;
    run_md(pair, opts, &SolveSetup::default())
}

pub(crate) fn run_md(pair: &MatrixPair, opts: &SolverOptions, setup: &SolveSetup) -> Result<SolveOutput> {
    let mut eng = Engine::new(pair, opts, setup);
    let (j, l) = opts.effective_dims(pair.cols(), pair.a.rows(), pair.b.rows());
    let j = j.max(setup.keep.unwrap_or(1)).min(l - 1);
    let order = opts.which.order();
    let mut state = SearchState::new(pair.cols(), pair.a.rows(), pair.b.rows());
    let mut record = ConvergenceRecord::default();

    let mut next: Vec<DVector<f64>> = opts.start.iter().take(2).cloned().collect();
    while next.len() < 2 {
        next.push(eng.random_normal());
    }
    let mut restarts = 0;
    let mut converged = false;

    let (g, final_state) = loop {
        let before = state.dim();
        md_expand_with(&mut eng, &mut state, &next);
        let grew_two = state.dim() == before + 2;

        let (g, ritz) = extract(&state, order)?;
        let at_u = eng.at(&ritz.u1);
        let bt_v = eng.bt(&ritz.v1);
        let (rt, breakdown) = combine_expansion(&ritz, &at_u, &bt_v);
        let (be, ve) = eng.record(&mut record, state.dim(), &ritz, rt.norm());

        if state.dim() >= j && eng.converged(be, ve) {
            converged = true;
            break (g, state);
        }
        if state.dim() >= l {
            if restarts >= opts.max_restarts {
                break (g, state);
            }
            thick_restart(&mut state, &g, j);
            restarts += 1;
        } else if grew_two {
            fast_truncate(&mut state, &g)?;
        }

        next = if breakdown {
            Vec::new()
        } else if state.dim() + 2 <= l {
            vec![at_u, bt_v]
        } else {
            vec![rt]
        };
    };

    let keep = setup.keep.unwrap_or(j);
    Ok(SolveOutput {
        gsvd: PartialGsvd::from_state(&final_state, &g, keep),
        record,
        mv_count: eng.mv,
        restarts,
        converged,
    })
}

/// Dense `R_k` and `S_k` of a search state: the optimal residual-type
/// direction family and its complement. Intended for small test problems.
pub fn rs_matrices(state: &SearchState, pair: &MatrixPair) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let w = &state.w;
    let k = w.ncols();
    let n = w.nrows();
    let mut aaw = DMatrix::zeros(n, k);
    let mut bbw = DMatrix::zeros(n, k);
    for i in 0..k {
        let wi = w.column(i).into_owned();
        aaw.set_column(i, &pair.a.tmul(&pair.a.mul(&wi)));
        bbw.set_column(i, &pair.b.tmul(&pair.b.mul(&wi)));
    }
    let hh = state.h().tr_mul(state.h());
    let kk = state.k().tr_mul(state.k());
    let m = &hh + &kk;
    let minv = m.try_inverse().ok_or(GsvdError::SingularPencil)?;
    let r = &aaw * &minv * &kk - &bbw * &minv * &hh;

    let ra = r.tr_mul(&aaw).try_inverse().ok_or(GsvdError::RankDeficient)?;
    let rb = r.tr_mul(&bbw).try_inverse().ok_or(GsvdError::RankDeficient)?;
    let s = (&aaw - w * &hh) * ra - (&bbw - w * &kk) * rb;
    Ok((r, s))
}
