//! General-form Tikhonov regularization `min ‖Ax − b‖² + μ‖Bx‖²` through a
//! truncated GSVD, with the regularization parameter chosen by the
//! discrepancy principle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::analysis::{dense_gsvd, sin_angle};
use crate::deflation::{tgsvd_solve, TgsvdPlan};
use crate::dense::householder_qr;
use crate::error::{GsvdError, Result};
use crate::gdgsvd::{DeflationMode, PartialGsvd, SolverOptions, Variant, Which};
use crate::operator::MatrixPair;
use crate::problems::{add_noise, gen_regu_problem, RegProblem};

#[derive(Clone, Debug)]
pub struct TikhonovProblem {
    pub pair: MatrixPair,
    pub b: DVector<f64>,
    /// Discrepancy target `ηε`.
    pub eta_eps: f64,
    pub x_star: Option<DVector<f64>>,
}

impl TikhonovProblem {
    pub fn new(
        pair: MatrixPair,
        b: DVector<f64>,
        eta_eps: f64,
        x_star: Option<DVector<f64>>,
    ) -> Result<Self> {
        if b.len() != pair.a.rows() {
            return Err(GsvdError::DimensionMismatch {
                context: "TikhonovProblem data vector",
                expected: pair.a.rows(),
                found: b.len(),
            });
        }
        if !(eta_eps > 0.0) {
            return Err(GsvdError::InvalidOptions(format!(
                "discrepancy target must be positive, got {eta_eps}"
            )));
        }
        Ok(Self {
            pair,
            b,
            eta_eps,
            x_star,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularizedSolution {
    #[serde(skip)]
    pub x_mu: DVector<f64>,
    pub mu: f64,
    pub discrepancy: f64,
    pub rel_err: Option<f64>,
    pub bracketed: bool,
}

/// Filtered solution and the number of terms dropped because
/// `c² + μs² = 0`.
#[derive(Clone, Debug)]
pub struct FilteredSolution {
    pub x: DVector<f64>,
    pub skipped: usize,
}

/// Noise-level safety factor `η = 1 + 3.090232 / √(2n)`.
pub fn eta(n: usize) -> f64 {
    1.0 + 3.090232 / (2.0 * n as f64).sqrt()
}

fn filter_weights(c: &[f64], s: &[f64], mu: f64) -> (Vec<f64>, usize) {
    let mut skipped = 0;
    let f = c
        .iter()
        .zip(s)
        .map(|(&c, &s)| {
            let d = c * c + mu * s * s;
            if d == 0.0 {
                skipped += 1;
                0.0
            } else {
                c / d
            }
        })
        .collect();
    (f, skipped)
}

/// `x_μ = Σ cᵢ/(cᵢ² + μsᵢ²) · xᵢ uᵢᵀb` over the supplied pairs.
pub fn tgsvd_filter_solution(g: &PartialGsvd, b: &DVector<f64>, mu: f64) -> FilteredSolution {
    let beta = g.u.tr_mul(b);
    let (f, skipped) = filter_weights(&g.c, &g.s, mu);
    let coeff = DVector::from_fn(g.len(), |i, _| f[i] * beta[i]);
    FilteredSolution {
        x: g.x() * coeff,
        skipped,
    }
}

/// `‖A x_μ − b‖` evaluated through `A X = U C`.
struct Misfit<'a> {
    g: &'a PartialGsvd,
    b: &'a DVector<f64>,
    beta: DVector<f64>,
}

impl<'a> Misfit<'a> {
    fn new(g: &'a PartialGsvd, b: &'a DVector<f64>) -> Self {
        Self {
            g,
            b,
            beta: g.u.tr_mul(b),
        }
    }

    fn at(&self, mu: f64) -> f64 {
        let (f, _) = filter_weights(&self.g.c, &self.g.s, mu);
        let ax = DVector::from_fn(self.g.len(), |i, _| self.g.c[i] * f[i] * self.beta[i]);
        (&self.g.u * ax - self.b).norm()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MuSelection {
    pub mu: f64,
    pub discrepancy: f64,
    /// `false` when the target lies outside the misfit range on
    /// `[1e-16, 1e16]`; `mu` is then the nearest endpoint.
    pub bracketed: bool,
    pub bisections: usize,
}

pub const MU_RANGE: (f64, f64) = (1e-16, 1e16);

/// Discrepancy `‖A x_μ − b‖` of the filtered solution.
pub fn discrepancy(g: &PartialGsvd, b: &DVector<f64>, mu: f64) -> f64 {
    Misfit::new(g, b).at(mu)
}

/// Bisection on `log μ` for `‖A x_μ − b‖ = ηε`.
pub fn discrepancy_select_mu(g: &PartialGsvd, b: &DVector<f64>, eta_eps: f64) -> MuSelection {
    let misfit = Misfit::new(g, b);
    let (mut lo, mut hi) = (MU_RANGE.0.ln(), MU_RANGE.1.ln());
    let d_lo = misfit.at(MU_RANGE.0);
    if d_lo >= eta_eps {
        return MuSelection {
            mu: MU_RANGE.0,
            discrepancy: d_lo,
            bracketed: false,
            bisections: 0,
        };
    }
    let d_hi = misfit.at(MU_RANGE.1);
    if d_hi <= eta_eps {
        return MuSelection {
            mu: MU_RANGE.1,
            discrepancy: d_hi,
            bracketed: false,
            bisections: 0,
        };
    }
    let mut mid = 0.5 * (lo + hi);
    let mut d = misfit.at(mid.exp());
    let mut steps = 1;
    while (d - eta_eps).abs() > 1e-8 * eta_eps && steps < 200 {
        if d < eta_eps {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        d = misfit.at(mid.exp());
        steps += 1;
    }
    MuSelection {
        mu: mid.exp(),
        discrepancy: d,
        bracketed: true,
        bisections: steps,
    }
}

fn rel_err(x: &DVector<f64>, reference: &DVector<f64>) -> f64 {
    (x - reference).norm() / reference.norm()
}

/// Discrepancy-principle solution from the supplied pairs.
pub fn solve_tikhonov(problem: &TikhonovProblem, g: &PartialGsvd) -> RegularizedSolution {
    let sel = discrepancy_select_mu(g, &problem.b, problem.eta_eps);
    let x = tgsvd_filter_solution(g, &problem.b, sel.mu).x;
    RegularizedSolution {
        rel_err: problem.x_star.as_ref().map(|xs| rel_err(&x, xs)),
        x_mu: x,
        mu: sel.mu,
        discrepancy: sel.discrepancy,
        bracketed: sel.bracketed,
    }
}

/// Orthonormal basis of the orthogonal complement of `span(W₁)`.
pub fn complement_basis(w1: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w1.nrows();
    let p = DMatrix::identity(n, n) - w1 * w1.transpose();
    let eig = SymmetricEigen::new((&p + p.transpose()) * 0.5);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

/// `x = W₁y₁ + W₂y₂` with `y₁ = R₁₁⁻¹U₁ᵀ(b − AW₂y₂)` where `AW₁ = U₁R₁₁`;
/// `W₁` spans the null space of `B`.
pub fn split_nullspace_solution(
    pair: &MatrixPair,
    b: &DVector<f64>,
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
    y2: &DVector<f64>,
) -> Result<DVector<f64>> {
    let k = w1.ncols();
    let mut aw1 = DMatrix::zeros(pair.a.rows(), k);
    for j in 0..k {
        aw1.set_column(j, &pair.a.mul(&w1.column(j).into_owned()));
    }
    let (u1, r11) = householder_qr(&aw1);
    let scale = r11.diagonal().amax();
    if (0..k).any(|i| r11[(i, i)].abs() <= f64::EPSILON * scale * k as f64) || scale == 0.0 {
        return Err(GsvdError::NullspaceDegenerate);
    }
    let x2 = w2 * y2;
    let rhs = u1.tr_mul(&(b - pair.a.mul(&x2)));
    let y1 = r11
        .solve_upper_triangular(&rhs)
        .ok_or(GsvdError::NullspaceDegenerate)?;
    Ok(w1 * y1 + x2)
}

/// Which part of the truncated GSVD is computed iteratively after the
/// null-space pair `(1, 0)` is seeded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TikhonovMode {
    /// One solve harvests all remaining pairs.
    First,
    /// Five solves, locking one pair each, the last harvesting the rest.
    Five,
}

impl TikhonovMode {
    fn solves(self) -> usize {
        match self {
            TikhonovMode::First => 1,
            TikhonovMode::Five => 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TikhonovConfig {
    pub problem: RegProblem,
    pub n: usize,
    pub pairs: usize,
    pub noise: f64,
    pub noise_seed: u64,
    pub mode: TikhonovMode,
    pub solver: SolverOptions,
}

impl TikhonovConfig {
    pub fn new(problem: RegProblem, n: usize) -> Self {
        Self {
            problem,
            n,
            pairs: 15,
            noise: 0.01,
            noise_seed: 0,
            mode: TikhonovMode::First,
            solver: SolverOptions {
                tol: 1e-6,
                variant: Variant::Md,
                ..SolverOptions::default()
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TikhonovReport {
    pub problem: String,
    pub n: usize,
    pub pairs: usize,
    pub mode: TikhonovMode,
    pub algorithm: Variant,
    pub noise: f64,
    pub eta_eps: f64,
    pub mu: f64,
    pub discrepancy: f64,
    pub bracketed: bool,
    /// `‖x_μ − x★‖ / ‖x★‖`
    pub rel_err_x_star: f64,
    /// `‖x_μ − x_exact‖ / ‖x_exact‖` against the exact truncated GSVD
    /// solution with its own discrepancy-principle `μ`.
    pub rel_err_exact_tgsvd: f64,
    pub exact_mu: f64,
    pub exact_rel_err_x_star: f64,
    /// Euclidean sine between the approximate and exact right vectors of
    /// the largest finite pair.
    pub sin_x2: f64,
    pub sigma: Vec<f64>,
    pub mv_count: usize,
    pub lock_mv: usize,
    pub total_mv: usize,
    pub converged: bool,
    /// Steps where the extracted cosine moved away from the target, summed
    /// over all solves.
    pub monotonicity_violations: usize,
}

/// Dense truncated GSVD with the `k` largest pairs in factored form.
pub fn exact_tgsvd(a: &DMatrix<f64>, b: &DMatrix<f64>, k: usize) -> Result<PartialGsvd> {
    let g = dense_gsvd(a, b)?;
    let k = k.min(g.len());
    let x = g.x.columns(0, k).into_owned();
    let unit = |v: DVector<f64>, w: f64| if w > 0.0 { v / w } else { v * 0.0 };
    let u_cols: Vec<DVector<f64>> = (0..k).map(|i| unit(a * x.column(i), g.c[i])).collect();
    let v_cols: Vec<DVector<f64>> = (0..k).map(|i| unit(b * x.column(i), g.s[i])).collect();
    Ok(PartialGsvd::from_diagonal(
        g.c[..k].to_vec(),
        g.s[..k].to_vec(),
        DMatrix::from_columns(&u_cols),
        DMatrix::from_columns(&v_cols),
        &x,
    ))
}

/// Generate a regularization problem, perturb its data, approximate the
/// truncated GSVD with the null space of `B` seeded, and compare against
/// the dense truncated GSVD.
pub fn run_tikhonov(cfg: &TikhonovConfig) -> Result<TikhonovReport> {
    let inst = gen_regu_problem(cfg.problem, cfg.n)?;
    let b_clean = inst.b.clone().expect("regularization problems carry data");
    let x_star = inst.x_star.clone().expect("regularization problems carry x_star");
    let (b, e) = add_noise(&b_clean, cfg.noise, cfg.noise_seed);
    let eta_eps = eta(cfg.n) * e.norm();
    let problem = TikhonovProblem::new(inst.pair.clone(), b, eta_eps, Some(x_star.clone()))?;

    let n = cfg.n;
    let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let plan = TgsvdPlan {
        solves: cfg.mode.solves(),
        total: cfg.pairs,
        seeds: vec![ones],
    };
    let opts = SolverOptions {
        which: Which::Largest,
        count: cfg.pairs,
        deflation: DeflationMode::Restrict,
        ..cfg.solver.clone()
    };
    let out = tgsvd_solve(&inst.pair, &plan, &opts)?;
    let approx = solve_tikhonov(&problem, &out.gsvd);

    let exact = exact_tgsvd(&inst.pair.a.to_dense(), &inst.pair.b.to_dense(), cfg.pairs)?;
    let exact_sol = solve_tikhonov(&problem, &exact);

    let x2 = out.gsvd.x().column(1).into_owned();
    let x2_exact = exact.x().column(1).into_owned();

    Ok(TikhonovReport {
        problem: cfg.problem.name(),
        n,
        pairs: cfg.pairs,
        mode: cfg.mode,
        algorithm: cfg.solver.variant,
        noise: cfg.noise,
        eta_eps,
        mu: approx.mu,
        discrepancy: approx.discrepancy,
        bracketed: approx.bracketed,
        rel_err_x_star: rel_err(&approx.x_mu, &x_star),
        rel_err_exact_tgsvd: rel_err(&approx.x_mu, &exact_sol.x_mu),
        exact_mu: exact_sol.mu,
        exact_rel_err_x_star: rel_err(&exact_sol.x_mu, &x_star),
        sin_x2: sin_angle(&x2, &x2_exact),
        sigma: out.gsvd.sigma(),
        mv_count: out.mv_count,
        lock_mv: out.lock_mv,
        total_mv: out.mv_count + out.lock_mv,
        converged: out.converged,
        monotonicity_violations: out
            .records
            .iter()
            .map(|r| r.monotonicity_violations(Which::Largest, 1e-12))
            .sum(),
    })
}
