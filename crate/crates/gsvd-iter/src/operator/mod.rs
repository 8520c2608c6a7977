//! Matrix-free linear operators and the pair `(A, B)` the solvers work on.
//!
//! Every operator exposes `y = M x` and `x = Mᵀ y`. Solvers never look
//! inside an operator; they only count how often it is applied.

mod csr;
mod market;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};

use crate::error::{GsvdError, Result};

pub use csr::CsrMatrix;
pub use market::{
    parse_matrix_market, read_matrix_market, MarketMatrix, read_vectors, write_matrix_market_csr,
    write_matrix_market_dense, write_vectors,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Dense,
    CsrSparse,
    Diagonal,
    HouseholderComposed,
    DeflatedWrapper,
    DifferenceOperator,
}

pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn kind(&self) -> OperatorKind;

    /// `y = M x`; `x.len() == cols`, `y.len() == rows`.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    /// `x = Mᵀ y`; `y.len() == rows`, `x.len() == cols`.
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]);

    fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("apply", self.cols(), x.len())?;
        Ok(self.mul(x))
    }

    fn apply_adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("apply_adjoint", self.rows(), y.len())?;
        Ok(self.tmul(y))
    }

    /// Unchecked `M x` for internal use.
    fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.cols());
        let mut y = DVector::zeros(self.rows());
        self.apply_into(x.as_slice(), y.as_mut_slice());
        y
    }

    /// Unchecked `Mᵀ y` for internal use.
    fn tmul(&self, y: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(y.len(), self.rows());
        let mut x = DVector::zeros(self.cols());
        self.apply_adjoint_into(y.as_slice(), x.as_mut_slice());
        x
    }

    /// Materialize the operator column by column.
    fn to_dense(&self) -> DMatrix<f64> {
        let (m, n) = (self.rows(), self.cols());
        let mut out = DMatrix::zeros(m, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; m];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            out.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        out
    }
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(GsvdError::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

pub type SharedOperator = Arc<dyn LinearOperator>;

/// The matrix pair `(A, B)` with a shared column dimension.
///
/// Callers are responsible for `Null(A) ∩ Null(B) = {0}`; a violation shows up
/// later as [`GsvdError::SingularPencil`].
#[derive(Clone, Debug)]
pub struct MatrixPair {
    pub a: SharedOperator,
    pub b: SharedOperator,
}

impl MatrixPair {
    pub fn new(a: SharedOperator, b: SharedOperator) -> Result<Self> {
        check_len("MatrixPair", a.cols(), b.cols())?;
        Ok(Self { a, b })
    }

    pub fn from_dense(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        Self::new(Arc::new(DenseOperator::new(a)), Arc::new(DenseOperator::new(b)))
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }
}

#[derive(Clone, Debug)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }
    fn cols(&self) -> usize {
        self.matrix.ncols()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Dense
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let xv = DVectorView::from_slice(x, x.len());
        let mut yv = DVectorViewMut::from_slice(y, self.matrix.nrows());
        yv.gemv(1.0, &self.matrix, &xv, 0.0);
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        let yv = DVectorView::from_slice(y, y.len());
        let mut xv = DVectorViewMut::from_slice(x, self.matrix.ncols());
        xv.gemv_tr(1.0, &self.matrix, &yv, 0.0);
    }
    fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.clone()
    }
}

/// Rectangular diagonal matrix; `diag.len() == min(rows, cols)`.
#[derive(Clone, Debug)]
pub struct DiagonalOperator {
    rows: usize,
    cols: usize,
    diag: Vec<f64>,
}

impl DiagonalOperator {
    pub fn square(diag: Vec<f64>) -> Self {
        let n = diag.len();
        Self {
            rows: n,
            cols: n,
            diag,
        }
    }

    pub fn rectangular(rows: usize, cols: usize, diag: Vec<f64>) -> Result<Self> {
        check_len("DiagonalOperator", rows.min(cols), diag.len())?;
        Ok(Self { rows, cols, diag })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }
}

impl LinearOperator for DiagonalOperator {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Diagonal
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (i, d) in self.diag.iter().enumerate() {
            y[i] = d * x[i];
        }
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        for (i, d) in self.diag.iter().enumerate() {
            x[i] = d * y[i];
        }
    }
}

/// The `(n-1) × n` forward difference with rows `[1, -1]`.
#[derive(Clone, Copy, Debug)]
pub struct FirstDifference {
    n: usize,
}

impl FirstDifference {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "first difference needs n >= 2");
        Self { n }
    }
}

impl LinearOperator for FirstDifference {
    fn rows(&self) -> usize {
        self.n - 1
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::DifferenceOperator
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n - 1 {
            y[i] = x[i] - x[i + 1];
        }
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        let m = self.n - 1;
        x[0] = y[0];
        for i in 1..m {
            x[i] = y[i] - y[i - 1];
        }
        x[m] = -y[m - 1];
    }
}

/// `(I - 2ppᵀ) M (I - 2zzᵀ)` with unit `p`, `z`; `None` means identity.
#[derive(Clone, Debug)]
pub struct HouseholderComposed {
    left: Option<DVector<f64>>,
    inner: SharedOperator,
    right: Option<DVector<f64>>,
}

impl HouseholderComposed {
    pub fn new(
        left: Option<DVector<f64>>,
        inner: SharedOperator,
        right: Option<DVector<f64>>,
    ) -> Result<Self> {
        let left = left.map(normalized).transpose()?;
        let right = right.map(normalized).transpose()?;
        if let Some(p) = &left {
            check_len("HouseholderComposed left", inner.rows(), p.len())?;
        }
        if let Some(z) = &right {
            check_len("HouseholderComposed right", inner.cols(), z.len())?;
        }
        Ok(Self { left, inner, right })
    }
}

fn normalized(v: DVector<f64>) -> Result<DVector<f64>> {
    let nrm = v.norm();
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(GsvdError::NotUnit(nrm));
    }
    Ok(v / nrm)
}

pub(crate) fn reflect_slice(z: &DVector<f64>, x: &mut [f64]) {
    let zs = z.as_slice();
    let dot: f64 = zs.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * dot;
    for (xi, zi) in x.iter_mut().zip(zs) {
        *xi -= f * zi;
    }
}

impl LinearOperator for HouseholderComposed {
    fn rows(&self) -> usize {
        self.inner.rows()
    }
    fn cols(&self) -> usize {
        self.inner.cols()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::HouseholderComposed
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match &self.right {
            Some(z) => {
                let mut t = x.to_vec();
                reflect_slice(z, &mut t);
                self.inner.apply_into(&t, y);
            }
            None => self.inner.apply_into(x, y),
        }
        if let Some(p) = &self.left {
            reflect_slice(p, y);
        }
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        match &self.left {
            Some(p) => {
                let mut t = y.to_vec();
                reflect_slice(p, &mut t);
                self.inner.apply_adjoint_into(&t, x);
            }
            None => self.inner.apply_adjoint_into(y, x),
        }
        if let Some(z) = &self.right {
            reflect_slice(z, x);
        }
    }
}

impl LinearOperator for CsrMatrix {
    fn rows(&self) -> usize {
        self.nrows()
    }
    fn cols(&self) -> usize {
        self.ncols()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::CsrSparse
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.mul_into(x, y);
    }
    fn apply_adjoint_into(&self, y: &[f64], x: &mut [f64]) {
        self.tmul_into(y, x);
    }
}
