//! Small dense Hermitian linear algebra helpers shared by the combining and
//! fusion stages.
//!
//! Every linear system in the simulator has a Hermitian positive-definite
//! left-hand side (regularized Gram matrices), so Cholesky is used throughout.
//! Solutions are verified against a relative residual bound and failures are
//! reported as numerical errors instead of silently returning garbage.

use nalgebra::linalg::{Cholesky, SymmetricEigen};
use nalgebra::Dyn;

use crate::error::{Result, SimError};
use crate::{C64, CMatrix, CVector};

/// Accepted relative residual for a linear solve: `||Ax - b||` may not exceed
/// this factor times `||A||_F ||x|| + ||b||`.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// Cholesky of a Hermitian matrix, `None` unless the factor is valid for a
/// positive-definite input.
///
/// nalgebra's complex Cholesky never rejects a negative pivot: it takes the
/// complex square root and carries on, silently producing a factor with
/// `L L^H != A`. A Hermitian positive-definite input always yields a factor
/// whose diagonal is real and strictly positive, so that is what we verify.
fn checked_cholesky(a: &CMatrix) -> Option<Cholesky<C64, Dyn>> {
    let chol = Cholesky::new(a.clone())?;
    for i in 0..a.nrows() {
        let pivot = chol.l_dirty()[(i, i)];
        // Demanding a finite positive real part also rejects NaN pivots.
        let real_positive = pivot.re.is_finite() && pivot.re > 0.0;
        if !real_positive || pivot.im.abs() > 1e-8 * pivot.re {
            return None;
        }
    }
    Some(chol)
}

/// Cholesky factorization of a Hermitian positive-definite matrix, retained
/// together with the original matrix so each solve can be residual-checked.
pub struct HermitianSolver {
    a: CMatrix,
    a_norm: f64,
    chol: Cholesky<C64, Dyn>,
}

impl HermitianSolver {
    /// Factorizes `a`. Fails if `a` is not (numerically) positive definite.
    pub fn new(a: CMatrix) -> Result<Self> {
        let a_norm = a.norm();
        let chol = checked_cholesky(&a).ok_or_else(|| {
            SimError::Numerical(format!(
                "Cholesky failed on {}x{} matrix (not positive definite)",
                a.nrows(),
                a.ncols()
            ))
        })?;
        Ok(Self { a, a_norm, chol })
    }

    /// Solves `A x = b` and checks the residual.
    pub fn solve(&self, b: &CVector) -> Result<CVector> {
        let x = self.chol.solve(b);
        let residual = (&self.a * &x - b).norm();
        let scale = self.a_norm * x.norm() + b.norm();
        if residual > SOLVE_RESIDUAL_TOL * scale {
            return Err(SimError::Numerical(format!(
                "solve residual {residual:.3e} exceeds {SOLVE_RESIDUAL_TOL:.0e} * {scale:.3e}"
            )));
        }
        Ok(x)
    }

    /// Solves `A X = B` column-wise and checks the aggregate residual.
    pub fn solve_matrix(&self, b: &CMatrix) -> Result<CMatrix> {
        let x = self.chol.solve(b);
        let residual = (&self.a * &x - b).norm();
        let scale = self.a_norm * x.norm() + b.norm();
        if residual > SOLVE_RESIDUAL_TOL * scale {
            return Err(SimError::Numerical(format!(
                "matrix solve residual {residual:.3e} exceeds {SOLVE_RESIDUAL_TOL:.0e} * {scale:.3e}"
            )));
        }
        Ok(x)
    }

    /// The factored matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.a
    }

    /// Dimension of the factored matrix.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Solves a single Hermitian positive-definite system `A x = b`.
pub fn hermitian_solve(a: CMatrix, b: &CVector) -> Result<CVector> {
    HermitianSolver::new(a)?.solve(b)
}

/// Factor `F` with `F F^H = r` for a Hermitian positive-semidefinite `r`.
///
/// Uses Cholesky when `r` is definite and falls back to an eigendecomposition
/// with negative eigenvalues clamped to zero otherwise, so rank-deficient
/// correlation matrices (common under small angular spread) are handled.
pub fn psd_factor(r: &CMatrix) -> Result<CMatrix> {
    debug_assert!(hermitian_defect(r) <= 1e-10 * (1.0 + r.norm()));
    if let Some(chol) = checked_cholesky(r) {
        return Ok(chol.unpack());
    }
    let eig = SymmetricEigen::new(r.clone());
    let trace = r.trace().re;
    let mut factor = eig.eigenvectors;
    for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -1e-10 * trace.max(1.0) {
            return Err(SimError::Numerical(format!(
                "matrix is not positive semidefinite: eigenvalue {lambda:.3e} with trace {trace:.3e}"
            )));
        }
        let s = lambda.max(0.0).sqrt();
        factor.column_mut(c).scale_mut(s);
    }
    Ok(factor)
}

/// Largest deviation of `m` from its own conjugate transpose.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `x^H M x`, which is real for Hermitian `M`; the imaginary part is dropped.
pub fn quadratic_form(x: &CVector, m: &CMatrix) -> f64 {
    (x.adjoint() * m * x)[(0, 0)].re
}

/// Relative closeness of two non-negative scalars: `|a - b| <= tol * max(a, b)`,
/// with exact zero matching exact zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        return true;
    }
    (a - b).abs() <= tol * scale
}
