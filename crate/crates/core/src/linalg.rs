//! Cholesky factorization with a diagonal nugget. All solves in the crate go
//! through [`SpdFactor`]; no explicit inverses are formed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Default nugget, relative to the largest diagonal entry.
pub const DEFAULT_NUGGET: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl SpdFactor {
    /// Factorizes `a + nugget · max(diag(a)) · I`.
    pub fn new(mut a: DMatrix<f64>, nugget: f64, what: &'static str) -> Result<Self> {
        let n = a.nrows();
        let scale = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        for i in 0..n {
            a[(i, i)] += nugget * scale;
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular { what });
        }
        let chol = Cholesky::new(a).ok_or(Error::Singular { what })?;
        let l = chol.l_dirty();
        let log_det = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::Singular { what });
        }
        Ok(Self { chol, log_det })
    }

    /// Tries nuggets `first, 10·first, ...` (starting from 1e-16 after a zero `first`) up to `last` and keeps the first
    /// that factorizes. Returns the factor and the nugget used.
    pub fn with_jitter(a: DMatrix<f64>, first: f64, last: f64, what: &'static str) -> Result<(Self, f64)> {
        let mut nugget = first;
        loop {
            match Self::new(a.clone(), nugget, what) {
                Ok(f) => return Ok((f, nugget)),
                Err(e) if nugget >= last => return Err(e),
                Err(_) => nugget = if nugget > 0.0 { nugget * 10.0 } else { 1e-16 },
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `bᵀ A⁻¹ b` via one triangular solve.
    pub fn quad_form(&self, b: &DVector<f64>) -> f64 {
        let mut y = b.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut y);
        y.norm_squared()
    }

    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_log_det() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = SpdFactor::new(a.clone(), 0.0, "test").unwrap();
        assert!((f.log_det() - 8.0f64.ln()).abs() < 1e-12);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = f.solve(&b);
        assert!((&a * &x - &b).norm() < 1e-12);
        assert!((f.quad_form(&b) - b.dot(&x)).abs() < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(SpdFactor::new(a.clone(), 0.0, "test").is_err());
        assert!(SpdFactor::new(a.clone(), 1e-10, "test").is_ok());
        let (_, used) = SpdFactor::with_jitter(a.clone(), 0.0, 1e-8, "test").unwrap();
        assert!(used > 0.0 && used <= 1e-8);
        assert!(SpdFactor::with_jitter(-a, 1e-16, 1e-8, "test").is_err());
    }
}
