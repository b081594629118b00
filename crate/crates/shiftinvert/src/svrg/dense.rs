//! Exact dense solver, for tests and small instances.

use std::cell::RefCell;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{LinearSolver, SolveOutcome};
use crate::budget::Meter;
use crate::error::{Error, Result};
use crate::linalg::{RowMatrix, ShiftedOperator};
use crate::rng::SeededRng;

/// Solves `(λI − AᵀA)x = c` by Cholesky; the factor for the most recent
/// shift is cached.
pub struct DenseSolver {
    gram: DMatrix<f64>,
    cache: RefCell<Option<(u64, Cholesky<f64, Dyn>)>>,
}

impl DenseSolver {
    pub fn new(matrix: &RowMatrix) -> Self {
        DenseSolver {
            gram: matrix.gram(),
            cache: RefCell::new(None),
        }
    }

    pub fn solve_exact(&self, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let d = self.gram.nrows();
        Error::check_dim(d, rhs.len())?;
        let mut cache = self.cache.borrow_mut();
        let stale = !matches!(&*cache, Some((bits, _)) if *bits == shift.to_bits());
        if stale {
            let b = DMatrix::<f64>::identity(d, d) * shift - &self.gram;
            let chol = b.cholesky().ok_or_else(|| {
                Error::InvalidShift(format!("λI − AᵀA not positive definite at λ = {shift}"))
            })?;
            *cache = Some((shift.to_bits(), chol));
        }
        let (_, chol) = cache.as_ref().expect("factor cached above");
        let x = chol.solve(&DVector::from_column_slice(rhs));
        Ok(x.iter().copied().collect())
    }
}

impl LinearSolver for DenseSolver {
    fn name(&self) -> &'static str {
        "exact-dense"
    }

    fn solve(
        &self,
        op: &ShiftedOperator<'_>,
        rhs: &[f64],
        x0: &[f64],
        _target_ratio: f64,
        _rng: &mut SeededRng,
        meter: &Meter,
    ) -> Result<SolveOutcome> {
        Error::check_dim(op.d(), x0.len())?;
        meter.check_deadline()?;
        Ok(SolveOutcome {
            solution: self.solve_exact(op.shift(), rhs)?,
            epochs_run: 0,
            grad_evals: 0,
            est_error_b: Some(0.0),
        })
    }
}
