//! The shifted operator `B = λI − AᵀA`.

use super::matrix::RowMatrix;
use super::vector::{axpy, dot, norm_sq};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct ShiftedOperator<'a> {
    matrix: &'a RowMatrix,
    shift: f64,
}

impl<'a> ShiftedOperator<'a> {
    pub fn new(matrix: &'a RowMatrix, shift: f64) -> Result<Self> {
        if !shift.is_finite() || shift <= 0.0 {
            return Err(Error::InvalidShift(format!(
                "shift must be finite and positive, got {shift}"
            )));
        }
        Ok(ShiftedOperator { matrix, shift })
    }

    pub fn matrix(&self) -> &'a RowMatrix {
        self.matrix
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn d(&self) -> usize {
        self.matrix.d()
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    /// `p_i = ‖a_i‖² / ‖A‖_F²`
    pub fn probability(&self, i: usize) -> f64 {
        self.matrix.probability(i)
    }

    /// λx − Aᵀ(Ax)
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.matrix.apply_sigma(x)?;
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.shift * xi - *o;
        }
        Ok(out)
    }

    /// xᵀBx computed as λ‖x‖² − ‖Ax‖².
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let ax = self.matrix.mul_vec(x)?;
        Ok(self.shift * norm_sq(x) - norm_sq(&ax))
    }

    /// `sqrt(xᵀBx)`; fails when the form is negative beyond roundoff.
    pub fn b_norm(&self, x: &[f64]) -> Result<f64> {
        let q = self.quadratic_form(x)?;
        let tol = 1e-10 * self.shift * norm_sq(x);
        if q < -tol {
            return Err(Error::NegativeBNorm {
                value: q,
                shift: self.shift,
            });
        }
        Ok(q.max(0.0).sqrt())
    }

    /// Full gradient `Bx − c` of `f(x) = ½xᵀBx − cᵀx`.
    pub fn gradient(&self, x: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.d(), rhs.len())?;
        let mut g = self.apply(x)?;
        axpy(-1.0, rhs, &mut g);
        Ok(g)
    }

    /// `f(x) = ½xᵀBx − cᵀx`
    pub fn objective(&self, x: &[f64], rhs: &[f64]) -> Result<f64> {
        Error::check_dim(self.d(), rhs.len())?;
        Ok(0.5 * self.quadratic_form(x)? - dot(rhs, x))
    }
}
