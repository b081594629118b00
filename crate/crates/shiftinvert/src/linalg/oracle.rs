//! Dense eigendecomposition used to verify the iterative methods.
//!
//! Production paths never depend on it. Tests, the exact-dense solver and
//! oracle-instrumented traces do.

use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::RowMatrix;
use super::vector::{dot, norm};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SpectrumOracle {
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
}

impl SpectrumOracle {
    pub fn from_matrix(m: &RowMatrix) -> Result<Self> {
        Self::from_symmetric(m.gram())
    }

    /// Eigenpairs of a symmetric matrix, sorted by decreasing eigenvalue.
    pub fn from_symmetric(s: DMatrix<f64>) -> Result<Self> {
        if s.nrows() != s.ncols() {
            return Err(Error::DimensionMismatch {
                expected: s.nrows(),
                found: s.ncols(),
            });
        }
        let d = s.nrows();
        let eig = SymmetricEigen::new(s);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        Ok(SpectrumOracle {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn d(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.eigenvectors[i]
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn v1(&self) -> &[f64] {
        &self.eigenvectors[0]
    }

    /// `(λ₁ − λ₂)/λ₁`; one for d = 1.
    pub fn gap(&self) -> f64 {
        if self.d() < 2 {
            return 1.0;
        }
        (self.eigenvalues[0] - self.eigenvalues[1]) / self.eigenvalues[0]
    }

    /// `αᵢ = vᵢᵀx`
    pub fn coefficients(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.d(), x.len())?;
        Ok(self.eigenvectors.iter().map(|v| dot(v, x)).collect())
    }

    fn check_shift(&self, shift: f64) -> Result<()> {
        if shift <= self.lambda1() {
            return Err(Error::InvalidShift(format!(
                "shift {shift} is not above the top eigenvalue {}",
                self.lambda1()
            )));
        }
        Ok(())
    }

    /// `‖P_{v₁⊥}x‖_B / ‖P_{v₁}x‖_B` through the eigenbasis expansion.
    pub fn potential_g(&self, shift: f64, x: &[f64]) -> Result<f64> {
        self.check_shift(shift)?;
        let a = self.coefficients(x)?;
        if a[0].abs() <= 1e-14 * norm(x) {
            return Err(Error::OrthogonalStart);
        }
        let num: f64 = (1..self.d())
            .map(|i| a[i] * a[i] * (shift - self.eigenvalues[i]))
            .sum();
        let den = a[0] * a[0] * (shift - self.eigenvalues[0]);
        Ok((num / den).sqrt())
    }

    /// Gap-free potential: only eigenvalues below `(1 − ε/2)λ₁` enter the
    /// numerator, and the top cluster forms the denominator.
    pub fn potential_g_bar(&self, shift: f64, epsilon: f64, x: &[f64]) -> Result<f64> {
        self.check_shift(shift)?;
        let a = self.coefficients(x)?;
        let cut = (1.0 - 0.5 * epsilon) * self.lambda1();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, ai) in a.iter().enumerate() {
            let term = ai * ai * (shift - self.eigenvalues[i]);
            if self.eigenvalues[i] < cut {
                num += term;
            } else {
                den += term;
            }
        }
        if den <= 0.0 {
            return Err(Error::OrthogonalStart);
        }
        Ok((num / den).sqrt())
    }

    /// Exact `B⁻¹x` with `B = λI − Σ`.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_shift(shift)?;
        let a = self.coefficients(rhs)?;
        let mut out = vec![0.0; self.d()];
        for (i, ai) in a.iter().enumerate() {
            let c = ai / (shift - self.eigenvalues[i]);
            for (o, v) in out.iter_mut().zip(&self.eigenvectors[i]) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// `xᵀBx` through the eigenbasis.
    pub fn b_norm_sq(&self, shift: f64, x: &[f64]) -> Result<f64> {
        let a = self.coefficients(x)?;
        Ok(a.iter()
            .zip(&self.eigenvalues)
            .map(|(ai, l)| ai * ai * (shift - l))
            .sum())
    }

    /// `λ₁(B⁻¹) = 1/(λ − λ₁)`
    pub fn top_inverse_eigenvalue(&self, shift: f64) -> f64 {
        1.0 / (shift - self.lambda1())
    }

    /// `|v₁ᵀx| / ‖x‖`
    pub fn alignment(&self, x: &[f64]) -> f64 {
        dot(self.v1(), x).abs() / norm(x)
    }
}

/// Eigendecomposition-free dense solve of `(λI − AᵀA)x = rhs` via Cholesky.
pub fn dense_shifted_solve(gram: &DMatrix<f64>, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let d = gram.nrows();
    Error::check_dim(d, rhs.len())?;
    let b = DMatrix::<f64>::identity(d, d) * shift - gram;
    let chol = b
        .cholesky()
        .ok_or_else(|| Error::InvalidShift(format!("λI − AᵀA not positive definite at λ = {shift}")))?;
    let x = chol.solve(&nalgebra::DVector::from_column_slice(rhs));
    Ok(x.iter().copied().collect())
}
