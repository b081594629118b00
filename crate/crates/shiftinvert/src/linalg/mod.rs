//! Vector and matrix primitives, the shifted operator and the dense
//! verification oracle.

pub mod io;
pub mod matrix;
pub mod oracle;
pub mod shifted;
pub mod vector;

pub use matrix::{RowMatrix, RowSampler, RowView};
pub use oracle::{dense_shifted_solve, SpectrumOracle};
pub use shifted::ShiftedOperator;

use crate::error::Result;

/// AᵀAx
pub fn apply_sigma(m: &RowMatrix, x: &[f64]) -> Result<Vec<f64>> {
    m.apply_sigma(x)
}

/// λx − AᵀAx
pub fn apply_shifted(b: &ShiftedOperator<'_>, x: &[f64]) -> Result<Vec<f64>> {
    b.apply(x)
}

/// xᵀAᵀAx / xᵀx
pub fn rayleigh_quotient(m: &RowMatrix, x: &[f64]) -> Result<f64> {
    m.rayleigh_quotient(x)
}

/// sqrt(xᵀBx)
pub fn b_norm(b: &ShiftedOperator<'_>, x: &[f64]) -> Result<f64> {
    b.b_norm(x)
}

/// Exact potential through the oracle's eigenbasis.
pub fn potential_g(b: &ShiftedOperator<'_>, oracle: &SpectrumOracle, x: &[f64]) -> Result<f64> {
    oracle.potential_g(b.shift(), x)
}
