//! Top eigenvector of `AᵀA` or of a covariance `E[aaᵀ]` by the
//! shift-and-invert power method.
//!
//! Each power step applies `(λI − Σ)⁻¹` approximately, through an SVRG
//! solver whose cost depends on the stable rank of `A` rather than on
//! `nnz(A)` times the inverse gap. Around the solvers sit a shift estimator,
//! a burn-in and warm-start driver with acceptance tests, a gap-free
//! variant, and a streaming pipeline built on median-of-means Rayleigh
//! estimates.

pub mod budget;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod power;
pub mod rng;
pub mod shift;
pub mod streaming;
pub mod svrg;
pub mod synthetic;

pub use budget::Meter;
pub use error::{Error, Result};
pub use linalg::{RowMatrix, ShiftedOperator, SpectrumOracle};
pub use rng::SeededRng;
