//! Median-of-means Rayleigh quotient estimates.

use serde::{Deserialize, Serialize};

use super::Stream;
use crate::error::{Error, Result};
use crate::linalg::vector::{ceil_u64, dot, median};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RayleighPlan {
    /// Samples per batch, `⌈4v/ε²⌉`.
    pub k: u64,
    /// Batches, `⌈18 ln(1/p)⌉`.
    pub m: u64,
}

impl RayleighPlan {
    pub fn new(epsilon: f64, p: f64, var_hint: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidConfig(format!("p must lie in (0, 1), got {p}")));
        }
        if !(var_hint > 0.0) || !var_hint.is_finite() {
            return Err(Error::InvalidConfig(format!("variance hint must be positive, got {var_hint}")));
        }
        Ok(RayleighPlan {
            k: ceil_u64(4.0 * var_hint / (epsilon * epsilon)).max(1),
            m: ceil_u64(18.0 * (1.0 / p).ln()).max(1),
        })
    }

    pub fn samples(&self) -> u64 {
        self.k * self.m
    }
}

/// Median over `m` batches of the batch means of `(xᵀa)²`. Within
/// `ελ₁` of `xᵀΣx` with probability at least `1 − p` for unit `x`.
pub fn estimate_rayleigh(
    stream: &mut Stream<'_>,
    x: &[f64],
    epsilon: f64,
    p: f64,
    var_hint: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    Error::check_dim(stream.dim(), x.len())?;
    let plan = RayleighPlan::new(epsilon, p, var_hint)?;
    let mut a = vec![0.0; x.len()];
    let mut means = Vec::with_capacity(plan.m as usize);
    for _ in 0..plan.m {
        let mut sum = 0.0;
        for _ in 0..plan.k {
            stream.draw_into(rng, &mut a)?;
            let t = dot(x, &a);
            sum += t * t;
        }
        means.push(sum / plan.k as f64);
    }
    Ok(median(&mut means))
}
