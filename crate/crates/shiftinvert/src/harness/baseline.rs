use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vector::normalized;
use crate::linalg::RowMatrix;
use crate::power::random_init;
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub x: Vec<f64>,
    /// Rayleigh quotient after each iteration.
    pub quotients: Vec<f64>,
    /// Passes over `A`, two per iteration.
    pub matvecs: u64,
}

/// Power iteration `x ← AᵀAx/‖AᵀAx‖` from `x0`, or a Gaussian start.
pub fn baseline_power_method(
    m: &RowMatrix,
    iters: usize,
    x0: Option<&[f64]>,
    rng: &mut SeededRng,
) -> Result<BaselineResult> {
    if iters == 0 {
        return Err(Error::InvalidConfig("baseline needs at least one iteration".into()));
    }
    let mut x = match x0 {
        Some(v) => normalized(v)?,
        None => random_init(m.d(), rng)?,
    };
    let mut quotients = Vec::with_capacity(iters);
    for _ in 0..iters {
        let y = m.apply_sigma(&x)?;
        match normalized(&y) {
            Ok(u) => x = u,
            Err(Error::ZeroVector) => {}
            Err(e) => return Err(e),
        }
        quotients.push(m.rayleigh_quotient(&x)?);
    }
    Ok(BaselineResult {
        x,
        quotients,
        matvecs: 2 * iters as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::synthetic::diag_spectrum;

    #[test]
    fn eigenvector_start_is_fixed() {
        let p = diag_spectrum(&[1.0, 0.5]).unwrap();
        let r = baseline_power_method(&p.matrix, 3, Some(&[1.0, 0.0]), &mut seeded(0)).unwrap();
        assert!(r.quotients.iter().all(|&q| (q - 1.0).abs() < 1e-15));
    }

    #[test]
    fn squared_cosine_recurrence() {
        // tan θ shrinks by λ₂/λ₁ = 1/2 per step, so 1 − q = (1−½)·t²/(1+t²).
        let p = diag_spectrum(&[1.0, 0.5]).unwrap();
        let r = baseline_power_method(&p.matrix, 6, Some(&[1.0, 1.0]), &mut seeded(0)).unwrap();
        for (k, q) in r.quotients.iter().enumerate() {
            let t2 = 0.25f64.powi(k as i32 + 1);
            let expect = 1.0 - 0.5 * t2 / (1.0 + t2);
            assert!((q - expect).abs() < 1e-14, "{k}: {q} vs {expect}");
        }
    }
}
