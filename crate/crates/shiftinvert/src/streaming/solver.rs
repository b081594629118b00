//! Streaming SVRG for `Bx = b` with `B = λI − Σ`, using per-sample
//! components `ψ_a(x) = ½xᵀ(λI − aaᵀ)x − bᵀx`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Stream;
use crate::error::{Error, Result};
use crate::linalg::vector::{ceil_u64, dot, norm};
use crate::rng::SeededRng;

pub const C2: f64 = 1.0 / 44.0;
pub const C3_START: f64 = 1.0 / 20.0;

/// Parameters of one with-initial-point solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamingParams {
    pub lambda: f64,
    pub lambda1: f64,
    pub variance: f64,
    pub mu: f64,
    /// `S̄ = λ + v·λ₁²/μ`
    pub s_bar: f64,
    /// Effective step `(c₂/8)/S̄`.
    pub step: f64,
    /// `⌈S̄/(μc₂²)⌉`
    pub m: u64,
    /// `max(⌈S̄/(μc₂)⌉, ⌈vλ₁²/(μ²c₃)⌉)`
    pub k: u64,
    pub c2: f64,
    pub c3: f64,
}

impl StreamingParams {
    /// `lambda1` may be any upper estimate of `λ₁` below `λ`.
    pub fn new(lambda: f64, lambda1: f64, variance: f64, c2: f64, c3: f64) -> Result<Self> {
        let mu = lambda - lambda1;
        if !(mu > 0.0) || !(lambda1 > 0.0) {
            return Err(Error::InvalidShift(format!(
                "shift {lambda} must exceed the eigenvalue estimate {lambda1} > 0"
            )));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidConfig(format!("variance must be positive, got {variance}")));
        }
        if !(c2 > 0.0 && c2 < 1.0 && c3 > 0.0 && c3 < 1.0) {
            return Err(Error::InvalidConfig(format!("c2 = {c2} and c3 = {c3} must lie in (0, 1)")));
        }
        let vl = variance * lambda1 * lambda1;
        let s_bar = lambda + vl / mu;
        Ok(StreamingParams {
            lambda,
            lambda1,
            variance,
            mu,
            s_bar,
            step: c2 / 8.0 / s_bar,
            m: ceil_u64(s_bar / (mu * c2 * c2)).max(1),
            k: ceil_u64(s_bar / (mu * c2)).max(ceil_u64(vl / (mu * mu * c3))).max(1),
            c2,
            c3,
        })
    }

    pub fn with_c3(&self, c3: f64) -> Result<Self> {
        Self::new(self.lambda, self.lambda1, self.variance, self.c2, c3)
    }
}

/// One streaming SVRG step: an anchor gradient from `k` samples at `x0`,
/// then `m̃ ~ U{1..m}` corrected steps
/// `x ← x − h[(λI − ããᵀ)(x − x0) + g]`, each on a fresh sample.
/// Holds four length-`d` buffers: `x0`, `g`, `x` and the sample.
#[allow(clippy::too_many_arguments)]
pub fn streaming_svrg_step(
    stream: &mut Stream<'_>,
    lambda: f64,
    x0: &[f64],
    rhs: &[f64],
    step: f64,
    k: u64,
    m: u64,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    let d = stream.dim();
    Error::check_dim(d, x0.len())?;
    Error::check_dim(d, rhs.len())?;
    if k == 0 || m == 0 || !(step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "streaming step needs positive k, m and step, got {k}, {m}, {step}"
        )));
    }
    let mut a = vec![0.0; d];
    // g = λx0 − (1/k)Σ a(aᵀx0) − b
    let mut g: Vec<f64> = x0.iter().zip(rhs).map(|(x, b)| lambda * x - b).collect();
    let inv_k = 1.0 / k as f64;
    for _ in 0..k {
        stream.draw_into(rng, &mut a)?;
        let s = dot(&a, x0) * inv_k;
        for (gi, ai) in g.iter_mut().zip(&a) {
            *gi -= s * ai;
        }
    }
    let m_tilde = rng.random_range(1..=m);
    let bound = 1e12 * (norm(x0) + norm(rhs) / (lambda * step).max(f64::MIN_POSITIVE)).max(1.0);
    let mut x = x0.to_vec();
    for t in 0..m_tilde {
        stream.draw_into(rng, &mut a)?;
        let s = dot(&a, &x) - dot(&a, x0);
        for (((xi, x0i), ai), gi) in x.iter_mut().zip(x0).zip(&a).zip(&g) {
            *xi -= step * (lambda * (*xi - x0i) - ai * s + gi);
        }
        if !s.is_finite() || (t % 1024 == 0 && !(norm(&x) <= bound)) {
            return Err(Error::Diverged {
                steps: t,
                last_finite: x0.to_vec(),
            });
        }
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged {
            steps: m_tilde,
            last_finite: x0.to_vec(),
        });
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamingSolve {
    pub x: Vec<f64>,
    pub repetitions: u32,
    pub samples: u64,
}

/// Repetitions `max(1, ⌈log₂(1/c)⌉)` needed for accuracy `c`.
pub fn repetitions(c: f64) -> u32 {
    ceil_u64((1.0 / c).log2().max(0.0)).max(1) as u32
}

/// Solves `Bx = b` for unit `b` from `x₀ = 0` with repeated streaming
/// SVRG steps, `c₂ = 1/44`, and `c₃` starting at `1/20` and halving each
/// repetition, so `E‖x − B⁻¹b‖_B² ≤ 10c·λ₁(B⁻¹)`.
pub fn streaming_solve(
    stream: &mut Stream<'_>,
    lambda: f64,
    lambda1_hat: f64,
    variance: f64,
    rhs_unit: &[f64],
    c: f64,
    rng: &mut SeededRng,
) -> Result<StreamingSolve> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidConfig(format!("accuracy c must lie in (0, 1], got {c}")));
    }
    let nb = norm(rhs_unit);
    if (nb - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("right-hand side must be a unit vector, norm {nb}")));
    }
    let start = stream.samples_used();
    let base = StreamingParams::new(lambda, lambda1_hat, variance, C2, C3_START)?;
    let reps = repetitions(c);
    let mut x = vec![0.0; rhs_unit.len()];
    let mut c3 = C3_START;
    for _ in 0..reps {
        let p = base.with_c3(c3)?;
        x = streaming_svrg_step(stream, lambda, &x, rhs_unit, p.step, p.k, p.m, rng)?;
        c3 *= 0.5;
    }
    Ok(StreamingSolve {
        x,
        repetitions: reps,
        samples: stream.samples_used() - start,
    })
}
