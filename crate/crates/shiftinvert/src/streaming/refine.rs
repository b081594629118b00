//! Online warm-start refinement, a pilot variance estimate, and Oja's
//! iteration as a baseline.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::rayleigh::{estimate_rayleigh, RayleighPlan};
use super::solver::{repetitions, streaming_solve, StreamingParams, C2, C3_START};
use super::Stream;
use crate::error::{Error, Result};
use crate::linalg::vector::{ceil_u64, dot, normalized};
use crate::power::{warm_start_round, Phase, PowerState, RunStatus};
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub epsilon: f64,
    pub lambda: f64,
    pub lambda1_hat: f64,
    /// Relative eigengap, or a lower estimate of it.
    pub gap: f64,
    /// `v(D)` or an upper estimate.
    pub variance: f64,
    /// Solve accuracy `c = c_scale·c₁(i)²`.
    pub c_scale: f64,
    /// Overrides the computed round count.
    pub rounds: Option<usize>,
}

impl OnlineConfig {
    pub fn new(epsilon: f64, lambda: f64, lambda1_hat: f64, gap: f64, variance: f64) -> Self {
        OnlineConfig {
            epsilon,
            lambda,
            lambda1_hat,
            gap,
            variance,
            c_scale: 1e-7,
            rounds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.gap > 0.0 && self.gap <= 1.0) {
            return Err(Error::InvalidConfig(format!("gap must lie in (0, 1], got {}", self.gap)));
        }
        if self.epsilon >= self.gap {
            return Err(Error::GapFreeRequired {
                epsilon: self.epsilon,
                gap: self.gap,
            });
        }
        if !(self.lambda > self.lambda1_hat && self.lambda1_hat > 0.0) {
            return Err(Error::InvalidShift(format!(
                "need λ = {} > λ̂₁ = {} > 0",
                self.lambda, self.lambda1_hat
            )));
        }
        if !(self.c_scale > 0.0 && self.c_scale <= 1.0) {
            return Err(Error::InvalidConfig(format!("c_scale must lie in (0, 1], got {}", self.c_scale)));
        }
        if !(self.variance > 0.0) {
            return Err(Error::InvalidConfig(format!("variance must be positive, got {}", self.variance)));
        }
        Ok(())
    }

    /// Final potential level `sqrt(ε/gap)/√10`.
    pub fn target_potential(&self) -> f64 {
        (self.epsilon / self.gap).sqrt() / 10f64.sqrt()
    }

    /// Round count `R = ⌈log₅(gap/ε)⌉ + 2` and ratio `ρ = (ε/gap)^{1/(2R)}`
    /// of the `c₁` schedule, so the last round has `c₁ = sqrt(ε/gap)/√10`.
    /// `ρ ≥ 1/5` always, which keeps the per-round contraction valid.
    pub fn schedule(&self) -> (usize, f64) {
        let ratio = self.gap / self.epsilon;
        let auto = ceil_u64((ratio.ln() / 5f64.ln()).max(0.0)) as usize + 2;
        let rounds = self.rounds.unwrap_or(auto).max(1);
        let rho = (1.0 / ratio).powf(0.5 / rounds as f64).max(0.2);
        (rounds, rho)
    }

    /// `c₁(i) = ρⁱ/√10` for rounds `i = 1..R`.
    pub fn c1(&self, round: usize) -> f64 {
        let (_, rho) = self.schedule();
        rho.powi(round as i32) / 10f64.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineTheory {
    pub rounds: usize,
    pub rho: f64,
    pub target_potential: f64,
    /// Failure probability per Rayleigh estimate, `1/(4R)`.
    pub p: f64,
    /// Rayleigh tolerance relative to `λ₁`, `(λ − λ̂₁)/(30λ̂₁)`.
    pub rayleigh_tolerance: f64,
    pub rayleigh_plan: RayleighPlan,
    pub solve_accuracy: Vec<f64>,
    pub solver: StreamingParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub status: RunStatus,
    pub error: Option<String>,
    pub x: Vec<f64>,
    pub rounds: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub samples_used: u64,
    pub non_streaming: bool,
    /// `xᵀΣx` on the true covariance, when the oracle knows it.
    pub true_quotient: Option<f64>,
    pub theory: OnlineTheory,
}

/// Warm-start rounds over a stream: each applies `B⁻¹` with the streaming
/// solver and accepts through median-of-means Rayleigh estimates.
pub fn online_refine(
    stream: &mut Stream<'_>,
    x0: &[f64],
    cfg: &OnlineConfig,
    rng: &mut SeededRng,
) -> Result<OnlineReport> {
    cfg.validate()?;
    Error::check_dim(stream.dim(), x0.len())?;
    let (rounds, rho) = cfg.schedule();
    let p = 1.0 / (4.0 * rounds as f64);
    let tol = ((cfg.lambda - cfg.lambda1_hat) / (30.0 * cfg.lambda1_hat)).min(1.0);
    let accuracy: Vec<f64> = (1..=rounds)
        .map(|i| (cfg.c_scale * cfg.c1(i).powi(2)).min(1.0))
        .collect();
    let theory = OnlineTheory {
        rounds,
        rho,
        target_potential: cfg.target_potential(),
        p,
        rayleigh_tolerance: tol,
        rayleigh_plan: RayleighPlan::new(tol, p, cfg.variance)?,
        solve_accuracy: accuracy.clone(),
        solver: StreamingParams::new(cfg.lambda, cfg.lambda1_hat, cfg.variance, C2, C3_START)?,
    };
    let start = stream.samples_used();
    let mut state = PowerState::new(x0.to_vec(), cfg.lambda, cfg.lambda1_hat, Phase::WarmStart)?;

    let outcome = {
        let shared = RefCell::new((&mut *stream, &mut *rng));
        let mut run = || -> Result<()> {
            for c in &accuracy {
                let mut solve = |x: &[f64]| -> Result<Vec<f64>> {
                    let mut g = shared.borrow_mut();
                    let (s, r) = &mut *g;
                    Ok(streaming_solve(s, cfg.lambda, cfg.lambda1_hat, cfg.variance, x, *c, r)?.x)
                };
                let mut quot = |x: &[f64]| -> Result<f64> {
                    let mut g = shared.borrow_mut();
                    let (s, r) = &mut *g;
                    estimate_rayleigh(s, x, tol, p, cfg.variance, r)
                };
                let out = warm_start_round(&mut state, &mut solve, &mut quot)?;
                log::debug!(
                    "online round {}: accepted {} ({:?})",
                    state.round,
                    out.accepted,
                    out.rejection
                );
            }
            Ok(())
        };
        run()
    };
    let (status, error) = match outcome {
        Ok(()) => (RunStatus::Completed, None),
        Err(e @ (Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::DimensionMismatch { .. })) => {
            return Err(e)
        }
        Err(e) => {
            let s = match e {
                Error::SampleCap { .. } | Error::BudgetExceeded(_) => RunStatus::BudgetExceeded,
                Error::Deadline => RunStatus::Deadline,
                _ => RunStatus::Failed,
            };
            (s, Some(e.to_string()))
        }
    };
    let true_quotient = stream.truth().map(|t| t.quotient(&state.x));
    Ok(OnlineReport {
        status,
        error,
        rounds: state.round,
        accepted: state.accepted_count,
        rejected: state.rejected_count,
        samples_used: stream.samples_used() - start,
        non_streaming: stream.non_streaming(),
        true_quotient,
        x: state.x,
        theory,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// `‖(1/N)Σ‖a‖²aaᵀ‖₂/λ̂₁²`
    pub variance: f64,
    /// Top eigenpair of the pilot covariance.
    pub lambda1: f64,
    pub v1: Vec<f64>,
    pub pilot: usize,
}

/// Estimates `v(D)` from a pilot of `pilot` draws, `10d` by default.
pub fn estimate_variance(
    stream: &mut Stream<'_>,
    pilot: Option<usize>,
    rng: &mut SeededRng,
) -> Result<VarianceEstimate> {
    let d = stream.dim();
    let n = pilot.unwrap_or(10 * d).max(1);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut fourth = DMatrix::<f64>::zeros(d, d);
    let mut a = vec![0.0; d];
    for _ in 0..n {
        stream.draw_into(rng, &mut a)?;
        let v = DVector::from_column_slice(&a);
        let outer = &v * v.transpose();
        fourth += &outer * v.norm_squared();
        cov += outer;
    }
    cov /= n as f64;
    fourth /= n as f64;
    let top = |m: DMatrix<f64>| {
        let e = SymmetricEigen::new(m);
        let i = e.eigenvalues.imax();
        (e.eigenvalues[i], e.eigenvectors.column(i).iter().copied().collect::<Vec<f64>>())
    };
    let (lambda1, v1) = top(cov);
    if !(lambda1 > 0.0) {
        return Err(Error::EstimationFailed("pilot covariance is zero".into()));
    }
    Ok(VarianceEstimate {
        variance: top(fourth).0 / (lambda1 * lambda1),
        lambda1,
        v1,
        pilot: n,
    })
}

/// Oja's iteration `x ← normalize(x + η_t·a(aᵀx))` with
/// `η_t = eta0/(t + t0)`.
pub fn oja(
    stream: &mut Stream<'_>,
    x0: &[f64],
    steps: u64,
    eta0: f64,
    t0: f64,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    Error::check_dim(stream.dim(), x0.len())?;
    let mut x = normalized(x0)?;
    let mut a = vec![0.0; x.len()];
    for t in 0..steps {
        stream.draw_into(rng, &mut a)?;
        let eta = eta0 / (t as f64 + t0);
        let s = eta * dot(&a, &x);
        for (xi, ai) in x.iter_mut().zip(&a) {
            *xi += s * ai;
        }
        if t % 64 == 63 {
            x = normalized(&x)?;
        }
    }
    normalized(&x)
}

/// Samples one streaming solve of accuracy `c` will draw, for planning.
pub fn solve_sample_count(lambda: f64, lambda1_hat: f64, variance: f64, c: f64) -> Result<u64> {
    let base = StreamingParams::new(lambda, lambda1_hat, variance, C2, C3_START)?;
    let mut total = 0u64;
    let mut c3 = C3_START;
    for _ in 0..repetitions(c) {
        let p = base.with_c3(c3)?;
        // Expected m̃ is (m + 1)/2.
        total = total.saturating_add(p.k + p.m.div_ceil(2));
        c3 *= 0.5;
    }
    Ok(total)
}
