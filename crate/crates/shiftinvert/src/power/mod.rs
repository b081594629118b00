//! Shift-and-invert power iterations with approximate solves.
//!
//! A burn-in phase brings the potential `G(x)` below a constant with
//! moderately accurate solves. Warm-start rounds then contract `G` by a
//! constant factor per round, rejecting any update whose Rayleigh quotient
//! or norm reveals a bad solve.

mod driver;

pub use driver::{
    compute_top_eigenvector, compute_top_eigenvector_with, gap_free_driver, gap_free_driver_with,
    RoundEvent, RunStatus, SolveReport, TheoryParams,
};

use serde::{Deserialize, Serialize};

use crate::budget::Meter;
use crate::error::{Error, Result};
use crate::linalg::vector::{ceil_u64, norm, normalized, scale};
use crate::linalg::{RowMatrix, ShiftedOperator, SpectrumOracle};
use crate::rng::{gaussian_vec, SeededRng};
use crate::shift::ShiftConfig;
use crate::svrg::{EpochOutput, LinearSolver, SolverKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    BurnIn,
    WarmStart,
    GapFree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerState {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub lambda1_hat: f64,
    pub round: usize,
    pub phase: Phase,
    pub accepted_count: usize,
    pub rejected_count: usize,
}

impl PowerState {
    pub fn new(x: Vec<f64>, lambda: f64, lambda1_hat: f64, phase: Phase) -> Result<Self> {
        if !(lambda > lambda1_hat) {
            return Err(Error::InvalidShift(format!(
                "shift {lambda} must exceed the eigenvalue estimate {lambda1_hat}"
            )));
        }
        Ok(PowerState {
            x: normalized(&x)?,
            lambda,
            lambda1_hat,
            round: 0,
            phase,
            accepted_count: 0,
            rejected_count: 0,
        })
    }

    /// `λ − λ̂₁`
    pub fn mu_hat(&self) -> f64 {
        self.lambda - self.lambda1_hat
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds::new(self.lambda, self.lambda1_hat)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriverMode {
    Offline,
    Online,
    GapFree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverConfig {
    pub epsilon: f64,
    pub mode: DriverMode,
    pub solver: SolverKind,
    pub output: EpochOutput,
    /// Squared B-norm error ratio per burn-in solve.
    pub burn_in_target_ratio: f64,
    /// `c₁` of the first warm-start round; later rounds use `c₁·5⁻ⁱ`.
    pub warm_start_c1: f64,
    /// Cap on the number of rounds in either phase.
    pub max_rounds: Option<usize>,
    /// Fresh random starts tried after a stalled burn-in.
    pub restarts: usize,
    /// Target `|v₁ᵀx| ≥ 1 − ε` instead of the Rayleigh quotient.
    pub eigenvector: bool,
    pub shift: ShiftConfig,
    pub seed: u64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig {
            epsilon: 1e-6,
            mode: DriverMode::Offline,
            solver: SolverKind::Svrg,
            output: EpochOutput::RandomStop,
            burn_in_target_ratio: 1e-3,
            warm_start_c1: 1.0 / 10f64.sqrt(),
            max_rounds: None,
            restarts: 3,
            eigenvector: false,
            shift: ShiftConfig::default(),
            seed: 0,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        for (name, v) in [
            ("burn-in target ratio", self.burn_in_target_ratio),
            ("warm-start c1", self.warm_start_c1),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        self.shift.validate()
    }

    /// `c₁(i) = c₁·5⁻ⁱ`
    pub fn c1(&self, round: usize) -> f64 {
        self.warm_start_c1 * 5f64.powi(-(round as i32))
    }

    /// Squared-error ratio meeting `‖x̂ − B⁻¹x‖_B ≤ (c₁(i)/1000)·sqrt(λ₁(B⁻¹))`
    /// from the start `x/(xᵀBx)`, whose error is at most
    /// `sqrt(λ₁(B⁻¹))·G(x) ≤ sqrt(λ₁(B⁻¹))/√10`.
    pub fn warm_ratio(&self, round: usize) -> f64 {
        let r = 10f64.sqrt() * self.c1(round) / 1000.0;
        r * r
    }
}

/// Acceptance cutoffs of a warm-start round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `λ̂₁ − (λ − λ̂₁)/6`
    pub quotient: f64,
    /// `(2/3)/(λ − λ̂₁)`
    pub norm: f64,
}

impl Thresholds {
    pub fn new(lambda: f64, lambda1_hat: f64) -> Self {
        let mu = lambda - lambda1_hat;
        Thresholds {
            quotient: lambda1_hat - mu / 6.0,
            norm: (2.0 / 3.0) / mu,
        }
    }
}

/// Gaussian start, normalized.
pub fn random_init(d: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    loop {
        let x = gaussian_vec(rng, d);
        if norm(&x) > 0.0 {
            return normalized(&x);
        }
    }
}

/// `B⁻¹x/‖B⁻¹x‖` through the dense eigendecomposition.
pub fn exact_power_step(b: &ShiftedOperator<'_>, oracle: &SpectrumOracle, x: &[f64]) -> Result<Vec<f64>> {
    let a = oracle.coefficients(x)?;
    if a[0].abs() <= 1e-14 * norm(x) {
        return Err(Error::OrthogonalStart);
    }
    normalized(&oracle.solve_shifted(b.shift(), x)?)
}

/// `x/(xᵀBx)`, the starting point handed to every solve.
pub fn scaled_identity_warm_start(b: &ShiftedOperator<'_>, x: &[f64]) -> Result<Vec<f64>> {
    let q = b.quadratic_form(x)?;
    if !(q > 0.0) {
        return Err(Error::NegativeBNorm {
            value: q,
            shift: b.shift(),
        });
    }
    let mut out = x.to_vec();
    scale(1.0 / q, &mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Rejection {
    SolverFailed { message: String },
    QuotientBelow { quotient: f64, cutoff: f64 },
    NormBelow { norm: f64, cutoff: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub accepted: bool,
    pub candidate_quotient: Option<f64>,
    pub candidate_norm: Option<f64>,
    pub rejection: Option<Rejection>,
}

/// Errors that mean the solve went bad rather than the run as a whole.
fn is_solver_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::Diverged { .. } | Error::Numerical(_) | Error::NegativeBNorm { .. } | Error::ZeroVector
    )
}

/// One warm-start round. `solve` approximates `B⁻¹x` for the current unit
/// `x`; `quot` estimates the Rayleigh quotient of a unit vector. The
/// candidate `x̂` replaces `x` only if `quot(x̂/‖x̂‖) ≥ λ̂₁ − (λ−λ̂₁)/6` and
/// `‖x̂‖ ≥ (2/3)/(λ−λ̂₁)`.
pub fn warm_start_round(
    state: &mut PowerState,
    solve: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    quot: &mut dyn FnMut(&[f64]) -> Result<f64>,
) -> Result<RoundOutcome> {
    state.round += 1;
    let cut = state.thresholds();
    let reject = |state: &mut PowerState, out: RoundOutcome| {
        state.rejected_count += 1;
        Ok(out)
    };
    let x_hat = match solve(&state.x) {
        Ok(v) => v,
        Err(e) if is_solver_failure(&e) => {
            return reject(
                state,
                RoundOutcome {
                    accepted: false,
                    candidate_quotient: None,
                    candidate_norm: None,
                    rejection: Some(Rejection::SolverFailed { message: e.to_string() }),
                },
            )
        }
        Err(e) => return Err(e),
    };
    let nrm = norm(&x_hat);
    if !(nrm >= cut.norm) || !nrm.is_finite() {
        return reject(
            state,
            RoundOutcome {
                accepted: false,
                candidate_quotient: None,
                candidate_norm: Some(nrm),
                rejection: Some(Rejection::NormBelow { norm: nrm, cutoff: cut.norm }),
            },
        );
    }
    let unit = normalized(&x_hat)?;
    let q = quot(&unit)?;
    if !(q >= cut.quotient) {
        return reject(
            state,
            RoundOutcome {
                accepted: false,
                candidate_quotient: Some(q),
                candidate_norm: Some(nrm),
                rejection: Some(Rejection::QuotientBelow { quotient: q, cutoff: cut.quotient }),
            },
        );
    }
    state.x = unit;
    state.accepted_count += 1;
    Ok(RoundOutcome {
        accepted: true,
        candidate_quotient: Some(q),
        candidate_norm: Some(nrm),
        rejection: None,
    })
}

/// Burn-in round count `2⌈log₂(d·κ̂)⌉ + 10` with `κ̂ = λ/(λ − λ̂₁)`.
pub fn burn_in_rounds(d: usize, lambda: f64, lambda1_hat: f64) -> usize {
    let kappa = lambda / (lambda - lambda1_hat);
    2 * ceil_u64((d as f64 * kappa).log2().max(0.0)) as usize + 10
}

/// Certificate closing the burn-in: `λ̂₁ − xᵀΣx ≤ (λ − λ̂₁)/20`.
pub fn burn_in_certified(quotient: f64, lambda: f64, lambda1_hat: f64) -> bool {
    lambda1_hat - quotient <= (lambda - lambda1_hat) / 20.0
}

/// Normalized approximate power steps from `x0` until the Rayleigh
/// quotient certifies `G(x)` below a constant, or the round schedule runs
/// out. Rounds whose solve fails keep the iterate.
#[allow(clippy::too_many_arguments)]
pub fn burn_in(
    b: &ShiftedOperator<'_>,
    x0: &[f64],
    solver: &dyn LinearSolver,
    lambda1_hat: f64,
    cfg: &DriverConfig,
    rng: &mut SeededRng,
    meter: &Meter,
    observer: &mut dyn FnMut(&PowerState, f64, bool),
) -> Result<PowerState> {
    let m: &RowMatrix = b.matrix();
    let mut state = PowerState::new(x0.to_vec(), b.shift(), lambda1_hat, Phase::BurnIn)?;
    let planned = burn_in_rounds(b.d(), b.shift(), lambda1_hat);
    let rounds = cfg.max_rounds.map_or(planned, |r| r.min(planned));
    let mut best = (f64::NEG_INFINITY, state.x.clone());
    loop {
        meter.charge(m.n() as u64)?;
        let q = m.rayleigh_quotient(&state.x)?;
        if q > best.0 {
            best = (q, state.x.clone());
        }
        if burn_in_certified(q, b.shift(), lambda1_hat) {
            return Ok(state);
        }
        if state.round >= rounds {
            return Err(Error::Stalled {
                attempts: 1,
                best_quotient: best.0,
                best_x: best.1,
            });
        }
        state.round += 1;
        let start = scaled_identity_warm_start(b, &state.x)?;
        let ok = match solver.solve(b, &state.x, &start, cfg.burn_in_target_ratio, rng, meter) {
            Ok(out) => match normalized(&out.solution) {
                Ok(u) => {
                    state.x = u;
                    true
                }
                Err(_) => false,
            },
            Err(e) if is_solver_failure(&e) => false,
            Err(e) => return Err(e),
        };
        if ok {
            state.accepted_count += 1;
        } else {
            state.rejected_count += 1;
        }
        observer(&state, q, ok);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector::dot;
    use crate::rng::seeded;
    use crate::synthetic::diag_spectrum;

    #[test]
    fn thresholds_arithmetic() {
        let t = Thresholds::new(1.001, 1.001 - 9e-4);
        assert!((t.quotient - (1.001 - 9e-4 - 1.5e-4)).abs() < 1e-12);
        assert!((t.norm - 740.7407407).abs() < 1e-6);
    }

    #[test]
    fn random_init_unit() {
        let mut rng = seeded(3);
        for d in [1, 2, 50] {
            let x = random_init(d, &mut rng).unwrap();
            assert!((norm(&x) - 1.0).abs() < 1e-12);
        }
        let x = random_init(1, &mut rng).unwrap();
        assert!((x[0].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_start_is_exact_on_eigenvector() {
        let p = diag_spectrum(&[1.0, 0.5]).unwrap();
        let b = ShiftedOperator::new(&p.matrix, 1.1).unwrap();
        let s = scaled_identity_warm_start(&b, &[1.0, 0.0]).unwrap();
        assert!((s[0] - 10.0).abs() < 1e-9 && s[1] == 0.0);
    }

    #[test]
    fn zero_solver_is_rejected() {
        let mut st = PowerState::new(vec![1.0, 0.0], 1.1, 1.01, Phase::WarmStart).unwrap();
        let before = st.x.clone();
        let out = warm_start_round(&mut st, &mut |x| Ok(vec![0.0; x.len()]), &mut |_| Ok(1.0)).unwrap();
        assert!(!out.accepted);
        assert_eq!(st.x, before);
        assert_eq!(st.rejected_count, 1);
    }

    #[test]
    fn diverged_solver_is_rejected() {
        let mut st = PowerState::new(vec![1.0, 0.0], 1.1, 1.01, Phase::WarmStart).unwrap();
        let out = warm_start_round(
            &mut st,
            &mut |_| Err(Error::Diverged { steps: 3, last_finite: vec![] }),
            &mut |_| Ok(1.0),
        )
        .unwrap();
        assert!(matches!(out.rejection, Some(Rejection::SolverFailed { .. })));
    }

    #[test]
    fn exact_step_fixes_eigenvector() {
        let p = diag_spectrum(&[1.0, 0.5, 0.2]).unwrap();
        let o = SpectrumOracle::from_matrix(&p.matrix).unwrap();
        let b = ShiftedOperator::new(&p.matrix, 1.01).unwrap();
        let y = exact_power_step(&b, &o, &[1.0, 0.0, 0.0]).unwrap();
        assert!((dot(&y, &[1.0, 0.0, 0.0]).abs() - 1.0).abs() < 1e-14);
        assert!(matches!(exact_power_step(&b, &o, &[0.0, 1.0, 0.0]), Err(Error::OrthogonalStart)));
    }

    #[test]
    fn burn_in_exits_at_eigenvector() {
        let p = diag_spectrum(&[1.0, 0.5]).unwrap();
        let b = ShiftedOperator::new(&p.matrix, 1.01).unwrap();
        let solver = crate::svrg::DenseSolver::new(&p.matrix);
        let st = burn_in(
            &b,
            &[1.0, 0.0],
            &solver,
            1.0,
            &DriverConfig::default(),
            &mut seeded(0),
            &Meter::unlimited(),
            &mut |_, _, _| {},
        )
        .unwrap();
        assert_eq!(st.round, 0);
    }
}
