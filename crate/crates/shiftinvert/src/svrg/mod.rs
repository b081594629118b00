//! Solvers for `Bx = c` with `B = λI − AᵀA`.
//!
//! The objective is `f(x) = ½xᵀBx − cᵀx`, written as a sum of the
//! possibly non-convex components
//! `ψᵢ(x) = ½xᵀ(λpᵢI − aᵢaᵢᵀ)x − (1/n)cᵀx` with `pᵢ = ‖aᵢ‖²/‖A‖_F²`.

mod accelerated;
mod dense;
mod epoch;

pub use accelerated::{accelerated_solve, regularized_svrg_epoch, AcceleratedPlan, RegularizedProblem};
pub use dense::DenseSolver;
pub use epoch::{
    component_gradient, solve_chained, solve_constant_progress, solve_to_accuracy, svrg_epoch,
};

use serde::{Deserialize, Serialize};

use crate::budget::Meter;
use crate::error::{Error, Result};
use crate::linalg::{RowMatrix, ShiftedOperator};
use crate::rng::SeededRng;

/// Which iterate an epoch returns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpochOutput {
    /// `x_m` with `m` uniform on `{1, …, m_max}`, as analysed.
    #[default]
    RandomStop,
    /// `x_{m_max}`. Experimental: carries no expected-progress guarantee.
    FinalIterate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrgConfig {
    pub eta: f64,
    pub m_max: u64,
    pub s_bar: f64,
    pub mu: f64,
    pub epoch_count: u32,
    pub seed: u64,
    pub output: EpochOutput,
}

impl SvrgConfig {
    /// Parameters for one halving epoch given an estimate `λ̂₁ ≥ λ₁`:
    /// `S̄ = 2λ̂₁‖A‖_F²/(λ−λ̂₁)`, `η = 1/(8S̄)`, `m_max = ⌈64S̄/(λ−λ̂₁)⌉`.
    pub fn offline(op: &ShiftedOperator<'_>, lambda1_hat: f64) -> Result<Self> {
        let mu = op.shift() - lambda1_hat;
        if !(mu > 0.0) || !lambda1_hat.is_finite() {
            return Err(Error::InvalidShift(format!(
                "shift {} must exceed the eigenvalue estimate {lambda1_hat}",
                op.shift()
            )));
        }
        let s_bar = 2.0 * lambda1_hat.max(0.0) * op.matrix().frob_sq() / mu;
        Self::from_parameters(s_bar, mu)
    }

    /// `η = 1/(8S̄)` and `m_max = ⌈64S̄/μ⌉` for given `S̄` and `μ`.
    pub fn from_parameters(s_bar: f64, mu: f64) -> Result<Self> {
        // S̄ = 0 happens only for A = 0, where B = λI; any step below 1/λ works.
        let s_bar = if s_bar > 0.0 { s_bar } else { mu };
        let cfg = SvrgConfig {
            eta: 1.0 / (8.0 * s_bar),
            m_max: crate::linalg::vector::ceil_u64(64.0 * s_bar / mu).max(1),
            s_bar,
            mu,
            epoch_count: 1,
            seed: 0,
            output: EpochOutput::RandomStop,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        if !(2.0 * self.eta * self.s_bar < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "2·eta·s_bar = {} must be below 1",
                2.0 * self.eta * self.s_bar
            )));
        }
        if self.m_max < 1 {
            return Err(Error::InvalidConfig("m_max must be at least 1".into()));
        }
        if !(self.mu > 0.0) {
            return Err(Error::InvalidConfig(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }

    /// Number of halving epochs needed for a squared-error ratio.
    pub fn epochs_for_ratio(target_ratio: f64) -> Result<u32> {
        if !(target_ratio > 0.0 && target_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target ratio must lie in (0, 1], got {target_ratio}"
            )));
        }
        Ok(crate::linalg::vector::ceil_u64((1.0 / target_ratio).log2()) as u32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub solution: Vec<f64>,
    pub epochs_run: u32,
    pub grad_evals: u64,
    pub est_error_b: Option<f64>,
}

/// Any solver meeting the expected-error contract
/// `E‖x − B⁻¹c‖_B² ≤ target_ratio · ‖x₀ − B⁻¹c‖_B²`.
pub trait LinearSolver {
    fn name(&self) -> &'static str;

    fn solve(
        &self,
        op: &ShiftedOperator<'_>,
        rhs: &[f64],
        x0: &[f64],
        target_ratio: f64,
        rng: &mut SeededRng,
        meter: &Meter,
    ) -> Result<SolveOutcome>;
}

impl<T: LinearSolver + ?Sized> LinearSolver for &T {
    fn name(&self) -> &'static str {
        (**self).name()
    }

    fn solve(
        &self,
        op: &ShiftedOperator<'_>,
        rhs: &[f64],
        x0: &[f64],
        target_ratio: f64,
        rng: &mut SeededRng,
        meter: &Meter,
    ) -> Result<SolveOutcome> {
        (**self).solve(op, rhs, x0, target_ratio, rng, meter)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Svrg,
    Accelerated,
    ExactDense,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Svrg => "svrg",
            SolverKind::Accelerated => "accelerated",
            SolverKind::ExactDense => "exact-dense",
        }
    }

    /// Solver instance for a shift whose top eigenvalue is estimated by
    /// `lambda1_hat`.
    pub fn build<'m>(
        &self,
        matrix: &'m RowMatrix,
        lambda1_hat: f64,
        output: EpochOutput,
    ) -> Box<dyn LinearSolver + 'm> {
        match self {
            SolverKind::Svrg => Box::new(SvrgSolver {
                lambda1_hat,
                output,
            }),
            SolverKind::Accelerated => Box::new(AcceleratedSolver {
                lambda1_hat,
                output,
            }),
            SolverKind::ExactDense => Box::new(DenseSolver::new(matrix)),
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svrg" => Ok(SolverKind::Svrg),
            "accelerated" => Ok(SolverKind::Accelerated),
            "exact-dense" => Ok(SolverKind::ExactDense),
            _ => Err(Error::InvalidConfig(format!("unknown solver {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SvrgSolver {
    pub lambda1_hat: f64,
    pub output: EpochOutput,
}

impl LinearSolver for SvrgSolver {
    fn name(&self) -> &'static str {
        "svrg"
    }

    fn solve(
        &self,
        op: &ShiftedOperator<'_>,
        rhs: &[f64],
        x0: &[f64],
        target_ratio: f64,
        rng: &mut SeededRng,
        meter: &Meter,
    ) -> Result<SolveOutcome> {
        let mut cfg = SvrgConfig::offline(op, self.lambda1_hat)?;
        cfg.output = self.output;
        solve_to_accuracy(op, rhs, x0, target_ratio, &cfg, rng, meter)
    }
}

#[derive(Clone, Debug)]
pub struct AcceleratedSolver {
    pub lambda1_hat: f64,
    pub output: EpochOutput,
}

impl LinearSolver for AcceleratedSolver {
    fn name(&self) -> &'static str {
        "accelerated"
    }

    fn solve(
        &self,
        op: &ShiftedOperator<'_>,
        rhs: &[f64],
        x0: &[f64],
        target_ratio: f64,
        rng: &mut SeededRng,
        meter: &Meter,
    ) -> Result<SolveOutcome> {
        let plan = AcceleratedPlan::new(op, self.lambda1_hat, target_ratio, self.output)?;
        accelerated_solve(op, rhs, x0, &plan, rng, meter)
    }
}
