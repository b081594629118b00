//! Accelerated solver: an outer accelerated proximal-point loop whose
//! subproblems `f(x) + (γ/2)‖x − y‖²` are solved by SVRG.

use super::epoch::{divergence_bound, draw_epoch_length, run_epoch, solve_to_accuracy};
use super::{EpochOutput, SolveOutcome, SvrgConfig};
use crate::budget::Meter;
use crate::error::{Error, Result};
use crate::linalg::vector::{ceil_u64, norm_sq};
use crate::linalg::ShiftedOperator;
use crate::rng::{fork, SeededRng};

/// `f_γ(x) = ½xᵀBx − cᵀx + (γ/2)‖x − anchor‖²`.
#[derive(Clone, Debug)]
pub struct RegularizedProblem<'a> {
    pub base: ShiftedOperator<'a>,
    pub gamma: f64,
    pub anchor: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl RegularizedProblem<'_> {
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.base.gradient(x, &self.rhs)?;
        for ((gi, xi), yi) in g.iter_mut().zip(x).zip(&self.anchor) {
            *gi += self.gamma * (xi - yi);
        }
        Ok(g)
    }

    /// `∇ψᵢ(x) = (λ+γ)pᵢx − aᵢ(aᵢᵀx) − c/n − γpᵢ·anchor`
    pub fn component_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = super::component_gradient(&self.base, i, x, &self.rhs)?;
        let p = self.base.probability(i);
        for ((gi, xi), yi) in g.iter_mut().zip(x).zip(&self.anchor) {
            *gi += self.gamma * p * (xi - yi);
        }
        Ok(g)
    }

    /// Variance parameter `S̄_γ = (γ² + 12λ̂₁‖A‖_F²)/(μ̂ + γ)`.
    pub fn config(&self, lambda1_hat: f64) -> Result<SvrgConfig> {
        let mu = self.base.shift() - lambda1_hat;
        if !(mu > 0.0) {
            return Err(Error::InvalidShift(format!(
                "shift {} must exceed the eigenvalue estimate {lambda1_hat}",
                self.base.shift()
            )));
        }
        let f = self.base.matrix().frob_sq();
        let s_bar = (self.gamma * self.gamma + 12.0 * lambda1_hat.max(0.0) * f) / (mu + self.gamma);
        SvrgConfig::from_parameters(s_bar, mu + self.gamma)
    }
}

/// One SVRG epoch on the regularized objective, starting from `start`.
pub fn regularized_svrg_epoch(
    p: &RegularizedProblem<'_>,
    start: &[f64],
    cfg: &SvrgConfig,
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !(p.gamma >= 0.0) {
        return Err(Error::InvalidConfig(format!("gamma must be nonnegative, got {}", p.gamma)));
    }
    let g = p.gradient(start)?;
    meter.charge(p.base.n() as u64)?;
    let m = draw_epoch_length(cfg, rng);
    let mut epoch_rng = fork(rng);
    run_epoch(
        &p.base,
        p.base.shift() + p.gamma,
        start,
        &g,
        cfg.eta,
        m,
        divergence_bound(start, &p.rhs, cfg.mu),
        &mut epoch_rng,
        meter,
    )
}

/// Derived parameters of the accelerated scheme.
#[derive(Clone, Debug)]
pub struct AcceleratedPlan {
    pub lambda1_hat: f64,
    pub mu: f64,
    pub gamma: f64,
    pub momentum: f64,
    pub outer_iterations: u64,
    pub inner_epochs: u32,
    pub target_ratio: f64,
    /// False when `nnz(A) > d·λ̂₁‖A‖_F²/μ̂²`; the plain chain is used instead.
    pub accelerated: bool,
    pub output: EpochOutput,
}

impl AcceleratedPlan {
    pub fn new(
        op: &ShiftedOperator<'_>,
        lambda1_hat: f64,
        target_ratio: f64,
        output: EpochOutput,
    ) -> Result<Self> {
        let mu = op.shift() - lambda1_hat;
        if !(mu > 0.0) {
            return Err(Error::InvalidShift(format!(
                "shift {} must exceed the eigenvalue estimate {lambda1_hat}",
                op.shift()
            )));
        }
        SvrgConfig::epochs_for_ratio(target_ratio)?;
        let m = op.matrix();
        let f = m.frob_sq();
        let d = m.d() as f64;
        let nnz = m.nnz().max(1) as f64;
        let accelerated = nnz <= d * lambda1_hat * f / (mu * mu);
        let gamma = (d * lambda1_hat * f / nnz).sqrt().max(2.0 * mu);
        let q = mu / (mu + gamma);
        let sq = q.sqrt();
        let momentum = (1.0 - sq) / (1.0 + sq);
        let outer_iterations = ceil_u64((800.0 / (q * target_ratio)).ln() / (0.9 * sq)).max(1);
        let inner_ratio = 1.0 / (4.0 * ((2.0 * gamma + mu) / mu).powf(1.5));
        Ok(AcceleratedPlan {
            lambda1_hat,
            mu,
            gamma,
            momentum,
            outer_iterations,
            inner_epochs: SvrgConfig::epochs_for_ratio(inner_ratio)?,
            target_ratio,
            accelerated,
            output,
        })
    }
}

/// Accelerated proximal-point iteration
/// `x_t ≈ argmin f(x) + (γ/2)‖x − y_{t−1}‖²`, `y_t = x_t + β(x_t − x_{t−1})`.
///
/// After the planned iterations a residual test checks the necessary
/// condition `‖r_T‖²/λ ≤ 10·target·‖r₀‖²/μ̂`; up to as many iterations
/// again are spent before reporting the budget as exceeded.
pub fn accelerated_solve(
    op: &ShiftedOperator<'_>,
    rhs: &[f64],
    x0: &[f64],
    plan: &AcceleratedPlan,
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<SolveOutcome> {
    Error::check_dim(op.d(), x0.len())?;
    Error::check_dim(op.d(), rhs.len())?;
    if !plan.accelerated {
        let mut cfg = SvrgConfig::offline(op, plan.lambda1_hat)?;
        cfg.output = plan.output;
        return solve_to_accuracy(op, rhs, x0, plan.target_ratio, &cfg, rng, meter);
    }
    let start = meter.used();
    let r0 = norm_sq(&op.gradient(x0, rhs)?);
    if plan.target_ratio >= 1.0 || r0 == 0.0 {
        return Ok(SolveOutcome {
            solution: x0.to_vec(),
            epochs_run: 0,
            grad_evals: 0,
            est_error_b: None,
        });
    }
    let mut problem = RegularizedProblem {
        base: *op,
        gamma: plan.gamma,
        anchor: x0.to_vec(),
        rhs: rhs.to_vec(),
    };
    let mut cfg = problem.config(plan.lambda1_hat)?;
    cfg.output = plan.output;

    let mut x_prev = x0.to_vec();
    let mut epochs = 0u32;
    let mut iter = 0u64;
    let limit = 2 * plan.outer_iterations;
    loop {
        let mut x = x_prev.clone();
        for _ in 0..plan.inner_epochs {
            x = regularized_svrg_epoch(&problem, &x, &cfg, rng, meter)?;
            epochs = epochs.saturating_add(1);
        }
        let mut y = x.clone();
        for ((yi, xi), pi) in y.iter_mut().zip(&x).zip(&x_prev) {
            *yi += plan.momentum * (xi - pi);
        }
        problem.anchor = y;
        x_prev = x;
        iter += 1;

        if iter >= plan.outer_iterations {
            let rt = norm_sq(&op.gradient(&x_prev, rhs)?);
            if rt / op.shift() <= 10.0 * plan.target_ratio * r0 / plan.mu {
                break;
            }
            if iter >= limit {
                return Err(Error::BudgetExceeded(format!(
                    "accelerated solve: residual² {rt:e} after {iter} outer iterations \
                     (initial {r0:e}, target ratio {:e})",
                    plan.target_ratio
                )));
            }
        }
    }
    Ok(SolveOutcome {
        solution: x_prev,
        epochs_run: epochs,
        grad_evals: meter.used() - start,
        est_error_b: None,
    })
}
