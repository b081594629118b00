//! Offline pipelines: shift estimation, burn-in and warm-start rounds, and
//! the gap-free variant.

use serde::{Deserialize, Serialize};

use super::{
    burn_in, burn_in_rounds, random_init, scaled_identity_warm_start, warm_start_round, DriverConfig,
    DriverMode, Phase, PowerState,
};
use crate::budget::Meter;
use crate::error::{Error, Result};
use crate::linalg::vector::{ceil_u64, normalized};
use crate::linalg::{RowMatrix, ShiftedOperator};
use crate::rng::SeededRng;
use crate::shift::{estimate_lambda1_gapfree, estimate_shift, ShiftEstimate, SolverFactory};
use crate::svrg::{DenseSolver, LinearSolver, SolverKind, SvrgConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Stalled,
    BudgetExceeded,
    Deadline,
    Failed,
}

impl RunStatus {
    fn of(e: &Error) -> Self {
        match e {
            Error::BudgetExceeded(_) | Error::SampleCap { .. } => RunStatus::BudgetExceeded,
            Error::Deadline => RunStatus::Deadline,
            Error::Stalled { .. } => RunStatus::Stalled,
            _ => RunStatus::Failed,
        }
    }
}

/// Parameters derived from the formulas, kept apart from results.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub lambda: f64,
    pub lambda1_hat: f64,
    pub mu_hat: f64,
    pub s_bar: f64,
    pub eta: f64,
    pub m_max: u64,
    pub epsilon_effective: f64,
    pub burn_in_ratio: f64,
    pub burn_in_rounds: usize,
    pub warm_rounds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: RunStatus,
    pub error: Option<String>,
    /// The Rayleigh-quotient stopping test fired.
    pub certified: bool,
    pub x: Vec<f64>,
    pub quotient: f64,
    pub mode: DriverMode,
    pub solver: SolverKind,
    pub shift: Option<ShiftEstimate>,
    pub theory: Option<TheoryParams>,
    pub burn_in_rounds: usize,
    pub warm_rounds: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub restarts: usize,
    pub grad_evals: u64,
}

/// Per-round notification for traces.
#[derive(Clone, Copy, Debug)]
pub struct RoundEvent<'a> {
    pub phase: Phase,
    pub round: usize,
    pub x: &'a [f64],
    pub lambda: f64,
    /// Rayleigh quotient of `x` before the round's solve.
    pub quotient: f64,
    pub accepted: bool,
    pub grad_evals: u64,
}

/// Warm-start round count `⌈log₅(d/(√10·G*))⌉` with
/// `G* = sqrt(ε·λ̂₁/(1.2(λ − λ̂₁)))`.
pub fn warm_round_count(d: usize, epsilon: f64, lambda: f64, lambda1_hat: f64) -> usize {
    let g = (epsilon * lambda1_hat / (1.2 * (lambda - lambda1_hat))).sqrt();
    let r = (d as f64 / (10f64.sqrt() * g)).ln() / 5f64.ln();
    (ceil_u64(r.max(0.0)) as usize).max(1)
}

fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::DimensionMismatch { .. }
    )
}

fn empty_report(cfg: &DriverConfig, x: Vec<f64>) -> SolveReport {
    SolveReport {
        status: RunStatus::Completed,
        error: None,
        certified: false,
        x,
        quotient: f64::NAN,
        mode: cfg.mode,
        solver: cfg.solver,
        shift: None,
        theory: None,
        burn_in_rounds: 0,
        warm_rounds: 0,
        accepted: 0,
        rejected: 0,
        restarts: 0,
        grad_evals: 0,
    }
}

fn finish(
    m: &RowMatrix,
    mut report: SolveReport,
    outcome: Result<()>,
    meter: &Meter,
    start: u64,
) -> Result<SolveReport> {
    if let Err(e) = outcome {
        if is_input_error(&e) {
            return Err(e);
        }
        report.status = RunStatus::of(&e);
        report.error = Some(e.to_string());
        if let Error::Stalled { best_x, .. } = e {
            report.x = best_x;
        }
    }
    report.quotient = m.rayleigh_quotient(&report.x)?;
    report.grad_evals = meter.used() - start;
    Ok(report)
}

/// Runs `f` with the solver factory for `cfg.solver`; exact-dense shares
/// one factorization cache across calls.
fn with_factory<T>(
    m: &RowMatrix,
    cfg: &DriverConfig,
    f: impl FnOnce(&SolverFactory<'_>) -> T,
) -> T {
    let dense = (cfg.solver == SolverKind::ExactDense).then(|| DenseSolver::new(m));
    let output = cfg.output;
    let kind = cfg.solver;
    let factory = |upper: f64| -> Box<dyn LinearSolver + '_> {
        match &dense {
            Some(s) => Box::new(s),
            None => kind.build(m, upper, output),
        }
    };
    f(&factory)
}

/// Full offline pipeline with the configured solver.
pub fn compute_top_eigenvector(
    m: &RowMatrix,
    cfg: &DriverConfig,
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<SolveReport> {
    with_factory(m, cfg, |factory| {
        compute_top_eigenvector_with(m, cfg, factory, rng, meter, &mut |_| {})
    })
}

/// Offline pipeline with an explicit solver factory and a round observer.
pub fn compute_top_eigenvector_with(
    m: &RowMatrix,
    cfg: &DriverConfig,
    factory: &SolverFactory<'_>,
    rng: &mut SeededRng,
    meter: &Meter,
    observer: &mut dyn FnMut(&RoundEvent<'_>),
) -> Result<SolveReport> {
    cfg.validate()?;
    match cfg.mode {
        DriverMode::GapFree => return gap_free_driver_with(m, cfg, factory, rng, meter, observer),
        DriverMode::Online => {
            return Err(Error::InvalidConfig(
                "online mode runs over a sample oracle, not a matrix".into(),
            ))
        }
        DriverMode::Offline => {}
    }
    if m.d() == 0 {
        return Err(Error::InvalidInput("matrix has no columns".into()));
    }
    let start = meter.used();
    if m.d() == 1 {
        let mut report = empty_report(cfg, vec![1.0]);
        report.certified = true;
        return finish(m, report, Ok(()), meter, start);
    }
    let mut report = empty_report(cfg, random_init(m.d(), rng)?);
    let outcome = offline_stages(m, cfg, factory, rng, meter, observer, &mut report);
    finish(m, report, outcome, meter, start)
}

fn offline_stages(
    m: &RowMatrix,
    cfg: &DriverConfig,
    factory: &SolverFactory<'_>,
    rng: &mut SeededRng,
    meter: &Meter,
    observer: &mut dyn FnMut(&RoundEvent<'_>),
    report: &mut SolveReport,
) -> Result<()> {
    let d = m.d();
    let n = m.n() as u64;
    let est = estimate_shift(m, &cfg.shift, factory, rng, meter)?;
    let lambda = est.lambda_bar;
    let l1 = est.lambda1_upper;
    let epsilon = if cfg.eigenvector {
        cfg.epsilon * est.gap_estimate()
    } else {
        cfg.epsilon
    };
    report.shift = Some(est);
    let op = ShiftedOperator::new(m, lambda)?;
    let svrg = SvrgConfig::offline(&op, l1)?;
    let planned_burn = burn_in_rounds(d, lambda, l1);
    let planned_warm = warm_round_count(d, epsilon, lambda, l1);
    report.theory = Some(TheoryParams {
        lambda,
        lambda1_hat: l1,
        mu_hat: lambda - l1,
        s_bar: svrg.s_bar,
        eta: svrg.eta,
        m_max: svrg.m_max,
        epsilon_effective: epsilon,
        burn_in_ratio: cfg.burn_in_target_ratio,
        burn_in_rounds: planned_burn,
        warm_rounds: planned_warm,
    });
    let solver = factory(l1);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut state = None;
    for attempt in 0..=cfg.restarts {
        let x0 = if attempt == 0 {
            report.x.clone()
        } else {
            report.restarts += 1;
            random_init(d, rng)?
        };
        let mut notify = |s: &PowerState, q: f64, ok: bool| {
            observer(&RoundEvent {
                phase: Phase::BurnIn,
                round: s.round,
                x: &s.x,
                lambda,
                quotient: q,
                accepted: ok,
                grad_evals: meter.used(),
            })
        };
        match burn_in(&op, &x0, solver.as_ref(), l1, cfg, rng, meter, &mut notify) {
            Ok(s) => {
                report.burn_in_rounds += s.round;
                report.accepted += s.accepted_count;
                report.rejected += s.rejected_count;
                state = Some(s);
                break;
            }
            Err(Error::Stalled { best_quotient, best_x, .. }) => {
                report.burn_in_rounds += burn_in_rounds(d, lambda, l1);
                if best.as_ref().is_none_or(|b| best_quotient > b.0) {
                    report.x = best_x.clone();
                    best = Some((best_quotient, best_x));
                }
            }
            Err(e) => return Err(e),
        }
    }
    let Some(mut state) = state else {
        let (q, x) = best.expect("at least one attempt ran");
        return Err(Error::Stalled {
            attempts: cfg.restarts + 1,
            best_quotient: q,
            best_x: x,
        });
    };
    report.x = state.x.clone();
    state.phase = Phase::WarmStart;
    state.round = 0;
    state.accepted_count = 0;
    state.rejected_count = 0;

    let rounds = cfg.max_rounds.map_or(planned_warm, |r| r.min(planned_warm));
    let mut quot = |x: &[f64]| -> Result<f64> {
        meter.charge(n)?;
        m.rayleigh_quotient(x)
    };
    let mut q = quot(&state.x)?;
    for i in 0..rounds {
        if l1 - q <= 0.5 * epsilon * q {
            report.certified = true;
            break;
        }
        let ratio = cfg.warm_ratio(i);
        let mut solve = |x: &[f64]| -> Result<Vec<f64>> {
            let x0 = scaled_identity_warm_start(&op, x)?;
            Ok(solver.solve(&op, x, &x0, ratio, rng, meter)?.solution)
        };
        let before = q;
        let out = warm_start_round(&mut state, &mut solve, &mut quot)?;
        report.warm_rounds += 1;
        report.x = state.x.clone();
        if out.accepted {
            report.accepted += 1;
            q = out.candidate_quotient.expect("accepted rounds carry a quotient");
        } else {
            report.rejected += 1;
        }
        observer(&RoundEvent {
            phase: Phase::WarmStart,
            round: state.round,
            x: &state.x,
            lambda,
            quotient: before,
            accepted: out.accepted,
            grad_evals: meter.used(),
        });
    }
    if !report.certified && l1 - q <= 0.5 * epsilon * q {
        report.certified = true;
    }
    Ok(())
}

/// Gap-free pipeline with the configured solver.
pub fn gap_free_driver(
    m: &RowMatrix,
    cfg: &DriverConfig,
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<SolveReport> {
    with_factory(m, cfg, |factory| gap_free_driver_with(m, cfg, factory, rng, meter, &mut |_| {}))
}

/// Shift `λ = λ̃₁(1 + ε/200)` just above `λ₁`, then normalized approximate
/// power steps. Components below `(1 − ε/2)λ₁` shrink by at least 100 per
/// exact step whatever the gap.
pub fn gap_free_driver_with(
    m: &RowMatrix,
    cfg: &DriverConfig,
    factory: &SolverFactory<'_>,
    rng: &mut SeededRng,
    meter: &Meter,
    observer: &mut dyn FnMut(&RoundEvent<'_>),
) -> Result<SolveReport> {
    cfg.validate()?;
    if m.d() == 0 {
        return Err(Error::InvalidInput("matrix has no columns".into()));
    }
    let start = meter.used();
    let mut report = empty_report(cfg, random_init(m.d(), rng)?);
    report.mode = DriverMode::GapFree;
    let outcome = gap_free_stages(m, cfg, factory, rng, meter, observer, &mut report);
    finish(m, report, outcome, meter, start)
}

fn gap_free_stages(
    m: &RowMatrix,
    cfg: &DriverConfig,
    factory: &SolverFactory<'_>,
    rng: &mut SeededRng,
    meter: &Meter,
    observer: &mut dyn FnMut(&RoundEvent<'_>),
    report: &mut SolveReport,
) -> Result<()> {
    let eps = cfg.epsilon;
    let n = m.n() as u64;
    let (lambda, l1) = estimate_lambda1_gapfree(m, eps, rng, meter)?;
    let op = ShiftedOperator::new(m, lambda)?;
    let svrg = SvrgConfig::offline(&op, l1)?;
    let planned = burn_in_rounds(m.d(), lambda, l1);
    let ratio = cfg.burn_in_target_ratio.min(eps);
    report.theory = Some(TheoryParams {
        lambda,
        lambda1_hat: l1,
        mu_hat: lambda - l1,
        s_bar: svrg.s_bar,
        eta: svrg.eta,
        m_max: svrg.m_max,
        epsilon_effective: eps,
        burn_in_ratio: ratio,
        burn_in_rounds: planned,
        warm_rounds: 0,
    });
    let solver = factory(l1);
    let rounds = cfg.max_rounds.map_or(planned, |r| r.min(planned));
    let mut x = report.x.clone();
    for round in 0..=rounds {
        meter.charge(n)?;
        let q = m.rayleigh_quotient(&x)?;
        if l1 - q <= 0.5 * eps * q {
            report.certified = true;
            break;
        }
        if round == rounds {
            break;
        }
        let x0 = scaled_identity_warm_start(&op, &x)?;
        let ok = match solver.solve(&op, &x, &x0, ratio, rng, meter) {
            Ok(out) => match normalized(&out.solution) {
                Ok(u) => {
                    x = u;
                    true
                }
                Err(_) => false,
            },
            Err(e @ (Error::Diverged { .. } | Error::Numerical(_))) => {
                log::warn!("gap-free round {round}: {e}");
                false
            }
            Err(e) => return Err(e),
        };
        report.burn_in_rounds += 1;
        if ok {
            report.accepted += 1;
        } else {
            report.rejected += 1;
        }
        report.x = x.clone();
        observer(&RoundEvent {
            phase: Phase::GapFree,
            round: round + 1,
            x: &x,
            lambda,
            quotient: q,
            accepted: ok,
            grad_evals: meter.used(),
        });
    }
    Ok(())
}
