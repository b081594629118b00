//! SVRG epochs with non-convex components.

use rand::Rng;

use super::{SolveOutcome, SvrgConfig};
use crate::budget::Meter;
use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm, norm_sq};
use crate::linalg::ShiftedOperator;
use crate::rng::{fork, SeededRng};

const CHECK_EVERY: u64 = 1 << 14;
const RESCALE_BELOW: f64 = 1e-100;

/// `∇ψᵢ(x) = λpᵢx − aᵢ(aᵢᵀx) − rhs/n`
pub fn component_gradient(
    op: &ShiftedOperator<'_>,
    i: usize,
    x: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let m = op.matrix();
    if i >= m.n() {
        return Err(Error::RowOutOfRange { index: i, rows: m.n() });
    }
    Error::check_dim(m.d(), x.len())?;
    Error::check_dim(m.d(), rhs.len())?;
    let scalar = op.shift() * op.probability(i);
    let inv_n = 1.0 / m.n() as f64;
    let mut g: Vec<f64> = x
        .iter()
        .zip(rhs)
        .map(|(xi, ci)| scalar * xi - inv_n * ci)
        .collect();
    let row = m.row(i);
    row.axpy_into(-row.dot(x), &mut g);
    Ok(g)
}

/// Runs `m` variance-reduced steps from `start` for an objective whose
/// component differences are `(σpᵢI − aᵢaᵢᵀ)(x − y)`; `anchor_grad` is the
/// full gradient at `start`.
///
/// The displacement `z = x − start` is kept as `c·w + β·g` so a step costs
/// one sparse dot and one sparse axpy. The squared norm of `z` is tracked
/// alongside for the divergence guard.
pub(crate) fn run_epoch(
    op: &ShiftedOperator<'_>,
    sigma: f64,
    start: &[f64],
    anchor_grad: &[f64],
    eta: f64,
    m: u64,
    bound: f64,
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<Vec<f64>> {
    let mat = op.matrix();
    let d = mat.d();
    let g = anchor_grad;
    if mat.sampler().is_empty() {
        // A = 0: every component difference is σpᵢ·z = 0, so only the
        // anchor term moves the iterate.
        let mut x = start.to_vec();
        axpy(-eta * m as f64, g, &mut x);
        meter.charge(m)?;
        return Ok(x);
    }
    let ag: Vec<f64> = (0..mat.n()).map(|i| mat.row(i).dot(g)).collect();
    // η/pᵢ; rows with pᵢ = 0 are never drawn.
    let step: Vec<f64> = (0..mat.n()).map(|i| eta / op.probability(i)).collect();
    let gg = norm_sq(g);
    let shrink = 1.0 - eta * sigma;
    let bound_sq = bound * bound;

    let mut w = vec![0.0; d];
    let mut c = 1.0f64;
    let mut beta = 0.0f64;
    let (mut ww, mut wg) = (0.0f64, 0.0f64);
    let mut pending = 0u64;

    for k in 0..m {
        let i = mat.sampler().sample(rng);
        let row = mat.row(i);
        let aw = row.dot(&w);
        let s = c * aw + beta * ag[i];
        if !s.is_finite() {
            return Err(Error::Diverged {
                steps: k,
                last_finite: start.to_vec(),
            });
        }
        c *= shrink;
        beta = shrink * beta - eta;
        let t = step[i] * s / c;
        row.axpy_into(t, &mut w);
        ww += 2.0 * t * aw + t * t * mat.row_norm_sq(i);
        wg += t * ag[i];

        let z_sq = c * c * ww + 2.0 * c * beta * wg + beta * beta * gg;
        if !(z_sq <= bound_sq) {
            return Err(Error::Diverged {
                steps: k + 1,
                last_finite: start.to_vec(),
            });
        }
        if c.abs() < RESCALE_BELOW {
            for wi in w.iter_mut() {
                *wi *= c;
            }
            ww = norm_sq(&w);
            wg = dot(&w, g);
            c = 1.0;
        }
        pending += 1;
        if pending == CHECK_EVERY {
            meter.charge(pending)?;
            pending = 0;
        }
    }
    meter.charge(pending)?;

    let mut x = start.to_vec();
    axpy(c, &w, &mut x);
    axpy(beta, g, &mut x);
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Diverged {
            steps: m,
            last_finite: start.to_vec(),
        });
    }
    Ok(x)
}

pub(crate) fn draw_epoch_length(cfg: &SvrgConfig, rng: &mut SeededRng) -> u64 {
    match cfg.output {
        super::EpochOutput::RandomStop => rng.random_range(1..=cfg.m_max),
        super::EpochOutput::FinalIterate => cfg.m_max,
    }
}

pub(crate) fn divergence_bound(x0: &[f64], rhs: &[f64], mu: f64) -> f64 {
    1e12 * (norm(x0) + norm(rhs) / mu).max(f64::MIN_POSITIVE)
}

/// One epoch: full anchor gradient at `x0`, then `m ~ U{1..m_max}` steps
/// `x ← x − (η/pᵢ)(∇ψᵢ(x) − ∇ψᵢ(x₀)) − η∇f(x₀)`.
pub fn svrg_epoch(
    op: &ShiftedOperator<'_>,
    cfg: &SvrgConfig,
    x0: &[f64],
    rhs: &[f64],
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let g = op.gradient(x0, rhs)?;
    meter.charge(op.n() as u64)?;
    let m = draw_epoch_length(cfg, rng);
    let mut epoch_rng = fork(rng);
    run_epoch(
        op,
        op.shift(),
        x0,
        &g,
        cfg.eta,
        m,
        divergence_bound(x0, rhs, cfg.mu),
        &mut epoch_rng,
        meter,
    )
}

/// `cfg.epoch_count` chained epochs.
pub fn solve_chained(
    op: &ShiftedOperator<'_>,
    rhs: &[f64],
    x0: &[f64],
    cfg: &SvrgConfig,
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<SolveOutcome> {
    Error::check_dim(op.d(), x0.len())?;
    Error::check_dim(op.d(), rhs.len())?;
    let start = meter.used();
    let mut x = x0.to_vec();
    for _ in 0..cfg.epoch_count {
        x = svrg_epoch(op, cfg, &x, rhs, rng, meter)?;
    }
    Ok(SolveOutcome {
        solution: x,
        epochs_run: cfg.epoch_count,
        grad_evals: meter.used() - start,
        est_error_b: None,
    })
}

/// A single epoch with the halving parameters.
pub fn solve_constant_progress(
    op: &ShiftedOperator<'_>,
    rhs: &[f64],
    x0: &[f64],
    cfg: &SvrgConfig,
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<SolveOutcome> {
    let cfg = SvrgConfig {
        epoch_count: 1,
        ..cfg.clone()
    };
    solve_chained(op, rhs, x0, &cfg, rng, meter)
}

/// `⌈log₂(1/target_ratio)⌉` chained halving epochs.
pub fn solve_to_accuracy(
    op: &ShiftedOperator<'_>,
    rhs: &[f64],
    x0: &[f64],
    target_ratio: f64,
    cfg: &SvrgConfig,
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<SolveOutcome> {
    let cfg = SvrgConfig {
        epoch_count: SvrgConfig::epochs_for_ratio(target_ratio)?,
        ..cfg.clone()
    };
    solve_chained(op, rhs, x0, &cfg, rng, meter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RowMatrix;
    use crate::rng::seeded;

    #[test]
    fn single_row_component_gradient() {
        let a = RowMatrix::from_dense_rows(&[vec![1.0, 0.0]]).unwrap();
        let b = ShiftedOperator::new(&a, 2.0).unwrap();
        let g = component_gradient(&b, 0, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(g, vec![1.0, 0.0]);
        assert!(component_gradient(&b, 1, &[1.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn identity_operator_converges_to_rhs() {
        let a = RowMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let b = ShiftedOperator::new(&a, 2.0).unwrap();
        let cfg = SvrgConfig::offline(&b, 1.0).unwrap();
        let rhs = [0.7, -0.2];
        let out = solve_to_accuracy(&b, &rhs, &[0.0, 0.0], 1e-12, &cfg, &mut seeded(1), &Meter::unlimited())
            .unwrap();
        assert_eq!(out.epochs_run, 40);
        for (x, r) in out.solution.iter().zip(&rhs) {
            assert!((x - r).abs() < 1e-5, "{:?}", out.solution);
        }
    }

    #[test]
    fn ratio_one_runs_no_epochs() {
        assert_eq!(SvrgConfig::epochs_for_ratio(1.0).unwrap(), 0);
        assert_eq!(SvrgConfig::epochs_for_ratio(2f64.powi(-10)).unwrap(), 10);
        assert!(SvrgConfig::epochs_for_ratio(0.0).is_err());
    }

    #[test]
    fn config_formulas() {
        let a = RowMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let b = ShiftedOperator::new(&a, 1.1).unwrap();
        let cfg = SvrgConfig::offline(&b, 1.0).unwrap();
        let s_bar = 2.0 * 1.0 * 1.25 / (1.1 - 1.0);
        assert!((cfg.s_bar - s_bar).abs() < 1e-9);
        assert!((cfg.eta - 1.0 / (8.0 * s_bar)).abs() < 1e-15);
        assert_eq!(cfg.m_max, (64.0 * s_bar / (1.1 - 1.0f64)).ceil() as u64);
        assert!(SvrgConfig::offline(&b, 1.2).is_err());
    }

    #[test]
    fn cap_interrupts_epoch() {
        let a = RowMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 0.9]]).unwrap();
        let b = ShiftedOperator::new(&a, 1.001).unwrap();
        let cfg = SvrgConfig::offline(&b, 1.0).unwrap();
        let meter = Meter::with_cap(1000);
        let r = svrg_epoch(&b, &cfg, &[1.0, 1.0], &[1.0, 0.0], &mut seeded(0), &meter);
        assert!(matches!(r, Err(Error::BudgetExceeded(_))));
    }
}
