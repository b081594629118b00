//! Estimating `λ₁` and a shift `λ̄` with `(1+gap/120)λ₁ ≤ λ̄ ≤ (1+gap/8)λ₁`.
//!
//! Two-column block power iterations first on `AᵀA`, then on
//! `(λ̄I − AᵀA)⁻¹` for a sequence of shifts that halve their distance to
//! `λ₁` until the second eigenvalue estimate shows the shift is within a
//! constant fraction of the gap.

use serde::{Deserialize, Serialize};

use crate::budget::Meter;
use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm, scale};
use crate::linalg::{RowMatrix, ShiftedOperator};
use crate::rng::{fork, gaussian_vec, SeededRng};
use crate::svrg::LinearSolver;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigEstimatePair {
    pub tilde_lambda1: f64,
    pub tilde_lambda2: f64,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

/// Orthonormalizes two columns by Gram-Schmidt with one
/// reorthogonalization pass. Returns the basis and the 2×2 upper
/// triangular factor `[r11, r12, r22]`. A column that vanishes is replaced
/// by a random orthogonal direction and gets a zero diagonal entry.
pub fn orthonormalize_pair(
    a: &[f64],
    b: &[f64],
    rng: &mut SeededRng,
) -> (Vec<f64>, Vec<f64>, [f64; 3]) {
    let d = a.len();
    let mut q1 = a.to_vec();
    let mut r11 = norm(&q1);
    if !(r11 > 0.0) || !r11.is_finite() {
        q1 = gaussian_vec(rng, d);
        r11 = 0.0;
    }
    let n1 = norm(&q1);
    scale(1.0 / n1, &mut q1);

    let mut q2 = b.to_vec();
    let bn = norm(b);
    let mut r12 = 0.0;
    for _ in 0..2 {
        let c = dot(&q1, &q2);
        axpy(-c, &q1, &mut q2);
        r12 += c;
    }
    let mut r22 = norm(&q2);
    if d < 2 {
        return (q1, vec![0.0; d], [r11, r12, 0.0]);
    }
    if !(r22 > 1e-13 * bn.max(r11)) {
        loop {
            q2 = gaussian_vec(rng, d);
            for _ in 0..2 {
                let c = dot(&q1, &q2);
                axpy(-c, &q1, &mut q2);
            }
            if norm(&q2) > 1e-8 {
                break;
            }
        }
        r22 = 0.0;
    }
    let n2 = norm(&q2);
    scale(1.0 / n2, &mut q2);
    (q1, q2, [r11, r12, r22])
}

/// Eigenvectors of the symmetric 2×2 matrix `[[a, b], [b, c]]`, largest
/// eigenvalue first.
fn sym2_eigvecs(a: f64, b: f64, c: f64) -> [[f64; 2]; 2] {
    if b == 0.0 {
        return if a >= c {
            [[1.0, 0.0], [0.0, 1.0]]
        } else {
            [[0.0, 1.0], [1.0, 0.0]]
        };
    }
    let half = 0.5 * (a - c);
    let root = (half * half + b * b).sqrt();
    let l1 = 0.5 * (a + c) + root;
    let (x, y) = if (l1 - c).abs() >= (l1 - a).abs() {
        (l1 - c, b)
    } else {
        (b, l1 - a)
    };
    let n = (x * x + y * y).sqrt();
    let u1 = [x / n, y / n];
    [u1, [-u1[1], u1[0]]]
}

/// Rayleigh quotients of the two leading left singular vectors of `MᵗW`
/// for a Gaussian `d×2` block `W`, re-orthonormalizing after every
/// application.
pub fn eig_estimate(
    apply_m: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    d: usize,
    t: usize,
    rng: &mut SeededRng,
) -> Result<EigEstimatePair> {
    if t < 1 {
        return Err(Error::InvalidConfig("eig_estimate needs t ≥ 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let w1 = gaussian_vec(rng, d);
    let w2 = gaussian_vec(rng, d);
    let (mut q1, mut q2, r0) = orthonormalize_pair(&w1, &w2, rng);
    // Product of the triangular factors, so MᵗW = Q·R̂.
    let mut rh = r0;
    for _ in 0..t {
        let y1 = apply_m(&q1)?;
        let y2 = if d > 1 { apply_m(&q2)? } else { vec![0.0; d] };
        let (n1, n2, r) = orthonormalize_pair(&y1, &y2, rng);
        q1 = n1;
        q2 = n2;
        // R·R̂ for upper triangular 2×2 factors.
        let prod = [r[0] * rh[0], r[0] * rh[1] + r[1] * rh[2], r[2] * rh[2]];
        let s = prod.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rh = if s > 0.0 && s.is_finite() {
            [prod[0] / s, prod[1] / s, prod[2] / s]
        } else {
            [1.0, 0.0, 0.0]
        };
    }
    if d == 1 {
        let mq = apply_m(&q1)?;
        return Ok(EigEstimatePair {
            tilde_lambda1: dot(&q1, &mq),
            tilde_lambda2: 0.0,
            v1: q1,
            v2: vec![0.0],
        });
    }
    // Left singular vectors of R̂ are eigenvectors of R̂R̂ᵀ.
    let a = rh[0] * rh[0] + rh[1] * rh[1];
    let b = rh[1] * rh[2];
    let c = rh[2] * rh[2];
    let u = sym2_eigvecs(a, b, c);
    let combine = |w: [f64; 2]| -> Vec<f64> {
        q1.iter().zip(&q2).map(|(x, y)| w[0] * x + w[1] * y).collect()
    };
    let v1 = combine(u[0]);
    let v2 = combine(u[1]);
    let l1 = dot(&v1, &apply_m(&v1)?);
    let l2 = dot(&v2, &apply_m(&v2)?);
    let (v1, v2, l1, l2) = if l1 >= l2 { (v1, v2, l1, l2) } else { (v2, v1, l2, l1) };
    Ok(EigEstimatePair {
        tilde_lambda1: l1,
        tilde_lambda2: l2,
        v1,
        v2,
    })
}

/// Which sense of the loop condition ends the shift search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitRule {
    /// Stop once `λ̄ − λ̃₁ < (1/10)(λ̄ − λ̃₂)`; the sense the exit bounds
    /// are proved for.
    #[default]
    Theorem,
    /// Stop once `λ̄ − λ̃₁ ≥ (1/10)(λ̄ − λ̃₂)`, the printed loop test read
    /// literally. Stops at the initial shift in practice.
    AsPrinted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub alpha: f64,
    pub gap_floor: f64,
    pub exit_rule: ExitRule,
    /// Overrides `t = ⌈α ln d⌉`.
    pub power_steps: Option<usize>,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            alpha: 150.0,
            gap_floor: 1e-4,
            exit_rule: ExitRule::Theorem,
            power_steps: None,
        }
    }
}

impl ShiftConfig {
    pub fn power_steps(&self, d: usize) -> usize {
        self.power_steps
            .unwrap_or_else(|| (self.alpha * (d.max(2) as f64).ln()).ceil() as usize)
            .max(1)
    }

    /// Iteration guard `4·⌈log₂(10/gap_floor)⌉`.
    pub fn max_iterations(&self) -> usize {
        4 * (10.0 / self.gap_floor).log2().ceil() as usize
    }

    /// Squared-error ratio for each inner inverse application.
    pub fn inner_ratio(&self, d: usize) -> f64 {
        (self.gap_floor / d as f64).powi(6).max(f64::MIN_POSITIVE)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 100.0) {
            return Err(Error::InvalidConfig(format!("alpha must exceed 100, got {}", self.alpha)));
        }
        if !(self.gap_floor > 0.0 && self.gap_floor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gap floor must lie in (0, 1), got {}",
                self.gap_floor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftIterate {
    pub lambda_bar: f64,
    pub lam1_tilde: f64,
    pub lam2_tilde: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimate {
    pub lambda_bar: f64,
    pub lam1_tilde: f64,
    pub lam2_tilde: f64,
    /// Upper estimate `λ̃₁ + (λ̄_{T−1} − λ̃₁)/(α−1)` of `λ₁`, strictly below `λ̄`.
    pub lambda1_upper: f64,
    pub iterations: usize,
    pub alpha: f64,
    pub power_steps: usize,
    pub history: Vec<ShiftIterate>,
    pub grad_evals: u64,
}

impl ShiftEstimate {
    /// `(λ̂₁ − λ̃₂)/λ̂₁`
    pub fn gap_estimate(&self) -> f64 {
        ((self.lambda1_upper - self.lam2_tilde) / self.lambda1_upper).clamp(0.0, 1.0)
    }

    pub fn in_bounds(&self, lambda1: f64, gap: f64) -> bool {
        self.lambda_bar >= (1.0 + gap / 120.0) * lambda1
            && self.lambda_bar <= (1.0 + gap / 8.0) * lambda1
    }
}

/// `⌈log₂(10/gap)⌉ + 1`
pub fn iteration_bound(gap: f64) -> usize {
    (10.0 / gap).log2().ceil() as usize + 1
}

fn exits(rule: ExitRule, it: &ShiftIterate) -> bool {
    let lhs = it.lambda_bar - it.lam1_tilde;
    let rhs = 0.1 * (it.lambda_bar - it.lam2_tilde);
    match rule {
        ExitRule::Theorem => lhs < rhs,
        ExitRule::AsPrinted => lhs >= rhs,
    }
}

/// Solver factory: given an upper estimate of `λ₁`, a solver for the
/// current shift.
pub type SolverFactory<'a> = dyn Fn(f64) -> Box<dyn LinearSolver + 'a> + 'a;

pub fn estimate_shift(
    m: &RowMatrix,
    cfg: &ShiftConfig,
    solver_factory: &SolverFactory<'_>,
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<ShiftEstimate> {
    cfg.validate()?;
    let d = m.d();
    let t = cfg.power_steps(d);
    let start = meter.used();
    let n = m.n() as u64;

    let mut sigma = |x: &[f64]| -> Result<Vec<f64>> {
        meter.charge(n)?;
        m.apply_sigma(x)
    };
    let first = eig_estimate(&mut sigma, d, t, rng)?;
    if !(first.tilde_lambda1 > 0.0) {
        return Err(Error::EstimationFailed("AᵀA has no positive eigenvalue".into()));
    }
    let alpha = cfg.alpha;
    let mut lambda_bar = 1.5 * first.tilde_lambda1;
    let mut upper = first.tilde_lambda1 * alpha / (alpha - 1.0);
    let mut current = ShiftIterate {
        lambda_bar,
        lam1_tilde: first.tilde_lambda1,
        lam2_tilde: first.tilde_lambda2,
    };
    let mut history = vec![current];
    let ratio = cfg.inner_ratio(d);
    let guard = cfg.max_iterations();
    let mut i = 0;

    while !exits(cfg.exit_rule, &current) {
        i += 1;
        if i > guard {
            return Err(Error::EstimationFailed(format!(
                "no exit after {guard} iterations (λ̄ = {lambda_bar})"
            )));
        }
        let shift = lambda_bar;
        let op = ShiftedOperator::new(m, shift)?;
        let solver = solver_factory(upper);
        let mut solve_rng = fork(rng);
        let mut inverse = |x: &[f64]| -> Result<Vec<f64>> {
            let x0 = crate::power::scaled_identity_warm_start(&op, x)?;
            Ok(solver.solve(&op, x, &x0, ratio, &mut solve_rng, meter)?.solution)
        };
        let pair = eig_estimate(&mut inverse, d, t, rng)?;
        if !(pair.tilde_lambda1 > 0.0) || !pair.tilde_lambda1.is_finite() {
            return Err(Error::EstimationFailed(format!(
                "inverse estimate {} at shift {shift} is not positive",
                pair.tilde_lambda1
            )));
        }
        let lam1 = shift - 1.0 / pair.tilde_lambda1;
        let lam2 = if pair.tilde_lambda2 > 0.0 {
            shift - 1.0 / pair.tilde_lambda2
        } else {
            f64::NEG_INFINITY
        };
        lambda_bar = 0.5 * (lam1 + shift);
        upper = lam1 + (shift - lam1) / (alpha - 1.0);
        current = ShiftIterate {
            lambda_bar,
            lam1_tilde: lam1,
            lam2_tilde: lam2,
        };
        history.push(current);
        log::debug!("shift iteration {i}: λ̄ = {lambda_bar}, λ̃₁ = {lam1}, λ̃₂ = {lam2}");
    }

    Ok(ShiftEstimate {
        lambda_bar,
        lam1_tilde: current.lam1_tilde,
        lam2_tilde: current.lam2_tilde,
        lambda1_upper: upper,
        iterations: i,
        alpha,
        power_steps: t,
        history,
        grad_evals: meter.used() - start,
    })
}

/// Shift for the gap-free path: `λ̃₁(1 + ε/200)` with `λ̃₁` from a block
/// power estimate at accuracy `α = 400/ε`. Also returns the upper estimate
/// `λ̃₁/(1 − 1/α)` of `λ₁`.
pub fn estimate_lambda1_gapfree(
    m: &RowMatrix,
    epsilon: f64,
    rng: &mut SeededRng,
    meter: &Meter,
) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let alpha = 400.0 / epsilon;
    let t = ((alpha * (m.d().max(2) as f64).ln()).ceil() as usize).max(1);
    let n = m.n() as u64;
    let mut sigma = |x: &[f64]| -> Result<Vec<f64>> {
        meter.charge(n)?;
        m.apply_sigma(x)
    };
    let pair = eig_estimate(&mut sigma, m.d(), t, rng)?;
    if !(pair.tilde_lambda1 > 0.0) {
        return Err(Error::EstimationFailed("AᵀA has no positive eigenvalue".into()));
    }
    Ok((
        pair.tilde_lambda1 * (1.0 + epsilon / 200.0),
        pair.tilde_lambda1 / (1.0 - 1.0 / alpha),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn identity_operator_gives_ones() {
        let mut id = |x: &[f64]| -> Result<Vec<f64>> { Ok(x.to_vec()) };
        let p = eig_estimate(&mut id, 5, 3, &mut seeded(2)).unwrap();
        assert!((p.tilde_lambda1 - 1.0).abs() < 1e-12);
        assert!((p.tilde_lambda2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diag_two_by_two() {
        for seed in 0..100 {
            let mut m = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![x[0], 0.5 * x[1]]) };
            let p = eig_estimate(&mut m, 2, 40, &mut seeded(seed)).unwrap();
            assert!(p.tilde_lambda1 <= 1.0 + 1e-12 && p.tilde_lambda1 >= 0.999);
        }
    }

    #[test]
    fn pair_is_orthonormal() {
        let mut rng = seeded(9);
        let a = gaussian_vec(&mut rng, 30);
        let mut b = a.clone();
        b[0] += 1e-9;
        let (q1, q2, _) = orthonormalize_pair(&a, &b, &mut rng);
        assert!((dot(&q1, &q1) - 1.0).abs() < 1e-12);
        assert!((dot(&q2, &q2) - 1.0).abs() < 1e-12);
        assert!(dot(&q1, &q2).abs() < 1e-10);
    }

    #[test]
    fn rank_one_second_estimate_is_zero() {
        let mut m = |x: &[f64]| -> Result<Vec<f64>> { Ok(vec![x[0], 0.0, 0.0]) };
        let p = eig_estimate(&mut m, 3, 5, &mut seeded(4)).unwrap();
        assert!((p.tilde_lambda1 - 1.0).abs() < 1e-12);
        assert!(p.tilde_lambda2.abs() < 1e-12);
    }

    #[test]
    fn iteration_bound_arithmetic() {
        assert_eq!(iteration_bound(0.5), 6);
        assert_eq!(iteration_bound(1e-3), 15);
        assert_eq!(ShiftConfig::default().max_iterations(), 4 * 17);
    }

    fn dense_estimate(m: &RowMatrix, seed: u64, rule: ExitRule) -> ShiftEstimate {
        let dense = crate::svrg::DenseSolver::new(m);
        let factory = |_: f64| -> Box<dyn LinearSolver + '_> { Box::new(&dense) };
        let cfg = ShiftConfig {
            exit_rule: rule,
            ..ShiftConfig::default()
        };
        estimate_shift(m, &cfg, &factory, &mut crate::rng::seeded(seed), &Meter::unlimited()).unwrap()
    }

    #[test]
    fn diag_half_gap_bounds() {
        let p = crate::synthetic::diag_spectrum(&[1.0, 0.5]).unwrap();
        for seed in 0..10 {
            let e = dense_estimate(&p.matrix, seed, ExitRule::Theorem);
            assert!(e.in_bounds(1.0, 0.5), "{e:?}");
            assert!(e.iterations <= iteration_bound(0.5));
            assert!(e.lambda1_upper >= 1.0 - 1e-12 && e.lambda1_upper < e.lambda_bar);
        }
    }

    #[test]
    fn printed_rule_stops_at_start() {
        let p = crate::synthetic::diag_spectrum(&[1.0, 0.5]).unwrap();
        let e = dense_estimate(&p.matrix, 0, ExitRule::AsPrinted);
        assert_eq!(e.iterations, 0);
        assert!((e.lambda_bar - 1.5).abs() < 1e-6);
    }

    #[test]
    fn small_gap_planted() {
        let eig = crate::synthetic::planted_eigenvalues(30, 0.003, 0.5);
        let p = crate::synthetic::planted_matrix(30, &eig, 1.0, &mut crate::rng::seeded(4)).unwrap();
        let e = dense_estimate(&p.matrix, 1, ExitRule::Theorem);
        assert!(e.in_bounds(1.0, 0.003), "{:?}", e.history);
        assert!(e.iterations <= iteration_bound(0.003));
    }
}
