mod common;

use shiftinvert::linalg::SpectrumOracle;
use shiftinvert::rng::seeded;
use shiftinvert::shift::{estimate_shift, ShiftConfig, ShiftEstimate};
use shiftinvert::svrg::{DenseSolver, LinearSolver};
use shiftinvert::{Meter, RowMatrix};

use common::planted;

fn dense_estimate(m: &RowMatrix, seed: u64) -> ShiftEstimate {
    let dense = DenseSolver::new(m);
    let factory = |_: f64| -> Box<dyn LinearSolver + '_> { Box::new(&dense) };
    estimate_shift(m, &ShiftConfig::default(), &factory, &mut seeded(seed), &Meter::unlimited()).unwrap()
}

#[test]
fn iterates_obey_window_lemmas() {
    let alpha = ShiftConfig::default().alpha;
    for seed in 0..30u64 {
        let gap = [0.3, 0.03, 0.003][seed as usize % 3];
        let p = planted(900 + seed, 20, 20, gap);
        let o = SpectrumOracle::from_matrix(&p.matrix).unwrap();
        let (l1, l2) = (o.lambda1(), o.lambda(1));
        let gap = o.gap();
        let est = dense_estimate(&p.matrix, seed);
        let h = &est.history;
        let tol = 1e-9 * l1;
        assert!(l1 - h[0].lam1_tilde >= -tol && l1 - h[0].lam1_tilde <= l1 / alpha + tol);
        let lift = h[0].lambda_bar - l1;
        assert!(lift >= 0.5 * (1.0 - 3.0 / alpha) * l1 - tol && lift <= 0.5 * l1 + tol);
        for i in 1..h.len() {
            let prev = h[i - 1].lambda_bar;
            let drop = l1 - h[i].lam1_tilde;
            assert!(drop >= -tol && drop <= (prev - l1) / (alpha - 1.0) + tol, "seed {seed} iter {i}");
            let lift = h[i].lambda_bar - l1;
            assert!(lift >= 0.5 * (1.0 - 1.0 / (alpha - 1.0)) * (prev - l1) - tol);
            assert!(lift <= 0.5 * (prev - l1) + tol);
            assert!((l2 - h[i].lam2_tilde).abs() <= (prev - l2) / (alpha - 1.0) + tol);
            assert!(h[i].lambda_bar - h[i].lam2_tilde >= gap * l1 / 4.0 - tol, "seed {seed} iter {i}");
        }
        assert!(est.in_bounds(l1, gap), "seed {seed}: {}", est.lambda_bar);
    }
}

#[test]
fn shift_is_scale_equivariant() {
    for seed in 0..6u64 {
        let p = planted(950 + seed, 15, 15, 0.05);
        let a = dense_estimate(&p.matrix, seed);
        for c in [0.1, 7.0] {
            let b = dense_estimate(&p.matrix.scaled(c), seed);
            assert_eq!(a.iterations, b.iterations);
            assert!((b.lambda_bar / (c * c) - a.lambda_bar).abs() <= 1e-9 * a.lambda_bar);
        }
    }
}
