#![allow(dead_code)]

use shiftinvert::linalg::vector::{normalized, norm_sq};
use shiftinvert::rng::{gaussian_vec, seeded, SeededRng};
use shiftinvert::synthetic::{planted_eigenvalues, planted_matrix, Planted};

pub fn planted(seed: u64, n: usize, d: usize, gap: f64) -> Planted {
    let mut rng = seeded(seed);
    planted_matrix(n, &planted_eigenvalues(d, gap, 0.7), 1.0, &mut rng).unwrap()
}

pub fn unit(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    normalized(&gaussian_vec(rng, d)).unwrap()
}

/// `xᵀMx` for a dense symmetric `M` given by its action.
pub fn quad(apply: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> f64 {
    let y = apply(x);
    x.iter().zip(&y).map(|(a, b)| a * b).sum()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm_sq(&d)
}
