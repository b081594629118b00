//! Synthetic distributions.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{GroundTruth, SampleOracle};
use crate::error::{Error, Result};
use crate::linalg::vector::normalized;
use crate::linalg::{RowMatrix, SpectrumOracle};
use crate::rng::{gaussian_vec, SeededRng};

/// `a = sqrt(λ_s)·ι·v* + Z` with `ι ~ N(0, 1)` and `Z ~ N(0, I_d)`.
#[derive(Clone, Debug)]
pub struct SpikeModel {
    strength: f64,
    direction: Vec<f64>,
}

impl SpikeModel {
    pub fn new(strength: f64, direction: Vec<f64>) -> Result<Self> {
        if !(strength >= 0.0) || !strength.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "spike strength must be finite and nonnegative, got {strength}"
            )));
        }
        Ok(SpikeModel {
            strength,
            direction: normalized(&direction)?,
        })
    }

    /// Spike along a uniformly random direction.
    pub fn random(d: usize, strength: f64, rng: &mut SeededRng) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        Self::new(strength, gaussian_vec(rng, d))
    }

    pub fn d(&self) -> usize {
        self.direction.len()
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    /// `v(D) = (d + 2 + 3λ_s)/(1 + λ_s)`
    pub fn variance(&self) -> f64 {
        (self.d() as f64 + 2.0 + 3.0 * self.strength) / (1.0 + self.strength)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.d();
        let v = nalgebra::DVector::from_column_slice(&self.direction);
        DMatrix::identity(d, d) + &v * v.transpose() * self.strength
    }
}

pub fn spike_sample(model: &SpikeModel, rng: &mut SeededRng, out: &mut [f64]) {
    let iota: f64 = rng.sample(StandardNormal);
    let s = model.strength.sqrt() * iota;
    for (o, v) in out.iter_mut().zip(&model.direction) {
        let z: f64 = rng.sample(StandardNormal);
        *o = s * v + z;
    }
}

impl SampleOracle for SpikeModel {
    fn dim(&self) -> usize {
        self.d()
    }

    fn draw_into(&mut self, rng: &mut SeededRng, out: &mut [f64]) -> Result<()> {
        spike_sample(self, rng, out);
        Ok(())
    }

    fn truth(&self) -> Option<GroundTruth> {
        Some(GroundTruth {
            covariance: self.covariance(),
            lambda1: 1.0 + self.strength,
            lambda2: if self.d() > 1 { 1.0 } else { 0.0 },
            v1: self.direction.clone(),
            variance: self.variance(),
        })
    }
}

/// Always returns the same vector.
#[derive(Clone, Debug)]
pub struct PointMass {
    a: Vec<f64>,
}

impl PointMass {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() || !a.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("point mass needs a finite nonempty vector".into()));
        }
        Ok(PointMass { a })
    }
}

impl SampleOracle for PointMass {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn draw_into(&mut self, _rng: &mut SeededRng, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.a);
        Ok(())
    }

    fn truth(&self) -> Option<GroundTruth> {
        let d = self.a.len();
        let v = nalgebra::DVector::from_column_slice(&self.a);
        let l1 = v.norm_squared();
        let v1 = normalized(&self.a).unwrap_or_else(|_| {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            e
        });
        Some(GroundTruth {
            covariance: &v * v.transpose(),
            lambda1: l1,
            lambda2: 0.0,
            v1,
            variance: 1.0,
        })
    }
}

/// Uniformly sampled rows of a matrix, so `Σ = AᵀA/n`.
#[derive(Clone, Debug)]
pub struct MatrixRowsOracle {
    matrix: RowMatrix,
}

impl MatrixRowsOracle {
    pub fn new(matrix: RowMatrix) -> Result<Self> {
        if matrix.n() == 0 || matrix.d() == 0 {
            return Err(Error::InvalidInput("matrix must have rows and columns".into()));
        }
        Ok(MatrixRowsOracle { matrix })
    }

    pub fn matrix(&self) -> &RowMatrix {
        &self.matrix
    }
}

impl SampleOracle for MatrixRowsOracle {
    fn dim(&self) -> usize {
        self.matrix.d()
    }

    fn draw_into(&mut self, rng: &mut SeededRng, out: &mut [f64]) -> Result<()> {
        let i = rng.random_range(0..self.matrix.n());
        out.fill(0.0);
        self.matrix.row(i).axpy_into(1.0, out);
        Ok(())
    }

    fn truth(&self) -> Option<GroundTruth> {
        let n = self.matrix.n() as f64;
        let cov = self.matrix.gram() / n;
        let o = SpectrumOracle::from_symmetric(cov.clone()).ok()?;
        let d = self.matrix.d();
        let mut fourth = DMatrix::<f64>::zeros(d, d);
        for i in 0..self.matrix.n() {
            let r = self.matrix.row(i);
            let w = self.matrix.row_norm_sq(i) / n;
            for (&j, &vj) in r.indices.iter().zip(r.values) {
                for (&k, &vk) in r.indices.iter().zip(r.values) {
                    fourth[(j, k)] += w * vj * vk;
                }
            }
        }
        let top4 = SpectrumOracle::from_symmetric(fourth).ok()?.lambda1();
        let l1 = o.lambda1();
        Some(GroundTruth {
            covariance: cov,
            lambda1: l1,
            lambda2: if d > 1 { o.lambda(1) } else { 0.0 },
            v1: o.v1().to_vec(),
            variance: if l1 > 0.0 { top4 / (l1 * l1) } else { 1.0 },
        })
    }
}
