//! Online pipeline over i.i.d. samples `a ~ D` with `Σ = E[aaᵀ]`.
//!
//! Every draw passes through a [`Stream`], which counts samples and
//! enforces the cap. Solver state is a handful of length-`d` buffers.

mod file;
mod oracles;
mod rayleigh;
mod refine;
mod solver;

pub use file::{write_binary_samples, BinaryFileOracle, CsvFileOracle, BINARY_MAGIC};
pub use oracles::{spike_sample, MatrixRowsOracle, PointMass, SpikeModel};
pub use rayleigh::{estimate_rayleigh, RayleighPlan};
pub use refine::{
    estimate_variance, oja, online_refine, solve_sample_count, OnlineConfig, OnlineReport, OnlineTheory,
    VarianceEstimate,
};
pub use solver::{streaming_solve, streaming_svrg_step, StreamingParams, StreamingSolve};

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Exact population quantities of a synthetic distribution.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub covariance: DMatrix<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub v1: Vec<f64>,
    /// `v(D) = ‖E[‖a‖²aaᵀ]‖₂/λ₁²`
    pub variance: f64,
}

impl GroundTruth {
    pub fn gap(&self) -> f64 {
        (self.lambda1 - self.lambda2) / self.lambda1
    }

    /// `xᵀΣx/‖x‖²`
    pub fn quotient(&self, x: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(x);
        (v.transpose() * &self.covariance * &v)[(0, 0)] / v.norm_squared()
    }
}

pub trait SampleOracle {
    fn dim(&self) -> usize;

    /// Writes one sample into `out`, which has length `dim()`.
    fn draw_into(&mut self, rng: &mut SeededRng, out: &mut [f64]) -> Result<()>;

    fn truth(&self) -> Option<GroundTruth> {
        None
    }

    /// True once a file-backed oracle has rewound.
    fn non_streaming(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamBudget {
    pub samples_used: u64,
    pub sample_cap: Option<u64>,
}

const DEADLINE_CHECK: u64 = 1 << 12;

/// A sample oracle with exact draw accounting.
pub struct Stream<'a> {
    oracle: &'a mut dyn SampleOracle,
    budget: StreamBudget,
    deadline: Option<Instant>,
}

impl<'a> Stream<'a> {
    pub fn new(oracle: &'a mut dyn SampleOracle, sample_cap: Option<u64>) -> Self {
        Stream {
            oracle,
            budget: StreamBudget {
                samples_used: 0,
                sample_cap,
            },
            deadline: None,
        }
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn budget(&self) -> StreamBudget {
        self.budget
    }

    pub fn samples_used(&self) -> u64 {
        self.budget.samples_used
    }

    pub fn non_streaming(&self) -> bool {
        self.oracle.non_streaming()
    }

    pub fn truth(&self) -> Option<GroundTruth> {
        self.oracle.truth()
    }

    pub fn draw_into(&mut self, rng: &mut SeededRng, out: &mut [f64]) -> Result<()> {
        Error::check_dim(self.dim(), out.len())?;
        if let Some(cap) = self.budget.sample_cap {
            if self.budget.samples_used >= cap {
                return Err(Error::SampleCap { cap });
            }
        }
        self.oracle.draw_into(rng, out)?;
        self.budget.samples_used += 1;
        if self.budget.samples_used % DEADLINE_CHECK == 0 {
            if let Some(t) = self.deadline {
                if Instant::now() >= t {
                    return Err(Error::Deadline);
                }
            }
        }
        Ok(())
    }

    pub fn draw(&mut self, rng: &mut SeededRng) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.draw_into(rng, &mut out)?;
        Ok(out)
    }
}
