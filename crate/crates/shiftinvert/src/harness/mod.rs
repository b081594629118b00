//! Experiment harness: inputs, seeded trials, reports and traces.

mod baseline;
mod run;
mod trace;

pub use baseline::{baseline_power_method, BaselineResult};
pub use run::{run, run_with_trace, Aggregate, Report, Timing, TrialResult, REPORT_SCHEMA};
pub use trace::{read_trace, verify_trace, TraceEvent, TraceHeader, TraceWriter, TRACE_SCHEMA};

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shift::ExitRule;
use crate::svrg::{EpochOutput, SolverKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Offline,
    Online,
    GapFree,
    EstimateShift,
    Baseline,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "offline" => Mode::Offline,
            "online" => Mode::Online,
            "gap-free" => Mode::GapFree,
            "estimate-shift" => Mode::EstimateShift,
            "baseline" => Mode::Baseline,
            _ => return Err(Error::InvalidConfig(format!("unknown mode {s:?}"))),
        })
    }
}

/// Where the data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InputSpec {
    /// Matrix Market (`.mtx`) or CSV matrix; with `stream`, a CSV or
    /// binary sample file read once.
    File { path: PathBuf, stream: bool, multi_epoch: bool },
    /// Gaussian spike model.
    Spike { d: usize, strength: f64 },
    /// `A = diag(sqrt(λᵢ))`.
    DiagSpectrum { values: Vec<f64> },
    /// Planted spectrum `{1, 1 − gap, (1 − gap)·decayᵏ}`; a fresh instance
    /// per trial.
    Random { n: usize, d: usize, density: f64, gap: f64, decay: f64 },
}

fn kv_pairs(body: &str) -> Result<Vec<(String, String)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got {kv:?}")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value {v:?} for {key}")))
}

impl FromStr for InputSpec {
    type Err = Error;

    /// `spike:d=20,strength=1`, `diag:1,0.9,0.5`, or
    /// `random:n=100,d=30,density=1,gap=0.1[,decay=0.5]`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "spike" => {
                let (mut d, mut strength) = (None, None);
                for (k, v) in kv_pairs(body)? {
                    match k.as_str() {
                        "d" => d = Some(num(&k, &v)?),
                        "strength" | "lambda" => strength = Some(num(&k, &v)?),
                        _ => return Err(Error::InvalidConfig(format!("unknown spike key {k:?}"))),
                    }
                }
                Ok(InputSpec::Spike {
                    d: d.ok_or_else(|| Error::InvalidConfig("spike needs d".into()))?,
                    strength: strength.unwrap_or(1.0),
                })
            }
            "diag" => {
                let values = body
                    .split(',')
                    .map(|v| num::<f64>("diag", v.trim()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(InputSpec::DiagSpectrum { values })
            }
            "random" => {
                let (mut n, mut d, mut density, mut gap, mut decay) = (None, None, 1.0, None, 0.5);
                for (k, v) in kv_pairs(body)? {
                    match k.as_str() {
                        "n" => n = Some(num(&k, &v)?),
                        "d" => d = Some(num(&k, &v)?),
                        "density" => density = num(&k, &v)?,
                        "gap" => gap = Some(num(&k, &v)?),
                        "decay" => decay = num(&k, &v)?,
                        _ => return Err(Error::InvalidConfig(format!("unknown random key {k:?}"))),
                    }
                }
                let d = d.ok_or_else(|| Error::InvalidConfig("random needs d".into()))?;
                Ok(InputSpec::Random {
                    n: n.unwrap_or(d),
                    d,
                    density,
                    gap: gap.ok_or_else(|| Error::InvalidConfig("random needs gap".into()))?,
                    decay,
                })
            }
            _ => Err(Error::InvalidConfig(format!("unknown synthetic input {kind:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub input: InputSpec,
    pub epsilon: f64,
    pub seed: u64,
    pub trials: usize,
    pub solver: SolverKind,
    pub output: EpochOutput,
    pub alpha: f64,
    pub gap_floor: f64,
    pub exit_rule: ExitRule,
    /// Target `|v₁ᵀx|` instead of the quotient.
    pub eigenvector: bool,
    /// Per-trial cap on gradient evaluations (offline) or samples (online).
    pub work_cap: Option<u64>,
    /// `v(D)` for file streams.
    pub var_hint: Option<f64>,
    /// Eigengap assumed for file streams in online mode.
    pub gap_hint: Option<f64>,
    /// Power iterations for the baseline mode.
    pub baseline_iters: usize,
    /// Record the potential `G` in traces through a dense eigendecomposition.
    pub oracle_trace: bool,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(mode: Mode, input: InputSpec) -> Self {
        RunConfig {
            mode,
            input,
            epsilon: 1e-6,
            seed: 0,
            trials: 1,
            solver: SolverKind::Svrg,
            output: EpochOutput::RandomStop,
            alpha: 150.0,
            gap_floor: 1e-4,
            exit_rule: ExitRule::Theorem,
            eigenvector: false,
            work_cap: None,
            var_hint: None,
            gap_hint: None,
            baseline_iters: 100,
            oracle_trace: false,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        let streamed = matches!(self.input, InputSpec::File { stream: true, .. });
        match (self.mode, &self.input) {
            (Mode::Online, InputSpec::Spike { .. }) => {}
            (Mode::Online, InputSpec::File { stream: true, .. }) => {
                if self.var_hint.is_none() || self.gap_hint.is_none() {
                    return Err(Error::InvalidConfig(
                        "online mode over a file stream needs a variance hint and a gap hint".into(),
                    ));
                }
            }
            (Mode::Online, _) => {
                return Err(Error::InvalidConfig(
                    "online mode needs a spike model or a file marked as a sample stream".into(),
                ))
            }
            (_, InputSpec::Spike { .. }) => {
                return Err(Error::InvalidConfig("the spike model is only available in online mode".into()))
            }
            _ if streamed => {
                return Err(Error::InvalidConfig("sample streams are only read in online mode".into()))
            }
            _ => {}
        }
        if self.baseline_iters == 0 {
            return Err(Error::InvalidConfig("baseline needs at least one iteration".into()));
        }
        Ok(())
    }
}
