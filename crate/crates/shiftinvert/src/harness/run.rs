//! Seeded trials and report assembly.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::baseline::baseline_power_method;
use super::trace::{TraceEvent, TraceHeader, TraceWriter, TRACE_SCHEMA};
use super::{InputSpec, Mode, RunConfig};
use crate::budget::Meter;
use crate::error::{Error, Result};
use crate::linalg::io::{read_csv, read_matrix_market};
use crate::linalg::vector::{axpy, dot, normalized, scale};
use crate::linalg::{RowMatrix, SpectrumOracle};
use crate::power::{
    compute_top_eigenvector_with, DriverConfig, DriverMode, RoundEvent, RunStatus, TheoryParams,
};
use crate::rng::{fork, gaussian_vec, seeded, trial_seed, SeededRng};
use crate::shift::{estimate_shift, iteration_bound, ShiftConfig};
use crate::streaming::{
    estimate_variance, online_refine, BinaryFileOracle, CsvFileOracle, OnlineConfig, OnlineTheory,
    SampleOracle, SpikeModel, Stream,
};
use crate::svrg::{DenseSolver, LinearSolver, SolverKind};
use crate::synthetic::{diag_spectrum, planted_eigenvalues, planted_matrix};

pub const REPORT_SCHEMA: u32 = 1;

/// Largest dimension for which file inputs get a dense ground truth.
const TRUTH_MAX_D: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSummary {
    pub lambda_bar: f64,
    pub lam1_tilde: f64,
    pub lam2_tilde: f64,
    pub lambda1_upper: f64,
    pub iterations: usize,
    pub in_bounds: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub error: Option<String>,
    /// Exact Rayleigh quotient of the output; on the true covariance online.
    pub quotient: Option<f64>,
    pub lambda1: Option<f64>,
    /// `|v₁ᵀx|`
    pub alignment: Option<f64>,
    pub success: Option<bool>,
    pub certified: bool,
    pub rounds: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Gradient evaluations offline, samples online, passes over `A` for
    /// the baseline.
    pub work: u64,
    pub shift: Option<ShiftSummary>,
    pub theory: Option<TheoryParams>,
    pub online: Option<OnlineTheory>,
}

/// The parts of a trial the aggregate depends on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub status: RunStatus,
    pub quotient: Option<f64>,
    pub success: Option<bool>,
    pub work: u64,
}

impl From<&TrialResult> for TrialSummary {
    fn from(t: &TrialResult) -> Self {
        TrialSummary {
            status: t.status,
            quotient: t.quotient,
            success: t.success,
            work: t.work,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub completed: usize,
    pub successes: usize,
    /// Over trials with a known ground truth.
    pub success_rate: Option<f64>,
    pub quotient_mean: Option<f64>,
    /// Min, quartiles and max.
    pub quotient_quantiles: Option<[f64; 5]>,
    pub work_mean: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Aggregate {
    pub fn compute(trials: &[TrialSummary]) -> Self {
        let judged: Vec<bool> = trials.iter().filter_map(|t| t.success).collect();
        let successes = judged.iter().filter(|&&s| s).count();
        let mut qs: Vec<f64> = trials.iter().filter_map(|t| t.quotient).filter(|q| q.is_finite()).collect();
        qs.sort_by(f64::total_cmp);
        let (mean, quant) = if qs.is_empty() {
            (None, None)
        } else {
            let m = qs.iter().sum::<f64>() / qs.len() as f64;
            let q = [0.0, 0.25, 0.5, 0.75, 1.0].map(|p| quantile(&qs, p));
            (Some(m), Some(q))
        };
        Aggregate {
            trials: trials.len(),
            completed: trials.iter().filter(|t| t.status == RunStatus::Completed).count(),
            successes,
            success_rate: (!judged.is_empty()).then(|| successes as f64 / judged.len() as f64),
            quotient_mean: mean,
            quotient_quantiles: quant,
            work_mean: if trials.is_empty() {
                0.0
            } else {
                trials.iter().map(|t| t.work as f64).sum::<f64>() / trials.len() as f64
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub artifact: String,
    pub version: String,
    pub schema: u32,
    pub config: RunConfig,
    pub trials: Vec<TrialResult>,
    pub aggregate: Aggregate,
}

impl Report {
    pub fn all_completed(&self) -> bool {
        self.aggregate.completed == self.aggregate.trials
    }
}

/// Wall-clock times, kept out of the report so reports are reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub trial_seconds: Vec<f64>,
}

struct Truth {
    lambda1: f64,
    gap: f64,
    v1: Vec<f64>,
    oracle: Option<SpectrumOracle>,
}

struct Instance {
    matrix: RowMatrix,
    truth: Option<Truth>,
}

fn load_matrix(path: &PathBuf) -> Result<RowMatrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mtx") => read_matrix_market(path),
        Some("csv") => read_csv(path),
        _ => Err(Error::InvalidConfig(format!(
            "cannot tell the format of {}; use .mtx or .csv",
            path.display()
        ))),
    }
}

fn truth_from_oracle(o: SpectrumOracle) -> Truth {
    Truth {
        lambda1: o.lambda1(),
        gap: o.gap(),
        v1: o.v1().to_vec(),
        oracle: Some(o),
    }
}

fn build_instance(cfg: &RunConfig, rng: &mut SeededRng) -> Result<Instance> {
    let want_oracle = cfg.oracle_trace;
    let (matrix, truth) = match &cfg.input {
        InputSpec::File { path, .. } => {
            let m = load_matrix(path)?;
            let t = if m.d() <= TRUTH_MAX_D {
                Some(truth_from_oracle(SpectrumOracle::from_matrix(&m)?))
            } else {
                None
            };
            (m, t)
        }
        InputSpec::DiagSpectrum { values } => {
            let p = diag_spectrum(values)?;
            let oracle = want_oracle.then(|| SpectrumOracle::from_matrix(&p.matrix)).transpose()?;
            let t = Truth {
                lambda1: p.lambda1(),
                gap: p.gap(),
                v1: p.v1.clone(),
                oracle,
            };
            (p.matrix, Some(t))
        }
        InputSpec::Random { n, d, density, gap, decay } => {
            let eig = planted_eigenvalues(*d, *gap, *decay);
            let p = planted_matrix(*n, &eig, *density, rng)?;
            let oracle = want_oracle.then(|| SpectrumOracle::from_matrix(&p.matrix)).transpose()?;
            let t = Truth {
                lambda1: p.lambda1(),
                gap: p.gap(),
                v1: p.v1.clone(),
                oracle,
            };
            (p.matrix, Some(t))
        }
        InputSpec::Spike { .. } => {
            return Err(Error::InvalidConfig("the spike model is a stream, not a matrix".into()))
        }
    };
    Ok(Instance { matrix, truth })
}

fn driver_config(cfg: &RunConfig) -> DriverConfig {
    DriverConfig {
        epsilon: cfg.epsilon,
        mode: if cfg.mode == Mode::GapFree {
            DriverMode::GapFree
        } else {
            DriverMode::Offline
        },
        solver: cfg.solver,
        output: cfg.output,
        eigenvector: cfg.eigenvector,
        shift: shift_config(cfg),
        seed: cfg.seed,
        ..DriverConfig::default()
    }
}

fn shift_config(cfg: &RunConfig) -> ShiftConfig {
    ShiftConfig {
        alpha: cfg.alpha,
        gap_floor: cfg.gap_floor,
        exit_rule: cfg.exit_rule,
        power_steps: None,
    }
}

fn judge(cfg: &RunConfig, truth: Option<&Truth>, x: &[f64], quotient: f64) -> (Option<f64>, Option<bool>) {
    match truth {
        Some(t) => {
            let align = dot(&t.v1, x).abs();
            let ok = if cfg.eigenvector {
                align >= 1.0 - cfg.epsilon
            } else {
                quotient >= (1.0 - cfg.epsilon) * t.lambda1
            };
            (Some(align), Some(ok))
        }
        None => (None, None),
    }
}

fn blank_trial(index: usize, seed: u64) -> TrialResult {
    TrialResult {
        index,
        seed,
        status: RunStatus::Completed,
        error: None,
        quotient: None,
        lambda1: None,
        alignment: None,
        success: None,
        certified: false,
        rounds: 0,
        accepted: 0,
        rejected: 0,
        work: 0,
        shift: None,
        theory: None,
        online: None,
    }
}

fn status_of(e: &Error) -> RunStatus {
    match e {
        Error::BudgetExceeded(_) | Error::SampleCap { .. } => RunStatus::BudgetExceeded,
        Error::Deadline => RunStatus::Deadline,
        Error::Stalled { .. } => RunStatus::Stalled,
        _ => RunStatus::Failed,
    }
}

fn meter_for(cfg: &RunConfig) -> Meter {
    match cfg.work_cap {
        Some(c) => Meter::with_cap(c),
        None => Meter::unlimited(),
    }
}

fn offline_trial(
    cfg: &RunConfig,
    index: usize,
    rng: &mut SeededRng,
    events: &mut Vec<TraceEvent>,
) -> Result<TrialResult> {
    let mut gen = fork(rng);
    let inst = build_instance(cfg, &mut gen)?;
    let m = &inst.matrix;
    let truth = inst.truth.as_ref();
    let mut t = blank_trial(index, 0);
    t.lambda1 = truth.map(|t| t.lambda1);
    let meter = meter_for(cfg);
    let dcfg = driver_config(cfg);
    let dense = (cfg.solver == SolverKind::ExactDense).then(|| DenseSolver::new(m));
    let factory = |upper: f64| -> Box<dyn LinearSolver + '_> {
        match &dense {
            Some(s) => Box::new(s),
            None => cfg.solver.build(m, upper, cfg.output),
        }
    };
    let oracle = truth.and_then(|t| t.oracle.as_ref());
    let mut observer = |e: &RoundEvent<'_>| {
        events.push(TraceEvent::Round {
            trial: index,
            phase: e.phase,
            round: e.round,
            quotient: e.quotient,
            g: oracle.and_then(|o| o.potential_g(e.lambda, e.x).ok()),
            work: e.grad_evals,
            accepted: e.accepted,
        })
    };
    let r = compute_top_eigenvector_with(m, &dcfg, &factory, rng, &meter, &mut observer)?;
    t.status = r.status;
    t.error = r.error.clone();
    t.quotient = Some(r.quotient);
    let (align, ok) = judge(cfg, truth, &r.x, r.quotient);
    t.alignment = align;
    t.success = ok;
    t.certified = r.certified;
    t.rounds = r.burn_in_rounds + r.warm_rounds;
    t.accepted = r.accepted;
    t.rejected = r.rejected;
    t.work = r.grad_evals;
    t.shift = r.shift.as_ref().map(|s| ShiftSummary {
        lambda_bar: s.lambda_bar,
        lam1_tilde: s.lam1_tilde,
        lam2_tilde: s.lam2_tilde,
        lambda1_upper: s.lambda1_upper,
        iterations: s.iterations,
        in_bounds: truth.map(|tr| s.in_bounds(tr.lambda1, tr.gap)),
    });
    t.theory = r.theory;
    Ok(t)
}

fn shift_trial(cfg: &RunConfig, index: usize, rng: &mut SeededRng) -> Result<TrialResult> {
    let mut gen = fork(rng);
    let inst = build_instance(cfg, &mut gen)?;
    let m = &inst.matrix;
    let truth = inst.truth.as_ref();
    let mut t = blank_trial(index, 0);
    t.lambda1 = truth.map(|t| t.lambda1);
    let meter = meter_for(cfg);
    let dense = (cfg.solver == SolverKind::ExactDense).then(|| DenseSolver::new(m));
    let factory = |upper: f64| -> Box<dyn LinearSolver + '_> {
        match &dense {
            Some(s) => Box::new(s),
            None => cfg.solver.build(m, upper, cfg.output),
        }
    };
    match estimate_shift(m, &shift_config(cfg), &factory, rng, &meter) {
        Ok(s) => {
            let judged = truth.map(|tr| (s.in_bounds(tr.lambda1, tr.gap), s.iterations <= iteration_bound(tr.gap)));
            t.success = judged.map(|(a, b)| a && b);
            t.rounds = s.iterations;
            t.quotient = Some(s.lambda_bar);
            t.shift = Some(ShiftSummary {
                lambda_bar: s.lambda_bar,
                lam1_tilde: s.lam1_tilde,
                lam2_tilde: s.lam2_tilde,
                lambda1_upper: s.lambda1_upper,
                iterations: s.iterations,
                in_bounds: judged.map(|j| j.0),
            });
        }
        Err(e) if matches!(e, Error::InvalidConfig(_) | Error::InvalidInput(_)) => return Err(e),
        Err(e) => {
            t.status = status_of(&e);
            t.error = Some(e.to_string());
            t.success = truth.map(|_| false);
        }
    }
    t.work = meter.used();
    Ok(t)
}

fn baseline_trial(cfg: &RunConfig, index: usize, rng: &mut SeededRng) -> Result<TrialResult> {
    let mut gen = fork(rng);
    let inst = build_instance(cfg, &mut gen)?;
    let r = baseline_power_method(&inst.matrix, cfg.baseline_iters, None, rng)?;
    let q = *r.quotients.last().expect("at least one iteration");
    let mut t = blank_trial(index, 0);
    t.lambda1 = inst.truth.as_ref().map(|t| t.lambda1);
    t.quotient = Some(q);
    let (align, ok) = judge(cfg, inst.truth.as_ref(), &r.x, q);
    t.alignment = align;
    t.success = ok;
    t.rounds = cfg.baseline_iters;
    t.work = r.matvecs;
    Ok(t)
}

/// Unit vector `(v + 0.3u)/‖v + 0.3u‖` with `u` a random unit vector
/// orthogonal to `v`.
pub(crate) fn synthetic_warm_start(v: &[f64], rng: &mut SeededRng) -> Result<Vec<f64>> {
    if v.len() == 1 {
        return Ok(v.to_vec());
    }
    let mut u = gaussian_vec(rng, v.len());
    let c = dot(&u, v);
    axpy(-c, v, &mut u);
    let mut u = normalized(&u)?;
    scale(0.3, &mut u);
    axpy(1.0, v, &mut u);
    normalized(&u)
}

fn online_trial(cfg: &RunConfig, index: usize, rng: &mut SeededRng) -> Result<TrialResult> {
    let mut t = blank_trial(index, 0);
    let mut gen = fork(rng);
    let mut spike;
    let mut csv;
    let mut bin;
    let oracle: &mut dyn SampleOracle = match &cfg.input {
        InputSpec::Spike { d, strength } => {
            spike = SpikeModel::random(*d, *strength, &mut gen)?;
            &mut spike
        }
        InputSpec::File { path, multi_epoch, .. } => match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => {
                bin = BinaryFileOracle::open(path, *multi_epoch)?;
                &mut bin
            }
            _ => {
                csv = CsvFileOracle::open(path, *multi_epoch)?;
                &mut csv
            }
        },
        _ => return Err(Error::InvalidConfig("online mode needs a stream input".into())),
    };
    let truth = oracle.truth();
    let mut stream = Stream::new(oracle, cfg.work_cap);
    let (ocfg, x0) = match &truth {
        Some(tr) => {
            let gap = tr.gap();
            let lambda = tr.lambda1 * (1.0 + gap / 120.0);
            let ocfg = OnlineConfig::new(cfg.epsilon, lambda, tr.lambda1, gap, cfg.var_hint.unwrap_or(tr.variance));
            (ocfg, synthetic_warm_start(&tr.v1, &mut gen)?)
        }
        None => {
            let gap = cfg.gap_hint.ok_or_else(|| Error::InvalidConfig("gap hint required".into()))?;
            let v = cfg.var_hint.ok_or_else(|| Error::InvalidConfig("variance hint required".into()))?;
            let pilot = match estimate_variance(&mut stream, None, rng) {
                Ok(p) => p,
                Err(e) => {
                    t.status = status_of(&e);
                    t.error = Some(e.to_string());
                    t.work = stream.samples_used();
                    return Ok(t);
                }
            };
            let ocfg = OnlineConfig::new(
                cfg.epsilon,
                pilot.lambda1 * (1.0 + gap / 120.0),
                pilot.lambda1 * (1.0 + gap / 300.0),
                gap,
                v,
            );
            (ocfg, pilot.v1)
        }
    };
    let r = online_refine(&mut stream, &x0, &ocfg, rng)?;
    t.status = r.status;
    t.error = r.error.clone();
    t.quotient = r.true_quotient;
    if let Some(tr) = &truth {
        t.lambda1 = Some(tr.lambda1);
        let align = dot(&tr.v1, &r.x).abs();
        t.alignment = Some(align);
        let q = r.true_quotient.unwrap_or(f64::NEG_INFINITY);
        t.success = Some(if cfg.eigenvector {
            align >= 1.0 - cfg.epsilon
        } else {
            q >= (1.0 - cfg.epsilon) * tr.lambda1
        });
    }
    t.rounds = r.rounds;
    t.accepted = r.accepted;
    t.rejected = r.rejected;
    t.work = r.samples_used;
    t.online = Some(r.theory);
    Ok(t)
}

fn run_trial(cfg: &RunConfig, index: usize) -> Result<(TrialResult, Vec<TraceEvent>, f64)> {
    let start = Instant::now();
    let seed = trial_seed(cfg.seed, index as u64);
    let mut rng = seeded(seed);
    let mut events = Vec::new();
    let mut t = match cfg.mode {
        Mode::Offline | Mode::GapFree => offline_trial(cfg, index, &mut rng, &mut events)?,
        Mode::EstimateShift => shift_trial(cfg, index, &mut rng)?,
        Mode::Baseline => baseline_trial(cfg, index, &mut rng)?,
        Mode::Online => online_trial(cfg, index, &mut rng)?,
    };
    t.seed = seed;
    events.push(TraceEvent::TrialEnd {
        trial: index,
        status: t.status,
        quotient: t.quotient,
        success: t.success,
        work: t.work,
    });
    Ok((t, events, start.elapsed().as_secs_f64()))
}

pub fn run(cfg: &RunConfig) -> Result<(Report, Timing)> {
    run_with_trace(cfg, None)
}

/// Runs all trials on a worker pool and assembles the report in trial
/// order.
pub fn run_with_trace(cfg: &RunConfig, trace: Option<&Path>) -> Result<(Report, Timing)> {
    cfg.validate()?;
    let start = Instant::now();
    let workers = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, cfg.trials);
    type Slot = Option<Result<(TrialResult, Vec<TraceEvent>, f64)>>;
    let slots: Mutex<Vec<Slot>> = Mutex::new((0..cfg.trials).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cfg.trials {
                    break;
                }
                let r = run_trial(cfg, i);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    let mut trials = Vec::with_capacity(cfg.trials);
    let mut events = Vec::new();
    let mut secs = Vec::with_capacity(cfg.trials);
    for slot in slots.into_inner().expect("no worker panicked") {
        let (t, ev, s) = slot.expect("every trial ran")?;
        trials.push(t);
        events.extend(ev);
        secs.push(s);
    }
    let summaries: Vec<TrialSummary> = trials.iter().map(TrialSummary::from).collect();
    let report = Report {
        artifact: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        schema: REPORT_SCHEMA,
        config: cfg.clone(),
        aggregate: Aggregate::compute(&summaries),
        trials,
    };
    if let Some(path) = trace {
        let header = TraceHeader {
            schema: TRACE_SCHEMA,
            artifact: report.artifact.clone(),
            version: report.version.clone(),
            oracle: cfg.oracle_trace,
            config: cfg.clone(),
        };
        let mut w = TraceWriter::create(path, &header)?;
        for e in &events {
            w.write(e)?;
        }
        w.finish()?;
    }
    Ok((
        report,
        Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            trial_seconds: secs,
        },
    ))
}
