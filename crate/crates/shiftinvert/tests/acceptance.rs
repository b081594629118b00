//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Ground truth comes from dense eigendecompositions and LU solves done
//! here with nalgebra, apart from the crate's own code paths where noted.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use shiftinvert::harness::{run, InputSpec, Mode, Report, RunConfig};
use shiftinvert::linalg::oracle::dense_shifted_solve;
use shiftinvert::linalg::vector::{axpy, dot, norm, normalized, scale, sub};
use shiftinvert::linalg::{ShiftedOperator, SpectrumOracle};
use shiftinvert::power::{warm_start_round, DriverConfig, Phase, PowerState};
use shiftinvert::rng::{gaussian_vec, seeded, SeededRng};
use shiftinvert::streaming::{estimate_rayleigh, solve_sample_count, SpikeModel, Stream};
use shiftinvert::svrg::{svrg_epoch, SolverKind, SvrgConfig};
use shiftinvert::synthetic::{planted_eigenvalues, planted_matrix};
use shiftinvert::{Error, Meter, RowMatrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn unit(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    normalized(&gaussian_vec(rng, d)).unwrap()
}

fn shifted_dense(m: &RowMatrix, shift: f64) -> DMatrix<f64> {
    let g = m.gram();
    DMatrix::identity(g.nrows(), g.ncols()) * shift - g
}

fn lu_solve(b: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    b.clone()
        .lu()
        .solve(&DVector::from_column_slice(rhs))
        .expect("nonsingular")
        .as_slice()
        .to_vec()
}

fn quad(b: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    v.dot(&(b * &v))
}

/// Eigenvalues in decreasing order with matching eigenvectors.
fn eigen_desc(s: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let e = SymmetricEigen::new(s.clone());
    let mut idx: Vec<usize> = (0..s.nrows()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = idx.iter().map(|&i| e.eigenvectors.column(i).iter().copied().collect()).collect();
    (vals, vecs)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn successes(r: &Report) -> usize {
    r.trials.iter().filter(|t| t.success == Some(true)).count()
}

fn statuses(r: &Report) -> String {
    let mut counts = std::collections::BTreeMap::new();
    for t in &r.trials {
        *counts.entry(format!("{:?}", t.status)).or_insert(0usize) += 1;
    }
    counts.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

fn exact_contraction() -> Outcome {
    let mut worst = 0.0f64;
    let mut steps = 0;
    let mut violations = 0;
    for k in 0..50u64 {
        let d = [10, 25, 50, 100][k as usize % 4];
        let gap = [0.3, 0.1, 0.03, 0.01, 0.001][k as usize % 5];
        let mut rng = seeded(1000 + k);
        let p = planted_matrix(d, &planted_eigenvalues(d, gap, 0.7), 1.0, &mut rng).unwrap();
        let o = SpectrumOracle::from_matrix(&p.matrix).unwrap();
        let (l1, g) = (o.lambda1(), o.gap());
        let shift = l1 * (1.0 + g * rng.random_range(1.0 / 150.0..=1.0 / 100.0));
        let gram = p.matrix.gram();
        let mut x = unit(&mut rng, d);
        for _ in 0..3 {
            let before = o.potential_g(shift, &x).unwrap();
            if before < 1e-6 {
                break;
            }
            let y = normalized(&dense_shifted_solve(&gram, shift, &x).unwrap()).unwrap();
            let after = o.potential_g(shift, &y).unwrap();
            steps += 1;
            worst = worst.max(after / before);
            if after > before / 100.0 * (1.0 + 1e-9) {
                violations += 1;
            }
            x = y;
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{steps} steps on 50 instances, {violations} violations, worst G ratio {worst:.5}"),
    }
}

fn svrg_progress() -> Outcome {
    let mut means = Vec::new();
    for gap in [0.5, 0.05] {
        let mut sum = 0.0;
        for s in 0..200u64 {
            let mut rng = seeded(2000 + s);
            let p = planted_matrix(100, &planted_eigenvalues(20, gap, 0.5), 1.0, &mut rng).unwrap();
            let l1 = p.lambda1();
            let shift = l1 * (1.0 + gap / 8.0);
            let op = ShiftedOperator::new(&p.matrix, shift).unwrap();
            let cfg = SvrgConfig::offline(&op, l1).unwrap();
            let rhs = unit(&mut rng, 20);
            let b = shifted_dense(&p.matrix, shift);
            let x_star = lu_solve(&b, &rhs);
            let x = svrg_epoch(&op, &cfg, &[0.0; 20], &rhs, &mut rng, &Meter::unlimited()).unwrap();
            sum += quad(&b, &sub(&x, &x_star)) / quad(&b, &x_star);
        }
        means.push(sum / 200.0);
    }
    Outcome {
        pass: means.iter().all(|&m| m <= 0.6),
        detail: format!("mean error ratio {:.4} at gap 0.5, {:.4} at gap 0.05", means[0], means[1]),
    }
}

fn improved_variance() -> Outcome {
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for k in 0..10u64 {
        let mut rng = seeded(3000 + k);
        let (n, d) = (40, 20);
        let gap = [0.5, 0.1, 0.01][k as usize % 3];
        let p = planted_matrix(n, &planted_eigenvalues(d, gap, 0.6), 1.0, &mut rng).unwrap();
        let a = p.matrix.to_dense();
        let f: f64 = a.iter().map(|v| v * v).sum();
        let (vals, vecs) = eigen_desc(&(a.transpose() * &a));
        let l1 = vals[0];
        let shift = l1 * (1.0 + gap * rng.random_range(0.005..1.0));
        let b = DMatrix::identity(d, d) * shift - a.transpose() * &a;
        let rhs = gaussian_vec(&mut rng, d);
        let x_star = lu_solve(&b, &rhs);
        let c = 4.0 * l1 * f / (shift - l1);
        for j in 0..10 {
            let mut x = match j % 2 {
                0 => gaussian_vec(&mut rng, d),
                _ => vecs[rng.random_range(0..d)].clone(),
            };
            scale(rng.random_range(0.01..10.0), &mut x);
            axpy(1.0, &x_star, &mut x);
            let e = DVector::from_column_slice(&sub(&x, &x_star));
            let mut lhs = 0.0;
            for i in 0..n {
                let ai = a.row(i).transpose();
                let pi = ai.norm_squared() / f;
                let gi = &e * (shift * pi) - &ai * ai.dot(&e);
                lhs += gi.norm_squared() / pi;
            }
            let excess = 0.5 * e.dot(&(&b * &e));
            tightest = tightest.max(lhs / (c * excess));
            if lhs > c * excess * (1.0 + 1e-9) {
                violations += 1;
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("100 points on 10 instances, {violations} violations, largest LHS/RHS {tightest:.4}"),
    }
}

/// Unit vector with potential `g` at `shift`.
fn with_potential(o: &SpectrumOracle, shift: f64, g: f64, rng: &mut SeededRng) -> Vec<f64> {
    let v1 = o.v1();
    let mut u = gaussian_vec(rng, o.d());
    axpy(-dot(&u, v1), v1, &mut u);
    let mut probe = v1.to_vec();
    axpy(1.0, &u, &mut probe);
    let base = o.potential_g(shift, &probe).unwrap();
    scale(g / base, &mut u);
    axpy(1.0, v1, &mut u);
    normalized(&u).unwrap()
}

fn b_noise(o: &SpectrumOracle, shift: f64, r: f64, rng: &mut SeededRng) -> Vec<f64> {
    let mut g = gaussian_vec(rng, o.d());
    let nb = o.b_norm_sq(shift, &g).unwrap().sqrt();
    scale(r / nb, &mut g);
    g
}

struct WarmSetup {
    p: shiftinvert::synthetic::Planted,
    o: SpectrumOracle,
    shift: f64,
    l1_hat: f64,
}

fn warm_setup(seed: u64, rng: &mut SeededRng) -> WarmSetup {
    let d = [8, 15, 30][seed as usize % 3];
    let gap = [0.3, 0.1, 0.02][seed as usize % 3];
    let p = planted_matrix(d, &planted_eigenvalues(d, gap, 0.7), 1.0, rng).unwrap();
    let o = SpectrumOracle::from_matrix(&p.matrix).unwrap();
    let (l1, g) = (o.lambda1(), o.gap());
    let shift = l1 * (1.0 + g * rng.random_range(1.0 / 150.0..=1.0 / 100.0));
    let l1_hat = l1 + rng.random_range(0.0..=(shift - l1) / 11.0);
    WarmSetup { p, o, shift, l1_hat }
}

fn warm_start() -> Outcome {
    let cap = 1.0 / 10f64.sqrt();
    let mut rounds = 0;
    let mut max_g = 0.0f64;
    let mut accepted = 0;
    for k in 0..20u64 {
        let mut rng = seeded(4000 + k);
        let w = warm_setup(k, &mut rng);
        let (o, shift) = (&w.o, w.shift);
        let mu = shift - o.lambda1();
        let root = o.top_inverse_eigenvalue(shift).sqrt();
        let x0 = with_potential(o, shift, cap, &mut rng);
        let mut state = PowerState::new(x0, shift, w.l1_hat, Phase::WarmStart).unwrap();
        for _ in 0..500 {
            let mode = rng.random_range(0..10);
            let exact = o.solve_shifted(shift, &state.x).unwrap();
            let candidate: shiftinvert::Result<Vec<f64>> = match mode {
                0 => Ok(sub(&exact, &b_noise(o, shift, 0.5e-3 * root, &mut rng))),
                1 => Ok(b_noise(o, shift, 100.0 * root, &mut rng)),
                2 => Err(Error::ZeroVector),
                3 => Err(Error::Numerical("injected".into())),
                4 => Err(Error::Diverged { steps: 7, last_finite: state.x.clone() }),
                5 => Ok(vec![f64::NAN; o.d()]),
                6 => {
                    let c = [1e-3, 0.3, 1e3][rng.random_range(0..3)];
                    Ok(exact.iter().map(|v| c * v).collect())
                }
                7 => {
                    let mut u = gaussian_vec(&mut rng, o.d());
                    axpy(-dot(&u, o.v1()), o.v1(), &mut u);
                    scale(10.0 / (mu * norm(&u)), &mut u);
                    Ok(u)
                }
                8 => Ok(sub(&exact, &b_noise(o, shift, root, &mut rng))),
                _ => Ok(sub(&exact, &b_noise(o, shift, rng.random_range(0.0..10.0) * root, &mut rng))),
            };
            let noise = rng.random_range(-1.0..=1.0) * mu / 30.0;
            let m = &w.p.matrix;
            let mut once = Some(candidate);
            let out = warm_start_round(&mut state, &mut |_| once.take().expect("one solve per round"), &mut |x| {
                Ok(m.rayleigh_quotient(x)? + noise)
            })
            .unwrap();
            accepted += out.accepted as usize;
            rounds += 1;
            max_g = max_g.max(o.potential_g(shift, &state.x).unwrap());
        }
    }
    let a_ok = max_g <= cap * (1.0 + 1e-9);
    // What the two acceptance tests imply through G² ≤ (1+μ/(λ₁gap))(1+2δ/(λ₁gap))·δ/μ
    // with δ = λ₁ − quot ≤ μ/5 and μ ≤ λ₁gap/100.
    let implied = (1.01f64 * 1.004 / 5.0).sqrt();

    let c1 = 1e-3;
    let mut ratios = Vec::new();
    for k in 0..300u64 {
        let mut rng = seeded(4500 + k);
        let w = warm_setup(k, &mut rng);
        let (o, shift) = (&w.o, w.shift);
        let mu = shift - o.lambda1();
        let g0 = rng.random_range(0.01..=cap);
        let x0 = with_potential(o, shift, g0, &mut rng);
        let xi = b_noise(o, shift, c1 / 1000.0 * o.top_inverse_eigenvalue(shift).sqrt(), &mut rng);
        let noise = rng.random_range(-1.0..=1.0) * mu / 30.0;
        let mut state = PowerState::new(x0, shift, w.l1_hat, Phase::WarmStart).unwrap();
        let m = &w.p.matrix;
        warm_start_round(
            &mut state,
            &mut |x| {
                let mut y = o.solve_shifted(shift, x)?;
                axpy(1.0, &xi, &mut y);
                Ok(y)
            },
            &mut |x| Ok(m.rayleigh_quotient(x)? + noise),
        )
        .unwrap();
        ratios.push(o.potential_g(shift, &state.x).unwrap() / g0);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let b_ok = mean <= 3.0 / 25.0 + 0.02;
    Outcome {
        pass: a_ok && b_ok,
        detail: format!(
            "(a) {rounds} rounds with injected failures, {accepted} accepted, max G {max_g:.4} vs 1/sqrt(10) = {cap:.4} \
             (below the {implied:.4} the acceptance tests imply: {}); (b) mean G ratio {mean:.5} over {} near-exact rounds",
            max_g <= implied,
            ratios.len()
        ),
    }
}

const SUITE: [(usize, f64); 4] = [(30, 0.1), (30, 0.01), (100, 0.1), (100, 0.01)];

fn suite_config(d: usize, gap: f64, trials: usize, solver: SolverKind, cap: Option<u64>) -> RunConfig {
    let mut cfg = RunConfig::new(
        Mode::Offline,
        InputSpec::Random { n: d, d, density: 1.0, gap, decay: 0.5 },
    );
    cfg.epsilon = 1e-6;
    cfg.seed = 5000 + d as u64 + (gap * 1e4) as u64;
    cfg.trials = trials;
    cfg.solver = solver;
    cfg.work_cap = cap;
    cfg
}

/// Gradient evaluations the warm-start phase alone needs.
fn warm_phase_lower_bound(r: &Report, n: usize) -> Option<f64> {
    let dcfg = DriverConfig::default();
    let mut bounds: Vec<f64> = r
        .trials
        .iter()
        .filter_map(|t| t.theory.as_ref())
        .map(|th| {
            (1..=th.warm_rounds)
                .map(|i| {
                    let epochs = SvrgConfig::epochs_for_ratio(dcfg.warm_ratio(i)).unwrap() as f64;
                    epochs * (n as f64 + (th.m_max as f64 + 1.0) / 2.0)
                })
                .sum()
        })
        .collect();
    bounds.sort_by(f64::total_cmp);
    bounds.get(bounds.len() / 2).copied()
}

fn end_to_end() -> Outcome {
    let probe_cap = 50_000_000;
    let mut parts = Vec::new();
    let mut all_ok = true;
    for (d, gap) in SUITE {
        let t = Instant::now();
        let (probe, _) = run(&suite_config(d, gap, 2, SolverKind::Svrg, Some(probe_cap))).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let work: u64 = probe.trials.iter().map(|t| t.work).sum();
        let rate = work as f64 / secs.max(1e-9);
        let (dense, _) = run(&suite_config(d, gap, 25, SolverKind::ExactDense, None)).unwrap();
        let projection = match warm_phase_lower_bound(&dense, d) {
            Some(lb) => format!(
                "warm phase alone needs >= {lb:.2e} evals per trial, >= {:.1} h for 300 trials",
                lb * 300.0 / rate / 3600.0
            ),
            None => "no theory parameters".into(),
        };
        all_ok &= successes(&probe) == probe.trials.len();
        parts.push(format!(
            "d={d} gap={gap}: svrg {}/{} under a cap of {probe_cap} evals ({}), {rate:.2e} evals/s, {projection}; \
             exact-dense companion {}/{}",
            successes(&probe),
            probe.trials.len(),
            statuses(&probe),
            successes(&dense),
            dense.trials.len()
        ));
    }
    Outcome {
        pass: all_ok,
        detail: parts.join(" | "),
    }
}

fn shift_estimation() -> Outcome {
    let mut ok = 0;
    let mut total = 0;
    let mut parts = Vec::new();
    for gap in [0.3, 0.03, 0.003] {
        let mut cfg = RunConfig::new(
            Mode::EstimateShift,
            InputSpec::Random { n: 20, d: 20, density: 1.0, gap, decay: 0.5 },
        );
        cfg.seed = 6000 + (gap * 1e4) as u64;
        cfg.trials = 100;
        cfg.solver = SolverKind::ExactDense;
        let (r, _) = run(&cfg).unwrap();
        let s = successes(&r);
        ok += s;
        total += r.trials.len();
        let max_t = r.trials.iter().map(|t| t.rounds).max().unwrap_or(0);
        parts.push(format!("gap {gap}: {s}/100, max T {max_t}"));
    }
    Outcome {
        pass: ok as f64 >= 0.99 * total as f64,
        detail: format!("{ok}/{total} in window with T within bound ({})", parts.join(", ")),
    }
}

fn rayleigh_estimation() -> Outcome {
    let (d, s, eps, p) = (20, 1.0, 0.1, 0.05);
    let l1 = 1.0 + s;
    // E[(aaᵀ)²] = tr(Σ)Σ + 2Σ² for Gaussian a, so v = tr(Σ)/λ₁ + 2.
    let v = (d as f64 + s) / l1 + 2.0;
    let mut hits = 0;
    for k in 0..400u64 {
        let mut rng = seeded(7000 + k);
        let mut model = SpikeModel::random(d, s, &mut rng).unwrap();
        let dir = model.direction().to_vec();
        let x = if k % 2 == 0 {
            unit(&mut rng, d)
        } else {
            let mut x = unit(&mut rng, d);
            scale(0.2, &mut x);
            axpy(1.0, &dir, &mut x);
            normalized(&x).unwrap()
        };
        let truth = 1.0 + s * dot(&dir, &x).powi(2);
        let mut stream = Stream::new(&mut model, None);
        let z = estimate_rayleigh(&mut stream, &x, eps, p, v, &mut rng).unwrap();
        if (z - truth).abs() <= eps * l1 {
            hits += 1;
        }
    }
    Outcome {
        pass: hits as f64 >= 0.95 * 400.0,
        detail: format!("{hits}/400 within eps*lambda1, v = {v:.3}"),
    }
}

fn online_config(eps: f64, trials: usize, cap: u64) -> RunConfig {
    let mut cfg = RunConfig::new(Mode::Online, InputSpec::Spike { d: 50, strength: 1.0 });
    cfg.epsilon = eps;
    cfg.seed = 8000;
    cfg.trials = trials;
    cfg.work_cap = Some(cap);
    cfg
}

fn online_refinement() -> Outcome {
    let cap = 20_000_000;
    let t = Instant::now();
    let (probe, _) = run(&online_config(0.01, 2, cap)).unwrap();
    let rate = probe.trials.iter().map(|t| t.work).sum::<u64>() as f64 / t.elapsed().as_secs_f64();
    let mut inv_eps = Vec::new();
    let mut planned = Vec::new();
    for eps in [0.04, 0.02, 0.01, 0.005] {
        let (r, _) = run(&online_config(eps, 1, 1)).unwrap();
        let th = r.trials[0].online.clone().expect("online theory");
        let sv = &th.solver;
        let total: f64 = th
            .solve_accuracy
            .iter()
            .map(|&c| {
                solve_sample_count(sv.lambda, sv.lambda1, sv.variance, c).unwrap() as f64
                    + th.rayleigh_plan.samples() as f64
            })
            .sum();
        inv_eps.push((1.0 / eps as f64).ln());
        planned.push(total.ln());
    }
    let sl = slope(&inv_eps, &planned);
    let per_trial = planned[2].exp();
    let rate_ok = successes(&probe) as f64 >= 2.0 / 3.0 * probe.trials.len() as f64;
    Outcome {
        pass: rate_ok && (sl - 1.0).abs() <= 0.25,
        detail: format!(
            "{}/{} successes under a cap of {cap} samples ({}), {rate:.2e} samples/s; planned samples per trial at eps 0.01 \
             {per_trial:.2e} (>= {:.1} h for 60 seeds); planned-count slope vs 1/eps {sl:.3}",
            successes(&probe),
            probe.trials.len(),
            statuses(&probe),
            per_trial * 60.0 / rate / 3600.0
        ),
    }
}

fn gap_free() -> Outcome {
    let mut spec = vec![1.0, 1.0];
    spec.extend((0..8).map(|k| 0.8 * 0.7f64.powi(k)));
    let cfg = |trials, solver, cap| {
        let mut c = RunConfig::new(Mode::GapFree, InputSpec::DiagSpectrum { values: spec.clone() });
        c.epsilon = 0.01;
        c.seed = 9000;
        c.trials = trials;
        c.solver = solver;
        c.work_cap = cap;
        c
    };
    let cap = 50_000_000;
    let (probe, _) = run(&cfg(4, SolverKind::Svrg, Some(cap))).unwrap();
    let (dense, _) = run(&cfg(100, SolverKind::ExactDense, None)).unwrap();
    let m_max = dense.trials.iter().filter_map(|t| t.theory.as_ref()).map(|t| t.m_max).min();
    Outcome {
        pass: successes(&probe) as f64 >= 0.95 * probe.trials.len() as f64,
        detail: format!(
            "svrg {}/{} under a cap of {cap} evals ({}), epoch length m_max {}; exact-dense companion {}/100",
            successes(&probe),
            probe.trials.len(),
            statuses(&probe),
            m_max.map_or("unknown".into(), |m| format!("{m:.2e}", m = m as f64)),
            successes(&dense)
        ),
    }
}

fn ratio_b(vals: &[f64], coef: &[f64], shift: f64) -> f64 {
    let num: f64 = (1..vals.len()).map(|i| coef[i] * coef[i] * (shift - vals[i])).sum();
    (num / (coef[0] * coef[0] * (shift - vals[0]))).sqrt()
}

fn ratio_l2(coef: &[f64]) -> f64 {
    let num: f64 = coef[1..].iter().map(|c| c * c).sum();
    (num / (coef[0] * coef[0])).sqrt()
}

fn appendix_lemmas() -> Outcome {
    let mut progress_bad = 0;
    for k in 0..100u64 {
        let mut rng = seeded(10_000 + k);
        let d = rng.random_range(3..40);
        let gap = rng.random_range(0.001..0.5);
        let p = planted_matrix(d, &planted_eigenvalues(d, gap, 0.8), 1.0, &mut rng).unwrap();
        let (vals, vecs) = eigen_desc(&p.matrix.gram());
        let shift = vals[0] * (1.0 + rng.random_range(1e-4..1.0));
        let x = unit(&mut rng, d);
        let xt = lu_solve(&shifted_dense(&p.matrix, shift), &x);
        let c0: Vec<f64> = vecs.iter().map(|v| dot(v, &x)).collect();
        let c1: Vec<f64> = vecs.iter().map(|v| dot(v, &xt)).collect();
        let r = (shift - vals[0]) / (shift - vals[1]);
        let slack = 1.0 + 1e-9;
        if ratio_b(&vals, &c1, shift) > r * ratio_b(&vals, &c0, shift) * slack
            || ratio_l2(&c1) > r * ratio_l2(&c0) * slack
        {
            progress_bad += 1;
        }
    }

    let mut spectral_bad = 0;
    let mut worst = 0.0f64;
    for k in 0..100u64 {
        let mut rng = seeded(11_000 + k);
        let d = rng.random_range(2..30);
        let eps: f64 = [0.1, 0.01, 1e-3, 1e-4][k as usize % 4];
        let gap = rng.random_range(0.01..0.9);
        let p = planted_matrix(d, &planted_eigenvalues(d, gap, 0.9), 1.0, &mut rng).unwrap();
        let sigma = p.matrix.gram();
        let (vals, vecs) = eigen_desc(&sigma);
        let g = (vals[0] - vals[1]) / vals[0];
        let size = 0.5 * eps.sqrt() * g * vals[0];
        let (v1, v2) = (DVector::from_column_slice(&vecs[0]), DVector::from_column_slice(&vecs[1]));
        let e = match k % 3 {
            0 => &v1 * v2.transpose() + &v2 * v1.transpose(),
            1 => &v2 * v2.transpose() - &v1 * v1.transpose() + &v1 * v2.transpose() + &v2 * v1.transpose(),
            _ => {
                let z = DMatrix::from_column_slice(d, d, &gaussian_vec(&mut rng, d * d));
                &z + z.transpose()
            }
        };
        let e_norm = SymmetricEigen::new(e.clone()).eigenvalues.amax();
        let perturbed = &sigma + e * (size / e_norm);
        let (_, pv) = eigen_desc(&perturbed);
        let align = dot(&pv[0], &vecs[0]).abs();
        worst = worst.max(1.0 - align);
        if align < 1.0 - eps {
            spectral_bad += 1;
        }
    }
    Outcome {
        pass: progress_bad == 0 && spectral_bad == 0,
        detail: format!(
            "progress lemma {progress_bad}/100 violations; spectral-norm lemma {spectral_bad}/100 violations \
             (perturbation 0.5*sqrt(eps)*gap*lambda1, worst 1-|x.v1| {worst:.2e})"
        ),
    }
}

fn determinism() -> Outcome {
    let cap = 200_000;
    let mut identical = true;
    let mut bytes = 0;
    let mut trials = 0;
    for (d, gap) in SUITE {
        let cfg = suite_config(d, gap, 300, SolverKind::Svrg, Some(cap));
        let (a, _) = run(&cfg).unwrap();
        let (b, _) = run(&cfg).unwrap();
        let (ja, jb) = (serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        identical &= ja == jb;
        bytes += ja.len();
        trials += a.trials.len();
    }
    Outcome {
        pass: identical,
        detail: format!(
            "{trials} trials run twice with a cap of {cap} evals each, {bytes} report bytes, identical: {identical}"
        ),
    }
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 11] = [
        ("exact contraction", 10.0, exact_contraction),
        ("svrg constant progress", 60.0, svrg_progress),
        ("improved variance bound", 30.0, improved_variance),
        ("warm-start round", 120.0, warm_start),
        ("end-to-end offline", 300.0, end_to_end),
        ("shift estimation", 180.0, shift_estimation),
        ("online rayleigh estimation", 60.0, rayleigh_estimation),
        ("online refinement", 300.0, online_refinement),
        ("gap-free", 120.0, gap_free),
        ("appendix invariants", 30.0, appendix_lemmas),
        ("determinism", f64::INFINITY, determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        let pass = out.pass && secs < *limit;
        failed += !pass as usize;
        let limit = if limit.is_finite() { format!("{limit:.0}s") } else { "none".into() };
        println!(
            "criterion {:>2}: {} {name}: {} [{secs:.1}s, limit {limit}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!("{failed} criteria failed");
}
