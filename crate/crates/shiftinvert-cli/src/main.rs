use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use shiftinvert::harness::{run_with_trace, verify_trace, InputSpec, Mode, Report, RunConfig};
use shiftinvert::shift::ExitRule;
use shiftinvert::svrg::{EpochOutput, SolverKind};

/// Top eigenvector of AᵀA or of a sample covariance by shift-and-invert
/// power iteration.
///
/// Log level follows `SHIFTINVERT_LOG` (falling back to `RUST_LOG`).
#[derive(Parser, Debug)]
#[command(name = "shiftinvert", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replay a trace and check it reproduces the report's aggregate.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// offline, online, gap-free, estimate-shift or baseline.
    #[arg(long, default_value = "offline")]
    mode: Mode,
    /// Matrix file (.mtx or .csv), or a sample file with --stream.
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// spike:d=..,strength=.. | diag:v1,v2,.. | random:n=..,d=..,density=..,gap=..
    #[arg(long)]
    synthetic: Option<InputSpec>,
    /// Read --input as a stream of samples (CSV rows or the binary format).
    #[arg(long, requires = "input")]
    stream: bool,
    /// Rewind the stream at end of file; the run is then marked non-streaming.
    #[arg(long, requires = "stream")]
    multi_epoch: bool,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// svrg, accelerated or exact-dense.
    #[arg(long, default_value = "svrg")]
    solver: SolverKind,
    /// Return the last epoch iterate instead of a uniformly random one.
    #[arg(long)]
    final_iterate: bool,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Wall-clock timings, kept apart from the report.
    #[arg(long)]
    timing: Option<PathBuf>,
    /// Newline-delimited JSON trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Record the potential G in the trace (dense eigendecomposition).
    #[arg(long)]
    oracle_trace: bool,
    #[arg(long, default_value_t = 150.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-4)]
    gap_floor: f64,
    /// Stop the shift search on the literal loop test.
    #[arg(long)]
    printed_exit_rule: bool,
    /// Target |v₁ᵀx| ≥ 1 − ε instead of the Rayleigh quotient.
    #[arg(long)]
    eigenvector: bool,
    /// Per-trial cap on samples (online) or gradient evaluations (offline).
    #[arg(long, alias = "work-cap")]
    sample_cap: Option<u64>,
    /// v(D) for sample files.
    #[arg(long)]
    var_hint: Option<f64>,
    /// Assumed eigengap for sample files.
    #[arg(long)]
    gap_hint: Option<f64>,
    #[arg(long, default_value_t = 100)]
    baseline_iters: usize,
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn config(self) -> Result<RunConfig, String> {
        let input = match (self.input, self.synthetic) {
            (Some(path), None) => InputSpec::File {
                path,
                stream: self.stream,
                multi_epoch: self.multi_epoch,
            },
            (None, Some(spec)) => spec,
            _ => return Err("exactly one of --input and --synthetic is required".into()),
        };
        let mut cfg = RunConfig::new(self.mode, input);
        cfg.epsilon = self.epsilon;
        cfg.seed = self.seed;
        cfg.trials = self.trials;
        cfg.solver = self.solver;
        if self.final_iterate {
            cfg.output = EpochOutput::FinalIterate;
        }
        cfg.alpha = self.alpha;
        cfg.gap_floor = self.gap_floor;
        if self.printed_exit_rule {
            cfg.exit_rule = ExitRule::AsPrinted;
        }
        cfg.eigenvector = self.eigenvector;
        cfg.work_cap = self.sample_cap;
        cfg.var_hint = self.var_hint;
        cfg.gap_hint = self.gap_hint;
        cfg.baseline_iters = self.baseline_iters;
        cfg.oracle_trace = self.oracle_trace;
        cfg.threads = self.threads;
        Ok(cfg)
    }
}

fn write_json<T: serde::Serialize + ?Sized>(path: Option<&Path>, value: &T) -> std::io::Result<()> {
    let mut out: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()
}

fn run(args: RunArgs) -> Result<ExitCode, String> {
    let out = args.out.clone();
    let timing = args.timing.clone();
    let trace = args.trace.clone();
    let cfg = args.config()?;
    let (report, t) = run_with_trace(&cfg, trace.as_deref()).map_err(|e| e.to_string())?;
    info!(
        "{} trials, {} completed, {} successes in {:.2}s",
        report.aggregate.trials, report.aggregate.completed, report.aggregate.successes, t.total_seconds
    );
    write_json(out.as_deref(), &report).map_err(|e| e.to_string())?;
    if let Some(p) = timing {
        write_json(Some(&p), &t).map_err(|e| e.to_string())?;
    }
    Ok(if report.all_completed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn verify(trace: &Path, report: &Path) -> Result<ExitCode, String> {
    let file = File::open(report).map_err(|e| format!("{}: {e}", report.display()))?;
    let report: Report = serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| e.to_string())?;
    let agg = verify_trace(trace, &report).map_err(|e| e.to_string())?;
    println!("trace reproduces the aggregate of {} trials", agg.trials);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("SHIFTINVERT_LOG", std::env::var("RUST_LOG").unwrap_or_else(|_| "warn".into())),
    )
    .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Command::Verify { trace, report }) => verify(&trace, &report),
        None => run(cli.run),
    };
    result.unwrap_or_else(|e| {
        error!("{e}");
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
