//! cmd_beam_sweep: run the beam expected-deflection problem over a
//! decreasing tolerance grid, in serial and/or through the worker
//! pool against a loopback model server, and emit SweepRecord CSV.
//!
//! The wall-time column counts model-evaluation time only, so the
//! serial/parallel comparison is not polluted by point generation or
//! CSV bookkeeping.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use clap::Args;
use ndarray::Array2;

use ldcube_client::ModelEndpoint;
use ldcube_core::beam::{beam_problem, BeamConfig};
use ldcube_core::integrands::{Integrand, Problem};
use ldcube_core::seq::GeneratorKind;
use ldcube_core::stopping::{
    integrate_fourier_lattice, integrate_replicated, FourierOptions, ReplicatedOptions,
    StoppingResult, ToleranceSpec,
};
use ldcube_core::Result as CoreResult;
use ldcube_server::{serve_loopback, HostedModel, ServerHandle, ServerOptions};

use crate::problem_file::Criterion;
use crate::remote::RemoteIntegrand;
use crate::{effective_seed, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Serial,
    Parallel,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Serial => "serial",
            Mode::Parallel => "parallel",
        }
    }
}

fn parse_mode(text: &str) -> Result<Mode, String> {
    match text {
        "serial" => Ok(Mode::Serial),
        "parallel" => Ok(Mode::Parallel),
        other => Err(format!(
            "unknown mode {other:?} (expected serial or parallel)"
        )),
    }
}

fn parse_criterion(text: &str) -> Result<Criterion, String> {
    text.parse()
}

#[derive(Args)]
pub struct SweepArgs {
    /// Comma-separated strictly decreasing tolerances (default: the
    /// half-decade grid 10^-1.5 .. 10^-5)
    #[arg(long, value_delimiter = ',', value_name = "EPS,...")]
    pub epsilons: Option<Vec<f64>>,

    /// Stopping criterion: replicated or fourier
    #[arg(long, default_value = "replicated", value_parser = parse_criterion)]
    pub criterion: Criterion,

    /// Generator kind: lattice, sobol, or halton
    #[arg(long, default_value = "lattice", value_parser = crate::points::parse_kind)]
    pub kind: GeneratorKind,

    /// Master seed, reused for every run so n(eps) is comparable
    /// across the grid (LDCUBE_SEED overrides)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Constant load magnitude q0 on the beam
    #[arg(long, default_value_t = 1000.0)]
    pub load: f64,

    /// Run modes: serial, parallel, or serial,parallel
    #[arg(long, value_delimiter = ',', default_value = "serial", value_parser = parse_mode)]
    pub modes: Vec<Mode>,

    /// Worker-pool size for parallel mode
    #[arg(long, default_value_t = 4)]
    pub workers: usize,

    /// Artificial per-request model delay in milliseconds; any nonzero
    /// delay routes the serial mode through the loopback server too,
    /// so both modes pay the same per-evaluation cost
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,

    /// Sample budget per randomization
    #[arg(long, value_name = "N")]
    pub n_max: Option<u64>,

    /// Output CSV path (stdout when omitted)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Accumulates time spent inside the wrapped integrand.
struct TimedIntegrand {
    inner: Arc<dyn Integrand>,
    nanos: AtomicU64,
}

impl TimedIntegrand {
    fn new(inner: Arc<dyn Integrand>) -> Self {
        TimedIntegrand {
            inner,
            nanos: AtomicU64::new(0),
        }
    }

    fn seconds(&self) -> f64 {
        self.nanos.load(Ordering::Relaxed) as f64 * 1e-9
    }
}

impl Integrand for TimedIntegrand {
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn evaluate_row(&self, sample: &[f64]) -> CoreResult<Vec<f64>> {
        let start = Instant::now();
        let out = self.inner.evaluate_row(sample);
        self.nanos
            .fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        out
    }

    fn evaluate_batch(&self, samples: &Array2<f64>) -> CoreResult<Array2<f64>> {
        let start = Instant::now();
        let out = self.inner.evaluate_batch(samples);
        self.nanos
            .fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        out
    }
}

fn default_epsilons() -> Vec<f64> {
    (3..=10).map(|e| 10f64.powf(-(e as f64) / 2.0)).collect()
}

fn validate_epsilons(eps: &[f64]) -> Result<(), CliError> {
    if eps.is_empty() {
        return Err(CliError::usage("--epsilons needs at least one tolerance"));
    }
    for &e in eps {
        if !(e.is_finite() && e > 0.0) {
            return Err(CliError::usage(format!(
                "tolerances must be positive and finite, got {e}"
            )));
        }
    }
    for pair in eps.windows(2) {
        if pair[1] >= pair[0] {
            return Err(CliError::usage(format!(
                "tolerances must be strictly decreasing, got {} after {}",
                pair[1], pair[0]
            )));
        }
    }
    Ok(())
}

struct SweepRow {
    epsilon: f64,
    n_used: u64,
    wall_time_seconds: f64,
    estimate: f64,
    converged: bool,
    mode: Mode,
    workers: usize,
}

impl SweepRow {
    fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(
            out,
            "{:.16e},{},{:.16e},{:.16e},{},{},{}",
            self.epsilon,
            self.n_used,
            self.wall_time_seconds,
            self.estimate,
            self.converged,
            self.mode.name(),
            self.workers
        )
    }
}

pub const CSV_HEADER: &str = "epsilon,n_used,wall_time_seconds,estimate,converged,mode,workers";

pub fn run(args: SweepArgs) -> Result<(), CliError> {
    let epsilons = args.epsilons.clone().unwrap_or_else(default_epsilons);
    validate_epsilons(&epsilons)?;
    if args.modes.is_empty() {
        return Err(CliError::usage("--modes needs at least one of serial, parallel"));
    }
    if args.workers == 0 {
        return Err(CliError::usage("--workers must be at least 1"));
    }
    let seed = effective_seed(args.seed)?;

    let config = BeamConfig::default().with_load(args.load);
    config
        .validate()
        .map_err(|e| CliError::usage(format!("{e}")))?;
    let base = beam_problem(config.clone());

    // The loopback server exists whenever some run must go over HTTP:
    // every parallel run, and serial runs that carry the artificial
    // delay (otherwise "serial" would dodge the cost parallel pays).
    let needs_server = args.modes.contains(&Mode::Parallel) || args.delay_ms > 0;
    let server: Option<ServerHandle> = if needs_server {
        let options = ServerOptions {
            delay: (args.delay_ms > 0)
                .then(|| std::time::Duration::from_millis(args.delay_ms)),
        };
        let handle = serve_loopback(vec![HostedModel::beam(config.clone())], options)
            .map_err(|e| CliError::evaluation(format!("cannot start loopback server: {e}")))?;
        Some(handle)
    } else {
        None
    };

    let mut writer: BufWriter<Box<dyn Write>> = match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| {
                CliError::usage(format!("cannot create {}: {e}", path.display()))
            })?;
            BufWriter::new(Box::new(file))
        }
        None => BufWriter::new(Box::new(std::io::stdout())),
    };
    writeln!(writer, "{CSV_HEADER}").map_err(write_error)?;

    let mut rows: Vec<SweepRow> = Vec::new();
    for &mode in &args.modes {
        for &epsilon in &epsilons {
            let row = run_one(&args, &base, server.as_ref(), mode, epsilon, seed)?;
            row.write_csv(&mut writer).map_err(write_error)?;
            writer.flush().map_err(write_error)?;
            rows.push(row);
        }
    }

    for &mode in &args.modes {
        let converged: Vec<&SweepRow> = rows
            .iter()
            .filter(|r| r.mode == mode && r.converged && r.n_used > 0)
            .collect();
        if converged.len() >= 2 {
            let xs: Vec<f64> = converged.iter().map(|r| (1.0 / r.epsilon).ln()).collect();
            let ys: Vec<f64> = converged.iter().map(|r| (r.n_used as f64).ln()).collect();
            eprintln!(
                "mode {}: least-squares slope of log n_used vs log(1/eps) = {:.3} over {} tolerances",
                mode.name(),
                slope(&xs, &ys),
                converged.len()
            );
        }
    }

    if let Some(handle) = server {
        handle.shutdown();
    }
    Ok(())
}

fn write_error(e: std::io::Error) -> CliError {
    CliError::evaluation(format!("cannot write sweep output: {e}"))
}

fn run_one(
    args: &SweepArgs,
    base: &Problem,
    server: Option<&ServerHandle>,
    mode: Mode,
    epsilon: f64,
    seed: u64,
) -> Result<SweepRow, CliError> {
    let workers = match mode {
        Mode::Serial => 1,
        Mode::Parallel => args.workers,
    };
    let inner: Arc<dyn Integrand> = match (mode, server) {
        (Mode::Serial, None) => base.integrand.clone(),
        (_, Some(handle)) => {
            let endpoint = ModelEndpoint::new(&handle.base_url(), "beam").with_workers(workers);
            let remote = RemoteIntegrand::connect(endpoint)
                .map_err(|e| CliError::evaluation(format!("{e}")))?;
            Arc::new(remote)
        }
        (Mode::Parallel, None) => unreachable!("parallel mode always starts the server"),
    };
    let timed = Arc::new(TimedIntegrand::new(inner));
    let problem = Problem {
        integrand: timed.clone(),
        ..base.clone()
    };

    let tol = ToleranceSpec::absolute(epsilon);
    let outcome = match args.criterion {
        Criterion::Replicated => {
            let mut options = ReplicatedOptions::default();
            if let Some(n) = args.n_max {
                options.n_max = n;
            }
            integrate_replicated(&problem, args.kind, seed, &tol, &options)
        }
        Criterion::Fourier => {
            let mut options = FourierOptions::default();
            if let Some(n) = args.n_max {
                options.n_max = n;
            }
            integrate_fourier_lattice(&problem, args.kind, seed, &tol, &options)
        }
    };

    let row = match outcome {
        Ok(StoppingResult {
            estimate,
            n_used,
            converged,
            ..
        }) => SweepRow {
            epsilon,
            n_used,
            wall_time_seconds: timed.seconds(),
            estimate: estimate[0],
            converged,
            mode,
            workers,
        },
        Err(e) => {
            eprintln!("sweep: eps {epsilon:.3e} in {} mode failed: {e}", mode.name());
            SweepRow {
                epsilon,
                n_used: 0,
                wall_time_seconds: timed.seconds(),
                estimate: f64::NAN,
                converged: false,
                mode,
                workers,
            }
        }
    };
    Ok(row)
}

/// Least-squares slope of y on x.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
