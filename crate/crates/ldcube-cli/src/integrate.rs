//! cmd_integrate: run an adaptive integration described by a JSON
//! problem file or by flags, printing the result as JSON on stdout.

use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;

use ldcube_core::integrands::{problem_by_label, Problem};
use ldcube_core::measures::MeasureSpec;
use ldcube_core::seq::GeneratorKind;
use ldcube_core::stopping::{
    integrate_fourier_lattice, integrate_replicated, StoppingResult, ToleranceSpec,
};
use ldcube_core::Error;

use crate::problem_file::{self, Criterion, IntegrationPlan};
use crate::remote::RemoteIntegrand;
use crate::{effective_seed, CliError, EXIT_BUDGET};

#[derive(Args)]
pub struct IntegrateArgs {
    /// JSON problem file; flags given alongside it override its values
    #[arg(long, value_name = "PATH", conflicts_with_all = ["problem", "remote"])]
    pub problem_file: Option<PathBuf>,

    /// Catalogue problem label (product, sum-squares, geometric-asian-call, beam)
    #[arg(long, value_name = "LABEL", conflicts_with = "remote")]
    pub problem: Option<String>,

    /// Dimension for labels that accept one
    #[arg(long, value_name = "D")]
    pub dim: Option<usize>,

    /// Base URL of a model server to integrate against
    #[arg(long, value_name = "URL")]
    pub remote: Option<String>,

    /// Model name on the remote server
    #[arg(long, value_name = "NAME", requires = "remote")]
    pub model: Option<String>,

    /// Concurrent requests for remote evaluation
    #[arg(long, value_name = "N", requires = "remote")]
    pub workers: Option<usize>,

    /// Comma-separated lower bounds of the uniform box (remote only)
    #[arg(long, value_name = "A,B,...", value_delimiter = ',', requires = "remote")]
    pub lower: Option<Vec<f64>>,

    /// Comma-separated upper bounds of the uniform box (remote only)
    #[arg(long, value_name = "A,B,...", value_delimiter = ',', requires = "remote")]
    pub upper: Option<Vec<f64>>,

    /// Stopping criterion: replicated or fourier
    #[arg(long, value_parser = parse_criterion)]
    pub criterion: Option<Criterion>,

    /// Generator kind: lattice, sobol, or halton
    #[arg(long, value_parser = crate::points::parse_kind)]
    pub kind: Option<GeneratorKind>,

    /// Master seed (LDCUBE_SEED overrides)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Absolute tolerance (default 1e-3 when no tolerance is given)
    #[arg(long, value_name = "EPS")]
    pub abs_tol: Option<f64>,

    /// Relative tolerance (default 0)
    #[arg(long, value_name = "EPS")]
    pub rel_tol: Option<f64>,

    /// Replicated criterion: number of independent randomizations
    #[arg(long, value_name = "R")]
    pub replicates: Option<usize>,

    /// Initial sample size per randomization (power of two)
    #[arg(long, value_name = "N")]
    pub n_init: Option<u64>,

    /// Sample-size budget per randomization
    #[arg(long, value_name = "N")]
    pub n_max: Option<u64>,
}

fn parse_criterion(text: &str) -> Result<Criterion, String> {
    text.parse()
}

pub fn run(args: IntegrateArgs) -> Result<(), CliError> {
    let mut plan = build_plan(&args)?;
    apply_overrides(&mut plan, &args)?;
    let seed = effective_seed(plan.seed.unwrap_or(0))?;

    let result = match plan.criterion {
        Criterion::Replicated => integrate_replicated(
            &plan.problem,
            plan.kind,
            seed,
            &plan.tolerances,
            &plan.replicated,
        ),
        Criterion::Fourier => integrate_fourier_lattice(
            &plan.problem,
            plan.kind,
            seed,
            &plan.tolerances,
            &plan.fourier,
        ),
    };
    let result = result.map_err(map_core_error)?;
    print_result(&result)?;
    if result.converged {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_BUDGET,
            message: format!(
                "budget exhausted at n = {} with max error bound {:.3e}",
                result.n_used,
                result.max_bound()
            ),
        })
    }
}

fn build_plan(args: &IntegrateArgs) -> Result<IntegrationPlan, CliError> {
    if let Some(path) = &args.problem_file {
        return problem_file::load(path);
    }
    let problem = if let Some(url) = &args.remote {
        remote_problem(args, url)?
    } else if let Some(label) = &args.problem {
        problem_by_label(label, args.dim).map_err(|e| CliError::usage(format!("{e}")))?
    } else {
        return Err(CliError::usage(
            "nothing to integrate: pass --problem-file, --problem, or --remote",
        ));
    };
    let criterion = args.criterion.unwrap_or(Criterion::Replicated);
    Ok(IntegrationPlan {
        problem,
        criterion,
        kind: problem_file::default_kind(criterion),
        randomization: None,
        seed: None,
        tolerances: ToleranceSpec::absolute(1e-3),
        replicated: Default::default(),
        fourier: Default::default(),
    })
}

fn remote_problem(args: &IntegrateArgs, url: &str) -> Result<Problem, CliError> {
    let model = args
        .model
        .as_deref()
        .ok_or_else(|| CliError::usage("--remote requires --model NAME"))?;
    let mut endpoint = ldcube_client::ModelEndpoint::new(url, model);
    if let Some(workers) = args.workers {
        endpoint = endpoint.with_workers(workers);
    }
    endpoint
        .validate()
        .map_err(|e| CliError::usage(format!("{e}")))?;
    let integrand =
        RemoteIntegrand::connect(endpoint).map_err(|e| CliError::evaluation(format!("{e}")))?;
    let d = integrand.input_dimension();
    let lower = args.lower.clone().unwrap_or_else(|| vec![0.0; d]);
    let upper = args.upper.clone().unwrap_or_else(|| vec![1.0; d]);
    if lower.len() != d || upper.len() != d {
        return Err(CliError::usage(format!(
            "model {model} is {d}-dimensional; --lower and --upper must list {d} values"
        )));
    }
    let measure = MeasureSpec::uniform_box(lower, upper);
    measure
        .validate()
        .map_err(|e| CliError::usage(format!("{e}")))?;
    Ok(Problem {
        label: model.to_string(),
        dimension: d,
        measure,
        integrand: Arc::new(integrand),
        known_mean: None,
    })
}

/// Flags beat problem-file values, which beat defaults.
fn apply_overrides(plan: &mut IntegrationPlan, args: &IntegrateArgs) -> Result<(), CliError> {
    if let Some(criterion) = args.criterion {
        plan.criterion = criterion;
    }
    if let Some(kind) = args.kind {
        plan.kind = kind;
    }
    if let Some(seed) = args.seed {
        plan.seed = Some(seed);
    }
    if args.abs_tol.is_some() || args.rel_tol.is_some() {
        plan.tolerances = ToleranceSpec {
            abs_tol: args.abs_tol.unwrap_or(0.0),
            rel_tol: args.rel_tol.unwrap_or(0.0),
        };
    }
    if let Some(r) = args.replicates {
        plan.replicated.replications = r;
    }
    if let Some(n) = args.n_init {
        plan.replicated.n_init = n;
        plan.fourier.n_init = n;
    }
    if let Some(n) = args.n_max {
        plan.replicated.n_max = n;
        plan.fourier.n_max = n;
    }
    if let Some(r) = plan.randomization {
        if r != plan.kind.default_randomization() {
            return Err(CliError::usage(format!(
                "adaptive integration randomizes with the generator's default ({}); {} is not supported here",
                plan.kind.default_randomization(),
                r
            )));
        }
    }
    Ok(())
}

fn print_result(result: &StoppingResult) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(result)
        .map_err(|e| CliError::evaluation(format!("cannot serialize result: {e}")))?;
    println!("{text}");
    Ok(())
}

/// Configuration mistakes are usage errors; anything that failed while
/// evaluating (solver breakdown, transport, non-finite values) is an
/// evaluation error.
pub fn map_core_error(e: Error) -> CliError {
    match e {
        Error::InvalidConfig(_)
        | Error::ZeroDimension
        | Error::DimensionExceeded { .. }
        | Error::IncompatibleRandomization { .. }
        | Error::InvalidMeasure(_) => CliError::usage(format!("{e}")),
        other => CliError::evaluation(format!("{other}")),
    }
}
