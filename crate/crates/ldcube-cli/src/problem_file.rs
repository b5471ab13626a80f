//! JSON problem files: a declarative way to pose an integration run.
//!
//! The document validates strictly (unknown keys rejected) before any
//! work starts; the schema shipped at schema/problem.schema.json
//! documents the same contract for external tooling.

use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use serde::Deserialize;

use ldcube_core::integrands::{problem_by_label, Problem};
use ldcube_core::measures::{Decomposition, MeasureSpec};
use ldcube_core::seq::{GeneratorKind, Randomization};
use ldcube_core::stopping::{FourierOptions, ReplicatedOptions, ToleranceSpec};

use crate::remote::RemoteIntegrand;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Replicated,
    Fourier,
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "replicated" => Ok(Criterion::Replicated),
            "fourier" => Ok(Criterion::Fourier),
            other => Err(format!(
                "unknown criterion {other:?} (expected replicated or fourier)"
            )),
        }
    }
}

/// Everything cmd_integrate needs to run, after validation.
pub struct IntegrationPlan {
    pub problem: Problem,
    pub criterion: Criterion,
    pub kind: GeneratorKind,
    pub randomization: Option<Randomization>,
    pub seed: Option<u64>,
    pub tolerances: ToleranceSpec,
    pub replicated: ReplicatedOptions,
    pub fourier: FourierOptions,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFileDoc {
    problem: ProblemRef,
    dimension: Option<usize>,
    measure: Option<MeasureDoc>,
    generator: Option<GeneratorDoc>,
    criterion: Option<Criterion>,
    tolerances: Option<TolerancesDoc>,
    options: Option<OptionsDoc>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProblemRef {
    Label(String),
    Remote {
        remote: RemoteRef,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RemoteRef {
    url: String,
    model: String,
    workers: Option<usize>,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
enum MeasureDoc {
    UniformBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        decomposition: Option<String>,
    },
    BrownianMotion {
        times: Vec<f64>,
        initial_value: f64,
        decomposition: Option<String>,
    },
}

impl MeasureDoc {
    fn into_spec(self) -> Result<MeasureSpec, CliError> {
        match self {
            MeasureDoc::UniformBox { lower, upper } => Ok(MeasureSpec::uniform_box(lower, upper)),
            MeasureDoc::Gaussian {
                mean,
                covariance,
                decomposition,
            } => {
                let d = mean.len();
                let mut matrix = Array2::zeros((d, d));
                if covariance.len() != d {
                    return Err(CliError::usage(format!(
                        "covariance has {} rows for a {d}-dimensional mean",
                        covariance.len()
                    )));
                }
                for (i, row) in covariance.iter().enumerate() {
                    if row.len() != d {
                        return Err(CliError::usage(format!(
                            "covariance row {i} has {} entries, expected {d}",
                            row.len()
                        )));
                    }
                    for (j, &v) in row.iter().enumerate() {
                        matrix[(i, j)] = v;
                    }
                }
                Ok(MeasureSpec::gaussian(
                    mean,
                    matrix,
                    parse_decomposition(decomposition)?,
                ))
            }
            MeasureDoc::BrownianMotion {
                times,
                initial_value,
                decomposition,
            } => Ok(MeasureSpec::BrownianMotion {
                times,
                initial_value,
                decomposition: parse_decomposition(decomposition)?,
            }),
        }
    }
}

fn parse_decomposition(text: Option<String>) -> Result<Decomposition, CliError> {
    match text {
        None => Ok(Decomposition::default()),
        Some(t) => t.parse().map_err(|e| CliError::usage(format!("{e}"))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorDoc {
    kind: Option<String>,
    seed: Option<u64>,
    randomization: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TolerancesDoc {
    abs: Option<f64>,
    rel: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OptionsDoc {
    replications: Option<usize>,
    n_init: Option<u64>,
    n_max: Option<u64>,
    confidence: Option<f64>,
    inflation: Option<f64>,
    periodize: Option<bool>,
}

/// Reads, validates, and resolves a problem file. Remote problems
/// perform the server handshake here so connection and dimension
/// errors surface before any sampling starts.
pub fn load(path: &Path) -> Result<IntegrationPlan, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let doc: ProblemFileDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{} does not match the schema: {e}", path.display())))?;
    resolve(doc)
}

fn resolve(doc: ProblemFileDoc) -> Result<IntegrationPlan, CliError> {
    let problem = match doc.problem {
        ProblemRef::Label(label) => {
            if doc.measure.is_some() {
                return Err(CliError::usage(format!(
                    "problem {label:?} owns its measure; \"measure\" is only valid for remote problems"
                )));
            }
            problem_by_label(&label, doc.dimension).map_err(|e| CliError::usage(format!("{e}")))?
        }
        ProblemRef::Remote { remote } => {
            let mut endpoint = ldcube_client::ModelEndpoint::new(&remote.url, &remote.model);
            if let Some(workers) = remote.workers {
                endpoint = endpoint.with_workers(workers);
            }
            endpoint
                .validate()
                .map_err(|e| CliError::usage(format!("{e}")))?;
            let integrand =
                RemoteIntegrand::connect(endpoint).map_err(|e| CliError::evaluation(format!("{e}")))?;
            let d = integrand.input_dimension();
            if let Some(requested) = doc.dimension {
                if requested != d {
                    return Err(CliError::usage(format!(
                        "model {} is {d}-dimensional, problem file requests {requested}",
                        remote.model
                    )));
                }
            }
            let measure = match doc.measure {
                Some(m) => {
                    let spec = m.into_spec()?;
                    if spec.dimension() != d {
                        return Err(CliError::usage(format!(
                            "measure is {}-dimensional, model {} expects {d}",
                            spec.dimension(),
                            remote.model
                        )));
                    }
                    spec
                }
                None => MeasureSpec::uniform_box(vec![0.0; d], vec![1.0; d]),
            };
            Problem {
                label: remote.model,
                dimension: d,
                measure,
                integrand: Arc::new(integrand),
                known_mean: None,
            }
        }
    };

    let criterion = doc.criterion.unwrap_or(Criterion::Replicated);

    let (kind, seed, randomization) = match doc.generator {
        None => (default_kind(criterion), None, None),
        Some(g) => {
            let kind = match g.kind {
                None => default_kind(criterion),
                Some(text) => text
                    .parse::<GeneratorKind>()
                    .map_err(|e| CliError::usage(format!("{e}")))?,
            };
            let randomization = match g.randomization {
                None => None,
                Some(text) => Some(
                    text.parse::<Randomization>()
                        .map_err(|e| CliError::usage(format!("{e}")))?,
                ),
            };
            (kind, g.seed, randomization)
        }
    };

    let tolerances = match doc.tolerances {
        None => ToleranceSpec::absolute(1e-3),
        Some(t) => ToleranceSpec {
            abs_tol: t.abs.unwrap_or(0.0),
            rel_tol: t.rel.unwrap_or(0.0),
        },
    };

    let mut replicated = ReplicatedOptions::default();
    let mut fourier = FourierOptions::default();
    if let Some(o) = doc.options {
        if let Some(r) = o.replications {
            replicated.replications = r;
        }
        if let Some(n) = o.n_init {
            replicated.n_init = n;
            fourier.n_init = n;
        }
        if let Some(n) = o.n_max {
            replicated.n_max = n;
            fourier.n_max = n;
        }
        if let Some(c) = o.confidence {
            replicated.confidence = c;
        }
        if let Some(f) = o.inflation {
            match criterion {
                Criterion::Replicated => replicated.inflation = f,
                Criterion::Fourier => fourier.inflation = f,
            }
        }
        if let Some(p) = o.periodize {
            fourier.periodize = p;
        }
    }

    Ok(IntegrationPlan {
        problem,
        criterion,
        kind,
        randomization,
        seed,
        tolerances,
        replicated,
        fourier,
    })
}

/// The Fourier criterion reads lattice structure, so the lattice is
/// the default generator for both criteria.
pub fn default_kind(_criterion: Criterion) -> GeneratorKind {
    GeneratorKind::Lattice
}
