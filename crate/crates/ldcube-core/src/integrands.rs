//! Integrands g: T → R^q and the bundled problem catalogue.
//!
//! Output is always an n×q matrix; scalar problems are q = 1, not a
//! separate code path. Every bundled `known_mean` is either analytic or
//! comes from a documented closed form, so tests can assert against it
//! without circular reasoning.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::measures::{MeasureSpec, TransformedBatch};
use crate::quantile::normal_cdf;

/// A vector-valued integrand. Implementations must be pure: the
/// pipeline partitions batches across threads.
pub trait Integrand: Send + Sync {
    fn output_dim(&self) -> usize;

    fn evaluate_row(&self, sample: &[f64]) -> Result<Vec<f64>>;

    /// Row-by-row default; override when batching can be done faster
    /// (e.g. remote evaluation with concurrent requests).
    fn evaluate_batch(&self, samples: &Array2<f64>) -> Result<Array2<f64>> {
        let n = samples.nrows();
        let q = self.output_dim();
        let mut out = Array2::<f64>::zeros((n, q));
        for (i, row) in samples.outer_iter().enumerate() {
            let values = self.evaluate_row(row.as_slice().expect("contiguous row"))?;
            if values.len() != q {
                return Err(Error::DimensionMismatch {
                    context: "integrand output".to_string(),
                    expected: q,
                    actual: values.len(),
                });
            }
            for (j, v) in values.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

/// An integration problem: integrand, measure, and (for test problems)
/// the exact mean.
#[derive(Clone)]
pub struct Problem {
    pub label: String,
    pub dimension: usize,
    pub measure: MeasureSpec,
    pub integrand: Arc<dyn Integrand>,
    pub known_mean: Option<Vec<f64>>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("label", &self.label)
            .field("dimension", &self.dimension)
            .field("output_dim", &self.integrand.output_dim())
            .field("known_mean", &self.known_mean)
            .finish()
    }
}

impl Problem {
    pub fn output_dim(&self) -> usize {
        self.integrand.output_dim()
    }
}

/// Applies the problem's integrand to every transformed sample; row i
/// of the result is g(sample i). Aggregation happens elsewhere.
pub fn evaluate(problem: &Problem, samples: &TransformedBatch) -> Result<Array2<f64>> {
    if samples.samples.ncols() != problem.dimension {
        return Err(Error::DimensionMismatch {
            context: format!("evaluate({})", problem.label),
            expected: problem.dimension,
            actual: samples.samples.ncols(),
        });
    }
    let values = problem.integrand.evaluate_batch(&samples.samples)?;
    for (row, out) in values.outer_iter().enumerate() {
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row });
        }
    }
    Ok(values)
}

/// g(t) = Π_j t_j.
pub struct Product;

impl Integrand for Product {
    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate_row(&self, sample: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![sample.iter().product()])
    }
}

/// g(t) = Σ_j t_j².
pub struct SumSquares;

impl Integrand for SumSquares {
    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate_row(&self, sample: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![sample.iter().map(|t| t * t).sum()])
    }
}

/// Constant integrand; every row evaluates to the same vector.
pub struct Constant {
    pub values: Vec<f64>,
}

impl Integrand for Constant {
    fn output_dim(&self) -> usize {
        self.values.len()
    }

    fn evaluate_row(&self, _sample: &[f64]) -> Result<Vec<f64>> {
        Ok(self.values.clone())
    }
}

/// Integrand defined by a closure, for library users and tests.
pub struct FnIntegrand {
    output_dim: usize,
    f: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl FnIntegrand {
    pub fn new(
        output_dim: usize,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnIntegrand {
            output_dim,
            f: Arc::new(f),
        }
    }
}

impl Integrand for FnIntegrand {
    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn evaluate_row(&self, sample: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(sample))
    }
}

/// a·g₁ + b·g₂ + …, the linearity hook: its values are exactly the
/// weighted sums of the terms' values.
pub struct LinearCombination {
    terms: Vec<(f64, Arc<dyn Integrand>)>,
    output_dim: usize,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, Arc<dyn Integrand>)>) -> Result<Self> {
        let output_dim = match terms.first() {
            Some((_, g)) => g.output_dim(),
            None => {
                return Err(Error::InvalidConfig(
                    "linear combination needs at least one term".to_string(),
                ))
            }
        };
        for (_, g) in &terms {
            if g.output_dim() != output_dim {
                return Err(Error::DimensionMismatch {
                    context: "linear combination terms".to_string(),
                    expected: output_dim,
                    actual: g.output_dim(),
                });
            }
        }
        Ok(LinearCombination { terms, output_dim })
    }
}

impl Integrand for LinearCombination {
    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn evaluate_row(&self, sample: &[f64]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.output_dim];
        for (a, g) in &self.terms {
            let values = g.evaluate_row(sample)?;
            for (slot, v) in acc.iter_mut().zip(values) {
                *slot += a * v;
            }
        }
        Ok(acc)
    }
}

/// Discounted payoff of a geometric-mean Asian call on a lognormal
/// asset, evaluated on a discretized Brownian path.
pub struct GeometricAsianCall {
    pub s0: f64,
    pub strike: f64,
    pub rate: f64,
    pub sigma: f64,
    pub dates: Vec<f64>,
}

impl GeometricAsianCall {
    pub fn standard() -> Self {
        GeometricAsianCall {
            s0: 100.0,
            strike: 100.0,
            rate: 0.05,
            sigma: 0.2,
            dates: vec![0.25, 0.5, 0.75, 1.0],
        }
    }

    /// Exact price: the geometric mean of lognormal prices is lognormal,
    /// with ln G having mean ln S₀ + (r − σ²/2)·t̄ and variance
    /// (σ/m)²·ΣΣ min(t_j, t_k), so the Black–Scholes-style formula
    /// applies directly.
    pub fn closed_form(&self) -> f64 {
        let m = self.dates.len() as f64;
        let maturity = *self.dates.last().expect("at least one date");
        let tbar = self.dates.iter().sum::<f64>() / m;
        let mut acc = 0.0;
        for &tj in &self.dates {
            for &tk in &self.dates {
                acc += tj.min(tk);
            }
        }
        let var_g = self.sigma * self.sigma * acc / (m * m);
        let sd_g = var_g.sqrt();
        let mu_g = self.s0.ln() + (self.rate - 0.5 * self.sigma * self.sigma) * tbar;
        let d2 = (mu_g - self.strike.ln()) / sd_g;
        (-self.rate * maturity).exp()
            * ((mu_g + 0.5 * var_g).exp() * normal_cdf(d2 + sd_g)
                - self.strike * normal_cdf(d2))
    }
}

impl Integrand for GeometricAsianCall {
    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate_row(&self, path: &[f64]) -> Result<Vec<f64>> {
        let m = self.dates.len() as f64;
        let maturity = *self.dates.last().expect("at least one date");
        let drift = self.rate - 0.5 * self.sigma * self.sigma;
        let mut log_g = 0.0;
        for (&b, &t) in path.iter().zip(&self.dates) {
            log_g += self.s0.ln() + drift * t + self.sigma * b;
        }
        log_g /= m;
        let payoff = (log_g.exp() - self.strike).max(0.0);
        Ok(vec![(-self.rate * maturity).exp() * payoff])
    }
}

pub fn product_problem(dimension: usize) -> Problem {
    Problem {
        label: "product".to_string(),
        dimension,
        measure: MeasureSpec::uniform_box(vec![0.0; dimension], vec![1.0; dimension]),
        integrand: Arc::new(Product),
        known_mean: Some(vec![0.5_f64.powi(dimension as i32)]),
    }
}

pub fn sum_squares_problem(dimension: usize) -> Problem {
    Problem {
        label: "sum-squares".to_string(),
        dimension,
        measure: MeasureSpec::uniform_box(vec![0.0; dimension], vec![1.0; dimension]),
        integrand: Arc::new(SumSquares),
        known_mean: Some(vec![dimension as f64 / 3.0]),
    }
}

pub fn geometric_asian_problem() -> Problem {
    let option = GeometricAsianCall::standard();
    let known = option.closed_form();
    let dates = option.dates.clone();
    Problem {
        label: "geometric-asian-call".to_string(),
        dimension: dates.len(),
        measure: MeasureSpec::brownian_motion(dates, 0.0),
        integrand: Arc::new(option),
        known_mean: Some(vec![known]),
    }
}

/// The bundled catalogue with default dimensions.
pub fn builtin_problems() -> Vec<Problem> {
    vec![
        product_problem(3),
        sum_squares_problem(6),
        geometric_asian_problem(),
        crate::beam::beam_problem(crate::beam::BeamConfig::default()),
    ]
}

/// Looks a problem up by label, applying `dimension` where the problem
/// is dimension-generic.
pub fn problem_by_label(label: &str, dimension: Option<usize>) -> Result<Problem> {
    match label {
        "product" => Ok(product_problem(dimension.unwrap_or(3))),
        "sum-squares" => Ok(sum_squares_problem(dimension.unwrap_or(6))),
        "geometric-asian-call" => {
            let problem = geometric_asian_problem();
            if let Some(d) = dimension {
                if d != problem.dimension {
                    return Err(Error::InvalidConfig(format!(
                        "geometric-asian-call has fixed dimension {}, got {d}",
                        problem.dimension
                    )));
                }
            }
            Ok(problem)
        }
        "beam" => {
            let problem = crate::beam::beam_problem(crate::beam::BeamConfig::default());
            if let Some(d) = dimension {
                if d != problem.dimension {
                    return Err(Error::InvalidConfig(format!(
                        "beam has fixed dimension {}, got {d}",
                        problem.dimension
                    )));
                }
            }
            Ok(problem)
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown problem {other:?} (expected product, sum-squares, \
             geometric-asian-call, or beam)"
        ))),
    }
}
