//! Measure transforms Ψ: (0,1)^d → T.
//!
//! All transforms here are inverse-CDF maps, so the Jacobian-weighted
//! density is identically one and integrating g over the target measure
//! reduces to averaging g(Ψ(x)) over the unit cube. Boundary inputs
//! (u = 0 or 1, as produced by unrandomized sequences) are rejected
//! rather than clamped: randomization is the supported fix.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, jacobi_eigen};
use crate::quantile::inverse_normal_cdf;
use crate::seq::PointBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decomposition {
    #[default]
    Cholesky,
    Pca,
}

impl Decomposition {
    pub fn name(self) -> &'static str {
        match self {
            Decomposition::Cholesky => "cholesky",
            Decomposition::Pca => "pca",
        }
    }
}

impl std::str::FromStr for Decomposition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(Decomposition::Cholesky),
            "pca" => Ok(Decomposition::Pca),
            other => Err(Error::InvalidConfig(format!(
                "unknown decomposition {other:?} (expected cholesky or pca)"
            ))),
        }
    }
}

/// The target measure λ on T.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    UniformBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Gaussian {
        mean: Vec<f64>,
        covariance: Array2<f64>,
        decomposition: Decomposition,
    },
    BrownianMotion {
        times: Vec<f64>,
        initial_value: f64,
        decomposition: Decomposition,
    },
}

impl MeasureSpec {
    pub fn uniform_box(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        MeasureSpec::UniformBox { lower, upper }
    }

    pub fn gaussian(mean: Vec<f64>, covariance: Array2<f64>, decomposition: Decomposition) -> Self {
        MeasureSpec::Gaussian {
            mean,
            covariance,
            decomposition,
        }
    }

    pub fn brownian_motion(times: Vec<f64>, initial_value: f64) -> Self {
        MeasureSpec::BrownianMotion {
            times,
            initial_value,
            decomposition: Decomposition::Cholesky,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            MeasureSpec::UniformBox { lower, .. } => lower.len(),
            MeasureSpec::Gaussian { mean, .. } => mean.len(),
            MeasureSpec::BrownianMotion { times, .. } => times.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::UniformBox { lower, upper } => {
                if lower.is_empty() {
                    return Err(Error::ZeroDimension);
                }
                if lower.len() != upper.len() {
                    return Err(Error::DimensionMismatch {
                        context: "uniform-box bounds".to_string(),
                        expected: lower.len(),
                        actual: upper.len(),
                    });
                }
                for (j, (lo, hi)) in lower.iter().zip(upper).enumerate() {
                    if !(lo < hi) {
                        return Err(Error::InvalidMeasure(format!(
                            "uniform-box bounds must satisfy lower < upper; \
                             dimension {j} has [{lo}, {hi}]"
                        )));
                    }
                }
                Ok(())
            }
            MeasureSpec::Gaussian {
                mean, covariance, ..
            } => {
                if mean.is_empty() {
                    return Err(Error::ZeroDimension);
                }
                if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
                    return Err(Error::DimensionMismatch {
                        context: "gaussian covariance".to_string(),
                        expected: mean.len(),
                        actual: covariance.nrows().max(covariance.ncols()),
                    });
                }
                for i in 0..mean.len() {
                    for j in 0..i {
                        if (covariance[(i, j)] - covariance[(j, i)]).abs()
                            > 1e-12 * covariance[(i, i)].abs().max(covariance[(j, j)].abs())
                        {
                            return Err(Error::InvalidMeasure(format!(
                                "covariance is not symmetric at ({i}, {j})"
                            )));
                        }
                    }
                }
                cholesky_factor(covariance).map(|_| ())
            }
            MeasureSpec::BrownianMotion { times, .. } => {
                if times.is_empty() {
                    return Err(Error::ZeroDimension);
                }
                let mut prev = 0.0;
                for (j, &t) in times.iter().enumerate() {
                    if !(t > prev) {
                        return Err(Error::InvalidMeasure(format!(
                            "Brownian time grid must be strictly increasing and positive; \
                             t_{} = {t} after {prev}",
                            j + 1
                        )));
                    }
                    prev = t;
                }
                Ok(())
            }
        }
    }
}

/// Points mapped into the target domain T. `weight_is_unity` records
/// that the transform's Jacobian-weighted density is one, so downstream
/// estimators may average g(Ψ(x)) directly.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedBatch {
    pub samples: Array2<f64>,
    pub weight_is_unity: bool,
}

/// Brownian covariance Σ_jk = min(t_j, t_k).
pub fn brownian_covariance(times: &[f64]) -> Array2<f64> {
    let d = times.len();
    Array2::from_shape_fn((d, d), |(i, j)| times[i].min(times[j]))
}

/// Factor A with A·Aᵀ = covariance under the requested decomposition.
pub fn decomposition_factor(
    covariance: &Array2<f64>,
    decomposition: Decomposition,
) -> Result<Array2<f64>> {
    match decomposition {
        Decomposition::Cholesky => cholesky_factor(covariance),
        Decomposition::Pca => {
            let (values, vectors) = jacobi_eigen(covariance)?;
            let d = covariance.nrows();
            let mut a = vectors;
            for (k, &lambda) in values.iter().enumerate() {
                if lambda < -1e-10 * values[0].abs() {
                    return Err(Error::NotPositiveDefinite {
                        pivot: lambda,
                        index: k,
                    });
                }
                let s = lambda.max(0.0).sqrt();
                for i in 0..d {
                    a[(i, k)] *= s;
                }
            }
            Ok(a)
        }
    }
}

fn check_open_interval(batch: &PointBatch) -> Result<()> {
    for (row, point) in batch.points.outer_iter().enumerate() {
        for &u in point {
            if !(u > 0.0 && u < 1.0) {
                return Err(Error::UnrandomizedBoundary { value: u, row });
            }
        }
    }
    Ok(())
}

fn gaussian_samples(
    batch: &PointBatch,
    mean: &[f64],
    factor: &Array2<f64>,
) -> Result<Array2<f64>> {
    let n = batch.count();
    let d = mean.len();
    let mut z = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            z[(i, j)] = inverse_normal_cdf(batch.points[(i, j)])?;
        }
    }
    let mut samples = z.dot(&factor.t());
    for i in 0..n {
        for j in 0..d {
            samples[(i, j)] += mean[j];
        }
    }
    Ok(samples)
}

/// Maps a batch of unit-cube points into T under the given measure.
pub fn transform(batch: &PointBatch, measure: &MeasureSpec) -> Result<TransformedBatch> {
    measure.validate()?;
    let d = measure.dimension();
    if batch.dimension() != d {
        return Err(Error::DimensionMismatch {
            context: "transform input".to_string(),
            expected: d,
            actual: batch.dimension(),
        });
    }
    check_open_interval(batch)?;
    let samples = match measure {
        MeasureSpec::UniformBox { lower, upper } => {
            let n = batch.count();
            let mut out = Array2::<f64>::zeros((n, d));
            for i in 0..n {
                for j in 0..d {
                    out[(i, j)] = lower[j] + batch.points[(i, j)] * (upper[j] - lower[j]);
                }
            }
            out
        }
        MeasureSpec::Gaussian {
            mean,
            covariance,
            decomposition,
        } => {
            let a = decomposition_factor(covariance, *decomposition)?;
            gaussian_samples(batch, mean, &a)?
        }
        MeasureSpec::BrownianMotion {
            times,
            initial_value,
            decomposition,
        } => {
            let covariance = brownian_covariance(times);
            let a = decomposition_factor(&covariance, *decomposition)?;
            let mean = vec![*initial_value; d];
            gaussian_samples(batch, &mean, &a)?
        }
    };
    Ok(TransformedBatch {
        samples,
        weight_is_unity: true,
    })
}
