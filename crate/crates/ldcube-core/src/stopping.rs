//! Adaptive stopping criteria for quasi-Monte Carlo integration.
//!
//! Two criteria are provided. The replicated criterion averages R
//! independently randomized sequences and bounds the error by a Student-t
//! confidence interval on the replicate means. The Fourier criterion works
//! on a single randomized lattice: the discrete Fourier coefficients of
//! the samples, restored to natural lattice order, expose the aliasing
//! error of the newly split wavenumber classes at each doubling.
//!
//! Both criteria double the point count until every output component's
//! error bound falls below the tolerance, extending the existing sequence
//! so earlier evaluations are never discarded.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::integrands::{evaluate, Problem};
use crate::measures::transform;
use crate::seq::{generate, GeneratorKind, GeneratorSpec, PointBatch, TINY};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedOptions {
    pub replications: usize,
    pub n_init: u64,
    pub n_max: u64,
    pub confidence: f64,
    pub inflation: f64,
}

impl Default for ReplicatedOptions {
    fn default() -> Self {
        ReplicatedOptions {
            replications: 16,
            n_init: 256,
            n_max: 1 << 20,
            confidence: 0.99,
            inflation: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierOptions {
    pub n_init: u64,
    pub n_max: u64,
    pub inflation: f64,
    pub periodize: bool,
}

impl Default for FourierOptions {
    fn default() -> Self {
        FourierOptions {
            n_init: 256,
            n_max: 1 << 20,
            inflation: 5.0,
            periodize: true,
        }
    }
}

/// Outcome of an adaptive integration run. `n_used` counts points per
/// randomization (the replicated criterion evaluates `replications`
/// times that many integrand values in total); `error_bound` is per
/// output component; `stages` counts doublings, so n_used = n_init
/// * 2^stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingResult {
    pub estimate: Vec<f64>,
    pub error_bound: Vec<f64>,
    pub n_used: u64,
    pub replications: usize,
    pub stages: usize,
    pub converged: bool,
    pub wall_time_seconds: f64,
}

impl StoppingResult {
    pub fn max_bound(&self) -> f64 {
        self.error_bound.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// Absolute/relative tolerance pair combined per component as
/// bound <= max(abs_tol, rel_tol * |estimate|).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl ToleranceSpec {
    pub fn absolute(abs_tol: f64) -> Self {
        ToleranceSpec {
            abs_tol,
            rel_tol: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 0.0 && self.abs_tol.is_finite())
            || !(self.rel_tol >= 0.0 && self.rel_tol.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "tolerances must be finite and nonnegative, got abs {} rel {}",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.abs_tol + self.rel_tol <= 0.0 {
            return Err(Error::InvalidConfig(
                "at least one of the absolute and relative tolerances must be positive"
                    .to_string(),
            ));
        }
        Ok(())
    }
}

/// True when every component's error bound satisfies the combine rule.
pub fn check_tolerance(bound: &[f64], estimate: &[f64], tol: &ToleranceSpec) -> bool {
    bound
        .iter()
        .zip(estimate)
        .all(|(&b, &e)| b <= tol.abs_tol.max(tol.rel_tol * e.abs()))
}

fn check_budget(n_init: u64, n_max: u64) -> Result<()> {
    if n_init < 4 || !n_init.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "initial sample size must be a power of two of at least 4, got {n_init}"
        )));
    }
    if n_max < n_init {
        return Err(Error::InvalidConfig(format!(
            "sample budget {n_max} is below the initial size {n_init}"
        )));
    }
    Ok(())
}

/// Two-sided Student-t critical value for R replicates at the given
/// confidence level.
pub fn t_critical(replications: usize, confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let dist = StudentsT::new(0.0, 1.0, (replications - 1) as f64)
        .map_err(|e| Error::InvalidConfig(format!("t distribution: {e}")))?;
    Ok(dist.inverse_cdf(0.5 + confidence / 2.0))
}

fn evaluate_points(problem: &Problem, batch: &PointBatch) -> Result<ndarray::Array2<f64>> {
    let transformed = transform(batch, &problem.measure)?;
    evaluate(problem, &transformed)
}

/// Averages R independently randomized copies of the sequence and stops
/// when the t-interval half-width on the replicate means, inflated by the
/// safety factor, is below `epsilon` in every output component.
pub fn integrate_replicated(
    problem: &Problem,
    kind: GeneratorKind,
    seed: u64,
    tol: &ToleranceSpec,
    options: &ReplicatedOptions,
) -> Result<StoppingResult> {
    let start = Instant::now();
    tol.validate()?;
    check_budget(options.n_init, options.n_max)?;
    let r = options.replications;
    if r < 4 {
        return Err(Error::InvalidConfig(format!(
            "replicated criterion needs at least 4 replications, got {r}"
        )));
    }
    let t = t_critical(r, options.confidence)?;
    let q = problem.output_dim();

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<GeneratorSpec> = (0..r)
        .map(|_| GeneratorSpec::new(kind, problem.dimension, master.gen::<u64>()))
        .collect();
    for spec in &specs {
        spec.validate()?;
    }

    let mut sums = vec![vec![0.0_f64; q]; r];
    let mut n_done = 0_u64;
    let mut n = options.n_init;
    let mut stages = 0;
    loop {
        for (rep, spec) in specs.iter().enumerate() {
            let batch = generate(spec, n_done, (n - n_done) as usize)?;
            let values = evaluate_points(problem, &batch)?;
            for row in values.rows() {
                for (acc, &v) in sums[rep].iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        n_done = n;

        let mut estimate = vec![0.0_f64; q];
        let mut bound = vec![0.0_f64; q];
        for j in 0..q {
            let means: Vec<f64> = sums.iter().map(|s| s[j] / n as f64).collect();
            let mean = means.iter().sum::<f64>() / r as f64;
            let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>()
                / (r - 1) as f64;
            estimate[j] = mean;
            bound[j] = t * (var / r as f64).sqrt() * options.inflation;
        }
        let converged = check_tolerance(&bound, &estimate, tol);
        if converged || n * 2 > options.n_max {
            return Ok(StoppingResult {
                estimate,
                error_bound: bound,
                n_used: n,
                replications: r,
                stages,
                converged,
                wall_time_seconds: start.elapsed().as_secs_f64(),
            });
        }
        n *= 2;
        stages += 1;
    }
}

/// Baker's transformation, folding the sequence into a continuous
/// periodic image of itself.
fn tent(x: f64) -> f64 {
    let y = 1.0 - (2.0 * x - 1.0).abs();
    y.clamp(TINY, 1.0 - TINY)
}

/// Indices of the Fourier bins whose aliasing class was split by the
/// doubling from n/2 to n = 2^m: lowest set bit at position m-1 or m-2,
/// clamped at the first stage where only the stage splitter exists.
fn spectral_band(m: u32, m0: u32) -> Vec<usize> {
    let lo = (m.saturating_sub(2)).max(m0 - 1);
    let hi = m - 1;
    (1..(1_usize << m))
        .filter(|k| {
            let lsb = k.trailing_zeros();
            lsb >= lo && lsb <= hi
        })
        .collect()
}

/// Integrates over a single shifted lattice and stops when the inflated
/// sum of the newly split Fourier coefficient magnitudes is below
/// `epsilon` in every output component. The estimate is the DC
/// coefficient. Only lattice sequences carry the group structure the
/// criterion relies on.
pub fn integrate_fourier_lattice(
    problem: &Problem,
    kind: GeneratorKind,
    seed: u64,
    tol: &ToleranceSpec,
    options: &FourierOptions,
) -> Result<StoppingResult> {
    let start = Instant::now();
    tol.validate()?;
    check_budget(options.n_init, options.n_max)?;
    if kind != GeneratorKind::Lattice {
        return Err(Error::InvalidConfig(format!(
            "the Fourier criterion requires a lattice sequence, got {kind}"
        )));
    }
    let spec = GeneratorSpec::new(kind, problem.dimension, seed);
    spec.validate()?;
    let q = problem.output_dim();
    let m0 = options.n_init.trailing_zeros();

    let mut planner = FftPlanner::<f64>::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); q];
    let mut n_done = 0_u64;
    let mut n = options.n_init;
    let mut stages = 0;
    loop {
        let mut batch = generate(&spec, n_done, (n - n_done) as usize)?;
        if options.periodize {
            batch.points.mapv_inplace(tent);
        }
        let values = evaluate_points(problem, &batch)?;
        for row in values.rows() {
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        n_done = n;

        let m = n.trailing_zeros();
        let band = spectral_band(m, m0);
        let fft = planner.plan_fft_forward(n as usize);
        let mut estimate = vec![0.0_f64; q];
        let mut bound = vec![0.0_f64; q];
        let mut buf = vec![Complex::new(0.0, 0.0); n as usize];
        for j in 0..q {
            // samples arrive in van der Corput order; un-bit-reverse to
            // natural lattice order before the transform
            for (i, &v) in columns[j].iter().enumerate() {
                let nat = (i as u64).reverse_bits() >> (64 - m);
                buf[nat as usize] = Complex::new(v, 0.0);
            }
            fft.process(&mut buf);
            estimate[j] = buf[0].re / n as f64;
            bound[j] = options.inflation * band.iter().map(|&k| buf[k].norm() / n as f64).sum::<f64>();
        }
        let converged = check_tolerance(&bound, &estimate, tol);
        if converged || n * 2 > options.n_max {
            return Ok(StoppingResult {
                estimate,
                error_bound: bound,
                n_used: n,
                replications: 1,
                stages,
                converged,
                wall_time_seconds: start.elapsed().as_secs_f64(),
            });
        }
        n *= 2;
        stages += 1;
    }
}
