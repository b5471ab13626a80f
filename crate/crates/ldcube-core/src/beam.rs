//! Cantilevered Euler–Bernoulli beam forward model.
//!
//! Solves (exp(m(x)) u″)″ = q(x) on [0, L] with u(0) = u′(0) = 0 and
//! u″(L) = u‴(L) = 0, where the log-stiffness m is piecewise constant
//! over three regions. Discretization is a two-stage central-difference
//! composition on N equidistant nodes with ghost-node elimination at
//! both ends, giving a banded system of bandwidth 2 solved by banded
//! elimination with partial pivoting.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrands::{Integrand, Problem};
use crate::linalg::BandedMatrix;
use crate::measures::MeasureSpec;

/// Distributed load q(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Load {
    Constant(f64),
}

impl Load {
    pub fn at(&self, _x: f64) -> f64 {
        match self {
            Load::Constant(q0) => *q0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    pub length: f64,
    pub nodes: usize,
    pub load: Load,
    pub breakpoints: Vec<f64>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            length: 1.0,
            nodes: 31,
            load: Load::Constant(1.0),
            breakpoints: vec![1.0 / 3.0, 2.0 / 3.0],
        }
    }
}

impl BeamConfig {
    pub fn with_load(mut self, q0: f64) -> Self {
        self.load = Load::Constant(q0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 5 {
            return Err(Error::InvalidConfig(format!(
                "beam needs at least 5 nodes, got {}",
                self.nodes
            )));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beam length must be positive and finite, got {}",
                self.length
            )));
        }
        let Load::Constant(q0) = self.load;
        if !q0.is_finite() {
            return Err(Error::InvalidConfig(format!("load {q0} is not finite")));
        }
        let mut prev = 0.0;
        for &b in &self.breakpoints {
            if !(b > prev && b < self.length) {
                return Err(Error::InvalidConfig(format!(
                    "breakpoints must be strictly increasing within (0, {}); got {:?}",
                    self.length, self.breakpoints
                )));
            }
            prev = b;
        }
        Ok(())
    }

    /// Region of position x; boundary points belong to the left region.
    fn region(&self, x: f64) -> usize {
        self.breakpoints.iter().filter(|&&b| x > b).count()
    }
}

/// One draw of the three log-stiffness constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessSample {
    pub m: [f64; 3],
}

/// Deflection at the N equidistant nodes, clamped end first.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionVector {
    pub u: Vec<f64>,
}

impl DeflectionVector {
    pub fn tip(&self) -> f64 {
        *self.u.last().expect("non-empty")
    }
}

/// Exact deflection of a uniform beam (stiffness EI, constant load q₀)
/// at position x: the convergence oracle for the discrete model.
pub fn analytic_uniform_deflection(ei: f64, q0: f64, length: f64, x: f64) -> f64 {
    q0 * x * x * (x * x - 4.0 * length * x + 6.0 * length * length) / (24.0 * ei)
}

/// Second-difference row of the bending moment w_j, expressed over the
/// unknowns u_0..u_{N-1} after ghost-node elimination:
/// u_{-1} = u_1 (clamped slope), u_N = 2u_{N-1} - u_{N-2} (zero moment),
/// u_{N+1} = 4u_{N-1} - 4u_{N-2} + u_{N-3} (zero shear).
fn add_moment_row(k: &mut BandedMatrix, row: usize, j: usize, scale: f64, n: usize) {
    if j == 0 {
        k.add(row, 0, -2.0 * scale);
        k.add(row, 1, 2.0 * scale);
    } else if j == n - 1 {
        // zero-moment ghost cancels this term identically
    } else if j == n {
        k.add(row, n - 3, scale);
        k.add(row, n - 2, -2.0 * scale);
        k.add(row, n - 1, scale);
    } else {
        k.add(row, j - 1, scale);
        k.add(row, j, -2.0 * scale);
        k.add(row, j + 1, scale);
    }
}

/// Assembles K and ĝ from explicit per-region stiffness coefficients
/// exp(m); exposed so scalings of the coefficient (e.g. exact doubling)
/// can bypass the exp.
pub fn assemble_with_stiffness(
    config: &BeamConfig,
    region_stiffness: [f64; 3],
) -> Result<(BandedMatrix, Vec<f64>)> {
    config.validate()?;
    for (r, &c) in region_stiffness.iter().enumerate() {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "region {r} stiffness {c} must be positive and finite"
            )));
        }
    }
    let n = config.nodes;
    let h = config.length / (n - 1) as f64;
    let h4 = h * h * h * h;
    // stiffness at nodes 0..N-1 plus the ghost moment node N, which
    // extends the last region past the free end
    let coeff = |j: usize| -> f64 {
        if j >= n {
            region_stiffness[2]
        } else {
            region_stiffness[config.region(j as f64 * h)]
        }
    };
    let mut k = BandedMatrix::zeros(n, 2, 2);
    let mut g = vec![0.0; n];
    k.set(0, 0, 1.0);
    for i in 1..n {
        g[i] = config.load.at(i as f64 * h);
        for (j, w) in [(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)] {
            add_moment_row(&mut k, i, j, w * coeff(j) / h4, n);
        }
    }
    Ok((k, g))
}

/// Assembles the banded system K(m)û = ĝ for a log-stiffness sample.
pub fn assemble_system(
    config: &BeamConfig,
    sample: &StiffnessSample,
) -> Result<(BandedMatrix, Vec<f64>)> {
    assemble_with_stiffness(config, sample.m.map(f64::exp))
}

/// Solves K(m)û = ĝ by banded elimination.
pub fn solve_deflection(config: &BeamConfig, sample: &StiffnessSample) -> Result<DeflectionVector> {
    let (k, g) = assemble_system(config, sample)?;
    let u = k.factor()?.solve(&g);
    Ok(DeflectionVector { u })
}

struct BeamIntegrand {
    config: BeamConfig,
}

impl Integrand for BeamIntegrand {
    fn output_dim(&self) -> usize {
        self.config.nodes
    }

    fn evaluate_row(&self, sample: &[f64]) -> Result<Vec<f64>> {
        if sample.len() != 3 {
            return Err(Error::DimensionMismatch {
                context: "beam stiffness sample".to_string(),
                expected: 3,
                actual: sample.len(),
            });
        }
        let sample = StiffnessSample {
            m: [sample[0], sample[1], sample[2]],
        };
        Ok(solve_deflection(&self.config, &sample)?.u)
    }
}

/// The paper's benchmark: expected nodal deflection under log-stiffness
/// drawn from U[1, 1.2]³. No known mean; acceptance tests compare the
/// tip against an independent tensor-quadrature oracle.
pub fn beam_problem(config: BeamConfig) -> Problem {
    Problem {
        label: "beam".to_string(),
        dimension: 3,
        measure: MeasureSpec::uniform_box(vec![1.0; 3], vec![1.2; 3]),
        integrand: Arc::new(BeamIntegrand { config }),
        known_mean: None,
    }
}
