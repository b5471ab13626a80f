//! Rank-1 lattice in base-2 radical-inverse order.
//!
//! Point i, coordinate j is frac(phi2(i) * z_j) where phi2 is the bit
//! reversal of the index over max_log2_n bits. Emitting the sequence in
//! this order makes every prefix of size 2^m itself a lattice, so a
//! running estimate can double n by appending points. The phase is kept
//! as a fixed-point integer mod 2^max_log2_n, which makes unrandomized
//! coordinates exact dyadic rationals.

use ndarray::Array2;
use rand::Rng;

use super::{check_capacity, master_rng, GeneratorSpec, Randomization, TINY};
use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../../../data/lattice-32-20.txt");

/// Generating vector of a base-2 extensible rank-1 lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGeneratingVector {
    z: Vec<u64>,
    max_log2_n: u32,
}

impl LatticeGeneratingVector {
    pub fn new(z: Vec<u64>, max_log2_n: u32) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidConfig(
                "generating vector has no components".to_string(),
            ));
        }
        if max_log2_n == 0 || max_log2_n > 53 {
            return Err(Error::InvalidConfig(format!(
                "max_log2_n must be in 1..=53, got {max_log2_n}"
            )));
        }
        for (j, &zj) in z.iter().enumerate() {
            if zj % 2 == 0 {
                return Err(Error::InvalidConfig(format!(
                    "generating vector component {j} is even ({zj})"
                )));
            }
            if zj >= 1 << max_log2_n {
                return Err(Error::InvalidConfig(format!(
                    "generating vector component {j} ({zj}) is not below 2^{max_log2_n}"
                )));
            }
        }
        Ok(LatticeGeneratingVector { z, max_log2_n })
    }

    /// Parses the plain-text layout: first line max_log2_n, then one
    /// odd integer per line.
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut max_log2_n = None;
        let mut z = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let value: u64 = line.parse().map_err(|_| Error::ParameterFile {
                file: file.to_string(),
                line: idx + 1,
                message: format!("expected an integer, got {line:?}"),
            })?;
            match max_log2_n {
                None => {
                    max_log2_n = Some(u32::try_from(value).map_err(|_| Error::ParameterFile {
                        file: file.to_string(),
                        line: idx + 1,
                        message: format!("max_log2_n {value} out of range"),
                    })?)
                }
                Some(_) => z.push(value),
            }
        }
        let max_log2_n = max_log2_n.ok_or_else(|| Error::ParameterFile {
            file: file.to_string(),
            line: 1,
            message: "empty generating-vector file".to_string(),
        })?;
        LatticeGeneratingVector::new(z, max_log2_n).map_err(|e| Error::ParameterFile {
            file: file.to_string(),
            line: 1,
            message: e.to_string(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ParameterFile {
            file: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The generating vector shipped with the crate (32 dimensions,
    /// max_log2_n = 20; see data/README.md for provenance).
    pub fn bundled() -> &'static Self {
        static TABLE: std::sync::OnceLock<LatticeGeneratingVector> = std::sync::OnceLock::new();
        TABLE.get_or_init(|| {
            Self::parse(BUNDLED, "bundled lattice-32-20.txt").expect("bundled vector is valid")
        })
    }

    pub fn dimension(&self) -> usize {
        self.z.len()
    }

    pub fn max_log2_n(&self) -> u32 {
        self.max_log2_n
    }

    pub fn component(&self, j: usize) -> u64 {
        self.z[j]
    }
}

/// Mod-1 shift drawn for a spec's seed; one offset per dimension.
pub(crate) fn shift_for(seed: u64, dimension: usize) -> Vec<f64> {
    let mut rng = master_rng(seed);
    (0..dimension).map(|_| rng.gen::<f64>()).collect()
}

pub(crate) fn generate_points(
    vector: &LatticeGeneratingVector,
    spec: &GeneratorSpec,
    start_index: u64,
    count: usize,
) -> Result<Array2<f64>> {
    let d = spec.dimension;
    if d > vector.dimension() {
        return Err(Error::DimensionExceeded {
            requested: d,
            supported: vector.dimension(),
        });
    }
    let k = vector.max_log2_n;
    check_capacity(start_index, count, 1u64 << k)?;
    let shift = match spec.randomization {
        Randomization::None => None,
        Randomization::Shift => Some(shift_for(spec.seed, d)),
        other => {
            return Err(Error::IncompatibleRandomization {
                kind: "lattice".to_string(),
                randomization: other.name().to_string(),
            })
        }
    };
    let mask = (1u64 << k) - 1;
    let scale = 1.0 / (1u64 << k) as f64;
    let mut out = Array2::<f64>::zeros((count, d));
    for (row, i) in (start_index..start_index + count as u64).enumerate() {
        let rev = i.reverse_bits() >> (64 - k);
        for j in 0..d {
            let phase = rev.wrapping_mul(vector.z[j]) & mask;
            let x = phase as f64 * scale;
            out[(row, j)] = match &shift {
                None => x,
                Some(delta) => {
                    let t = x + delta[j];
                    let mut v = if t >= 1.0 { t - 1.0 } else { t };
                    if v == 0.0 {
                        v = TINY;
                    }
                    v
                }
            };
        }
    }
    Ok(out)
}
