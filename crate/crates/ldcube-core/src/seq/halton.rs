//! Halton sequence: coordinate j is the radical inverse of the index
//! in the j-th prime base. The Permutation randomization draws a seeded
//! random digit permutation per base and digit position, evaluated over
//! enough digit positions to fill a double, so randomized coordinates
//! are strictly inside (0, 1) and the first point carries the full
//! entropy of the seed.

use ndarray::Array2;
use rand::seq::SliceRandom;

use super::{check_capacity, dimension_rngs, GeneratorSpec, Randomization, TINY};
use crate::error::{Error, Result};

pub(crate) const MAX_DIMENSION: usize = 1000;
pub(crate) const MAX_BITS: u32 = 53;

/// First `MAX_DIMENSION` primes, sieved once per process.
fn primes() -> &'static [u32] {
    static PRIMES: std::sync::OnceLock<Vec<u32>> = std::sync::OnceLock::new();
    PRIMES.get_or_init(|| {
        // the 1000th prime is 7919
        let limit = 7920usize;
        let mut composite = vec![false; limit + 1];
        let mut out = Vec::with_capacity(MAX_DIMENSION);
        for p in 2..=limit {
            if !composite[p] {
                out.push(p as u32);
                let mut q = p * p;
                while q <= limit {
                    composite[q] = true;
                    q += p;
                }
            }
        }
        assert!(out.len() >= MAX_DIMENSION);
        out.truncate(MAX_DIMENSION);
        out
    })
}

/// Digits needed so the truncated expansion resolves a full double.
fn digit_depth(base: u32) -> usize {
    (53.0 / (base as f64).log2()).ceil() as usize
}

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    // Horner over the actual digits, least significant last
    let b = base as u64;
    let mut digits = [0u64; 64];
    let mut len = 0;
    while index > 0 {
        digits[len] = index % b;
        index /= b;
        len += 1;
    }
    let mut v = 0.0;
    for k in (0..len).rev() {
        v = (v + digits[k] as f64) / base as f64;
    }
    v
}

/// Digit permutations for one base: one independent permutation per
/// digit position, `depth` of them.
struct DigitScramble {
    perms: Vec<Vec<u32>>,
}

impl DigitScramble {
    fn draw(rng: &mut impl rand::Rng, base: u32) -> Self {
        let depth = digit_depth(base);
        let perms = (0..depth)
            .map(|_| {
                let mut perm: Vec<u32> = (0..base).collect();
                perm.shuffle(rng);
                perm
            })
            .collect();
        DigitScramble { perms }
    }

    fn apply(&self, mut index: u64, base: u32) -> f64 {
        // zero-padded to the full digit depth so trailing zero digits
        // pass through their position's permutation too; this is what
        // keeps index 0 away from the origin
        let b = base as u64;
        let depth = self.perms.len();
        let mut digits = [0u64; 64];
        for slot in digits.iter_mut().take(depth) {
            *slot = index % b;
            index /= b;
        }
        let mut v = 0.0;
        for k in (0..depth).rev() {
            v = (v + self.perms[k][digits[k] as usize] as f64) / base as f64;
        }
        if v <= 0.0 {
            v = TINY;
        } else if v >= 1.0 {
            v = 1.0 - TINY;
        }
        v
    }
}

/// Seeded digit scrambles for the first `dimension` bases.
fn scrambles_for(seed: u64, dimension: usize) -> Vec<DigitScramble> {
    let bases = primes();
    dimension_rngs(seed, dimension)
        .into_iter()
        .enumerate()
        .map(|(j, mut rng)| DigitScramble::draw(&mut rng, bases[j]))
        .collect()
}

/// One Halton point. `permutation_seed` of `None` gives the plain
/// radical inverses; `Some(seed)` applies the seeded digit permutations.
pub fn halton_point(index: u64, dimension: usize, permutation_seed: Option<u64>) -> Result<Vec<f64>> {
    if dimension == 0 {
        return Err(Error::ZeroDimension);
    }
    if dimension > MAX_DIMENSION {
        return Err(Error::DimensionExceeded {
            requested: dimension,
            supported: MAX_DIMENSION,
        });
    }
    if index >= 1u64 << MAX_BITS {
        return Err(Error::CapacityExceeded {
            index,
            limit: 1u64 << MAX_BITS,
        });
    }
    let bases = primes();
    match permutation_seed {
        None => Ok((0..dimension)
            .map(|j| radical_inverse(index, bases[j]))
            .collect()),
        Some(seed) => {
            let scrambles = scrambles_for(seed, dimension);
            Ok((0..dimension)
                .map(|j| scrambles[j].apply(index, bases[j]))
                .collect())
        }
    }
}

pub(crate) fn generate_points(
    spec: &GeneratorSpec,
    start_index: u64,
    count: usize,
) -> Result<Array2<f64>> {
    let d = spec.dimension;
    if d > MAX_DIMENSION {
        return Err(Error::DimensionExceeded {
            requested: d,
            supported: MAX_DIMENSION,
        });
    }
    check_capacity(start_index, count, 1u64 << MAX_BITS)?;
    let scrambles = match spec.randomization {
        Randomization::None => None,
        Randomization::Permutation => Some(scrambles_for(spec.seed, d)),
        other => {
            return Err(Error::IncompatibleRandomization {
                kind: "halton".to_string(),
                randomization: other.name().to_string(),
            })
        }
    };
    let bases = primes();
    let mut out = Array2::<f64>::zeros((count, d));
    for (row, i) in (start_index..start_index + count as u64).enumerate() {
        for j in 0..d {
            out[(row, j)] = match &scrambles {
                None => radical_inverse(i, bases[j]),
                Some(s) => s[j].apply(i, bases[j]),
            };
        }
    }
    Ok(out)
}
