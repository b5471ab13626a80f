//! Low-discrepancy point sets: rank-1 lattice in radical-inverse order,
//! Sobol' in Gray-code order, and Halton, each with a seed-reproducible
//! randomization. Generation is a pure function of the spec and index
//! range, so batches can be produced concurrently and extended without
//! regenerating earlier points.

mod halton;
mod lattice;
mod sobol;

pub use halton::halton_point;
pub use lattice::LatticeGeneratingVector;
pub use sobol::{load_direction_numbers, sobol_raw, DirectionNumberTable};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest positive value on the output grid; used to keep randomized
/// coordinates strictly inside (0, 1).
pub(crate) const TINY: f64 = 1.0 / 9007199254740992.0; // 2^-53

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Lattice,
    Sobol,
    Halton,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Lattice => "lattice",
            GeneratorKind::Sobol => "sobol",
            GeneratorKind::Halton => "halton",
        }
    }

    /// The randomization applied when the caller does not choose one.
    pub fn default_randomization(self) -> Randomization {
        match self {
            GeneratorKind::Lattice => Randomization::Shift,
            GeneratorKind::Sobol => Randomization::DigitalShiftPlusScramble,
            GeneratorKind::Halton => Randomization::Permutation,
        }
    }

    pub fn supports(self, randomization: Randomization) -> bool {
        matches!(
            (self, randomization),
            (_, Randomization::None)
                | (GeneratorKind::Lattice, Randomization::Shift)
                | (GeneratorKind::Sobol, Randomization::DigitalShift)
                | (GeneratorKind::Sobol, Randomization::DigitalShiftPlusScramble)
                | (GeneratorKind::Halton, Randomization::Permutation)
        )
    }

    /// Largest dimension the bundled parameter tables cover.
    pub fn max_dimension(self) -> usize {
        match self {
            GeneratorKind::Lattice => LatticeGeneratingVector::bundled().dimension(),
            GeneratorKind::Sobol => DirectionNumberTable::bundled().max_dimension(),
            GeneratorKind::Halton => halton::MAX_DIMENSION,
        }
    }

    /// Number of points addressable by index before capacity runs out.
    pub fn capacity(self) -> u64 {
        match self {
            GeneratorKind::Lattice => 1u64 << LatticeGeneratingVector::bundled().max_log2_n(),
            GeneratorKind::Sobol => 1u64 << sobol::MAX_BITS,
            GeneratorKind::Halton => 1u64 << halton::MAX_BITS,
        }
    }
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lattice" => Ok(GeneratorKind::Lattice),
            "sobol" => Ok(GeneratorKind::Sobol),
            "halton" => Ok(GeneratorKind::Halton),
            other => Err(Error::InvalidConfig(format!(
                "unknown generator kind {other:?} (expected lattice, sobol, or halton)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Randomization {
    None,
    Shift,
    DigitalShift,
    DigitalShiftPlusScramble,
    Permutation,
}

impl Randomization {
    pub fn name(self) -> &'static str {
        match self {
            Randomization::None => "none",
            Randomization::Shift => "shift",
            Randomization::DigitalShift => "digital-shift",
            Randomization::DigitalShiftPlusScramble => "digital-shift-plus-scramble",
            Randomization::Permutation => "permutation",
        }
    }
}

impl std::fmt::Display for Randomization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Randomization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Randomization::None),
            "shift" => Ok(Randomization::Shift),
            "digital-shift" => Ok(Randomization::DigitalShift),
            "digital-shift-plus-scramble" => Ok(Randomization::DigitalShiftPlusScramble),
            "permutation" => Ok(Randomization::Permutation),
            other => Err(Error::InvalidConfig(format!(
                "unknown randomization {other:?}"
            ))),
        }
    }
}

/// Everything that determines a point set: generator family, dimension,
/// seed, and randomization. Identical specs produce bitwise-identical
/// batches across runs and platforms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub dimension: usize,
    pub seed: u64,
    pub randomization: Randomization,
}

impl GeneratorSpec {
    /// Spec with the kind's default randomization.
    pub fn new(kind: GeneratorKind, dimension: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            dimension,
            seed,
            randomization: kind.default_randomization(),
        }
    }

    pub fn with_randomization(mut self, randomization: Randomization) -> Self {
        self.randomization = randomization;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::ZeroDimension);
        }
        let supported = self.kind.max_dimension();
        if self.dimension > supported {
            return Err(Error::DimensionExceeded {
                requested: self.dimension,
                supported,
            });
        }
        if !self.kind.supports(self.randomization) {
            return Err(Error::IncompatibleRandomization {
                kind: self.kind.name().to_string(),
                randomization: self.randomization.name().to_string(),
            });
        }
        Ok(())
    }
}

/// A contiguous run of points from a generator: rows are points, columns
/// are coordinates, all entries in [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PointBatch {
    pub points: Array2<f64>,
    pub start_index: u64,
}

impl PointBatch {
    pub fn count(&self) -> usize {
        self.points.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.points.ncols()
    }
}

/// Bit-reversal of the index interpreted as a binary fraction; the
/// index order in which the extensible lattice is emitted.
pub fn radical_inverse_base2(index: u64) -> f64 {
    // Indices below 2^53 reverse into at most 53 significant bits, so
    // the conversion and the power-of-two scaling are both exact.
    index.reverse_bits() as f64 * (1.0 / 18446744073709551616.0)
}

pub(crate) fn check_capacity(start_index: u64, count: usize, limit: u64) -> Result<()> {
    let end = start_index
        .checked_add(count as u64)
        .ok_or(Error::CapacityExceeded {
            index: u64::MAX,
            limit,
        })?;
    if end > limit {
        return Err(Error::CapacityExceeded {
            index: end - 1,
            limit,
        });
    }
    Ok(())
}

/// Generates `count` points starting at `start_index`.
///
/// Pure in (spec, start_index, count): calling twice, or splitting the
/// range, yields identical values, which is what lets the stopping
/// rules extend a point set instead of regenerating it.
pub fn generate(spec: &GeneratorSpec, start_index: u64, count: usize) -> Result<PointBatch> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::InvalidConfig("count must be positive".to_string()));
    }
    let points = match spec.kind {
        GeneratorKind::Lattice => lattice::generate_points(
            LatticeGeneratingVector::bundled(),
            spec,
            start_index,
            count,
        )?,
        GeneratorKind::Sobol => {
            sobol::generate_points(DirectionNumberTable::bundled(), spec, start_index, count)?
        }
        GeneratorKind::Halton => halton::generate_points(spec, start_index, count)?,
    };
    Ok(PointBatch {
        points,
        start_index,
    })
}

/// Master stream for all randomization parameters of a spec; every
/// per-dimension draw descends from this single seeded stream so that
/// the same seed always reproduces the same randomization.
pub(crate) fn master_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One independent sub-stream per dimension, derived in dimension order.
pub(crate) fn dimension_rngs(seed: u64, dimension: usize) -> Vec<ChaCha8Rng> {
    let mut master = master_rng(seed);
    (0..dimension)
        .map(|_| ChaCha8Rng::seed_from_u64(master.gen()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_examples() {
        assert_eq!(radical_inverse_base2(0), 0.0);
        assert_eq!(radical_inverse_base2(1), 0.5);
        assert_eq!(radical_inverse_base2(2), 0.25);
        assert_eq!(radical_inverse_base2(3), 0.75);
        assert_eq!(radical_inverse_base2(6), 0.375);
    }

    #[test]
    fn spec_validation_rejects_bad_combinations() {
        let spec = GeneratorSpec::new(GeneratorKind::Lattice, 2, 1)
            .with_randomization(Randomization::DigitalShift);
        assert!(matches!(
            spec.validate(),
            Err(Error::IncompatibleRandomization { .. })
        ));
        let spec = GeneratorSpec::new(GeneratorKind::Sobol, 0, 1);
        assert!(matches!(spec.validate(), Err(Error::ZeroDimension)));
        let spec = GeneratorSpec::new(GeneratorKind::Lattice, 10_000, 1);
        assert!(matches!(
            spec.validate(),
            Err(Error::DimensionExceeded { .. })
        ));
    }

    #[test]
    fn default_randomizations_are_compatible() {
        for kind in [
            GeneratorKind::Lattice,
            GeneratorKind::Sobol,
            GeneratorKind::Halton,
        ] {
            assert!(kind.supports(kind.default_randomization()));
        }
    }

    #[test]
    fn extensibility_holds_for_every_kind_and_randomization() {
        let cases = [
            (GeneratorKind::Lattice, Randomization::Shift),
            (GeneratorKind::Lattice, Randomization::None),
            (GeneratorKind::Sobol, Randomization::DigitalShift),
            (GeneratorKind::Sobol, Randomization::DigitalShiftPlusScramble),
            (GeneratorKind::Sobol, Randomization::None),
            (GeneratorKind::Halton, Randomization::Permutation),
            (GeneratorKind::Halton, Randomization::None),
        ];
        for (kind, randomization) in cases {
            let spec = GeneratorSpec::new(kind, 5, 42).with_randomization(randomization);
            let whole = generate(&spec, 0, 64).unwrap();
            let head = generate(&spec, 0, 32).unwrap();
            let tail = generate(&spec, 32, 32).unwrap();
            for i in 0..32 {
                for j in 0..5 {
                    assert_eq!(whole.points[(i, j)], head.points[(i, j)], "{kind} head");
                    assert_eq!(
                        whole.points[(32 + i, j)],
                        tail.points[(i, j)],
                        "{kind} tail"
                    );
                }
            }
        }
    }

    #[test]
    fn batches_are_deterministic_and_in_unit_cube() {
        for kind in [
            GeneratorKind::Lattice,
            GeneratorKind::Sobol,
            GeneratorKind::Halton,
        ] {
            let spec = GeneratorSpec::new(kind, 4, 7);
            let a = generate(&spec, 0, 128).unwrap();
            let b = generate(&spec, 0, 128).unwrap();
            assert_eq!(a.points, b.points, "{kind} determinism");
            for &v in a.points.iter() {
                assert!((0.0..1.0).contains(&v), "{kind} produced {v}");
            }
        }
    }

    #[test]
    fn randomized_first_point_never_has_zero_coordinates() {
        for kind in [
            GeneratorKind::Lattice,
            GeneratorKind::Sobol,
            GeneratorKind::Halton,
        ] {
            for seed in 0..100 {
                let spec = GeneratorSpec::new(kind, 6, seed);
                let batch = generate(&spec, 0, 1).unwrap();
                for j in 0..6 {
                    let v = batch.points[(0, j)];
                    assert!(v > 0.0 && v < 1.0, "{kind} seed {seed} coord {j}: {v}");
                }
            }
        }
    }

    #[test]
    fn different_seeds_give_different_first_points() {
        for kind in [
            GeneratorKind::Lattice,
            GeneratorKind::Sobol,
            GeneratorKind::Halton,
        ] {
            let mut seen = std::collections::HashSet::new();
            for seed in 0..100 {
                let spec = GeneratorSpec::new(kind, 3, seed);
                let batch = generate(&spec, 0, 1).unwrap();
                let key: Vec<u64> = (0..3).map(|j| batch.points[(0, j)].to_bits()).collect();
                assert!(seen.insert(key), "{kind}: first-point collision at seed {seed}");
            }
        }
    }

    #[test]
    fn serde_round_trip_uses_kebab_case() {
        let spec = GeneratorSpec::new(GeneratorKind::Sobol, 3, 9)
            .with_randomization(Randomization::DigitalShiftPlusScramble);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"sobol\""));
        assert!(json.contains("digital-shift-plus-scramble"));
        let back: GeneratorSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
