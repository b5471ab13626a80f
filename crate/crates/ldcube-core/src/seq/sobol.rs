//! Sobol' sequence in Gray-code order with Joe–Kuo direction numbers.
//!
//! States are 32-bit integers; the Gray-code increment XORs a single
//! direction number per step, and random access XORs the direction
//! numbers selected by the Gray code of the index, so any batch can be
//! produced without walking from zero. Randomization is a per-dimension
//! digital shift, optionally preceded by a linear matrix scramble
//! (random lower-triangular unit-diagonal bit matrix applied to the
//! direction numbers), which preserves the digital-net structure.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_capacity, master_rng, GeneratorSpec, Randomization};
use crate::error::{Error, Result};

pub(crate) const MAX_BITS: u32 = 32;

const BUNDLED: &str = include_str!("../../../../data/new-joe-kuo-6.1111.txt");

/// Direction numbers for dimensions 1..=max_dimension, 32 bits each.
/// Dimension 1 is the plain van der Corput base-2 recurrence and is
/// synthesized rather than read from the file.
#[derive(Debug, Clone)]
pub struct DirectionNumberTable {
    directions: Vec<[u32; 32]>,
}

impl DirectionNumberTable {
    pub fn max_dimension(&self) -> usize {
        self.directions.len()
    }

    pub fn max_bits(&self) -> u32 {
        MAX_BITS
    }

    pub(crate) fn directions(&self, dim: usize) -> &[u32; 32] {
        &self.directions[dim]
    }

    /// The Joe–Kuo table shipped with the crate (1111 dimensions; see
    /// data/README.md for provenance).
    pub fn bundled() -> &'static Self {
        static TABLE: std::sync::OnceLock<DirectionNumberTable> = std::sync::OnceLock::new();
        TABLE.get_or_init(|| {
            parse_direction_numbers(BUNDLED, "bundled new-joe-kuo-6.1111.txt")
                .expect("bundled table is valid")
        })
    }
}

fn van_der_corput_directions() -> [u32; 32] {
    let mut v = [0u32; 32];
    for j in 1..=32u32 {
        v[(j - 1) as usize] = 1u32 << (32 - j);
    }
    v
}

fn expand_directions(s: usize, a: u64, m: &[u64]) -> [u32; 32] {
    let mut v = [0u32; 32];
    for j in 1..=s.min(32) {
        v[j - 1] = (m[j - 1] as u32) << (32 - j);
    }
    for j in (s + 1)..=32 {
        let mut vj = v[j - 1 - s] ^ (v[j - 1 - s] >> s);
        for k in 1..s {
            if (a >> (s - 1 - k)) & 1 == 1 {
                vj ^= v[j - 1 - k];
            }
        }
        v[j - 1] = vj;
    }
    v
}

/// Parses the published Joe–Kuo text layout: a header line, then one
/// line per dimension ≥ 2 with `d s a m_1 ... m_s`.
pub fn parse_direction_numbers(text: &str, file: &str) -> Result<DirectionNumberTable> {
    let err = |line: usize, message: String| Error::ParameterFile {
        file: file.to_string(),
        line,
        message,
    };
    let mut directions = vec![van_der_corput_directions()];
    let mut lines = text.lines().enumerate();
    // header line ("d s a m_i" in the published file)
    if lines.next().is_none() {
        return Err(err(1, "no dimensions".to_string()));
    }
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 4 {
            return Err(err(line_no, format!("malformed line: {line:?}")));
        }
        let parse_int = |tok: &str| -> Result<u64> {
            tok.parse()
                .map_err(|_| err(line_no, format!("expected an integer, got {tok:?}")))
        };
        let d = parse_int(tokens[0])? as usize;
        let s = parse_int(tokens[1])? as usize;
        let a = parse_int(tokens[2])?;
        if d != directions.len() + 1 {
            return Err(err(
                line_no,
                format!("expected dimension {}, got {d}", directions.len() + 1),
            ));
        }
        if tokens.len() != 3 + s {
            return Err(err(
                line_no,
                format!("expected {s} direction integers, found {}", tokens.len() - 3),
            ));
        }
        let mut m = Vec::with_capacity(s);
        for (j, tok) in tokens[3..].iter().enumerate() {
            let mj = parse_int(tok)?;
            if mj % 2 == 0 {
                return Err(err(line_no, format!("m_{} = {mj} is not odd", j + 1)));
            }
            if j + 1 < 64 && mj >= 1 << (j + 1) {
                return Err(err(
                    line_no,
                    format!("m_{} = {mj} is not below 2^{}", j + 1, j + 1),
                ));
            }
            m.push(mj);
        }
        directions.push(expand_directions(s, a, &m));
    }
    if directions.len() == 1 {
        return Err(err(1, "no dimensions".to_string()));
    }
    Ok(DirectionNumberTable { directions })
}

/// Loads a direction-number file in the Joe–Kuo layout.
pub fn load_direction_numbers(path: &std::path::Path) -> Result<DirectionNumberTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::ParameterFile {
        file: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_direction_numbers(&text, &path.display().to_string())
}

/// Integer Sobol' state of one point: XOR of the direction numbers
/// selected by the Gray code of the index, per dimension. Scaling by
/// 2^-32 gives the unrandomized point.
pub fn sobol_raw(table: &DirectionNumberTable, index: u64, dimension: usize) -> Result<Vec<u32>> {
    if dimension == 0 {
        return Err(Error::ZeroDimension);
    }
    if dimension > table.max_dimension() {
        return Err(Error::DimensionExceeded {
            requested: dimension,
            supported: table.max_dimension(),
        });
    }
    if index >= 1u64 << MAX_BITS {
        return Err(Error::CapacityExceeded {
            index,
            limit: 1u64 << MAX_BITS,
        });
    }
    Ok((0..dimension)
        .map(|j| state_at(table.directions(j), index))
        .collect())
}

fn state_at(dirs: &[u32; 32], index: u64) -> u32 {
    let mut gray = index ^ (index >> 1);
    let mut state = 0u32;
    let mut bit = 0usize;
    while gray != 0 {
        if gray & 1 == 1 {
            state ^= dirs[bit];
        }
        gray >>= 1;
        bit += 1;
    }
    state
}

/// Random lower-triangular unit-diagonal bit matrix; row k holds random
/// bits strictly above the diagonal digit (the top k bits in MSB-first
/// digit order) plus the forced diagonal bit.
fn scramble_matrix(rng: &mut ChaCha8Rng) -> [u32; 32] {
    let mut rows = [0u32; 32];
    rows[0] = 1 << 31;
    for k in 1..32u32 {
        let r: u32 = rng.gen();
        let above_diagonal = r & !((1u32 << (32 - k)) - 1);
        rows[k as usize] = above_diagonal | (1 << (31 - k));
    }
    rows
}

fn apply_matrix(rows: &[u32; 32], v: u32) -> u32 {
    let mut out = 0u32;
    for (k, row) in rows.iter().enumerate() {
        if (row & v).count_ones() & 1 == 1 {
            out |= 1 << (31 - k);
        }
    }
    out
}

struct SobolRandomization {
    directions: Vec<[u32; 32]>,
    shifts: Option<Vec<u32>>,
}

fn randomization_for(
    table: &DirectionNumberTable,
    spec: &GeneratorSpec,
) -> Result<SobolRandomization> {
    let d = spec.dimension;
    match spec.randomization {
        Randomization::None => Ok(SobolRandomization {
            directions: (0..d).map(|j| *table.directions(j)).collect(),
            shifts: None,
        }),
        Randomization::DigitalShift => {
            let mut rng = master_rng(spec.seed);
            let shifts = (0..d).map(|_| rng.gen::<u32>()).collect();
            Ok(SobolRandomization {
                directions: (0..d).map(|j| *table.directions(j)).collect(),
                shifts: Some(shifts),
            })
        }
        Randomization::DigitalShiftPlusScramble => {
            let mut rng = master_rng(spec.seed);
            let mut directions = Vec::with_capacity(d);
            let mut shifts = Vec::with_capacity(d);
            for j in 0..d {
                let rows = scramble_matrix(&mut rng);
                let mut dirs = [0u32; 32];
                for (k, &v) in table.directions(j).iter().enumerate() {
                    dirs[k] = apply_matrix(&rows, v);
                }
                directions.push(dirs);
                shifts.push(rng.gen::<u32>());
            }
            Ok(SobolRandomization {
                directions,
                shifts: Some(shifts),
            })
        }
        other => Err(Error::IncompatibleRandomization {
            kind: "sobol".to_string(),
            randomization: other.name().to_string(),
        }),
    }
}

pub(crate) fn generate_points(
    table: &DirectionNumberTable,
    spec: &GeneratorSpec,
    start_index: u64,
    count: usize,
) -> Result<Array2<f64>> {
    let d = spec.dimension;
    if d > table.max_dimension() {
        return Err(Error::DimensionExceeded {
            requested: d,
            supported: table.max_dimension(),
        });
    }
    check_capacity(start_index, count, 1u64 << MAX_BITS)?;
    let rand = randomization_for(table, spec)?;
    let scale = 1.0 / 4294967296.0; // 2^-32
    let mut out = Array2::<f64>::zeros((count, d));
    for j in 0..d {
        let dirs = &rand.directions[j];
        let shift = rand.shifts.as_ref().map(|s| s[j]);
        let mut state = state_at(dirs, start_index);
        for row in 0..count {
            if row > 0 {
                let i = start_index + row as u64;
                state ^= dirs[i.trailing_zeros() as usize];
            }
            out[(row, j)] = match shift {
                None => state as f64 * scale,
                Some(s) => ((state ^ s) as f64 + 0.5) * scale,
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::{generate, GeneratorKind};

    fn plain(d: usize, n: usize) -> Array2<f64> {
        let spec =
            GeneratorSpec::new(GeneratorKind::Sobol, d, 0).with_randomization(Randomization::None);
        generate_points(DirectionNumberTable::bundled(), &spec, 0, n).unwrap()
    }

    #[test]
    fn first_point_is_zero_and_second_is_half() {
        let pts = plain(3, 2);
        for j in 0..3 {
            assert_eq!(pts[(0, j)], 0.0);
            assert_eq!(pts[(1, j)], 0.5);
        }
    }

    #[test]
    fn first_sixteen_points_match_reference_table() {
        // Independently generated with another Sobol' implementation of
        // the same Joe–Kuo parameters (Gray-code order, d = 6).
        let want: [[f64; 6]; 16] = [
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25, 0.25, 0.75, 0.75],
            [0.25, 0.75, 0.75, 0.75, 0.25, 0.25],
            [0.375, 0.375, 0.625, 0.875, 0.375, 0.125],
            [0.875, 0.875, 0.125, 0.375, 0.875, 0.625],
            [0.625, 0.125, 0.875, 0.625, 0.625, 0.875],
            [0.125, 0.625, 0.375, 0.125, 0.125, 0.375],
            [0.1875, 0.3125, 0.9375, 0.4375, 0.5625, 0.3125],
            [0.6875, 0.8125, 0.4375, 0.9375, 0.0625, 0.8125],
            [0.9375, 0.0625, 0.6875, 0.1875, 0.3125, 0.5625],
            [0.4375, 0.5625, 0.1875, 0.6875, 0.8125, 0.0625],
            [0.3125, 0.1875, 0.3125, 0.5625, 0.9375, 0.4375],
            [0.8125, 0.6875, 0.8125, 0.0625, 0.4375, 0.9375],
            [0.5625, 0.4375, 0.0625, 0.8125, 0.1875, 0.6875],
            [0.0625, 0.9375, 0.5625, 0.3125, 0.6875, 0.1875],
        ];
        let pts = plain(6, 16);
        for i in 0..16 {
            for j in 0..6 {
                assert_eq!(pts[(i, j)], want[i][j], "point {i} coord {j}");
            }
        }
    }

    #[test]
    fn consecutive_states_differ_by_one_direction_number() {
        let table = DirectionNumberTable::bundled();
        for i in 1..64u64 {
            let prev = sobol_raw(table, i - 1, 4).unwrap();
            let next = sobol_raw(table, i, 4).unwrap();
            for j in 0..4 {
                let diff = prev[j] ^ next[j];
                assert_eq!(diff, table.directions(j)[i.trailing_zeros() as usize]);
            }
        }
    }

    fn assert_stratified(pts: &Array2<f64>, m: u32) {
        let n = 1usize << m;
        assert_eq!(pts.nrows(), n);
        for j in 0..pts.ncols() {
            let mut seen = vec![false; n];
            for i in 0..n {
                let bin = (pts[(i, j)] * n as f64) as usize;
                assert!(!seen[bin], "m={m} coord {j} bin {bin} hit twice");
                seen[bin] = true;
            }
        }
    }

    #[test]
    fn unrandomized_points_are_stratified() {
        for m in 1..=10u32 {
            let pts = plain(6, 1 << m);
            assert_stratified(&pts, m);
        }
    }

    #[test]
    fn digital_shift_and_scramble_preserve_stratification() {
        for randomization in [
            Randomization::DigitalShift,
            Randomization::DigitalShiftPlusScramble,
        ] {
            for m in 1..=8u32 {
                let spec = GeneratorSpec::new(GeneratorKind::Sobol, 6, 313)
                    .with_randomization(randomization);
                let batch = generate(&spec, 0, 1 << m).unwrap();
                assert_stratified(&batch.points, m);
            }
        }
    }

    #[test]
    fn digital_shift_moves_index_zero_to_the_shift_vector() {
        let seed = 99;
        let spec = GeneratorSpec::new(GeneratorKind::Sobol, 4, seed)
            .with_randomization(Randomization::DigitalShift);
        let batch = generate(&spec, 0, 1).unwrap();
        let mut rng = master_rng(seed);
        for j in 0..4 {
            let shift: u32 = rng.gen();
            let want = (shift as f64 + 0.5) / 4294967296.0;
            assert_eq!(batch.points[(0, j)], want, "coord {j}");
        }
    }

    #[test]
    fn scramble_matrix_is_lower_triangular_with_unit_diagonal() {
        let mut rng = master_rng(5);
        let rows = scramble_matrix(&mut rng);
        for (k, &row) in rows.iter().enumerate() {
            assert_ne!(row & (1 << (31 - k)), 0, "diagonal bit row {k}");
            let below = (1u32 << (31 - k)) - 1;
            assert_eq!(row & below, 0, "sub-diagonal bits row {k}");
        }
        // unit diagonal means the map preserves leading digits, so the
        // identity bit pattern maps to something with the same top bit
        let v = 1u32 << 31;
        assert_eq!(apply_matrix(&rows, v) >> 31, 1);
    }

    #[test]
    fn parser_accepts_the_published_first_line() {
        let table = parse_direction_numbers("d s a m_i\n2 1 0 1\n", "t").unwrap();
        assert_eq!(table.max_dimension(), 2);
        // dimension 2 recurrence from m = (1): v_1 = 1/2, v_2 = 3/4
        assert_eq!(table.directions(1)[0], 1 << 31);
        assert_eq!(table.directions(1)[1], 0b11 << 30);
        let states = sobol_raw(&table, 3, 2).unwrap();
        assert_eq!(states[1], 0b11 << 30); // gray(3) = 2 -> v_2
    }

    #[test]
    fn parser_reports_errors_with_line_numbers() {
        match parse_direction_numbers("", "t") {
            Err(Error::ParameterFile { line, message, .. }) => {
                assert_eq!(line, 1);
                assert!(message.contains("no dimensions"));
            }
            other => panic!("expected empty-file error, got {other:?}"),
        }
        match parse_direction_numbers("header only\n", "t") {
            Err(Error::ParameterFile { message, .. }) => {
                assert!(message.contains("no dimensions"))
            }
            other => panic!("expected no-dimensions error, got {other:?}"),
        }
        match parse_direction_numbers("h\n2 1 0\n", "t") {
            Err(Error::ParameterFile { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed-line error, got {other:?}"),
        }
        match parse_direction_numbers("h\n2 1 0 1\n3 2 1 1 4\n", "t") {
            Err(Error::ParameterFile { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("not odd"), "{message}");
            }
            other => panic!("expected even-m error, got {other:?}"),
        }
        match parse_direction_numbers("h\n2 1 0 1\n3 2 1 1 7\n", "t") {
            Err(Error::ParameterFile { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("below 2^2"), "{message}");
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn bundled_table_covers_1111_dimensions() {
        let table = DirectionNumberTable::bundled();
        assert_eq!(table.max_dimension(), 1111);
        assert_eq!(table.max_bits(), 32);
        // highest dimension still stratifies
        let spec = GeneratorSpec::new(GeneratorKind::Sobol, 1111, 0)
            .with_randomization(Randomization::None);
        let pts = generate_points(table, &spec, 0, 16).unwrap();
        let mut seen = vec![false; 16];
        for i in 0..16 {
            let bin = (pts[(i, 1110)] * 16.0) as usize;
            assert!(!seen[bin]);
            seen[bin] = true;
        }
    }

    #[test]
    fn capacity_is_enforced() {
        let table = DirectionNumberTable::bundled();
        assert!(matches!(
            sobol_raw(table, 1 << 32, 2),
            Err(Error::CapacityExceeded { .. })
        ));
        let spec = GeneratorSpec::new(GeneratorKind::Sobol, 2, 0);
        assert!(matches!(
            generate_points(table, &spec, (1 << 32) - 1, 2),
            Err(Error::CapacityExceeded { .. })
        ));
    }
}
