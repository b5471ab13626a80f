//! `ldcube points`: emit a (randomized) low-discrepancy point set as
//! RFC-4180 CSV with a mandatory header, full double precision.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;

use ldcube_core::seq::{generate, GeneratorKind, GeneratorSpec, Randomization};

use crate::{effective_seed, CliError};

const CHUNK: usize = 1 << 15;

pub fn parse_kind(text: &str) -> Result<GeneratorKind, String> {
    text.parse().map_err(|e| format!("{e}"))
}

pub fn parse_randomization(text: &str) -> Result<Randomization, String> {
    text.parse().map_err(|e| format!("{e}"))
}

#[derive(Args)]
pub struct PointsArgs {
    /// Sequence family: lattice, sobol, or halton
    #[arg(long, default_value = "lattice", value_parser = parse_kind)]
    pub kind: GeneratorKind,

    /// Number of coordinates per point
    #[arg(long)]
    pub dim: usize,

    /// Number of points
    #[arg(long)]
    pub n: u64,

    /// Randomization seed (LDCUBE_SEED overrides)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Randomization to apply; defaults to the family's standard one
    #[arg(long, value_parser = parse_randomization)]
    pub randomization: Option<Randomization>,

    /// Emit the raw deterministic sequence (needs --allow-unrandomized)
    #[arg(long)]
    pub no_randomize: bool,

    /// Opt in to unrandomized output
    #[arg(long)]
    pub allow_unrandomized: bool,

    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Also write each prefix of these sizes to its own file
    /// (e.g. 64,128,256; requires --out)
    #[arg(long, value_delimiter = ',')]
    pub prefix_sizes: Vec<u64>,
}

fn prefix_path(out: &Path, size: u64) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("points");
    let extension = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}-{size}.{extension}"))
}

fn header(dim: usize) -> String {
    let names: Vec<String> = (1..=dim).map(|j| format!("x{j}")).collect();
    names.join(",")
}

fn format_row(row: &[f64]) -> String {
    let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
    cells.join(",")
}

pub fn run(args: PointsArgs) -> Result<(), CliError> {
    let seed = effective_seed(args.seed)?;
    let randomization = if args.no_randomize {
        if !args.allow_unrandomized {
            return Err(CliError::usage(
                "unrandomized sequences start at the origin and break the open-interval \
                 transform contract; pass --allow-unrandomized to emit them anyway",
            ));
        }
        Randomization::None
    } else {
        args.randomization
            .unwrap_or_else(|| args.kind.default_randomization())
    };
    let spec = GeneratorSpec::new(args.kind, args.dim, seed).with_randomization(randomization);
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;

    for &size in &args.prefix_sizes {
        if size > args.n {
            return Err(CliError::usage(format!(
                "prefix size {size} exceeds --n {}",
                args.n
            )));
        }
    }
    if !args.prefix_sizes.is_empty() && args.out.is_none() {
        return Err(CliError::usage(
            "--prefix-sizes needs --out to name the per-prefix files",
        ));
    }

    let mut main_out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            CliError::usage(format!("cannot create {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    };
    let mut prefixes: Vec<(u64, BufWriter<File>)> = Vec::new();
    if let Some(out) = &args.out {
        for &size in &args.prefix_sizes {
            let path = prefix_path(out, size);
            let file = File::create(&path).map_err(|e| {
                CliError::usage(format!("cannot create {}: {e}", path.display()))
            })?;
            prefixes.push((size, BufWriter::new(file)));
        }
    }

    let head = header(args.dim);
    writeln!(main_out, "{head}").map_err(write_error)?;
    for (_, w) in prefixes.iter_mut() {
        writeln!(w, "{head}").map_err(write_error)?;
    }

    let mut index = 0_u64;
    while index < args.n {
        let count = CHUNK.min((args.n - index) as usize);
        let batch =
            generate(&spec, index, count).map_err(|e| CliError::evaluation(e.to_string()))?;
        for (offset, row) in batch.points.outer_iter().enumerate() {
            let line = format_row(row.as_slice().expect("contiguous row"));
            writeln!(main_out, "{line}").map_err(write_error)?;
            let global = index + offset as u64;
            for (size, w) in prefixes.iter_mut() {
                if global < *size {
                    writeln!(w, "{line}").map_err(write_error)?;
                }
            }
        }
        index += count as u64;
    }
    main_out.flush().map_err(write_error)?;
    for (_, mut w) in prefixes {
        w.flush().map_err(write_error)?;
    }
    Ok(())
}

fn write_error(e: std::io::Error) -> CliError {
    CliError::evaluation(format!("write failed: {e}"))
}
