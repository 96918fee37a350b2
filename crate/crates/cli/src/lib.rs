//! Command implementations behind the `corbin` binary.
//!
//! Each command returns an [`Envelope`] that renders either as a human
//! table or as one JSON document. Exit codes: 0 success, 1 I/O failure,
//! 2 invalid or infeasible input, 3 statistical verification failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use corbin::{
    bound_table, conditional_variance_line, estimate_moments, max_correlation, regression_line,
    sample_batch, solve_cell_probs, theoretical_moments, verify_samples, PairSample, RngStream,
    TargetSpec, Thresholds, VerificationReport,
};

pub mod render;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or an infeasible target.
    Input(String),
    Io(String),
    /// The verification ran but at least one check failed.
    VerificationFailed(Box<Envelope>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Input(_) => 2,
            CliError::VerificationFailed(_) => 3,
        }
    }
}

impl From<corbin::Error> for CliError {
    fn from(e: corbin::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// The self-describing document every command emits.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope {
    pub command: &'static str,
    pub version: &'static str,
    pub inputs: Value,
    pub results: Value,
}

impl Envelope {
    fn new(command: &'static str, inputs: Value, results: Value) -> Self {
        Self {
            command,
            version: VERSION,
            inputs,
            results,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serializes")
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("value serializes")
}

/// Cells, moments and both conditional lines for `(pi1, pi2, r)` at `n`.
pub fn solve(n: u32, pi1: f64, pi2: f64, r: f64) -> Result<Envelope, CliError> {
    let spec = TargetSpec::new(n, pi1, pi2, r)?;
    let cells = solve_cell_probs(&spec)?;
    let moments = theoretical_moments(n, &cells)?;
    let regression = regression_line(n, &cells)?;
    let variance = conditional_variance_line(n, &cells)?;
    let bound = max_correlation(pi1, pi2)?;
    Ok(Envelope::new(
        "solve",
        json!({ "n": n, "pi1": pi1, "pi2": pi2, "r": r }),
        json!({
            "max_correlation": bound,
            "cells": cells,
            "moments": moments,
            "rho_round_trip": moments.rho,
            "regression": regression,
            "conditional_variance": variance,
        }),
    ))
}

pub fn table(grid: &[f64], raw: bool) -> Result<Envelope, CliError> {
    if grid.is_empty() {
        return Err(CliError::Input("grid is empty".into()));
    }
    let t = bound_table(grid)?;
    let rounded: Vec<Vec<f64>> = (0..t.len())
        .map(|i| (0..t.len()).map(|j| t.display(i, j)).collect())
        .collect();
    Ok(Envelope::new(
        "table",
        json!({ "grid": grid, "raw": raw }),
        json!({ "grid": t.grid, "raw": t.raw, "rounded": rounded }),
    ))
}

/// Writes the sample file format: header `y1,y2`, one `int,int` row per
/// draw, LF endings.
pub fn write_samples<W: Write>(mut w: W, samples: &[PairSample]) -> io::Result<()> {
    w.write_all(b"y1,y2\n")?;
    for p in samples {
        writeln!(w, "{},{}", p.y1, p.y2)?;
    }
    w.flush()
}

pub struct SampleArgs {
    pub spec: TargetSpec,
    pub count: usize,
    pub seed: u64,
    pub stream: u64,
    pub out: Option<PathBuf>,
}

/// Draws the sample, writes it to `out` (or to `fallback` when no path is
/// given) and returns the summary envelope.
pub fn sample<W: Write>(args: &SampleArgs, fallback: W) -> Result<Envelope, CliError> {
    args.spec.validate()?;
    if args.count == 0 {
        return Err(CliError::Input("--count must be at least 1".into()));
    }
    let mut stream = RngStream::new(args.seed, args.stream);
    let samples = sample_batch(&mut stream, &args.spec, args.count)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            write_samples(BufWriter::new(file), &samples).map_err(|e| io_error(path, e))?;
        }
        None => write_samples(fallback, &samples)
            .map_err(|e| CliError::Io(format!("stdout: {e}")))?,
    }
    let rho = estimate_moments(&samples).ok().map(|m| m.rho);
    Ok(Envelope::new(
        "sample",
        json!({
            "n": args.spec.n,
            "pi1": args.spec.pi1,
            "pi2": args.spec.pi2,
            "r": args.spec.r,
            "count": args.count,
            "seed": args.seed,
            "stream": args.stream,
            "out": args.out.as_ref().map(|p| p.display().to_string()),
        }),
        json!({ "count": samples.len(), "empirical_rho": rho }),
    ))
}

pub struct VerifyArgs {
    pub spec: TargetSpec,
    pub count: usize,
    pub seed: u64,
    pub stream: u64,
    pub thresholds: Thresholds,
    pub out: Option<PathBuf>,
}

/// Samples, runs every check and returns the report envelope. A failed
/// check comes back as [`CliError::VerificationFailed`] carrying the
/// envelope.
pub fn verify(args: &VerifyArgs) -> Result<Envelope, CliError> {
    args.spec.validate()?;
    if args.count < 2 {
        return Err(CliError::Input("--count must be at least 2".into()));
    }
    let mut stream = RngStream::new(args.seed, args.stream);
    let samples = sample_batch(&mut stream, &args.spec, args.count)?;
    let report: VerificationReport = verify_samples(&args.spec, &samples, &args.thresholds)?;
    let envelope = Envelope::new(
        "verify",
        json!({
            "n": args.spec.n,
            "pi1": args.spec.pi1,
            "pi2": args.spec.pi2,
            "r": args.spec.r,
            "count": args.count,
            "seed": args.seed,
            "stream": args.stream,
            "thresholds": args.thresholds,
            "out": args.out.as_ref().map(|p| p.display().to_string()),
        }),
        to_value(&report),
    );
    if let Some(path) = &args.out {
        std::fs::write(path, envelope.to_json() + "\n").map_err(|e| io_error(path, e))?;
    }
    if report.passed {
        Ok(envelope)
    } else {
        Err(CliError::VerificationFailed(Box::new(envelope)))
    }
}
