//! File writers shared by the subcommands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};
use inexact_core::trace::{CsvOptions, IterationTrace};
use serde::Serialize;

use crate::spec::Timing;
use crate::CliError;

pub const GRID_HEADER: &[&str] = &["test_id", "method", "m", "n", "iter", "eta", "total_inner", "time_s"];
pub const RUNS_HEADER: &[&str] = &[
    "method",
    "m",
    "n",
    "gamma",
    "lambda",
    "iters",
    "total_inner_iters",
    "eta_final",
    "time_s",
];
pub const RESIDUAL_HEADER: &[&str] = &["k", "eta", "omega"];

/// Seconds as written to CSV: measured under wall timing, zero otherwise.
pub fn seconds(timing: Timing, measured: f64) -> f64 {
    match timing {
        Timing::Wall => measured,
        Timing::None => 0.0,
    }
}

/// Writes `rows` with a header row; `header` is used when there are none.
pub fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &IterationTrace, timing: Timing) -> Result<(), CliError> {
    let out = BufWriter::new(File::create(path)?);
    trace.write_csv(
        out,
        CsvOptions {
            wall_clock: timing == Timing::Wall,
        },
    )?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Binary graymap of a row-major `side×side` image, clamped to `[0, 1]`.
pub fn write_pgm(path: &Path, pixels: &[f64], side: usize) -> Result<(), CliError> {
    assert_eq!(pixels.len(), side * side, "image is not side×side");
    let bytes: Vec<u8> = pixels
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let file = BufWriter::new(File::create(path)?);
    let side = u32::try_from(side).map_err(|_| CliError::Failed("image too large".into()))?;
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&bytes, side, side, ExtendedColorType::L8)?;
    Ok(())
}

/// File-name form of a method label, e.g. `gialm-1.1`.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}
