//! Command line front end for zero-sum bus experiments: TOML configuration,
//! code book / waveform / results files, SVG plots and the scenario runner.

pub mod config;
pub mod error;
pub mod formats;
pub mod plot;
pub mod runner;
pub mod tables;

pub use error::{Error, Result};
pub use zerosum_core as core;

use zerosum_core::codec::{traces_required, BookMode, CodeBook, DisparityBound, SchemeKind};

/// Builds a code book; `width` defaults to the fewest wires that fit.
pub fn build_codebook(
    data_bits: u32,
    width: Option<u32>,
    disparity: u32,
    mode: BookMode,
    seed: u64,
) -> Result<CodeBook> {
    let bound = DisparityBound::new(disparity)?;
    let width = match width {
        Some(w) => w,
        None => traces_required(data_bits, SchemeKind::ZeroSum(bound))?,
    };
    Ok(CodeBook::build(data_bits, width, bound, seed, mode)?)
}

/// One line describing a code book.
pub fn describe_codebook(book: &CodeBook) -> String {
    format!(
        "{} words of {} bits, {} data bits, disparity ±{}, {} (seed {})",
        book.len(),
        book.width(),
        book.data_bits(),
        book.bound().get(),
        book.mode().as_str(),
        book.seed()
    )
}
