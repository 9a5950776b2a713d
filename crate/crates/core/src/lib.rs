//! Zero-sum parallel bus signaling: balanced code books, per-lane stimulus,
//! slice netlists with an on-die power delivery network, a fixed-step
//! transient solver and eye / rail-noise analysis.
//!
//! The crate is `no_std` with `alloc`; file formats and the command line
//! front end live in the `zerosum` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod circuit;
pub mod codec;
pub mod experiment;
pub mod stimulus;

pub use analysis::{EyeMetrics, RippleMetrics, SliceSummary};
pub use circuit::{Netlist, TransientConfig, WaveformSet};
pub use codec::{CodeBook, CodeWord, DisparityBound, SchemeKind};
pub use stimulus::{LaneBitstreams, PatternMode, PatternSpec};
