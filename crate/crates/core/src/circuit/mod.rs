//! Slice netlists and their time-domain solution.

mod band;
pub mod netlist;
pub mod slice;
pub mod solver;
pub mod tline;

use alloc::string::String;

pub use netlist::{Census, Element, ElementId, Netlist, NodeId, Probe, ProbeKind, SourceWave};
pub use slice::{
    build_slice_netlist, probe_input, probe_rx, probe_vdd, probe_vss, LaneLink, LaneNodes,
    LinkDraw, LinkParams, LinkRanges, OnDiePdnParams, PinRole, PinfieldConfig, Rails,
    SliceNetlist, SstBufferModel, TlineModel, DEFAULT_SIGNALS_PER_PAIR,
    PROBE_PLANE_VDD_CURRENT, PROBE_PLANE_VSS_CURRENT,
};
pub use solver::{
    dc_operating_point, dc_operating_point_with, transient, DcSolution, DriveSignal, SolveStats,
    TransientConfig, WaveformSet,
};
pub use tline::{tline_lc_from_zo, via_inductance, TlineDerivation, INCH, MIL, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CircuitError {
    #[error("invalid netlist: {0}")]
    InvalidNetlist(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("singular system: node {node} is floating or only capacitively coupled")]
    Singular { node: String },
    #[error("drive lane {lane} requested but only {available} drive waveforms were supplied")]
    MissingDrive { lane: usize, available: usize },
}
