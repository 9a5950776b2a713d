//! One slice of I/O cells: behavioral SST drivers on a shared on-die power
//! delivery ladder, power/ground vias from ideal board planes, and a
//! terminated lossy line per lane.
//!
//! Per cell and per rail the ladder is `bump -(R+L)- mid -(R+L)- cell rail`,
//! the cell's VDD and VSS rails are bridged by one capacitor, and adjacent
//! cell rails are chained through one resistor. Each power or ground via runs
//! from its plane to a bump node, and every cell's ladder starts at the bump
//! of the power and ground via nearest to it in the pin map.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::netlist::{Element, ElementId, Netlist, NodeId, SourceWave};
use super::tline::{via_inductance, INCH, MIL, SPEED_OF_LIGHT};
use super::CircuitError;
use crate::codec::SchemeKind;

/// On-die rail parameters of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnDiePdnParams {
    /// Inductance of each ladder segment (H).
    pub l_seg: f64,
    /// VDD-to-VSS capacitance at the cell rail (F).
    pub c_cell: f64,
    /// Resistance of each ladder segment and of each cell-to-cell strap (Ω).
    pub r_seg: f64,
}

impl OnDiePdnParams {
    pub const SEGMENTS_PER_RAIL: usize = 2;

    fn validate(&self) -> Result<(), CircuitError> {
        if !(self.l_seg > 0.0 && self.c_cell > 0.0 && self.r_seg > 0.0) {
            return Err(CircuitError::Config(alloc::format!(
                "on-die PDN values must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for OnDiePdnParams {
    fn default() -> Self {
        OnDiePdnParams {
            l_seg: 62e-12,
            c_cell: 0.012e-12,
            r_seg: 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SstBufferModel {
    /// Series output resistance (Ω).
    pub r_out: f64,
    /// Input voltage that maps to a fully high drive level.
    pub input_swing: f64,
    /// Pull-up/pull-down overlap conduction during an edge, 0 (none) to 1
    /// (both halves fully resistive).
    pub overlap: f64,
}

impl Default for SstBufferModel {
    fn default() -> Self {
        SstBufferModel {
            r_out: 50.0,
            input_swing: 1.0,
            overlap: 0.5,
        }
    }
}

/// Board trace model shared by all lanes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlineModel {
    pub z0: f64,
    pub eps_eff: f64,
    /// Series loss per inch, lumped half at each end of the line.
    pub loss_ohms_per_inch: f64,
}

impl TlineModel {
    pub fn delay(&self, length: f64) -> f64 {
        length * libm::sqrt(self.eps_eff) / SPEED_OF_LIGHT
    }

    pub fn lossless(z0: f64, eps_eff: f64) -> Self {
        TlineModel {
            z0,
            eps_eff,
            loss_ohms_per_inch: 0.0,
        }
    }
}

impl Default for TlineModel {
    fn default() -> Self {
        TlineModel {
            z0: 50.0,
            eps_eff: 4.0,
            loss_ohms_per_inch: 2.0,
        }
    }
}

/// Ranges the per-lane board parameters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRanges {
    /// Trace length range (m).
    pub length: (f64, f64),
    /// Termination resistance range (Ω).
    pub r_term: (f64, f64),
    /// Load capacitance range (F).
    pub c_load: (f64, f64),
    /// Largest true-to-complement length mismatch in a pair (m).
    pub max_pair_skew: f64,
}

impl Default for LinkRanges {
    fn default() -> Self {
        LinkRanges {
            length: (3.98 * INCH, 4.02 * INCH),
            r_term: (49.0, 51.0),
            c_load: (0.3e-12, 0.5e-12),
            max_pair_skew: 20.0 * MIL,
        }
    }
}

impl LinkRanges {
    fn mid(&self) -> LaneLink {
        LaneLink {
            length: 0.5 * (self.length.0 + self.length.1),
            r_term: 0.5 * (self.r_term.0 + self.r_term.1),
            c_load: 0.5 * (self.c_load.0 + self.c_load.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkDraw {
    /// Uniform draws from the ranges, seeded.
    Random { seed: u64 },
    /// Every lane at the midpoint of every range.
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneLink {
    pub length: f64,
    pub r_term: f64,
    pub c_load: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub lanes: Vec<LaneLink>,
}

impl LinkParams {
    /// Draws one link per lane. For differential buses lanes `2j` and
    /// `2j + 1` form a pair whose lengths differ by at most the pair skew.
    pub fn draw(ranges: &LinkRanges, lanes: usize, paired: bool, draw: LinkDraw) -> Self {
        let seed = match draw {
            LinkDraw::Nominal => {
                return LinkParams {
                    lanes: alloc::vec![ranges.mid(); lanes],
                }
            }
            LinkDraw::Random { seed } => seed,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |(lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let mut out = Vec::with_capacity(lanes);
        for lane in 0..lanes {
            let length = if paired && lane % 2 == 1 {
                let partner: &LaneLink = &out[lane - 1];
                let lo = ranges.length.0.max(partner.length - ranges.max_pair_skew);
                let hi = ranges.length.1.min(partner.length + ranges.max_pair_skew);
                uniform((lo, hi))
            } else {
                uniform(ranges.length)
            };
            let r_term = uniform(ranges.r_term);
            let c_load = uniform(ranges.c_load);
            out.push(LaneLink {
                length,
                r_term,
                c_load,
            });
        }
        LinkParams { lanes: out }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PinRole {
    Signal,
    Power,
    Ground,
}

/// Signal pins per power/ground pair in the default, deliberately starved,
/// pinfield: one pair serves a whole 32-lane single-ended slice.
pub const DEFAULT_SIGNALS_PER_PAIR: usize = 32;

/// Via pinfield of a slice.
#[derive(Debug, Clone, PartialEq)]
pub struct PinfieldConfig {
    /// Pin pitch (m). Carried for layout export; mutual coupling is not modeled.
    pub pitch: f64,
    pub via_length: f64,
    pub via_diameter: f64,
    /// Pin roles in row-major order. Signal pins map to cells in order.
    pub assignment: Vec<PinRole>,
}

impl PinfieldConfig {
    /// Pinfield with `signal` signal pins and one power and one ground pin
    /// per `signals_per_pair` signals (rounded to nearest, at least one),
    /// spread evenly.
    pub fn with_ratio(signal: usize, signals_per_pair: usize) -> Result<Self, CircuitError> {
        if signal == 0 || signals_per_pair == 0 {
            return Err(CircuitError::Config(
                "pinfield needs signal pins and a positive ratio".into(),
            ));
        }
        let pairs = ((2 * signal + signals_per_pair) / (2 * signals_per_pair)).max(1);
        let mut at = alloc::vec![0usize; signal];
        for j in 0..pairs {
            let s = ((2 * j + 1) * signal / (2 * pairs)).min(signal - 1);
            at[s] += 1;
        }
        let mut assignment = Vec::with_capacity(signal + 2 * pairs);
        for count in at {
            assignment.push(PinRole::Signal);
            for _ in 0..count {
                assignment.push(PinRole::Power);
                assignment.push(PinRole::Ground);
            }
        }
        Ok(PinfieldConfig {
            pitch: 1e-3,
            via_length: 100.0 * MIL,
            via_diameter: 12.0 * MIL,
            assignment,
        })
    }

    /// Pinfield at [`DEFAULT_SIGNALS_PER_PAIR`].
    pub fn for_signals(signal: usize) -> Result<Self, CircuitError> {
        Self::with_ratio(signal, DEFAULT_SIGNALS_PER_PAIR)
    }

    pub fn count(&self, role: PinRole) -> usize {
        self.assignment.iter().filter(|&&r| r == role).count()
    }

    pub fn signal_pins(&self) -> usize {
        self.count(PinRole::Signal)
    }

    pub fn power_pins(&self) -> usize {
        self.count(PinRole::Power)
    }

    pub fn ground_pins(&self) -> usize {
        self.count(PinRole::Ground)
    }

    /// For each signal pin, the (power, ground) pin nearest to it in the pin
    /// map, counted within each role; the earlier pin wins ties.
    pub fn serving_pins(&self) -> Vec<(usize, usize)> {
        let positions = |want: PinRole| -> Vec<usize> {
            self.assignment
                .iter()
                .enumerate()
                .filter(|(_, r)| **r == want)
                .map(|(i, _)| i)
                .collect()
        };
        let power = positions(PinRole::Power);
        let ground = positions(PinRole::Ground);
        let nearest = |pins: &[usize], at: usize| {
            pins.iter()
                .enumerate()
                .min_by_key(|(_, &p)| (p.abs_diff(at), p))
                .map_or(0, |(i, _)| i)
        };
        positions(PinRole::Signal)
            .into_iter()
            .map(|at| (nearest(&power, at), nearest(&ground, at)))
            .collect()
    }

    fn validate(&self) -> Result<(), CircuitError> {
        if self.signal_pins() == 0 || self.power_pins() == 0 || self.ground_pins() == 0 {
            return Err(CircuitError::Config(alloc::format!(
                "pinfield needs signal, power and ground pins (got {}/{}/{})",
                self.signal_pins(),
                self.power_pins(),
                self.ground_pins()
            )));
        }
        via_inductance(self.via_length, self.via_diameter).map(|_| ())
    }
}

/// Node handles of one lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneNodes {
    pub input: NodeId,
    pub vdd: NodeId,
    pub vss: NodeId,
    pub pad: NodeId,
    pub rx: NodeId,
    /// One-way delay of the lane's line (s).
    pub delay: f64,
    /// Line delay plus the first-order lags of the signal via and of the
    /// receiver load: where a clean edge crosses mid-swing at the receiver.
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceNetlist {
    pub netlist: Netlist,
    pub scheme: SchemeKind,
    pub lanes: Vec<LaneNodes>,
    pub links: LinkParams,
    pub power_vias: Vec<ElementId>,
    pub ground_vias: Vec<ElementId>,
    /// Largest line delay in the slice (s).
    pub max_line_delay: f64,
}

/// Probe names of lane `k`.
pub fn probe_input(k: usize) -> String {
    alloc::format!("i{k}")
}
pub fn probe_rx(k: usize) -> String {
    alloc::format!("rx{k}")
}
pub fn probe_vdd(k: usize) -> String {
    alloc::format!("c{k}")
}
pub fn probe_vss(k: usize) -> String {
    alloc::format!("d{k}")
}
pub const PROBE_PLANE_VDD_CURRENT: &str = "i_vdd_plane";
pub const PROBE_PLANE_VSS_CURRENT: &str = "i_vss_plane";

/// Board-side supply and termination voltages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rails {
    pub vdd: f64,
    pub vterm: f64,
}

impl Default for Rails {
    fn default() -> Self {
        Rails {
            vdd: 1.0,
            vterm: 0.5,
        }
    }
}

/// Builds the slice for `scheme` with one lane per signal pin. Lane `k`'s
/// input node is driven by drive lane `k`.
pub fn build_slice_netlist(
    scheme: SchemeKind,
    pinfield: &PinfieldConfig,
    pdn: &OnDiePdnParams,
    buffer: &SstBufferModel,
    tline: &TlineModel,
    links: &LinkParams,
    rails: Rails,
) -> Result<SliceNetlist, CircuitError> {
    pdn.validate()?;
    pinfield.validate()?;
    let lanes = pinfield.signal_pins();
    if links.lanes.len() != lanes {
        return Err(CircuitError::Config(alloc::format!(
            "{} link draws for {} signal pins",
            links.lanes.len(),
            lanes
        )));
    }
    if matches!(scheme, SchemeKind::Differential | SchemeKind::ZeroSum(_)) && lanes % 2 != 0 {
        return Err(CircuitError::Config(alloc::format!(
            "{} needs an even lane count, got {lanes}",
            scheme.label()
        )));
    }
    if !(tline.z0 > 0.0 && tline.eps_eff >= 1.0 && tline.loss_ohms_per_inch >= 0.0) {
        return Err(CircuitError::Config(alloc::format!(
            "bad line model {tline:?}"
        )));
    }
    if !(buffer.r_out > 0.0 && buffer.input_swing > 0.0 && (0.0..=1.0).contains(&buffer.overlap)) {
        return Err(CircuitError::Config(alloc::format!(
            "bad buffer model {buffer:?}"
        )));
    }
    let l_via = via_inductance(pinfield.via_length, pinfield.via_diameter)?;

    let mut n = Netlist::new();
    let vdd_plane = n.add_node("vdd_plane");
    n.source(vdd_plane, SourceWave::Dc(rails.vdd));
    let term = n.add_node("vterm");
    n.source(term, SourceWave::Dc(rails.vterm));

    // Via bumps are created at the first cell they serve so the node order
    // stays local and the system matrix stays narrow.
    let mut power_vias = Vec::new();
    let mut ground_vias = Vec::new();
    let mut power_bumps: Vec<Option<NodeId>> = alloc::vec![None; pinfield.power_pins()];
    let mut ground_bumps: Vec<Option<NodeId>> = alloc::vec![None; pinfield.ground_pins()];
    let serving = pinfield.serving_pins();

    let mut cells: Vec<LaneNodes> = Vec::with_capacity(lanes);
    let mut max_line_delay: f64 = 0.0;
    for (k, link) in links.lanes.iter().enumerate() {
        let input = n.add_node(alloc::format!("i{k}"));
        n.source(
            input,
            SourceWave::Drive {
                lane: k,
                low: 0.0,
                high: buffer.input_swing,
            },
        );
        let vdd_bump = *power_bumps[serving[k].0].get_or_insert_with(|| {
            let bump = n.add_node(alloc::format!("vdd_bump{}", serving[k].0));
            power_vias.push(n.inductor(vdd_plane, bump, l_via, 0.0));
            bump
        });
        let vdd_mid = n.add_node(alloc::format!("vdd_mid{k}"));
        let vdd = n.add_node(alloc::format!("c{k}"));
        let vss_bump = *ground_bumps[serving[k].1].get_or_insert_with(|| {
            let bump = n.add_node(alloc::format!("vss_bump{}", serving[k].1));
            ground_vias.push(n.inductor(NodeId::GROUND, bump, l_via, 0.0));
            bump
        });
        let vss_mid = n.add_node(alloc::format!("vss_mid{k}"));
        let vss = n.add_node(alloc::format!("d{k}"));
        let pad = n.add_node(alloc::format!("pad{k}"));
        let near = n.add_node(alloc::format!("near{k}"));
        let half_loss = 0.5 * tline.loss_ohms_per_inch * link.length / INCH;
        let far = if half_loss > 0.0 {
            Some(n.add_node(alloc::format!("far{k}")))
        } else {
            None
        };
        let rx = n.add_node(alloc::format!("rx{k}"));

        n.inductor(vdd_bump, vdd_mid, pdn.l_seg, pdn.r_seg);
        n.inductor(vdd_mid, vdd, pdn.l_seg, pdn.r_seg);
        n.inductor(vss_bump, vss_mid, pdn.l_seg, pdn.r_seg);
        n.inductor(vss_mid, vss, pdn.l_seg, pdn.r_seg);
        n.capacitor(vdd, vss, pdn.c_cell);
        if let Some(prev) = cells.last() {
            n.resistor(prev.vdd, vdd, pdn.r_seg);
            n.resistor(prev.vss, vss, pdn.r_seg);
        }
        n.add(Element::Driver {
            input,
            vdd,
            vss,
            out: pad,
            r_out: buffer.r_out,
            input_swing: buffer.input_swing,
            overlap: buffer.overlap,
        });
        // signal via, with the near half of the trace loss
        n.inductor(pad, near, l_via, half_loss);
        let delay = tline.delay(link.length);
        max_line_delay = max_line_delay.max(delay);
        let r_rx = link.r_term * tline.z0 / (link.r_term + tline.z0);
        let latency = delay + l_via / (buffer.r_out + tline.z0 + half_loss) + link.c_load * (r_rx + half_loss);
        let line_end = far.unwrap_or(rx);
        n.add(Element::TransmissionLine {
            near,
            far: line_end,
            z0: tline.z0,
            delay,
        });
        if let Some(far) = far {
            n.resistor(far, rx, half_loss);
        }
        n.resistor(rx, term, link.r_term);
        n.capacitor(rx, NodeId::GROUND, link.c_load);

        n.probe_voltage(alloc::format!("i{k}"), input);
        n.probe_voltage(alloc::format!("rx{k}"), rx);
        n.probe_voltage(alloc::format!("c{k}"), vdd);
        n.probe_voltage(alloc::format!("d{k}"), vss);
        cells.push(LaneNodes {
            input,
            vdd,
            vss,
            pad,
            rx,
            delay,
            latency,
        });
    }

    n.probe_current(PROBE_PLANE_VDD_CURRENT, power_vias.clone());
    n.probe_current(PROBE_PLANE_VSS_CURRENT, ground_vias.clone());
    n.validate()?;

    Ok(SliceNetlist {
        netlist: n,
        scheme,
        lanes: cells,
        links: links.clone(),
        power_vias,
        ground_vias,
        max_line_delay,
    })
}
