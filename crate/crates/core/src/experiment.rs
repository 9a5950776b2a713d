//! Scenario runner: patterns, slice netlist, transient solution and metrics
//! for one architecture / pattern / rate cell.

use alloc::string::String;
use alloc::vec::Vec;

use crate::analysis::{self, AnalysisError, EyeSettings, RippleMetrics, SliceSummary};
use crate::circuit::slice::{probe_rx, probe_vdd, probe_vss, Rails, PROBE_PLANE_VDD_CURRENT};
use crate::circuit::{
    build_slice_netlist, transient, CircuitError, DriveSignal, LinkDraw, LinkParams, LinkRanges,
    OnDiePdnParams, PinfieldConfig, DEFAULT_SIGNALS_PER_PAIR, SliceNetlist, SolveStats, SstBufferModel, TlineModel,
    TransientConfig, WaveformSet, MIL,
};
use crate::codec::{traces_required, BookMode, CodeBook, CodecError, SchemeKind};
use crate::stimulus::{
    self, to_drive_waveforms, DriveWaveform, EdgeShape, LaneBitstreams, PatternMode, PatternSpec,
    StimulusError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Stimulus(#[from] StimulusError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl ExperimentError {
    /// True for errors caused by the inputs rather than by the solve.
    pub fn is_config(&self) -> bool {
        match self {
            ExperimentError::Config(_)
            | ExperimentError::Codec(_)
            | ExperimentError::Stimulus(_) => true,
            ExperimentError::Circuit(e) => {
                matches!(
                    e,
                    CircuitError::Config(_)
                        | CircuitError::Domain(_)
                        | CircuitError::InvalidNetlist(_)
                )
            }
            ExperimentError::Analysis(e) => {
                matches!(e, AnalysisError::BadAperture(_) | AnalysisError::Config(_))
            }
        }
    }
}

/// Everything about the simulated hardware.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceConfig {
    pub pdn: OnDiePdnParams,
    pub buffer: SstBufferModel,
    pub tline: TlineModel,
    pub link_ranges: LinkRanges,
    pub link_draw: LinkDraw,
    pub rails: Rails,
    /// Signal pins per power/ground via pair.
    pub signals_per_pg_pair: usize,
    pub pitch: f64,
    pub via_length: f64,
    pub via_diameter: f64,
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig {
            pdn: OnDiePdnParams::default(),
            buffer: SstBufferModel::default(),
            tline: TlineModel::default(),
            link_ranges: LinkRanges::default(),
            link_draw: LinkDraw::Random { seed: 1 },
            rails: Rails::default(),
            signals_per_pg_pair: DEFAULT_SIGNALS_PER_PAIR,
            pitch: 1e-3,
            via_length: 100.0 * MIL,
            via_diameter: 12.0 * MIL,
        }
    }
}

impl SliceConfig {
    pub fn pinfield(&self, signals: usize) -> Result<PinfieldConfig, CircuitError> {
        let mut p = PinfieldConfig::with_ratio(signals, self.signals_per_pg_pair)?;
        p.pitch = self.pitch;
        p.via_length = self.via_length;
        p.via_diameter = self.via_diameter;
        Ok(p)
    }

    pub fn build(&self, scheme: SchemeKind, lanes: usize) -> Result<SliceNetlist, CircuitError> {
        let links = LinkParams::draw(
            &self.link_ranges,
            lanes,
            scheme == SchemeKind::Differential,
            self.link_draw,
        );
        build_slice_netlist(
            scheme,
            &self.pinfield(lanes)?,
            &self.pdn,
            &self.buffer,
            &self.tline,
            &links,
            self.rails,
        )
    }
}

/// Timing and measurement settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    /// Data rate (bit/s).
    pub rate: f64,
    /// Unit intervals kept for analysis after settling.
    pub analyzed_ui: usize,
    /// Unit intervals discarded at the start, on top of twice the line delay.
    pub settle_ui: usize,
    /// Line round trips also discarded, so reflections off the via and the
    /// load capacitance die out before analysis.
    pub settle_round_trips: usize,
    /// 20-80% edge time as a fraction of the UI.
    pub rise_fraction: f64,
    /// Absolute 20-80% edge time (s); overrides `rise_fraction` when set.
    pub rise: Option<f64>,
    pub edge: EdgeShape,
    pub steps_per_ui: usize,
    /// Upper bound on the time step (s).
    pub max_dt: f64,
    pub aperture: f64,
    pub phase_search: usize,
    pub check_kcl: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rate: 16e9,
            analyzed_ui: 64,
            settle_ui: 8,
            settle_round_trips: 3,
            rise_fraction: 0.25,
            rise: None,
            edge: EdgeShape::RaisedCosine,
            steps_per_ui: 128,
            max_dt: 0.5e-12,
            aperture: analysis::DEFAULT_APERTURE,
            phase_search: 32,
            check_kcl: false,
        }
    }
}

impl RunConfig {
    pub fn ui(&self) -> f64 {
        1.0 / self.rate
    }

    pub fn rise_time(&self) -> f64 {
        self.rise.unwrap_or(self.rise_fraction * self.ui())
    }

    /// Solver step and recording stride: the step is `UI / steps_per_ui`
    /// capped at `max_dt`, and the record keeps about `steps_per_ui`
    /// samples per UI.
    pub fn time_step(&self) -> (f64, usize) {
        let target = self.ui() / self.steps_per_ui as f64;
        if target <= self.max_dt {
            (target, 1)
        } else {
            let stride = libm::ceil(target / self.max_dt) as usize;
            (target / stride as f64, stride)
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(ExperimentError::Config(alloc::format!(
                "data rate {} must be positive",
                self.rate
            )));
        }
        if self.analyzed_ui < analysis::MIN_FOLDED_UI {
            return Err(ExperimentError::Config(alloc::format!(
                "at least {} analyzed UI are needed, got {}",
                analysis::MIN_FOLDED_UI,
                self.analyzed_ui
            )));
        }
        if self.steps_per_ui < 8 || !(self.max_dt > 0.0) {
            return Err(ExperimentError::Config(
                "time step settings out of range".into(),
            ));
        }
        Ok(())
    }
}

/// How the wires of a ZS bus are split into independently coded groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupLayout {
    pub groups: usize,
    pub width: usize,
}

impl GroupLayout {
    pub fn wires(&self) -> usize {
        self.groups * self.width
    }

    pub fn label(&self) -> String {
        alloc::format!("{}x{}", self.groups, self.width)
    }
}

/// One simulated cell of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scheme: SchemeKind,
    pub mode: PatternMode,
    pub layout: GroupLayout,
    /// Data bits carried by the whole bus.
    pub data_bits: u32,
    pub seed: u64,
    /// Largest code book used to draw ZS traffic, in data bits.
    pub pattern_book_bits: u32,
}

/// Default cap on the pattern code book size (65536 entries).
pub const PATTERN_BOOK_BITS: u32 = 16;

impl Scenario {
    /// One group carrying `data_bits` with the fewest wires the scheme needs.
    pub fn standard(
        scheme: SchemeKind,
        mode: PatternMode,
        data_bits: u32,
        seed: u64,
    ) -> Result<Self, CodecError> {
        let width = traces_required(data_bits, scheme)? as usize;
        Ok(Scenario {
            scheme,
            mode,
            layout: GroupLayout { groups: 1, width },
            data_bits,
            seed,
            pattern_book_bits: PATTERN_BOOK_BITS,
        })
    }

    pub fn with_layout(mut self, layout: GroupLayout) -> Self {
        self.layout = layout;
        self
    }

    pub fn lanes(&self) -> usize {
        self.layout.wires()
    }

    /// Data bits each ZS group has to carry.
    pub fn bits_per_group(&self) -> u32 {
        (self.data_bits as usize).div_ceil(self.layout.groups) as u32
    }

    /// Code books used to draw typical ZS traffic, one per group. Books are
    /// always sampled: an enumerated book takes the lowest words in numeric
    /// order and pins the top wires. A group whose bits exceed
    /// `pattern_book_bits` draws from a sampled subset of that size.
    pub fn pattern_books(&self) -> Result<Vec<CodeBook>, ExperimentError> {
        self.check_capacity()?;
        let SchemeKind::ZeroSum(bound) = self.scheme else {
            return Ok(Vec::new());
        };
        let width = self.layout.width as u32;
        let bits = self.bits_per_group().min(self.pattern_book_bits);
        (0..self.layout.groups)
            .map(|g| {
                let seed = self.seed.wrapping_add(g as u64);
                Ok(CodeBook::build(bits, width, bound, seed, BookMode::Sampled)?)
            })
            .collect()
    }

    fn check_capacity(&self) -> Result<(), ExperimentError> {
        let SchemeKind::ZeroSum(bound) = self.scheme else {
            return Ok(());
        };
        let width = self.layout.width as u32;
        let capacity = crate::codec::effective_bits(width, bound)?;
        if capacity.usable < self.bits_per_group() {
            return Err(ExperimentError::Config(alloc::format!(
                "{} wires at ±{} carry {:.2} bits, fewer than the {} each group needs",
                width,
                bound.get(),
                capacity.bits,
                self.bits_per_group()
            )));
        }
        Ok(())
    }

    /// Checks the layout and group capacity without building anything.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.check_capacity()?;
        if self.layout.groups == 0 || self.layout.width == 0 {
            return Err(ExperimentError::Config(
                "group layout must be non-empty".into(),
            ));
        }
        if self.layout.groups > 1 && !matches!(self.scheme, SchemeKind::ZeroSum(_)) {
            return Err(ExperimentError::Config(
                "only ZS buses can be split into groups".into(),
            ));
        }
        Ok(())
    }

    /// Bit patterns for every lane, `words` UI long.
    pub fn patterns(&self, words: usize) -> Result<LaneBitstreams, ExperimentError> {
        self.validate()?;
        let books = self.pattern_books()?;
        let mut bits: Vec<Vec<bool>> = Vec::with_capacity(self.lanes());
        let mut roles = Vec::with_capacity(self.lanes());
        for g in 0..self.layout.groups {
            let spec = PatternSpec {
                scheme: self.scheme,
                mode: self.mode,
                lanes: self.layout.width,
                words,
                seed: self.seed.wrapping_add(g as u64),
                book: books.get(g),
            };
            let p = stimulus::patterns(&spec)?;
            for k in 0..p.lanes() {
                bits.push(p.lane(k).to_vec());
            }
            roles.extend_from_slice(p.roles());
        }
        Ok(LaneBitstreams::new(bits, roles)?)
    }
}

/// Metrics of one measured lane, or pair for DIFF.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneRow {
    pub lane: usize,
    /// Vertical opening (V); the full differential opening for DIFF.
    pub eye: f64,
    pub phase_offset: f64,
    pub single_rail: bool,
    pub ripple: RippleMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub rate: f64,
    pub ui: f64,
    pub settle_time: f64,
    pub rows: Vec<LaneRow>,
    pub summary: SliceSummary,
    /// Largest per-cell peak-to-peak rail ripple (V).
    pub max_ripple: f64,
    /// Mean per-cell peak-to-peak rail ripple (V).
    pub mean_ripple: f64,
    /// `(max - min) / mean` of the board VDD plane current sampled at the
    /// drive bit centers after settling.
    pub plane_current_variation: f64,
    pub plane_current_mean: f64,
    pub waveforms: WaveformSet,
    pub stats: SolveStats,
}

impl ScenarioOutcome {
    /// Per-row openings, halved for DIFF so they compare with one wire.
    pub fn comparable_eyes(&self) -> Vec<f64> {
        let f = if self.scenario.scheme == SchemeKind::Differential {
            0.5
        } else {
            1.0
        };
        self.rows.iter().map(|r| f * r.eye).collect()
    }
}

/// Simulates one scenario on `slice` with `run` settings.
pub fn run_scenario(
    scenario: &Scenario,
    slice: &SliceConfig,
    run: &RunConfig,
) -> Result<ScenarioOutcome, ExperimentError> {
    run.validate()?;
    scenario.validate()?;
    let lanes = scenario.lanes();
    let net = slice.build(scenario.scheme, lanes)?;
    let ui = run.ui();
    let settle = run.settle_ui as f64 * ui
        + 2.0 * run.settle_round_trips as f64 * net.max_line_delay;
    let t_stop = settle + run.analyzed_ui as f64 * ui;
    let words = libm::ceil(t_stop / ui) as usize + 2;

    let patterns = scenario.patterns(words)?;
    let drives: Vec<DriveWaveform> =
        to_drive_waveforms(&patterns, run.rate, run.rise_time(), run.edge)?;
    let refs: Vec<&dyn DriveSignal> = drives.iter().map(|d| d as &dyn DriveSignal).collect();

    let (dt, stride) = run.time_step();
    let mut tc = TransientConfig::new(dt, t_stop);
    tc.settle_time = settle;
    tc.record_stride = stride;
    tc.check_kcl = run.check_kcl;
    let waves = transient(&net.netlist, &refs, &tc)?;
    measure(scenario, &net, waves, run, settle, slice.rails.vdd)
}

fn trace<'a>(w: &'a WaveformSet, name: &str) -> Result<&'a [f64], ExperimentError> {
    w.get(name)
        .ok_or_else(|| ExperimentError::Config(alloc::format!("missing probe {name}")))
}

fn measure(
    scenario: &Scenario,
    net: &SliceNetlist,
    waves: WaveformSet,
    run: &RunConfig,
    settle: f64,
    nominal_vdd: f64,
) -> Result<ScenarioOutcome, ExperimentError> {
    let ui = run.ui();
    let dt = waves.dt;
    let mut settings = EyeSettings::new(ui, settle);
    settings.aperture = run.aperture;
    settings.phase_search = run.phase_search;

    let lanes = scenario.lanes();
    let mut ripples = Vec::with_capacity(lanes);
    for k in 0..lanes {
        let r = analysis::rail_ripple(
            trace(&waves, &probe_vdd(k))?,
            trace(&waves, &probe_vss(k))?,
            dt,
            nominal_vdd,
            settle,
        )?;
        ripples.push(r);
    }

    let mut rows = Vec::new();
    if scenario.scheme == SchemeKind::Differential {
        for pair in 0..lanes / 2 {
            let (t, c) = (2 * pair, 2 * pair + 1);
            // bit boundaries at the receiver: drive edges delayed by the link
            let offset = net.lanes[t].latency;
            let d = analysis::differential_eye(
                pair,
                trace(&waves, &probe_rx(t))?,
                trace(&waves, &probe_rx(c))?,
                dt,
                offset,
                &settings,
            )?;
            rows.push(LaneRow {
                lane: pair,
                eye: d.full.vertical_opening,
                phase_offset: d.full.phase_offset,
                single_rail: d.full.single_rail,
                ripple: ripples[t].clone(),
            });
        }
    } else {
        for (k, ripple) in ripples.iter().enumerate() {
            let m = analysis::measure_eye(
                k,
                trace(&waves, &probe_rx(k))?,
                dt,
                net.lanes[k].latency,
                &settings,
            )?;
            rows.push(LaneRow {
                lane: k,
                eye: m.vertical_opening,
                phase_offset: m.phase_offset,
                single_rail: m.single_rail,
                ripple: ripple.clone(),
            });
        }
    }
    let eyes: Vec<f64> = rows.iter().map(|r| r.eye).collect();
    let summary = analysis::summarize_values(&eyes)?;
    let pp: Vec<f64> = ripples.iter().map(|r| r.peak_to_peak).collect();
    let ripple_summary = analysis::summarize_values(&pp)?;

    let (variation, mean) =
        bit_center_variation(trace(&waves, PROBE_PLANE_VDD_CURRENT)?, dt, ui, settle);
    let stats = waves.stats;
    Ok(ScenarioOutcome {
        scenario: scenario.clone(),
        rate: run.rate,
        ui,
        settle_time: settle,
        rows,
        summary,
        max_ripple: ripple_summary.max,
        mean_ripple: ripple_summary.mean,
        plane_current_variation: variation,
        plane_current_mean: mean,
        waveforms: waves,
        stats,
    })
}

/// Spread of `samples` taken at `(k + 1/2) * ui` after `settle`, relative
/// to their mean. Returns `(spread / |mean|, mean)`.
pub fn bit_center_variation(samples: &[f64], dt: f64, ui: f64, settle: f64) -> (f64, f64) {
    let mut values = Vec::new();
    let mut k = libm::ceil(settle / ui) as usize;
    loop {
        let t = (k as f64 + 0.5) * ui;
        let x = t / dt;
        let i = libm::floor(x) as usize;
        if i + 1 >= samples.len() {
            break;
        }
        let f = x - i as f64;
        values.push(samples[i] + (samples[i + 1] - samples[i]) * f);
        k += 1;
    }
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = if mean.abs() > 0.0 {
        (hi - lo) / mean.abs()
    } else {
        hi - lo
    };
    (spread, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::DisparityBound;

    #[test]
    fn time_step_rules() {
        let r = RunConfig::default();
        let (dt, stride) = r.time_step();
        assert_eq!(stride, 1);
        assert!((dt - 62.5e-12 / 128.0).abs() < 1e-24);
        let slow = RunConfig { rate: 1e9, ..r };
        let (dt, stride) = slow.time_step();
        assert!(dt <= 0.5e-12);
        assert!((dt * stride as f64 - 1e-9 / 128.0).abs() < 1e-21);
    }

    #[test]
    fn standard_widths() {
        let zs = Scenario::standard(
            SchemeKind::ZeroSum(DisparityBound::BALANCED),
            PatternMode::Typical,
            32,
            1,
        )
        .unwrap();
        assert_eq!(zs.lanes(), 36);
        assert_eq!(zs.pattern_books().unwrap()[0].data_bits(), 16);
        let diff = Scenario::standard(SchemeKind::Differential, PatternMode::Worst, 32, 1).unwrap();
        assert_eq!(diff.lanes(), 64);
        let grouped = zs.clone().with_layout(GroupLayout {
            groups: 4,
            width: 12,
        });
        assert_eq!(grouped.bits_per_group(), 8);
        let books = grouped.pattern_books().unwrap();
        assert_eq!(books.len(), 4);
        assert!(books.iter().all(|b| b.width() == 12 && b.data_bits() == 8));
        let p = grouped.patterns(20).unwrap();
        assert_eq!(p.lanes(), 48);
        assert!((0..20).all(|w| p.column_disparity(w) == 0));
        let too_narrow = zs.with_layout(GroupLayout {
            groups: 4,
            width: 10,
        });
        assert!(too_narrow.pattern_books().is_err());
    }

    #[test]
    fn bit_center_sampling() {
        let dt = 1.0;
        let samples: Vec<f64> = (0..100)
            .map(|i| if (i / 10) % 2 == 0 { 2.0 } else { 4.0 })
            .collect();
        let (v, m) = bit_center_variation(&samples, dt, 10.0, 0.0);
        assert!((m - 3.0).abs() < 0.2);
        assert!((v - 2.0 / m).abs() < 1e-12);
        let flat = alloc::vec![1.5; 100];
        assert_eq!(bit_center_variation(&flat, dt, 10.0, 20.0), (0.0, 1.5));
    }
}
