//! Eye and rail-noise metrics over sampled waveforms.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("record too short: {available_ui:.2} UI after settling, need at least {required_ui}")]
    TooShort {
        available_ui: f64,
        required_ui: usize,
    },
    #[error("waveforms are on different grids ({0} vs {1} samples)")]
    GridMismatch(usize, usize),
    #[error("aperture {0} must lie in (0, 0.5]")]
    BadAperture(f64),
    #[error("no samples fall inside the eye aperture")]
    EmptyWindow,
    #[error("nothing to summarize")]
    Empty,
    #[error("{0}")]
    Config(String),
}

/// Minimum number of unit intervals a record must keep after settling.
pub const MIN_FOLDED_UI: usize = 16;

/// Default aperture, as a fraction of the UI centered on the bit center.
pub const DEFAULT_APERTURE: f64 = 0.1;

/// Samples folded modulo one unit interval. `phase` is in `[0, 1)` with the
/// bit center at 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedEye {
    pub ui: f64,
    pub points: Vec<(f64, f64)>,
}

fn check_grid(dt: f64, ui: f64) -> Result<(), AnalysisError> {
    if !(dt > 0.0 && ui > 0.0 && dt.is_finite() && ui.is_finite()) {
        return Err(AnalysisError::Config(alloc::format!(
            "dt {dt:e} and ui {ui:e} must be positive"
        )));
    }
    Ok(())
}

fn first_kept(samples: usize, dt: f64, ui: f64, settle_time: f64) -> Result<usize, AnalysisError> {
    check_grid(dt, ui)?;
    let start = libm::ceil(settle_time.max(0.0) / dt - 1e-9) as usize;
    let kept = samples.saturating_sub(start) as f64 * dt;
    if kept < MIN_FOLDED_UI as f64 * ui * (1.0 - 1e-9) {
        return Err(AnalysisError::TooShort {
            available_ui: kept / ui,
            required_ui: MIN_FOLDED_UI,
        });
    }
    Ok(start)
}

/// Phase of time `t` in `[0, 1)`, where the bit boundaries sit at
/// `phase_offset + k * ui`.
fn phase_of(t: f64, ui: f64, phase_offset: f64) -> f64 {
    let x = (t - phase_offset) / ui;
    let p = x - libm::floor(x);
    if p >= 1.0 {
        0.0
    } else {
        p
    }
}

/// Folds the samples at or after `settle_time` modulo one UI. Sample `i` is
/// taken at `i * dt`; `phase_offset` is the time of a bit boundary.
pub fn fold_eye(
    samples: &[f64],
    dt: f64,
    ui: f64,
    phase_offset: f64,
    settle_time: f64,
) -> Result<FoldedEye, AnalysisError> {
    let start = first_kept(samples.len(), dt, ui, settle_time)?;
    let points = samples[start..]
        .iter()
        .enumerate()
        .map(|(i, &v)| (phase_of((start + i) as f64 * dt, ui, phase_offset), v))
        .collect();
    Ok(FoldedEye { ui, points })
}

/// Vertical opening inside the aperture window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Opening {
    pub volts: f64,
    pub samples: usize,
    /// The window held a single voltage level, so no eye could be formed.
    pub single_rail: bool,
}

fn in_window(phase: f64, aperture: f64) -> bool {
    (phase - 0.5).abs() <= 0.5 * aperture
}

fn opening_of(values: impl Iterator<Item = f64> + Clone) -> Result<Opening, AnalysisError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut n = 0usize;
    for v in values.clone() {
        lo = lo.min(v);
        hi = hi.max(v);
        n += 1;
    }
    if n == 0 {
        return Err(AnalysisError::EmptyWindow);
    }
    if hi <= lo {
        return Ok(Opening {
            volts: 0.0,
            samples: n,
            single_rail: true,
        });
    }
    let mid = 0.5 * (lo + hi);
    let mut upper_min = f64::INFINITY;
    let mut lower_max = f64::NEG_INFINITY;
    for v in values {
        if v >= mid {
            upper_min = upper_min.min(v);
        } else {
            lower_max = lower_max.max(v);
        }
    }
    Ok(Opening {
        volts: (upper_min - lower_max).max(0.0),
        samples: n,
        single_rail: false,
    })
}

pub fn vertical_eye_opening(eye: &FoldedEye, aperture: f64) -> Result<Opening, AnalysisError> {
    if !(aperture > 0.0 && aperture <= 0.5) {
        return Err(AnalysisError::BadAperture(aperture));
    }
    opening_of(
        eye.points
            .iter()
            .filter(|(p, _)| in_window(*p, aperture))
            .map(|&(_, v)| v),
    )
}

/// Sampling settings shared by every lane of a measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeSettings {
    pub ui: f64,
    pub aperture: f64,
    pub settle_time: f64,
    /// Number of candidate sampling phases tried around the nominal bit
    /// boundary; 0 or 1 samples at the nominal phase only.
    pub phase_search: usize,
}

impl EyeSettings {
    pub fn new(ui: f64, settle_time: f64) -> Self {
        EyeSettings {
            ui,
            aperture: DEFAULT_APERTURE,
            settle_time,
            phase_search: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EyeMetrics {
    pub lane: usize,
    pub vertical_opening: f64,
    pub sample_count: usize,
    pub ui: f64,
    pub aperture: f64,
    /// Bit-boundary time actually used for folding.
    pub phase_offset: f64,
    pub single_rail: bool,
}

/// Measures one lane. The bit boundary is searched over `phase_search`
/// evenly spaced offsets in one UI starting at `nominal_offset`; the widest
/// opening wins and ties keep the earliest candidate.
pub fn measure_eye(
    lane: usize,
    samples: &[f64],
    dt: f64,
    nominal_offset: f64,
    settings: &EyeSettings,
) -> Result<EyeMetrics, AnalysisError> {
    let ui = settings.ui;
    let start = first_kept(samples.len(), dt, ui, settings.settle_time)?;
    if !(settings.aperture > 0.0 && settings.aperture <= 0.5) {
        return Err(AnalysisError::BadAperture(settings.aperture));
    }
    let tail = &samples[start..];
    let candidates = settings.phase_search.max(1);
    let mut best: Option<(Opening, f64)> = None;
    for c in 0..candidates {
        let offset = nominal_offset + ui * c as f64 / candidates as f64;
        let window = tail.iter().enumerate().filter_map(|(i, &v)| {
            in_window(
                phase_of((start + i) as f64 * dt, ui, offset),
                settings.aperture,
            )
            .then_some(v)
        });
        let o = opening_of(window)?;
        if best.map_or(true, |(b, _)| o.volts > b.volts) {
            best = Some((o, offset));
        }
    }
    let (o, offset) = best.ok_or(AnalysisError::EmptyWindow)?;
    Ok(EyeMetrics {
        lane,
        vertical_opening: o.volts,
        sample_count: o.samples,
        ui,
        aperture: settings.aperture,
        phase_offset: offset,
        single_rail: o.single_rail,
    })
}

/// Eye of `true - comp`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialEye {
    pub full: EyeMetrics,
}

impl DifferentialEye {
    /// Opening divided by two, comparable to a single-ended swing.
    pub fn halved(&self) -> f64 {
        0.5 * self.full.vertical_opening
    }
}

pub fn difference(true_wf: &[f64], comp_wf: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if true_wf.len() != comp_wf.len() {
        return Err(AnalysisError::GridMismatch(true_wf.len(), comp_wf.len()));
    }
    Ok(true_wf.iter().zip(comp_wf).map(|(a, b)| a - b).collect())
}

pub fn differential_eye(
    pair: usize,
    true_wf: &[f64],
    comp_wf: &[f64],
    dt: f64,
    nominal_offset: f64,
    settings: &EyeSettings,
) -> Result<DifferentialEye, AnalysisError> {
    let d = difference(true_wf, comp_wf)?;
    Ok(DifferentialEye {
        full: measure_eye(pair, &d, dt, nominal_offset, settings)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RippleMetrics {
    pub peak_to_peak: f64,
    pub max_excursion_from_nominal: f64,
    pub high_node: String,
    pub low_node: String,
}

/// Noise of `vdd - vss - nominal` over the samples after `settle_time`.
pub fn rail_ripple(
    vdd: &[f64],
    vss: &[f64],
    dt: f64,
    nominal: f64,
    settle_time: f64,
) -> Result<RippleMetrics, AnalysisError> {
    if vdd.len() != vss.len() {
        return Err(AnalysisError::GridMismatch(vdd.len(), vss.len()));
    }
    if !(dt > 0.0) {
        return Err(AnalysisError::Config(alloc::format!(
            "dt {dt:e} must be positive"
        )));
    }
    let start = (libm::ceil(settle_time.max(0.0) / dt - 1e-9) as usize).min(vdd.len());
    if start == vdd.len() {
        return Err(AnalysisError::EmptyWindow);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for (a, b) in vdd[start..].iter().zip(&vss[start..]) {
        let x = a - b - nominal;
        lo = lo.min(x);
        hi = hi.max(x);
        worst = worst.max(x.abs());
    }
    Ok(RippleMetrics {
        peak_to_peak: hi - lo,
        max_excursion_from_nominal: worst,
        high_node: String::from("vdd"),
        low_node: String::from("vss"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

pub fn summarize_values(values: &[f64]) -> Result<SliceSummary, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // sorted summation keeps the mean independent of lane order
    let mean = (sorted.iter().sum::<f64>() / values.len() as f64).clamp(min, max);
    Ok(SliceSummary { min, mean, max })
}

pub fn summarize(eyes: &[EyeMetrics]) -> Result<SliceSummary, AnalysisError> {
    let v: Vec<f64> = eyes.iter().map(|e| e.vertical_opening).collect();
    summarize_values(&v)
}
