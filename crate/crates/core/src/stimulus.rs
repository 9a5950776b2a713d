//! Per-lane bit patterns and the drive waveforms applied at the buffer inputs.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::DriveSignal;
use crate::codec::{CodeBook, SchemeKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StimulusError {
    #[error("PRBS seed must be a nonzero 7-bit state, got {0}")]
    BadPrbsSeed(u8),
    #[error("{0}")]
    Config(alloc::string::String),
    #[error(
        "rise/fall time {rise:e} s must be positive and shorter than the unit interval {ui:e} s"
    )]
    EdgeTooSlow { rise: f64, ui: f64 },
}

/// PRBS7 generator, `x^7 + x^6 + 1`.
#[derive(Debug, Clone)]
pub struct Prbs7 {
    state: u8,
}

impl Prbs7 {
    pub const PERIOD: usize = 127;

    pub fn new(seed: u8) -> Result<Self, StimulusError> {
        if seed == 0 || seed > 0x7f {
            return Err(StimulusError::BadPrbsSeed(seed));
        }
        Ok(Prbs7 { state: seed })
    }
}

impl Iterator for Prbs7 {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        let bit = ((self.state >> 6) ^ (self.state >> 5)) & 1;
        self.state = ((self.state << 1) | bit) & 0x7f;
        Some(bit == 1)
    }
}

pub fn prbs7_stream(seed: u8, length: usize) -> Result<Vec<bool>, StimulusError> {
    Ok(Prbs7::new(seed)?.take(length).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternMode {
    /// Lockstep toggling that maximizes simultaneous switching.
    Worst,
    /// Staggered PRBS7 (SE/DIFF) or random code words (ZS).
    Typical,
}

impl PatternMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatternMode::Worst => "worst",
            PatternMode::Typical => "typical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LaneRole {
    Single,
    True,
    Complement,
}

#[derive(Debug, Clone, Copy)]
pub struct PatternSpec<'a> {
    pub scheme: SchemeKind,
    pub mode: PatternMode,
    pub lanes: usize,
    /// Pattern length in unit intervals.
    pub words: usize,
    pub seed: u64,
    pub book: Option<&'a CodeBook>,
}

impl PatternSpec<'_> {
    fn validate(&self) -> Result<(), StimulusError> {
        if self.lanes == 0 || self.words == 0 {
            return Err(StimulusError::Config(
                "pattern needs at least one lane and one word".into(),
            ));
        }
        match self.scheme {
            SchemeKind::Differential if self.lanes % 2 != 0 => Err(StimulusError::Config(
                alloc::format!("DIFF needs an even lane count, got {}", self.lanes),
            )),
            SchemeKind::ZeroSum(_) if self.lanes % 2 != 0 => Err(StimulusError::Config(
                alloc::format!("ZS needs an even lane count, got {}", self.lanes),
            )),
            SchemeKind::ZeroSum(_) => match self.book {
                Some(book) if book.width() as usize != self.lanes => {
                    Err(StimulusError::Config(alloc::format!(
                        "code book width {} does not match {} lanes",
                        book.width(),
                        self.lanes
                    )))
                }
                _ => Ok(()),
            },
            _ => Ok(()),
        }
    }

    fn roles(&self) -> Vec<LaneRole> {
        (0..self.lanes)
            .map(|k| match self.scheme {
                SchemeKind::Differential if k % 2 == 0 => LaneRole::True,
                SchemeKind::Differential => LaneRole::Complement,
                _ => LaneRole::Single,
            })
            .collect()
    }
}

/// Lanes x words bit matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaneBitstreams {
    bits: Vec<Vec<bool>>,
    roles: Vec<LaneRole>,
}

impl LaneBitstreams {
    pub fn new(bits: Vec<Vec<bool>>, roles: Vec<LaneRole>) -> Result<Self, StimulusError> {
        let words = bits.first().map_or(0, Vec::len);
        if bits.is_empty()
            || words == 0
            || bits.iter().any(|l| l.len() != words)
            || roles.len() != bits.len()
        {
            return Err(StimulusError::Config(
                "bit matrix must be rectangular and non-empty".into(),
            ));
        }
        Ok(LaneBitstreams { bits, roles })
    }

    pub fn lanes(&self) -> usize {
        self.bits.len()
    }

    pub fn words(&self) -> usize {
        self.bits[0].len()
    }

    pub fn lane(&self, k: usize) -> &[bool] {
        &self.bits[k]
    }

    pub fn roles(&self) -> &[LaneRole] {
        &self.roles
    }

    /// Bits of every lane at word index `w`.
    pub fn column(&self, w: usize) -> Vec<bool> {
        self.bits.iter().map(|l| l[w]).collect()
    }

    /// `#ones - #zeros` across the bus at word index `w`.
    pub fn column_disparity(&self, w: usize) -> i32 {
        let ones = self.bits.iter().filter(|l| l[w]).count() as i32;
        2 * ones - self.lanes() as i32
    }
}

fn toggle(phase: bool, words: usize) -> Vec<bool> {
    (0..words).map(|w| (w % 2 == 0) == phase).collect()
}

fn complement_pairs(bits: &mut [Vec<bool>]) {
    for pair in bits.chunks_mut(2) {
        if let [t, c] = pair {
            *c = t.iter().map(|b| !b).collect();
        }
    }
}

/// Lockstep toggle patterns. SE: every lane toggles `1,0,1,0,...`; DIFF:
/// every true lane toggles in phase, complements inverted; ZS: the first half
/// of the lanes toggles and the second half carries the inverse.
pub fn worst_case_patterns(spec: &PatternSpec<'_>) -> Result<LaneBitstreams, StimulusError> {
    spec.validate()?;
    if spec.mode != PatternMode::Worst {
        return Err(StimulusError::Config(
            "worst-case patterns need mode = worst".into(),
        ));
    }
    let mut bits: Vec<Vec<bool>> = (0..spec.lanes)
        .map(|k| match spec.scheme {
            SchemeKind::ZeroSum(_) => toggle(k < spec.lanes / 2, spec.words),
            _ => toggle(true, spec.words),
        })
        .collect();
    if spec.scheme == SchemeKind::Differential {
        complement_pairs(&mut bits);
    }
    LaneBitstreams::new(bits, spec.roles())
}

/// Phase step between neighbouring lanes, in PRBS7 bits. Coprime with 127,
/// so up to 127 lanes get distinct phases, and 32 lanes span the period.
pub const LANE_STAGGER: u64 = 4;

/// PRBS7 seed for lane (or pair) `index`: the state the sequence started
/// from state 1 reaches after `(seed + LANE_STAGGER * index) mod 127` steps.
/// Lanes thus carry one sequence at staggered phases. Neighbouring integer
/// states would not do: small states all open with the same run of zeros.
pub fn lane_seed(seed: u64, index: usize) -> u8 {
    let steps = (seed % 127 + (index as u64 % 127) * LANE_STAGGER) % 127;
    let mut p = Prbs7 { state: 1 };
    for _ in 0..steps {
        p.next();
    }
    p.state
}

/// Typical traffic. SE/DIFF true lanes carry staggered PRBS7 streams; ZS
/// columns are table entries of the code book drawn uniformly with a ChaCha8
/// generator seeded from `spec.seed`.
pub fn typical_patterns(spec: &PatternSpec<'_>) -> Result<LaneBitstreams, StimulusError> {
    spec.validate()?;
    if spec.mode != PatternMode::Typical {
        return Err(StimulusError::Config(
            "typical patterns need mode = typical".into(),
        ));
    }
    let bits = match spec.scheme {
        SchemeKind::SingleEnded => (0..spec.lanes)
            .map(|k| prbs7_stream(lane_seed(spec.seed, k), spec.words))
            .collect::<Result<Vec<_>, _>>()?,
        SchemeKind::Differential => {
            let mut bits = (0..spec.lanes)
                .map(|k| prbs7_stream(lane_seed(spec.seed, k / 2), spec.words))
                .collect::<Result<Vec<_>, _>>()?;
            complement_pairs(&mut bits);
            bits
        }
        SchemeKind::ZeroSum(_) => {
            let book = spec.book.ok_or_else(|| {
                StimulusError::Config("ZS typical patterns need a code book".into())
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut bits = alloc::vec![Vec::with_capacity(spec.words); spec.lanes];
            for _ in 0..spec.words {
                let word = book.table()[rng.gen_range(0..book.len())];
                for (lane, b) in bits.iter_mut().zip(word.lanes()) {
                    lane.push(b);
                }
            }
            bits
        }
    };
    LaneBitstreams::new(bits, spec.roles())
}

pub fn patterns(spec: &PatternSpec<'_>) -> Result<LaneBitstreams, StimulusError> {
    match spec.mode {
        PatternMode::Worst => worst_case_patterns(spec),
        PatternMode::Typical => typical_patterns(spec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeShape {
    Linear,
    RaisedCosine,
}

impl EdgeShape {
    /// Fraction of the full transition spent between 20% and 80%.
    fn span_20_80(self) -> f64 {
        match self {
            EdgeShape::Linear => 0.6,
            // (1 - cos(pi x)) / 2 crosses 0.2 and 0.8 at x = acos(+-0.6) / pi
            EdgeShape::RaisedCosine => (libm::acos(-0.6) - libm::acos(0.6)) / core::f64::consts::PI,
        }
    }

    /// Unit edge over `x` in `[0, 1]`.
    fn unit(self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            EdgeShape::Linear => x,
            EdgeShape::RaisedCosine => 0.5 * (1.0 - libm::cos(core::f64::consts::PI * x)),
        }
    }
}

/// Normalized 0..1 drive level of one lane. Edges are centered on the bit
/// boundaries `k * ui`; overlapping edges superpose. The level holds the
/// last bit after the pattern ends.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveWaveform {
    bits: Vec<bool>,
    ui: f64,
    rise: f64,
    window: f64,
    shape: EdgeShape,
}

impl DriveWaveform {
    pub fn new(
        bits: Vec<bool>,
        ui: f64,
        rise: f64,
        shape: EdgeShape,
    ) -> Result<Self, StimulusError> {
        if !(ui > 0.0 && ui.is_finite()) {
            return Err(StimulusError::Config(alloc::format!(
                "unit interval {ui:e} must be positive"
            )));
        }
        if !(rise > 0.0 && rise < ui) {
            return Err(StimulusError::EdgeTooSlow { rise, ui });
        }
        if bits.is_empty() {
            return Err(StimulusError::Config("drive needs at least one bit".into()));
        }
        Ok(DriveWaveform {
            window: rise / shape.span_20_80(),
            bits,
            ui,
            rise,
            shape,
        })
    }

    pub fn ui(&self) -> f64 {
        self.ui
    }

    /// 20-80% rise/fall time.
    pub fn rise(&self) -> f64 {
        self.rise
    }

    /// Duration of one full 0-to-1 transition.
    pub fn transition_window(&self) -> f64 {
        self.window
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    fn bit(&self, k: i64) -> f64 {
        let k = k.clamp(0, self.bits.len() as i64 - 1) as usize;
        if self.bits[k] {
            1.0
        } else {
            0.0
        }
    }

    pub fn level(&self, t: f64) -> f64 {
        let half = 0.5 * self.window;
        let first = libm::floor((t - half) / self.ui) as i64;
        let last = libm::ceil((t + half) / self.ui) as i64;
        let mut level = self.bit(first);
        for k in (first + 1).max(1)..=last {
            let step = self.bit(k) - self.bit(k - 1);
            if step != 0.0 {
                let x = (t - (k as f64 * self.ui - half)) / self.window;
                level += step * self.shape.unit(x);
            }
        }
        level
    }
}

impl DriveSignal for DriveWaveform {
    fn level(&self, t: f64) -> f64 {
        DriveWaveform::level(self, t)
    }
}

/// Converts every lane to a drive waveform at `rate` bits per second.
pub fn to_drive_waveforms(
    streams: &LaneBitstreams,
    rate: f64,
    rise: f64,
    shape: EdgeShape,
) -> Result<Vec<DriveWaveform>, StimulusError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(StimulusError::Config(alloc::format!(
            "data rate {rate} must be positive"
        )));
    }
    let ui = 1.0 / rate;
    (0..streams.lanes())
        .map(|k| DriveWaveform::new(streams.lane(k).to_vec(), ui, rise, shape))
        .collect()
}
