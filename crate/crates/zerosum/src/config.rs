//! TOML run configuration. Every key is optional; unknown keys are errors.
//!
//! Values are in the units named by the key suffix (`_ps`, `_pf`, `_mil`,
//! ...) and are converted to SI when the core settings are built.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use zerosum_core::circuit::{LinkDraw, INCH, MIL};
use zerosum_core::codec::{DisparityBound, SchemeKind};
use zerosum_core::experiment::{GroupLayout, RunConfig, SliceConfig};
use zerosum_core::stimulus::{EdgeShape, PatternMode};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
pub enum Arch {
    #[serde(rename = "SE", alias = "se")]
    Se,
    #[serde(rename = "DIFF", alias = "diff")]
    Diff,
    #[serde(rename = "ZS", alias = "zs")]
    Zs,
}

impl Arch {
    pub const ALL: [Arch; 3] = [Arch::Se, Arch::Diff, Arch::Zs];

    pub fn scheme(self, disparity: u32) -> Result<SchemeKind> {
        Ok(match self {
            Arch::Se => SchemeKind::SingleEnded,
            Arch::Diff => SchemeKind::Differential,
            Arch::Zs => SchemeKind::ZeroSum(DisparityBound::new(disparity)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Worst,
    Typical,
}

impl From<Pattern> for PatternMode {
    fn from(p: Pattern) -> Self {
        match p {
            Pattern::Worst => PatternMode::Worst,
            Pattern::Typical => PatternMode::Typical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformSave {
    None,
    /// Receiver nodes and plane currents.
    #[default]
    Rx,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Draw {
    Random,
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Edge {
    RaisedCosine,
    Linear,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdnSection {
    pub l_seg_ph: Option<f64>,
    pub c_cell_pf: Option<f64>,
    pub r_seg_ohm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinfieldSection {
    pub signals_per_pair: Option<usize>,
    pub pitch_mm: Option<f64>,
    pub via_length_mil: Option<f64>,
    pub via_diameter_mil: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferSection {
    pub r_out_ohm: Option<f64>,
    pub overlap: Option<f64>,
    pub rise_fraction: Option<f64>,
    pub rise_ps: Option<f64>,
    pub edge: Option<Edge>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub z0_ohm: Option<f64>,
    pub eps_eff: Option<f64>,
    pub loss_ohm_per_inch: Option<f64>,
    pub length_in: Option<[f64; 2]>,
    pub r_term_ohm: Option<[f64; 2]>,
    pub c_load_pf: Option<[f64; 2]>,
    pub max_pair_skew_mil: Option<f64>,
    pub draw: Option<Draw>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RailsSection {
    pub vdd: Option<f64>,
    pub vterm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub analyzed_ui: Option<usize>,
    pub settle_ui: Option<usize>,
    pub settle_round_trips: Option<usize>,
    pub steps_per_ui: Option<usize>,
    pub max_dt_ps: Option<f64>,
    pub aperture: Option<f64>,
    pub phase_search: Option<usize>,
    pub check_kcl: Option<bool>,
}

/// A key that takes either one value or a list.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn list<T: Clone>(v: &Option<OneOrMany<T>>, default: &[T]) -> Vec<T> {
    v.as_ref().map_or_else(|| default.to_vec(), OneOrMany::to_vec)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Name of the output directory under `out`; defaults to the command.
    pub name: Option<String>,
    pub architecture: Option<OneOrMany<Arch>>,
    pub pattern: Option<OneOrMany<Pattern>>,
    pub rate_gbps: Option<OneOrMany<f64>>,
    /// ZS disparity bounds.
    pub disparity: Option<OneOrMany<u32>>,
    /// ZS group layouts as `GROUPSxWIDTH`, e.g. `"2x20"`.
    pub group_layout: Option<OneOrMany<String>>,
    pub data_bits: Option<u32>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub save_waveforms: Option<WaveformSave>,
    #[serde(default)]
    pub pdn: PdnSection,
    #[serde(default)]
    pub pinfield: PinfieldSection,
    #[serde(default)]
    pub buffer: BufferSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub rails: RailsSection,
    #[serde(default)]
    pub run: RunSection,
}

pub const DEFAULT_DATA_BITS: u32 = 32;
pub const DEFAULT_SEED: u64 = 1;

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(format!("{name} must be positive, got {v}")))
    }
}

fn range(name: &str, r: [f64; 2], scale: f64) -> Result<(f64, f64)> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::config(format!(
            "{name} must be [low, high] with low <= high, got {r:?}"
        )));
    }
    Ok((r[0] * scale, r[1] * scale))
}

pub fn parse_layout(s: &str) -> Result<GroupLayout> {
    let bad = || Error::config(format!("group layout {s:?} is not GROUPSxWIDTH"));
    let (g, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let groups: usize = g.trim().parse().map_err(|_| bad())?;
    let width: usize = w.trim().parse().map_err(|_| bad())?;
    if groups == 0 || width == 0 {
        return Err(bad());
    }
    Ok(GroupLayout { groups, width })
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::config(format!("{}: no such file", path.display()))
            }
            _ => Error::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn data_bits(&self) -> u32 {
        self.data_bits.unwrap_or(DEFAULT_DATA_BITS)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn jobs(&self) -> usize {
        self.jobs.unwrap_or(1).max(1)
    }

    pub fn architectures(&self, default: &[Arch]) -> Vec<Arch> {
        list(&self.architecture, default)
    }

    pub fn patterns(&self, default: &[Pattern]) -> Vec<Pattern> {
        list(&self.pattern, default)
    }

    pub fn disparities(&self, default: &[u32]) -> Vec<u32> {
        list(&self.disparity, default)
    }

    pub fn layouts(&self, default: &[GroupLayout]) -> Result<Vec<GroupLayout>> {
        match &self.group_layout {
            None => Ok(default.to_vec()),
            Some(v) => v.to_vec().iter().map(|s| parse_layout(s)).collect(),
        }
    }

    /// Rates in bit/s, or `default` (Gbit/s) when none are configured.
    pub fn rates(&self, default: &[f64]) -> Result<Vec<f64>> {
        let gbps = list(&self.rate_gbps, default);
        if gbps.is_empty() {
            return Err(Error::config("rate_gbps is empty"));
        }
        gbps.iter()
            .map(|&r| positive("rate_gbps entry", r).map(|r| r * 1e9))
            .collect()
    }

    pub fn slice_config(&self) -> Result<SliceConfig> {
        let mut s = SliceConfig::default();
        let p = &self.pdn;
        if let Some(v) = p.l_seg_ph {
            s.pdn.l_seg = positive("pdn.l_seg_ph", v)? * 1e-12;
        }
        if let Some(v) = p.c_cell_pf {
            s.pdn.c_cell = positive("pdn.c_cell_pf", v)? * 1e-12;
        }
        if let Some(v) = p.r_seg_ohm {
            s.pdn.r_seg = positive("pdn.r_seg_ohm", v)?;
        }
        let f = &self.pinfield;
        if let Some(v) = f.signals_per_pair {
            if v == 0 {
                return Err(Error::config("pinfield.signals_per_pair must be at least 1"));
            }
            s.signals_per_pg_pair = v;
        }
        if let Some(v) = f.pitch_mm {
            s.pitch = positive("pinfield.pitch_mm", v)? * 1e-3;
        }
        if let Some(v) = f.via_length_mil {
            s.via_length = positive("pinfield.via_length_mil", v)? * MIL;
        }
        if let Some(v) = f.via_diameter_mil {
            s.via_diameter = positive("pinfield.via_diameter_mil", v)? * MIL;
        }
        let b = &self.buffer;
        if let Some(v) = b.r_out_ohm {
            s.buffer.r_out = positive("buffer.r_out_ohm", v)?;
        }
        if let Some(v) = b.overlap {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!(
                    "buffer.overlap must be within [0, 1], got {v}"
                )));
            }
            s.buffer.overlap = v;
        }
        let l = &self.link;
        if let Some(v) = l.z0_ohm {
            s.tline.z0 = positive("link.z0_ohm", v)?;
        }
        if let Some(v) = l.eps_eff {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::config(format!("link.eps_eff must be >= 1, got {v}")));
            }
            s.tline.eps_eff = v;
        }
        if let Some(v) = l.loss_ohm_per_inch {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "link.loss_ohm_per_inch must be >= 0, got {v}"
                )));
            }
            s.tline.loss_ohms_per_inch = v;
        }
        if let Some(r) = l.length_in {
            s.link_ranges.length = range("link.length_in", r, INCH)?;
        }
        if let Some(r) = l.r_term_ohm {
            s.link_ranges.r_term = range("link.r_term_ohm", r, 1.0)?;
        }
        if let Some(r) = l.c_load_pf {
            s.link_ranges.c_load = range("link.c_load_pf", r, 1e-12)?;
        }
        if let Some(v) = l.max_pair_skew_mil {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config("link.max_pair_skew_mil must be >= 0"));
            }
            s.link_ranges.max_pair_skew = v * MIL;
        }
        s.link_draw = match l.draw.unwrap_or(Draw::Random) {
            Draw::Random => LinkDraw::Random {
                seed: l.seed.unwrap_or(1),
            },
            Draw::Nominal => LinkDraw::Nominal,
        };
        if let Some(v) = self.rails.vdd {
            s.rails.vdd = positive("rails.vdd", v)?;
        }
        if let Some(v) = self.rails.vterm {
            s.rails.vterm = v;
        }
        Ok(s)
    }

    /// Timing settings at `rate` (bit/s).
    pub fn run_config(&self, rate: f64) -> Result<RunConfig> {
        let mut r = RunConfig {
            rate: positive("rate", rate)?,
            ..RunConfig::default()
        };
        let b = &self.buffer;
        if let Some(v) = b.rise_fraction {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(format!(
                    "buffer.rise_fraction must be within (0, 1), got {v}"
                )));
            }
            r.rise_fraction = v;
        }
        if let Some(v) = b.rise_ps {
            r.rise = Some(positive("buffer.rise_ps", v)? * 1e-12);
        }
        if let Some(e) = b.edge {
            r.edge = match e {
                Edge::RaisedCosine => EdgeShape::RaisedCosine,
                Edge::Linear => EdgeShape::Linear,
            };
        }
        let u = &self.run;
        if let Some(v) = u.analyzed_ui {
            r.analyzed_ui = v;
        }
        if let Some(v) = u.settle_ui {
            r.settle_ui = v;
        }
        if let Some(v) = u.settle_round_trips {
            r.settle_round_trips = v;
        }
        if let Some(v) = u.steps_per_ui {
            r.steps_per_ui = v;
        }
        if let Some(v) = u.max_dt_ps {
            r.max_dt = positive("run.max_dt_ps", v)? * 1e-12;
        }
        if let Some(v) = u.aperture {
            if !(v > 0.0 && v <= 0.5) {
                return Err(Error::config(format!(
                    "run.aperture must be within (0, 0.5], got {v}"
                )));
            }
            r.aperture = v;
        }
        if let Some(v) = u.phase_search {
            r.phase_search = v;
        }
        if let Some(v) = u.check_kcl {
            r.check_kcl = v;
        }
        Ok(r)
    }
}
