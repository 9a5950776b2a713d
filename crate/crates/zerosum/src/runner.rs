//! Experiment commands: cell lists, parallel execution and the output tree.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use zerosum_core::analysis::{self, SliceSummary};
use zerosum_core::circuit::{
    probe_rx, SolveStats, PROBE_PLANE_VDD_CURRENT, PROBE_PLANE_VSS_CURRENT,
};
use zerosum_core::codec::SchemeKind;
use zerosum_core::experiment::{
    run_scenario, GroupLayout, LaneRow, RunConfig, Scenario, ScenarioOutcome, SliceConfig,
};

use crate::config::{Arch, Config, Pattern, WaveformSave};
use crate::error::{Error, Result};
use crate::formats::{self, ResultRow};
use crate::plot::{EyePlot, Series, SweepPlot};

pub const SWEEP_RATES_GBPS: [f64; 7] = [0.233, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
pub const SWEEP_DISPARITIES: [u32; 5] = [0, 2, 4, 8, 16];
pub const BUS_LAYOUTS: [GroupLayout; 3] = [
    GroupLayout { groups: 1, width: 36 },
    GroupLayout { groups: 2, width: 20 },
    GroupLayout { groups: 4, width: 12 },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Baseline,
    DisparitySweep,
    BusSize,
    RateSweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Baseline => "baseline",
            Command::DisparitySweep => "disparity-sweep",
            Command::BusSize => "bus-size",
            Command::RateSweep => "rate-sweep",
        }
    }
}

/// One simulated scenario at one rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    pub scenario: Scenario,
    pub rate: f64,
}

fn rate_label(rate: f64) -> String {
    let g = format!("{:.3}", rate / 1e9);
    let g = g.trim_end_matches('0').trim_end_matches('.');
    format!("{g}g")
}

impl Cell {
    pub fn new(scenario: Scenario, rate: f64) -> Self {
        let arch = match scenario.scheme {
            SchemeKind::ZeroSum(d) => format!("zs{}", d.get()),
            s => s.short_name().to_lowercase(),
        };
        let id = format!(
            "{arch}_{}_{}_{}",
            scenario.mode.as_str(),
            rate_label(rate),
            scenario.layout.label()
        );
        Cell { id, scenario, rate }
    }

    pub fn disparity(&self) -> Option<u32> {
        match self.scenario.scheme {
            SchemeKind::ZeroSum(d) => Some(d.get()),
            _ => None,
        }
    }
}

fn standard(arch: Arch, d: u32, p: Pattern, cfg: &Config) -> Result<Scenario> {
    Ok(Scenario::standard(
        arch.scheme(d)?,
        p.into(),
        cfg.data_bits(),
        cfg.seed(),
    )?)
}

/// Architecture scenarios, one per ZS disparity.
fn arch_cells(
    out: &mut Vec<Cell>,
    archs: &[Arch],
    pats: &[Pattern],
    ds: &[u32],
    rate: f64,
    cfg: &Config,
) -> Result<()> {
    for &a in archs {
        for &p in pats {
            let dd: &[u32] = if a == Arch::Zs { ds } else { &[0] };
            for &d in dd {
                out.push(Cell::new(standard(a, d, p, cfg)?, rate));
            }
        }
    }
    Ok(())
}

/// The cells a command simulates under `cfg`.
pub fn cells(cmd: Command, cfg: &Config) -> Result<Vec<Cell>> {
    let archs = cfg.architectures(&Arch::ALL);
    let mut out = Vec::new();
    match cmd {
        Command::Baseline => {
            let pats = cfg.patterns(&[Pattern::Worst, Pattern::Typical]);
            for rate in cfg.rates(&[16.0])? {
                arch_cells(&mut out, &archs, &pats, &cfg.disparities(&[0]), rate, cfg)?;
            }
        }
        Command::DisparitySweep => {
            // d = 0 needs the balanced width; any finite bound gets by with
            // the narrower bus it allows
            let pats = cfg.patterns(&[Pattern::Typical]);
            for rate in cfg.rates(&[16.0])? {
                let ds = cfg.disparities(&SWEEP_DISPARITIES);
                arch_cells(&mut out, &[Arch::Zs], &pats, &ds, rate, cfg)?;
            }
        }
        Command::BusSize => {
            let layouts = cfg.layouts(&BUS_LAYOUTS)?;
            for rate in cfg.rates(&[16.0])? {
                for p in cfg.patterns(&[Pattern::Typical]) {
                    for d in cfg.disparities(&[0]) {
                        for &l in &layouts {
                            let s = standard(Arch::Zs, d, p, cfg)?.with_layout(l);
                            out.push(Cell::new(s, rate));
                        }
                    }
                }
            }
        }
        Command::RateSweep => {
            let pats = cfg.patterns(&[Pattern::Worst]);
            for rate in cfg.rates(&SWEEP_RATES_GBPS)? {
                arch_cells(&mut out, &archs, &pats, &cfg.disparities(&[0]), rate, cfg)?;
            }
        }
    }
    if out.is_empty() {
        return Err(Error::config("the configuration selects no scenarios"));
    }
    let mut ids: Vec<&str> = out.iter().map(|c| c.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("the configuration repeats a scenario"));
    }
    Ok(out)
}

/// Measurements of one cell, without the waveforms.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub rows: Vec<LaneRow>,
    pub summary: SliceSummary,
    /// Summary of the openings with DIFF halved.
    pub comparable: SliceSummary,
    pub max_ripple: f64,
    pub mean_ripple: f64,
    pub plane_current_variation: f64,
    pub plane_current_mean: f64,
    pub stats: SolveStats,
    pub elapsed: Duration,
}

impl CellResult {
    fn from_outcome(cell: Cell, o: &ScenarioOutcome, elapsed: Duration) -> Result<Self> {
        let comparable = analysis::summarize_values(&o.comparable_eyes())
            .map_err(|e| Error::Run(e.to_string()))?;
        Ok(CellResult {
            cell,
            rows: o.rows.clone(),
            summary: o.summary,
            comparable,
            max_ripple: o.max_ripple,
            mean_ripple: o.mean_ripple,
            plane_current_variation: o.plane_current_variation,
            plane_current_mean: o.plane_current_mean,
            stats: o.stats,
            elapsed,
        })
    }

    pub fn result_rows(&self) -> Vec<ResultRow> {
        let s = &self.cell.scenario;
        self.rows
            .iter()
            .map(|r| ResultRow {
                scenario: self.cell.id.clone(),
                arch: s.scheme.short_name().into(),
                pattern: s.mode.as_str().into(),
                rate_gbps: self.cell.rate / 1e9,
                disparity: self.cell.disparity(),
                group_layout: s.layout.label(),
                lane: r.lane,
                eye_mv: r.eye * 1e3,
                ripple_mv_pp: r.ripple.peak_to_peak * 1e3,
            })
            .collect()
    }
}

/// Everything needed to run cells.
#[derive(Debug, Clone)]
pub struct Settings {
    pub slice: SliceConfig,
    pub config: Config,
    pub jobs: usize,
}

impl Settings {
    pub fn new(config: Config) -> Result<Self> {
        Ok(Settings {
            slice: config.slice_config()?,
            jobs: config.jobs(),
            config,
        })
    }

    pub fn run_config(&self, rate: f64) -> Result<RunConfig> {
        self.config.run_config(rate)
    }
}

/// Runs one cell to completion and keeps its waveforms.
pub fn simulate(cell: &Cell, settings: &Settings) -> Result<ScenarioOutcome> {
    let run = settings.run_config(cell.rate)?;
    Ok(run_scenario(&cell.scenario, &settings.slice, &run)?)
}

/// Runs `cells` on `settings.jobs` threads. `sink` sees every outcome with
/// its waveforms before they are dropped. Results come back in input order.
pub fn run_cells<F>(cells: &[Cell], settings: &Settings, sink: F) -> Result<Vec<CellResult>>
where
    F: Fn(&Cell, &ScenarioOutcome) -> Result<()> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| Error::Run(e.to_string()))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let t = Instant::now();
                let o = simulate(cell, settings)
                    .map_err(|e| prefix(&cell.id, e))?;
                let elapsed = t.elapsed();
                sink(cell, &o)?;
                CellResult::from_outcome(cell.clone(), &o, elapsed)
            })
            .collect()
    })
}

fn prefix(id: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{id}: {m}")),
        Error::Run(m) => Error::Run(format!("{id}: {m}")),
        other => other,
    }
}

/// A finished command.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: Command,
    pub results: Vec<CellResult>,
}

impl Report {
    pub fn rows(&self) -> Vec<ResultRow> {
        let mut rows: Vec<ResultRow> = self.results.iter().flat_map(|r| r.result_rows()).collect();
        formats::sort_rows(&mut rows);
        rows
    }

    pub fn find(&self, pred: impl Fn(&Cell) -> bool) -> Option<&CellResult> {
        self.results.iter().find(|r| pred(&r.cell))
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.command.name());
        let _ = writeln!(
            s,
            "{:<28} {:>5} {:>9} {:>9} {:>9} {:>9} {:>10} {:>8}",
            "scenario", "lanes", "min mV", "mean mV", "max mV", "cmp mV", "ripple mV", "I var %"
        );
        for r in &self.results {
            let _ = writeln!(
                s,
                "{:<28} {:>5} {:>9.1} {:>9.1} {:>9.1} {:>9.1} {:>10.1} {:>8.2}",
                r.cell.id,
                r.cell.scenario.lanes(),
                r.summary.min * 1e3,
                r.summary.mean * 1e3,
                r.summary.max * 1e3,
                r.comparable.mean * 1e3,
                r.max_ripple * 1e3,
                r.plane_current_variation * 100.0
            );
        }
        let _ = writeln!(
            s,
            "\ncmp mV is the mean opening with DIFF halved to one wire; ripple is the worst cell's peak-to-peak VDD-VSS; I var is the spread of the board VDD current at bit centers."
        );
        s
    }

    fn sweep_plot(&self) -> Option<String> {
        let (title, x_label, log_x) = match self.command {
            Command::Baseline => return None,
            Command::DisparitySweep => ("ZS eye vs disparity bound", "disparity bound", false),
            Command::BusSize => ("ZS eye vs group layout", "group layout", false),
            Command::RateSweep => ("eye vs data rate", "data rate (Gbit/s)", true),
        };
        let mut categories: Vec<String> = Vec::new();
        let mut series: Vec<Series> = Vec::new();
        for r in &self.results {
            let sc = &r.cell.scenario;
            let (label, x) = match self.command {
                Command::RateSweep => {
                    let name = if sc.scheme == SchemeKind::Differential {
                        "DIFF/2".to_string()
                    } else {
                        sc.scheme.label()
                    };
                    (format!("{name} {}", sc.mode.as_str()), r.cell.rate / 1e9)
                }
                Command::DisparitySweep => (
                    format!("{} {}", sc.mode.as_str(), rate_label(r.cell.rate)),
                    r.cell.disparity().unwrap_or(0) as f64,
                ),
                _ => {
                    let l = sc.layout.label();
                    let i = categories.iter().position(|c| *c == l).unwrap_or_else(|| {
                        categories.push(l);
                        categories.len() - 1
                    });
                    (
                        format!("{} {}", sc.mode.as_str(), rate_label(r.cell.rate)),
                        i as f64,
                    )
                }
            };
            let point = (x, r.comparable.mean * 1e3);
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push(point),
                None => series.push(Series {
                    label,
                    points: vec![point],
                }),
            }
        }
        for s in &mut series {
            s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        Some(
            SweepPlot {
                title,
                x_label,
                y_label: "mean eye opening (mV)",
                log_x,
                categories: (self.command == Command::BusSize).then_some(categories),
                series,
            }
            .to_svg(),
        )
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(Error::io(path))
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(Error::io(path))
}

/// Writes the waveforms, pattern dump and eye files of one cell.
pub fn write_cell_files(
    dir: &Path,
    cell: &Cell,
    o: &ScenarioOutcome,
    save: WaveformSave,
    run: &RunConfig,
) -> Result<()> {
    let waves = dir.join("waveforms");
    let eyes = dir.join("eyes");
    mkdir(&waves)?;
    mkdir(&eyes)?;
    let w = &o.waveforms;
    let names: Vec<&str> = match save {
        WaveformSave::None => Vec::new(),
        WaveformSave::All => w.names().iter().map(String::as_str).collect(),
        WaveformSave::Rx => w
            .names()
            .iter()
            .map(String::as_str)
            .filter(|n| {
                n.strip_prefix("rx").is_some_and(|k| k.parse::<usize>().is_ok())
                    || *n == PROBE_PLANE_VDD_CURRENT
                    || *n == PROBE_PLANE_VSS_CURRENT
            })
            .collect(),
    };
    if !names.is_empty() {
        let text = formats::waveforms_to_string(w, &names)?;
        write(&waves.join(format!("{}.tsv", cell.id)), &text)?;
    }
    let sc = &cell.scenario;
    let bits = (o.settle_time + run.analyzed_ui as f64 * o.ui) / o.ui;
    let patterns = sc.patterns(bits.ceil() as usize + 2)?;
    let header = [
        ("arch", sc.scheme.label()),
        ("mode", sc.mode.as_str().to_string()),
        ("seed", sc.seed.to_string()),
        ("rate_gbps", format!("{}", cell.rate / 1e9)),
        ("layout", sc.layout.label()),
    ];
    write(
        &waves.join(format!("{}_patterns.txt", cell.id)),
        &formats::patterns_to_string(&header, &patterns),
    )?;

    // eye of the worst lane (pair for DIFF)
    let worst = o
        .rows
        .iter()
        .min_by(|a, b| a.eye.total_cmp(&b.eye))
        .ok_or_else(|| Error::Run(format!("{}: no lanes measured", cell.id)))?;
    let trace: Vec<f64> = if sc.scheme == SchemeKind::Differential {
        let t = trace(w, &probe_rx(2 * worst.lane))?;
        let c = trace(w, &probe_rx(2 * worst.lane + 1))?;
        t.iter().zip(c).map(|(a, b)| a - b).collect()
    } else {
        trace(w, &probe_rx(worst.lane))?.to_vec()
    };
    let folded = analysis::fold_eye(&trace, w.dt, o.ui, worst.phase_offset, o.settle_time)
        .map_err(|e| Error::Run(e.to_string()))?;
    let stem = format!("{}_lane{}", cell.id, worst.lane);
    write(&eyes.join(format!("{stem}.tsv")), &formats::eye_to_string(&folded))?;
    let title = format!(
        "{} {} {} lane {}: {:.1} mV",
        sc.scheme.label(),
        sc.mode.as_str(),
        rate_label(cell.rate),
        worst.lane,
        worst.eye * 1e3
    );
    let svg = EyePlot {
        title: &title,
        samples: &trace,
        dt: w.dt,
        ui: o.ui,
        phase_offset: worst.phase_offset,
        settle_time: o.settle_time,
        aperture: run.aperture,
    }
    .to_svg();
    write(&eyes.join(format!("{stem}.svg")), &svg)
}

fn trace<'a>(w: &'a zerosum_core::circuit::WaveformSet, name: &str) -> Result<&'a [f64]> {
    w.get(name)
        .ok_or_else(|| Error::Run(format!("missing trace {name}")))
}

/// Runs `cmd` and, with `out` set, writes `<out>/<name>/`.
pub fn execute(cmd: Command, settings: &Settings, out: Option<&Path>) -> Result<Report> {
    let cells = cells(cmd, &settings.config)?;
    // every cell's layout and timing settings are validated before anything runs
    for c in &cells {
        c.scenario.validate()?;
        settings.run_config(c.rate)?;
    }
    let dir: Option<PathBuf> = out.map(|o| {
        o.join(
            settings
                .config
                .name
                .clone()
                .unwrap_or_else(|| cmd.name().to_string()),
        )
    });
    if let Some(d) = &dir {
        mkdir(d)?;
    }
    let save = settings.config.save_waveforms.unwrap_or_default();
    let results = run_cells(&cells, settings, |cell, o| match &dir {
        Some(d) => write_cell_files(d, cell, o, save, &settings.run_config(cell.rate)?),
        None => Ok(()),
    })?;
    let report = Report {
        command: cmd,
        results,
    };
    if let Some(d) = &dir {
        formats::write_results(&d.join("results.csv"), &report.rows())?;
        write(&d.join("summary.txt"), &report.summary_text())?;
        if let Some(svg) = report.sweep_plot() {
            write(&d.join("sweep.svg"), &svg)?;
        }
    }
    Ok(report)
}
