//! Text file formats: code books, pattern dumps, waveform and eye tables,
//! and the per-lane results CSV.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use zerosum_core::analysis::FoldedEye;
use zerosum_core::circuit::WaveformSet;
use zerosum_core::codec::{BookMode, CodeBook, CodeWord, DisparityBound};
use zerosum_core::stimulus::LaneBitstreams;

use crate::error::{Error, Result};

pub const CODEBOOK_HEADER: &str = "width,data_bits,disparity,mode,seed";

/// Code book text: the column names, one line of values, then one word per
/// line in data order (`0`/`1` characters, lane 0 first).
pub fn codebook_to_string(book: &CodeBook) -> String {
    let mut s = String::with_capacity(book.len() * (book.width() as usize + 1) + 64);
    let _ = writeln!(s, "{CODEBOOK_HEADER}");
    let _ = writeln!(
        s,
        "{},{},{},{},{}",
        book.width(),
        book.data_bits(),
        book.bound().get(),
        book.mode().as_str(),
        book.seed()
    );
    for w in book.table() {
        let _ = writeln!(s, "{w}");
    }
    s
}

/// Parses and validates a code book written by [`codebook_to_string`].
pub fn codebook_from_str(text: &str) -> Result<CodeBook> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let bad = |line: usize, msg: String| Error::config(format!("line {line}: {msg}"));
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == CODEBOOK_HEADER => {}
        Some((n, h)) => {
            return Err(bad(
                n,
                format!("expected header {CODEBOOK_HEADER:?}, found {h:?}"),
            ))
        }
        None => return Err(Error::config("empty code book file")),
    }
    let (n, values) = lines
        .next()
        .ok_or_else(|| Error::config("code book header has no values line"))?;
    let fields: Vec<&str> = values.split(',').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(bad(n, format!("expected 5 fields, found {}", fields.len())));
    }
    let num = |i: usize| -> Result<u64> {
        fields[i]
            .parse()
            .map_err(|_| bad(n, format!("field {:?} is not a number", fields[i])))
    };
    let width = num(0)? as u32;
    let data_bits = num(1)? as u32;
    let bound = DisparityBound::new(num(2)? as u32)?;
    let mode = BookMode::parse(fields[3])
        .ok_or_else(|| bad(n, format!("unknown mode {:?}", fields[3])))?;
    let seed = num(4)?;
    let table = lines
        .map(|(n, l)| CodeWord::parse(l).map_err(|e| bad(n, e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Ok(CodeBook::from_table(
        data_bits, width, bound, seed, mode, table,
    )?)
}

/// Lane bit patterns, one line per lane, under a `#` header.
pub fn patterns_to_string(header: &[(&str, String)], p: &LaneBitstreams) -> String {
    let mut s = String::new();
    for (k, v) in header {
        let _ = writeln!(s, "# {k} {v}");
    }
    for k in 0..p.lanes() {
        s.extend(p.lane(k).iter().map(|&b| if b { '1' } else { '0' }));
        s.push('\n');
    }
    s
}

/// Waveform table: a `# dt` line, a line of tab separated trace names and
/// one row per sample with 9 significant digits.
pub fn waveforms_to_string(w: &WaveformSet, names: &[&str]) -> Result<String> {
    let traces = names
        .iter()
        .map(|n| {
            w.get(n)
                .ok_or_else(|| Error::Run(format!("no trace named {n}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = traces.first().map_or(0, |t| t.len());
    let mut s = String::with_capacity(rows * names.len() * 17 + 256);
    let _ = writeln!(s, "# dt {:.8e}", w.dt);
    let _ = writeln!(s, "# settle {:.8e}", w.settle_time);
    s.push_str(&names.join("\t"));
    s.push('\n');
    for i in 0..rows {
        for (j, t) in traces.iter().enumerate() {
            if j > 0 {
                s.push('\t');
            }
            let _ = write!(s, "{:.8e}", t[i]);
        }
        s.push('\n');
    }
    Ok(s)
}

/// A waveform table read back: `dt`, names and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformTable {
    pub dt: f64,
    pub settle_time: f64,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

pub fn waveforms_from_str(text: &str) -> Result<WaveformTable> {
    let mut dt = None;
    let mut settle = 0.0;
    let mut names: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let bad = |m: &str| Error::config(format!("waveform line {}: {m}", i + 1));
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            let key = it.next();
            let value = it.next().and_then(|v| v.parse::<f64>().ok());
            match (key, value) {
                (Some("dt"), Some(v)) => dt = Some(v),
                (Some("settle"), Some(v)) => settle = v,
                _ => {}
            }
            continue;
        }
        match &names {
            None => {
                let n: Vec<String> = line.split('\t').map(str::to_string).collect();
                columns = vec![Vec::new(); n.len()];
                names = Some(n);
            }
            Some(n) => {
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != n.len() {
                    return Err(bad("wrong number of columns"));
                }
                for (c, f) in columns.iter_mut().zip(fields) {
                    c.push(f.trim().parse().map_err(|_| bad("not a number"))?);
                }
            }
        }
    }
    Ok(WaveformTable {
        dt: dt.ok_or_else(|| Error::config("waveform file has no dt line"))?,
        settle_time: settle,
        names: names.unwrap_or_default(),
        columns,
    })
}

/// Folded eye points, `phase<TAB>volts`, phase in UI with the bit center
/// at 0.5.
pub fn eye_to_string(eye: &FoldedEye) -> String {
    let mut s = String::with_capacity(eye.points.len() * 32);
    s.push_str("time_frac\tvoltage\n");
    for (p, v) in &eye.points {
        let _ = writeln!(s, "{p:.6}\t{v:.8e}");
    }
    s
}

/// One CSV row: a lane of a single-ended or ZS bus, or a pair of a DIFF bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub arch: String,
    pub pattern: String,
    pub rate_gbps: f64,
    /// ZS disparity bound; empty for SE and DIFF.
    pub disparity: Option<u32>,
    pub group_layout: String,
    pub lane: usize,
    /// Vertical opening; the full differential opening for DIFF.
    pub eye_mv: f64,
    pub ripple_mv_pp: f64,
}

pub const RESULTS_COLUMNS: [&str; 9] = [
    "scenario",
    "arch",
    "pattern",
    "rate_gbps",
    "disparity",
    "group_layout",
    "lane",
    "eye_mv",
    "ripple_mv_pp",
];

/// Sort order of the CSV: scenario, then lane.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (a.scenario.as_str(), a.lane)
            .cmp(&(b.scenario.as_str(), b.lane))
    });
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Run(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Run(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Run(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Run(format!("{}: {e}", path.display()))))
        .collect()
}
