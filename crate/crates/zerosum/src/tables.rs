//! Bus capacity tables computed from the codec.

use std::fmt::Write as _;

use zerosum_core::codec::{
    effective_bits, enumerate_codewords_capped, traces_required, CodeWord, DisparityBound,
    SchemeKind,
};

use crate::error::Result;

pub const TRACE_COUNTS: [u32; 6] = [4, 8, 12, 16, 32, 64];
pub const DISPARITY_TRACE_COUNTS: [u32; 6] = [8, 12, 16, 20, 24, 32];
pub const DATA_BITS: [u32; 6] = [8, 12, 16, 20, 24, 32];
pub const DISPARITIES: [u32; 3] = [0, 2, 4];

/// Bits carried by a fixed number of traces.
#[derive(Debug, Clone, PartialEq)]
pub struct BitsRow {
    pub traces: u32,
    pub se: u32,
    pub diff: u32,
    /// `(bits, usable integer bits)` per entry of [`DISPARITIES`].
    pub zs: Vec<(f64, u32)>,
}

/// Traces needed for a fixed number of data bits.
#[derive(Debug, Clone, PartialEq)]
pub struct TracesRow {
    pub bits: u32,
    pub se: u32,
    pub diff: u32,
    /// One entry per element of [`DISPARITIES`].
    pub zs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub balanced_bits: Vec<BitsRow>,
    pub balanced_traces: Vec<TracesRow>,
    pub disparity_bits: Vec<BitsRow>,
    pub disparity_traces: Vec<TracesRow>,
    /// The 4-bit words grouped by disparity, from -4 to +4.
    pub four_bit: Vec<(i32, Vec<CodeWord>)>,
}

fn bits_row(traces: u32, ds: &[u32]) -> Result<BitsRow> {
    let zs = ds
        .iter()
        .map(|&d| {
            let e = effective_bits(traces, DisparityBound::new(d)?)?;
            Ok((e.bits, e.usable))
        })
        .collect::<Result<_>>()?;
    Ok(BitsRow {
        traces,
        se: traces,
        diff: traces / 2,
        zs,
    })
}

fn traces_row(bits: u32, ds: &[u32]) -> Result<TracesRow> {
    let zs = ds
        .iter()
        .map(|&d| Ok(traces_required(bits, SchemeKind::ZeroSum(DisparityBound::new(d)?))?))
        .collect::<Result<_>>()?;
    Ok(TracesRow {
        bits,
        se: traces_required(bits, SchemeKind::SingleEnded)?,
        diff: traces_required(bits, SchemeKind::Differential)?,
        zs,
    })
}

pub fn compute() -> Result<Tables> {
    let all = DisparityBound::new(4)?;
    let words = enumerate_codewords_capped(4, all, 16)?;
    let four_bit = [-4, -2, 0, 2, 4]
        .into_iter()
        .map(|d| {
            (
                d,
                words.iter().filter(|w| w.disparity() == d).copied().collect(),
            )
        })
        .collect();
    Ok(Tables {
        balanced_bits: TRACE_COUNTS
            .iter()
            .map(|&t| bits_row(t, &[0]))
            .collect::<Result<_>>()?,
        balanced_traces: DATA_BITS
            .iter()
            .map(|&b| traces_row(b, &[0]))
            .collect::<Result<_>>()?,
        disparity_bits: DISPARITY_TRACE_COUNTS
            .iter()
            .map(|&t| bits_row(t, &DISPARITIES))
            .collect::<Result<_>>()?,
        disparity_traces: DATA_BITS
            .iter()
            .map(|&b| traces_row(b, &DISPARITIES))
            .collect::<Result<_>>()?,
        four_bit,
    })
}

impl Tables {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Bits carried by 2N traces (balanced zero sum)");
        let _ = writeln!(s, "{:>8} {:>6} {:>6} {:>8}", "traces", "SE", "DIFF", "ZS");
        for r in &self.balanced_bits {
            let _ = writeln!(
                s,
                "{:>8} {:>6} {:>6} {:>8.2}",
                r.traces, r.se, r.diff, r.zs[0].0
            );
        }
        let _ = writeln!(s, "\nTraces required for a number of data bits");
        let _ = writeln!(s, "{:>8} {:>6} {:>6} {:>6}", "bits", "SE", "DIFF", "ZS");
        for r in &self.balanced_traces {
            let _ = writeln!(s, "{:>8} {:>6} {:>6} {:>6}", r.bits, r.se, r.diff, r.zs[0]);
        }
        let _ = writeln!(s, "\nBits carried with bounded disparity");
        let _ = writeln!(
            s,
            "{:>8} {:>6} {:>6} {:>12} {:>12} {:>12}",
            "traces", "SE", "DIFF", "ZS±0", "ZS±2", "ZS±4"
        );
        for r in &self.disparity_bits {
            let _ = write!(s, "{:>8} {:>6} {:>6}", r.traces, r.se, r.diff);
            for (b, u) in &r.zs {
                let _ = write!(s, " {:>12}", format!("{b:.2} ({u})"));
            }
            s.push('\n');
        }
        let _ = writeln!(s, "\nTraces required with bounded disparity");
        let _ = writeln!(
            s,
            "{:>8} {:>6} {:>6} {:>6} {:>6} {:>6}",
            "bits", "SE", "DIFF", "ZS±0", "ZS±2", "ZS±4"
        );
        for r in &self.disparity_traces {
            let _ = writeln!(
                s,
                "{:>8} {:>6} {:>6} {:>6} {:>6} {:>6}",
                r.bits, r.se, r.diff, r.zs[0], r.zs[1], r.zs[2]
            );
        }
        let _ = writeln!(s, "\nDisparity of the 4-bit words");
        for (d, words) in &self.four_bit {
            let list: Vec<String> = words.iter().map(ToString::to_string).collect();
            let _ = writeln!(s, "{:>+3}  {}", d, list.join(" "));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let t = compute().unwrap();
        assert_eq!(t.balanced_bits.len(), 6);
        assert_eq!(t.disparity_bits[0].zs.len(), 3);
        let counts: Vec<usize> = t.four_bit.iter().map(|(_, w)| w.len()).collect();
        assert_eq!(counts, [1, 4, 6, 4, 1]);
        let text = t.render();
        assert!(text.contains("29.16"));
        assert!(text.contains("7.51 (7)"));
    }
}
