//! Balanced and bounded-disparity code words.
//!
//! A code word spans the `2N` traces of a bus. Its disparity is the number of
//! ones minus the number of zeros; a zero-sum bus only ever carries words
//! whose disparity magnitude stays within a fixed even bound. Counting is done
//! exactly with big integers, and the lookup-table codec maps data indices to
//! table entries.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Widest code word representable by [`CodeWord`].
pub const MAX_WIDTH: u32 = 128;

/// Default cap on the width accepted by [`enumerate_codewords`].
pub const ENUMERATION_CAP: u32 = 24;

/// Largest table (in data bits) a [`CodeBook`] will materialize.
pub const MAX_TABLE_BITS: u32 = 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("disparity bound {0} is odd")]
    OddDisparity(u32),
    #[error("disparity bound {bound} exceeds word width {width}")]
    DisparityExceedsWidth { bound: u32, width: u32 },
    #[error("width {0} must be a positive even number no larger than {MAX_WIDTH}")]
    InvalidWidth(u32),
    #[error("offset k={k} is out of range for N={n_half}")]
    OffsetOutOfRange { n_half: u32, k: u32 },
    #[error("width {width} exceeds the enumeration cap {cap}; use sampled construction")]
    EnumerationCap { width: u32, cap: u32 },
    #[error("code book needs {required} words but only {available} satisfy the disparity bound")]
    CapacityExceeded {
        available: BigUint,
        required: BigUint,
    },
    #[error("{0} data bits exceed the table limit of {MAX_TABLE_BITS}")]
    TableTooLarge(u32),
    #[error("data bits must be at least 1")]
    NoDataBits,
    #[error("data word {data} is out of range for {data_bits} data bits")]
    DataOutOfRange { data: u64, data_bits: u32 },
    #[error("code word {0} is not in the code book")]
    UnknownCodeWord(CodeWord),
    #[error("code word has width {got}, code book expects {expected}")]
    WidthMismatch { expected: u32, got: u32 },
    #[error("invalid bit string: {0}")]
    BadBitString(String),
    #[error("invalid code book table: {0}")]
    InvalidTable(String),
}

/// Maximum allowed `|#ones - #zeros|` per code word. Always even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DisparityBound(u32);

impl DisparityBound {
    pub const BALANCED: DisparityBound = DisparityBound(0);

    pub fn new(d: u32) -> Result<Self, CodecError> {
        if d % 2 != 0 {
            return Err(CodecError::OddDisparity(d));
        }
        Ok(DisparityBound(d))
    }

    /// Bound validated against a word width.
    pub fn for_width(d: u32, width: u32) -> Result<Self, CodecError> {
        let bound = Self::new(d)?;
        bound.check_width(width)?;
        Ok(bound)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Largest offset from balance, `k = d / 2`.
    pub fn max_offset(self) -> u32 {
        self.0 / 2
    }

    pub fn check_width(self, width: u32) -> Result<(), CodecError> {
        if self.0 > width {
            return Err(CodecError::DisparityExceedsWidth {
                bound: self.0,
                width,
            });
        }
        Ok(())
    }

    pub fn admits(self, disparity: i32) -> bool {
        disparity.unsigned_abs() <= self.0
    }
}

impl fmt::Display for DisparityBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Signaling architecture of a bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Single-ended: one trace per bit.
    SingleEnded,
    /// (Quasi-)differential: a true and a complement trace per bit.
    Differential,
    /// Zero sum with a disparity bound.
    ZeroSum(DisparityBound),
}

impl SchemeKind {
    pub fn label(&self) -> String {
        match self {
            SchemeKind::SingleEnded => "SE".into(),
            SchemeKind::Differential => "DIFF".into(),
            SchemeKind::ZeroSum(d) => alloc::format!("ZS±{}", d.get()),
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            SchemeKind::SingleEnded => "SE",
            SchemeKind::Differential => "DIFF",
            SchemeKind::ZeroSum(_) => "ZS",
        }
    }
}

/// A fixed-width word of bus bits. Bit 0 is the leftmost character of the
/// textual form and the most significant bit of the numeric value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodeWord {
    width: u32,
    bits: u128,
}

impl CodeWord {
    pub fn new(width: u32, bits: u128) -> Result<Self, CodecError> {
        check_width(width)?;
        if width < 128 && bits >> width != 0 {
            return Err(CodecError::BadBitString(alloc::format!(
                "value {bits:#x} does not fit in {width} bits"
            )));
        }
        Ok(CodeWord { width, bits })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self, CodecError> {
        let width = bits.len() as u32;
        check_width(width)?;
        let value = bits.iter().fold(0u128, |acc, &b| (acc << 1) | b as u128);
        Ok(CodeWord { width, bits: value })
    }

    pub fn parse(text: &str) -> Result<Self, CodecError> {
        let bits = text
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(CodecError::BadBitString(text.into())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_bits(&bits)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn value(&self) -> u128 {
        self.bits
    }

    /// Bit carried by lane `lane` (0-based, leftmost first).
    pub fn bit(&self, lane: u32) -> bool {
        assert!(lane < self.width, "lane {lane} out of range");
        (self.bits >> (self.width - 1 - lane)) & 1 == 1
    }

    pub fn lanes(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width).map(move |lane| self.bit(lane))
    }

    pub fn ones(&self) -> u32 {
        self.bits.count_ones()
    }

    /// `#ones - #zeros`.
    pub fn disparity(&self) -> i32 {
        2 * self.ones() as i32 - self.width as i32
    }
}

impl fmt::Display for CodeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.lanes() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Signed disparity of a word.
pub fn disparity(word: &CodeWord) -> i32 {
    word.disparity()
}

fn check_width(width: u32) -> Result<(), CodecError> {
    if width == 0 || width % 2 != 0 || width > MAX_WIDTH {
        return Err(CodecError::InvalidWidth(width));
    }
    Ok(())
}

fn binomial(n: u32, r: u32) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        // Exact at every step: the running product is C(n, i + 1).
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Number of `2N`-bit words with `N - k` ones and `N + k` zeros (equivalently,
/// by symmetry, `N + k` ones and `N - k` zeros).
pub fn codes_with_offset(n_half: u32, k: u32) -> Result<BigUint, CodecError> {
    if n_half == 0 || k > n_half {
        return Err(CodecError::OffsetOutOfRange { n_half, k });
    }
    Ok(binomial(2 * n_half, n_half - k))
}

/// Number of `width`-bit words whose disparity magnitude is at most `bound`.
/// Bounds wider than the word admit every word.
pub fn valid_word_count(width: u32, bound: DisparityBound) -> Result<BigUint, CodecError> {
    check_width(width)?;
    let n_half = width / 2;
    let k_max = bound.max_offset().min(n_half);
    let mut total = codes_with_offset(n_half, 0)?;
    for k in 1..=k_max {
        total += codes_with_offset(n_half, k)? * 2u32;
    }
    Ok(total)
}

/// Capacity of a bus in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveBits {
    pub bits: f64,
    /// Integer part: the number of data bits a code book can actually carry.
    pub usable: u32,
}

fn log2_big(x: &BigUint) -> f64 {
    let shift = x.bits().saturating_sub(64);
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    libm::log2(top) + shift as f64
}

/// Bits carried by `traces` wires under a disparity bound.
pub fn effective_bits(traces: u32, bound: DisparityBound) -> Result<EffectiveBits, CodecError> {
    check_width(traces)?;
    bound.check_width(traces)?;
    let count = valid_word_count(traces, bound)?;
    // floor(log2(count)) exactly, independent of float rounding
    let usable = (count.bits() - 1) as u32;
    Ok(EffectiveBits {
        bits: log2_big(&count),
        usable,
    })
}

/// Smallest trace count able to carry `data_bits` under a scheme.
pub fn traces_required(data_bits: u32, scheme: SchemeKind) -> Result<u32, CodecError> {
    if data_bits == 0 {
        return Err(CodecError::NoDataBits);
    }
    match scheme {
        SchemeKind::SingleEnded => Ok(data_bits),
        SchemeKind::Differential => Ok(2 * data_bits),
        SchemeKind::ZeroSum(bound) => {
            let needed = BigUint::one() << data_bits;
            let mut traces = 2;
            loop {
                if valid_word_count(traces, bound)? >= needed {
                    return Ok(traces);
                }
                traces += 2;
            }
        }
    }
}

/// All words of `width` bits within the disparity bound, ascending numerically.
pub fn enumerate_codewords(width: u32, bound: DisparityBound) -> Result<Vec<CodeWord>, CodecError> {
    enumerate_codewords_capped(width, bound, ENUMERATION_CAP)
}

pub fn enumerate_codewords_capped(
    width: u32,
    bound: DisparityBound,
    cap: u32,
) -> Result<Vec<CodeWord>, CodecError> {
    check_width(width)?;
    bound.check_width(width)?;
    if width > cap {
        return Err(CodecError::EnumerationCap { width, cap });
    }
    Ok(valid_words(width, bound).collect())
}

fn valid_words(width: u32, bound: DisparityBound) -> impl Iterator<Item = CodeWord> {
    (0u128..1u128 << width)
        .map(move |bits| CodeWord { width, bits })
        .filter(move |w| bound.admits(w.disparity()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BookMode {
    /// First `2^data_bits` valid words in ascending numeric order.
    Enumerated,
    /// Distinct valid words drawn uniformly with a seeded generator.
    Sampled,
}

impl BookMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BookMode::Enumerated => "enumerated",
            BookMode::Sampled => "sampled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "enumerated" => Some(BookMode::Enumerated),
            "sampled" => Some(BookMode::Sampled),
            _ => None,
        }
    }
}

/// Lookup-table codec: data value `i` is sent as `table[i]`.
///
/// Sampled construction draws uniform `width`-bit words from a ChaCha8
/// generator seeded with `seed`, keeps those within the bound and drops
/// repeats, so a given `(data_bits, width, bound, seed)` always yields the
/// same table on every platform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBook {
    data_bits: u32,
    width: u32,
    bound: DisparityBound,
    seed: u64,
    mode: BookMode,
    table: Vec<CodeWord>,
    inverse: BTreeMap<u128, u64>,
}

impl CodeBook {
    pub fn build(
        data_bits: u32,
        width: u32,
        bound: DisparityBound,
        seed: u64,
        mode: BookMode,
    ) -> Result<Self, CodecError> {
        if data_bits == 0 {
            return Err(CodecError::NoDataBits);
        }
        check_width(width)?;
        bound.check_width(width)?;
        let available = valid_word_count(width, bound)?;
        let required = BigUint::one() << data_bits;
        if available < required {
            return Err(CodecError::CapacityExceeded {
                available,
                required,
            });
        }
        if data_bits > MAX_TABLE_BITS {
            return Err(CodecError::TableTooLarge(data_bits));
        }
        let size = 1usize << data_bits;
        let table: Vec<CodeWord> = match mode {
            BookMode::Enumerated => {
                if width > ENUMERATION_CAP {
                    return Err(CodecError::EnumerationCap {
                        width,
                        cap: ENUMERATION_CAP,
                    });
                }
                valid_words(width, bound).take(size).collect()
            }
            BookMode::Sampled => sample_words(width, bound, size, seed),
        };
        Self::from_table(data_bits, width, bound, seed, mode, table)
    }

    /// Rebuild a book from an explicit table, validating every invariant.
    pub fn from_table(
        data_bits: u32,
        width: u32,
        bound: DisparityBound,
        seed: u64,
        mode: BookMode,
        table: Vec<CodeWord>,
    ) -> Result<Self, CodecError> {
        if data_bits == 0 {
            return Err(CodecError::NoDataBits);
        }
        if data_bits > MAX_TABLE_BITS {
            return Err(CodecError::TableTooLarge(data_bits));
        }
        check_width(width)?;
        bound.check_width(width)?;
        if table.len() != 1usize << data_bits {
            return Err(CodecError::InvalidTable(alloc::format!(
                "expected {} entries, found {}",
                1u64 << data_bits,
                table.len()
            )));
        }
        let mut inverse = BTreeMap::new();
        for (index, word) in table.iter().enumerate() {
            if word.width != width {
                return Err(CodecError::WidthMismatch {
                    expected: width,
                    got: word.width,
                });
            }
            if !bound.admits(word.disparity()) {
                return Err(CodecError::InvalidTable(alloc::format!(
                    "entry {index} ({word}) has disparity {} outside ±{bound}",
                    word.disparity()
                )));
            }
            if inverse.insert(word.bits, index as u64).is_some() {
                return Err(CodecError::InvalidTable(alloc::format!(
                    "entry {index} ({word}) is a duplicate"
                )));
            }
        }
        Ok(CodeBook {
            data_bits,
            width,
            bound,
            seed,
            mode,
            table,
            inverse,
        })
    }

    pub fn data_bits(&self) -> u32 {
        self.data_bits
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn bound(&self) -> DisparityBound {
        self.bound
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> BookMode {
        self.mode
    }

    pub fn table(&self) -> &[CodeWord] {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn encode(&self, data: u64) -> Result<CodeWord, CodecError> {
        self.table
            .get(usize::try_from(data).unwrap_or(usize::MAX))
            .copied()
            .ok_or(CodecError::DataOutOfRange {
                data,
                data_bits: self.data_bits,
            })
    }

    pub fn decode(&self, word: &CodeWord) -> Result<u64, CodecError> {
        if word.width != self.width {
            return Err(CodecError::WidthMismatch {
                expected: self.width,
                got: word.width,
            });
        }
        self.inverse
            .get(&word.bits)
            .copied()
            .ok_or(CodecError::UnknownCodeWord(*word))
    }
}

fn sample_words(width: u32, bound: DisparityBound, size: usize, seed: u64) -> Vec<CodeWord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = if width == 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    };
    let mut seen = BTreeMap::new();
    let mut table = Vec::with_capacity(size);
    while table.len() < size {
        let word = CodeWord {
            width,
            bits: rng.gen::<u128>() & mask,
        };
        if bound.admits(word.disparity()) && seen.insert(word.bits, ()).is_none() {
            table.push(word);
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn w(s: &str) -> CodeWord {
        CodeWord::parse(s).unwrap()
    }

    #[test]
    fn offset_counts() {
        assert_eq!(codes_with_offset(2, 0).unwrap(), BigUint::from(6u32));
        assert_eq!(codes_with_offset(2, 2).unwrap(), BigUint::from(1u32));
        assert_eq!(codes_with_offset(1, 0).unwrap(), BigUint::from(2u32));
        assert_eq!(codes_with_offset(6, 0).unwrap(), BigUint::from(924u32));
        assert!(codes_with_offset(2, 3).is_err());
        assert!(codes_with_offset(0, 0).is_err());
    }

    #[test]
    fn disparity_sign() {
        assert_eq!(disparity(&w("0011")), 0);
        assert_eq!(disparity(&w("0000")), -4);
        assert_eq!(disparity(&w("0111")), 2);
        assert_eq!(disparity(&w("1111")), 4);
    }

    #[test]
    fn odd_bound_rejected() {
        assert_eq!(DisparityBound::new(3), Err(CodecError::OddDisparity(3)));
        assert!(DisparityBound::for_width(6, 4).is_err());
    }

    #[test]
    fn effective_bits_samples() {
        let b0 = DisparityBound::BALANCED;
        let cases = [
            (8, 0, 6.13),
            (4, 0, 2.58),
            (16, 2, 15.13),
            (32, 4, 31.32),
            (64, 0, 60.67),
        ];
        for (traces, d, want) in cases {
            let got = effective_bits(traces, DisparityBound::new(d).unwrap()).unwrap();
            assert!(
                (got.bits - want).abs() < 0.005,
                "{traces}/{d}: {}",
                got.bits
            );
        }
        assert_eq!(effective_bits(12, b0).unwrap().usable, 9);
        assert!(effective_bits(7, b0).is_err());
        assert!(effective_bits(0, b0).is_err());
    }

    #[test]
    fn traces_required_samples() {
        let zs = |d| SchemeKind::ZeroSum(DisparityBound::new(d).unwrap());
        assert_eq!(traces_required(32, zs(0)).unwrap(), 36);
        assert_eq!(traces_required(32, zs(2)).unwrap(), 34);
        assert_eq!(traces_required(8, SchemeKind::Differential).unwrap(), 16);
        assert_eq!(traces_required(16, SchemeKind::SingleEnded).unwrap(), 16);
    }

    #[test]
    fn enumerate_four_bit_balanced() {
        let words = enumerate_codewords(4, DisparityBound::BALANCED).unwrap();
        let text: Vec<_> = words.iter().map(|w| w.to_string()).collect();
        assert_eq!(text, vec!["0011", "0101", "0110", "1001", "1010", "1100"]);
        let two = enumerate_codewords(2, DisparityBound::BALANCED).unwrap();
        assert_eq!(two, vec![w("01"), w("10")]);
        assert_eq!(
            enumerate_codewords(4, DisparityBound::new(2).unwrap())
                .unwrap()
                .len(),
            14
        );
        assert!(matches!(
            enumerate_codewords(26, DisparityBound::BALANCED),
            Err(CodecError::EnumerationCap { width: 26, .. })
        ));
    }

    #[test]
    fn build_enumerated_books() {
        let book =
            CodeBook::build(9, 12, DisparityBound::BALANCED, 1, BookMode::Enumerated).unwrap();
        assert_eq!(book.len(), 512);
        assert!(book.table().iter().all(|w| w.disparity() == 0));
        let small =
            CodeBook::build(2, 4, DisparityBound::BALANCED, 0, BookMode::Enumerated).unwrap();
        assert_eq!(small.table(), &[w("0011"), w("0101"), w("0110"), w("1001")]);
        let err = CodeBook::build(10, 12, DisparityBound::BALANCED, 0, BookMode::Enumerated);
        assert_eq!(
            err,
            Err(CodecError::CapacityExceeded {
                available: BigUint::from(924u32),
                required: BigUint::from(1024u32)
            })
        );
    }

    #[test]
    fn decode_rejects_foreign_words() {
        let book =
            CodeBook::build(2, 4, DisparityBound::BALANCED, 0, BookMode::Enumerated).unwrap();
        assert_eq!(
            book.decode(&w("0000")),
            Err(CodecError::UnknownCodeWord(w("0000")))
        );
        assert!(matches!(
            book.decode(&w("01")),
            Err(CodecError::WidthMismatch { .. })
        ));
        assert!(book.encode(4).is_err());
    }

    #[test]
    fn sampled_books_are_seeded() {
        let b = DisparityBound::BALANCED;
        let a = CodeBook::build(8, 36, b, 7, BookMode::Sampled).unwrap();
        let again = CodeBook::build(8, 36, b, 7, BookMode::Sampled).unwrap();
        let other = CodeBook::build(8, 36, b, 8, BookMode::Sampled).unwrap();
        assert_eq!(a, again);
        assert_ne!(a.table(), other.table());
        assert!(a
            .table()
            .iter()
            .all(|w| w.disparity() == 0 && w.width() == 36));
    }

    #[test]
    fn from_table_rejects_bad_entries() {
        let b = DisparityBound::BALANCED;
        let dup = vec![w("0011"), w("0011")];
        assert!(CodeBook::from_table(1, 4, b, 0, BookMode::Sampled, dup).is_err());
        let unbalanced = vec![w("0011"), w("0111")];
        assert!(CodeBook::from_table(1, 4, b, 0, BookMode::Sampled, unbalanced).is_err());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(CodeWord::parse("01x1").is_err());
        assert!(CodeWord::parse("011").is_err());
        assert!(CodeWord::parse("").is_err());
    }
}
