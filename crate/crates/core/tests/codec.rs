use num_traits::ToPrimitive;
use proptest::prelude::*;
use zerosum_core::codec::{
    codes_with_offset, effective_bits, enumerate_codewords, traces_required, valid_word_count,
    BookMode, CodeBook, CodeWord, CodecError, DisparityBound, SchemeKind,
};

fn bound(d: u32) -> DisparityBound {
    DisparityBound::new(d).unwrap()
}

fn popcount_scan(width: u32, ones: u32) -> u64 {
    (0u64..1 << width).filter(|w| w.count_ones() == ones).count() as u64
}

fn brute_valid(width: u32, d: u32) -> Vec<u128> {
    (0u128..1 << width)
        .filter(|w| (2 * w.count_ones() as i32 - width as i32).unsigned_abs() <= d)
        .collect()
}

#[test]
fn offset_counts_match_popcount_scan() {
    for width in (2..=16).step_by(2) {
        let n = width / 2;
        for k in 0..=n {
            let got = codes_with_offset(n, k).unwrap().to_u64().unwrap();
            assert_eq!(got, popcount_scan(width, n - k), "N={n} k={k} low side");
            assert_eq!(got, popcount_scan(width, n + k), "N={n} k={k} high side");
        }
    }
}

#[test]
fn offset_examples() {
    assert_eq!(codes_with_offset(2, 0).unwrap().to_u64(), Some(6));
    assert_eq!(codes_with_offset(2, 2).unwrap().to_u64(), Some(1));
    assert_eq!(codes_with_offset(1, 0).unwrap().to_u64(), Some(2));
    assert_eq!(codes_with_offset(6, 0).unwrap().to_u64(), Some(924));
    assert!(matches!(
        codes_with_offset(2, 3),
        Err(CodecError::OffsetOutOfRange { .. })
    ));
}

#[test]
fn enumeration_matches_brute_force() {
    for width in (2..=16).step_by(2) {
        for d in (0..=width).step_by(2) {
            let words: Vec<u128> = enumerate_codewords(width, bound(d))
                .unwrap()
                .iter()
                .map(CodeWord::value)
                .collect();
            let oracle = brute_valid(width, d);
            assert_eq!(words, oracle, "width {width} d {d}");
            assert_eq!(
                valid_word_count(width, bound(d)).unwrap().to_u64(),
                Some(oracle.len() as u64)
            );
        }
    }
}

// Table 1: zero sum bits on 2N traces at zero disparity.
#[test]
fn table1_zero_sum_bits() {
    for (traces, bits) in [
        (4, 2.58),
        (8, 6.13),
        (12, 9.85),
        (16, 13.65),
        (32, 29.16),
        (64, 60.67),
    ] {
        let got = effective_bits(traces, DisparityBound::BALANCED).unwrap();
        assert!((got.bits - bits).abs() < 0.005, "{traces}: {}", got.bits);
        assert_eq!(got.usable, bits as u32);
        assert_eq!(traces_required(traces, SchemeKind::SingleEnded).unwrap(), traces);
        assert_eq!(
            traces_required(traces / 2, SchemeKind::Differential).unwrap(),
            traces
        );
    }
}

// Table 2: traces required at zero disparity.
#[test]
fn table2_traces_required() {
    for (bits, se, diff, zs) in [
        (8, 8, 16, 12),
        (12, 12, 24, 16),
        (16, 16, 32, 20),
        (20, 20, 40, 24),
        (24, 24, 48, 28),
        (32, 32, 64, 36),
    ] {
        assert_eq!(traces_required(bits, SchemeKind::SingleEnded).unwrap(), se);
        assert_eq!(traces_required(bits, SchemeKind::Differential).unwrap(), diff);
        assert_eq!(
            traces_required(bits, SchemeKind::ZeroSum(DisparityBound::BALANCED)).unwrap(),
            zs
        );
    }
}

// Table 3: bits on a fixed trace count for ZS±0, ±2 and ±4, with integer parts.
#[test]
fn table3_bits_with_disparity() {
    let rows = [
        (8, [(6.13, 6), (7.51, 7), (7.89, 7)]),
        (12, [(9.85, 9), (11.29, 11), (11.77, 11)]),
        (16, [(13.65, 13), (15.13, 15), (15.66, 15)]),
        (20, [(17.50, 17), (18.99, 18), (19.56, 19)]),
        (24, [(21.37, 21), (22.88, 22), (23.47, 23)]),
        (32, [(29.16, 29), (30.69, 30), (31.32, 31)]),
    ];
    for (traces, cols) in rows {
        for (d, (bits, usable)) in [0, 2, 4].into_iter().zip(cols) {
            let got = effective_bits(traces, bound(d)).unwrap();
            assert!(
                (got.bits - bits).abs() < 0.005,
                "{traces} traces d={d}: {}",
                got.bits
            );
            assert_eq!(got.usable, usable, "{traces} traces d={d}");
        }
    }
}

// Table 4: traces required with finite disparity.
#[test]
fn table4_traces_with_disparity() {
    for (bits, zs0, zs2, zs4) in [
        (8, 12, 10, 10),
        (12, 16, 14, 14),
        (16, 20, 18, 18),
        (20, 24, 22, 22),
        (24, 28, 26, 26),
        (32, 36, 34, 34),
    ] {
        for (d, want) in [(0, zs0), (2, zs2), (4, zs4)] {
            assert_eq!(
                traces_required(bits, SchemeKind::ZeroSum(bound(d))).unwrap(),
                want,
                "{bits} bits d={d}"
            );
        }
    }
}

// Table 5: the sixteen 4-bit words by disparity.
#[test]
fn table5_four_bit_disparities() {
    let columns: [(i32, &[&str]); 5] = [
        (-4, &["0000"]),
        (-2, &["0001", "0010", "0100", "1000"]),
        (0, &["0011", "0101", "0110", "1001", "1010", "1100"]),
        (2, &["0111", "1011", "1101", "1110"]),
        (4, &["1111"]),
    ];
    let mut seen = 0;
    for (d, words) in columns {
        for w in words {
            assert_eq!(CodeWord::parse(w).unwrap().disparity(), d, "{w}");
            seen += 1;
        }
    }
    assert_eq!(seen, 16);
    let balanced: Vec<String> = enumerate_codewords(4, DisparityBound::BALANCED)
        .unwrap()
        .iter()
        .map(ToString::to_string)
        .collect();
    assert_eq!(balanced, ["0011", "0101", "0110", "1001", "1010", "1100"]);
    assert_eq!(enumerate_codewords(4, bound(2)).unwrap().len(), 14);
    let two: Vec<String> = enumerate_codewords(2, DisparityBound::BALANCED)
        .unwrap()
        .iter()
        .map(ToString::to_string)
        .collect();
    assert_eq!(two, ["01", "10"]);
}

// Figure 2: forty 12-bit words, one per column, each with six ones.
#[test]
fn figure2_columns_are_balanced() {
    let rows = [
        "0111101000000000110011011101000101000100",
        "0001000100001110110001101010111000001011",
        "1110011111101101000110001111111011011110",
        "0100111001110111011011000011100100110111",
        "1101110110000001000000111110000010110011",
        "1001011011011100011110111100101111010001",
        "1110100011100100101000010100010011110101",
        "0111000101100111100001100001010101001000",
        "0000000101111000111101100000011101001110",
        "1010111110010011011101011001100010101101",
        "0010011000111011101110010110001100111010",
        "1001100010011010000110100011111010100000",
    ];
    for col in 0..40 {
        let bits: Vec<bool> = rows.iter().map(|r| r.as_bytes()[col] == b'1').collect();
        let word = CodeWord::from_bits(&bits).unwrap();
        assert_eq!(word.ones(), 6, "column {col}");
        assert!(DisparityBound::BALANCED.admits(word.disparity()));
    }
}

fn round_trip(data_bits: u32, width: u32, d: u32, mode: BookMode) {
    let book = CodeBook::build(data_bits, width, bound(d), 5, mode).unwrap();
    assert_eq!(book.len(), 1 << data_bits);
    for data in 0..(1u64 << data_bits) {
        let w = book.encode(data).unwrap();
        assert!(w.disparity().unsigned_abs() <= d);
        assert_eq!(book.decode(&w).unwrap(), data);
    }
}

#[test]
fn round_trips() {
    for mode in [BookMode::Enumerated, BookMode::Sampled] {
        round_trip(2, 4, 0, mode);
        round_trip(9, 12, 0, mode);
        round_trip(15, 16, 2, mode);
    }
}

#[test]
fn capacity_and_foreign_words() {
    assert!(matches!(
        CodeBook::build(10, 12, DisparityBound::BALANCED, 0, BookMode::Enumerated),
        Err(CodecError::CapacityExceeded { .. })
    ));
    let small = CodeBook::build(2, 4, DisparityBound::BALANCED, 0, BookMode::Enumerated).unwrap();
    assert_eq!(small.len(), 4);
    assert!(matches!(
        small.decode(&CodeWord::parse("0000").unwrap()),
        Err(CodecError::UnknownCodeWord(_))
    ));
    assert!(matches!(
        small.encode(4),
        Err(CodecError::DataOutOfRange { .. })
    ));
    assert!(matches!(
        DisparityBound::new(3),
        Err(CodecError::OddDisparity(3))
    ));
}

proptest! {
    // Pascal: the offset counts over all k (both signs) sum to 2^(2N).
    #[test]
    fn offsets_sum_to_all_words(n in 1u32..40) {
        let mut total = codes_with_offset(n, 0).unwrap();
        for k in 1..=n {
            total += codes_with_offset(n, k).unwrap() * 2u32;
        }
        prop_assert_eq!(total, num_bigint::BigUint::from(1u8) << (2 * n));
    }

    #[test]
    fn sampled_books_are_sound(
        half in 2u32..=20,
        d_half in 0u32..3,
        bits in 1u32..10,
        seed in any::<u64>(),
    ) {
        let width = 2 * half;
        let d = 2 * d_half;
        prop_assume!(d <= width);
        let available = valid_word_count(width, bound(d)).unwrap();
        prop_assume!(available >= num_bigint::BigUint::from(1u8) << bits);
        let book = CodeBook::build(bits, width, bound(d), seed, BookMode::Sampled).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for (data, w) in book.table().iter().enumerate() {
            prop_assert_eq!(w.width(), width);
            prop_assert!(w.disparity().unsigned_abs() <= d);
            prop_assert!(seen.insert(w.value()));
            prop_assert_eq!(book.decode(w).unwrap(), data as u64);
        }
        let again = CodeBook::build(bits, width, bound(d), seed, BookMode::Sampled).unwrap();
        prop_assert_eq!(book.table(), again.table());
    }

    #[test]
    fn text_form_round_trips(half in 1u32..=64, raw in any::<u128>()) {
        let width = 2 * half;
        let value = if width == 128 { raw } else { raw & ((1u128 << width) - 1) };
        let w = CodeWord::new(width, value).unwrap();
        prop_assert_eq!(CodeWord::parse(&w.to_string()).unwrap(), w);
        prop_assert_eq!(w.disparity(), 2 * value.count_ones() as i32 - width as i32);
    }
}
