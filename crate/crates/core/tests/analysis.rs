use proptest::prelude::*;
use zerosum_core::analysis::{
    differential_eye, fold_eye, measure_eye, rail_ripple, summarize, summarize_values,
    vertical_eye_opening, FoldedEye, AnalysisError, EyeMetrics, EyeSettings, DEFAULT_APERTURE,
};

const UI: f64 = 50e-12;
const DT: f64 = 1e-12;

// NRZ between `lo` and `hi` with linear edges of `edge` seconds starting at each boundary.
fn nrz(bits: &[bool], lo: f64, hi: f64, edge: f64) -> Vec<f64> {
    let n = (bits.len() as f64 * UI / DT) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 * DT;
            let k = (t / UI) as usize;
            let level = |b: bool| if b { hi } else { lo };
            let cur = level(bits[k]);
            let prev = level(bits[k.saturating_sub(1)]);
            let x = ((t - k as f64 * UI) / edge).min(1.0);
            prev + (cur - prev) * x
        })
        .collect()
}

fn prbs_bits(n: usize) -> Vec<bool> {
    zerosum_core::stimulus::prbs7_stream(5, n).unwrap()
}

#[test]
fn dc_input_is_one_level() {
    let eye = fold_eye(&vec![0.4; 2000], DT, UI, 0.0, 0.0).unwrap();
    assert!(eye.points.iter().all(|&(_, v)| v == 0.4));
    let o = vertical_eye_opening(&eye, DEFAULT_APERTURE).unwrap();
    assert_eq!(o.volts, 0.0);
    assert!(o.single_rail);
}

#[test]
fn clean_terminated_nrz_is_500_mv() {
    let w = nrz(&prbs_bits(64), 0.25, 0.75, 10e-12);
    let m = measure_eye(0, &w, DT, 0.0, &EyeSettings::new(UI, 8.0 * UI)).unwrap();
    assert!((m.vertical_opening - 0.5).abs() < 1e-9, "{}", m.vertical_opening);
    let toggle: Vec<bool> = (0..64).map(|k| k % 2 == 0).collect();
    let eye = fold_eye(&nrz(&toggle, 0.25, 0.75, 10e-12), DT, UI, 0.0, 8.0 * UI).unwrap();
    let inside: Vec<f64> = eye
        .points
        .iter()
        .filter(|(p, _)| (p - 0.5).abs() < 0.2)
        .map(|&(_, v)| v)
        .collect();
    assert!(inside.iter().all(|&v| v == 0.25 || v == 0.75));
}

#[test]
fn crossing_traces_close_the_eye() {
    // two traces sweeping rail to rail straight through the aperture; the
    // opening left is one sample step
    let steps = 10_000;
    let points = (0..=steps)
        .flat_map(|i| {
            let x = i as f64 / steps as f64;
            let phase = 0.45 + 0.1 * x;
            [(phase, x), (phase, 1.0 - x)]
        })
        .collect();
    let eye = FoldedEye { ui: UI, points };
    let o = vertical_eye_opening(&eye, DEFAULT_APERTURE).unwrap();
    assert!(o.volts <= 1.0 / steps as f64 + 1e-12, "{}", o.volts);
    assert!(!o.single_rail);
}

#[test]
fn ideal_differential_pair() {
    let bits = prbs_bits(64);
    let t = nrz(&bits, 0.25, 0.75, 10e-12);
    let c: Vec<f64> = t.iter().map(|v| 1.0 - v).collect();
    let s = EyeSettings::new(UI, 8.0 * UI);
    let d = differential_eye(0, &t, &c, DT, 0.0, &s).unwrap();
    assert!((d.full.vertical_opening - 1.0).abs() < 1e-9);
    assert!((d.halved() - 0.5).abs() < 1e-9);
    let same = differential_eye(0, &t, &t, DT, 0.0, &s).unwrap();
    assert_eq!(same.full.vertical_opening, 0.0);
    assert!(matches!(
        differential_eye(0, &t, &t[1..], DT, 0.0, &s),
        Err(AnalysisError::GridMismatch(..))
    ));
}

#[test]
fn ripple_examples() {
    let n = 1000;
    let vdd = vec![1.0; n];
    let vss = vec![0.0; n];
    let r = rail_ripple(&vdd, &vss, DT, 1.0, 0.0).unwrap();
    assert_eq!(r.peak_to_peak, 0.0);
    let a = 0.07;
    let wobbly: Vec<f64> = (0..n)
        .map(|i| 1.0 + a * (2.0 * std::f64::consts::PI * i as f64 / 100.0).sin())
        .collect();
    let r = rail_ripple(&wobbly, &vss, DT, 1.0, 0.0).unwrap();
    assert!((r.peak_to_peak - 2.0 * a).abs() < 1e-9);
    assert!((r.max_excursion_from_nominal - a).abs() < 1e-9);
    // a common shift of both rails is not ripple
    let up: Vec<f64> = wobbly.iter().map(|v| v - 1.0).collect();
    let r = rail_ripple(&wobbly, &up, DT, 1.0, 0.0).unwrap();
    assert!(r.peak_to_peak.abs() < 1e-12);
}

fn eye(lane: usize, v: f64) -> EyeMetrics {
    EyeMetrics {
        lane,
        vertical_opening: v,
        sample_count: 1,
        ui: UI,
        aperture: DEFAULT_APERTURE,
        phase_offset: 0.0,
        single_rail: false,
    }
}

#[test]
fn summary_examples() {
    let s = summarize(&[eye(0, 0.1), eye(1, 0.2), eye(2, 0.3)]).unwrap();
    assert_eq!((s.min, s.max), (0.1, 0.3));
    assert!((s.mean - 0.2).abs() < 1e-15);
    let one = summarize(&[eye(0, 0.42)]).unwrap();
    assert_eq!((one.min, one.mean, one.max), (0.42, 0.42, 0.42));
    assert!(matches!(summarize(&[]), Err(AnalysisError::Empty)));
}

fn waveform() -> impl Strategy<Value = Vec<f64>> {
    (
        proptest::collection::vec(any::<bool>(), 20..40),
        0.0f64..0.2,
        0.3f64..1.0,
        proptest::collection::vec(-0.02f64..0.02, 64),
        1e-12f64..30e-12,
    )
        .prop_map(|(bits, lo, swing, noise, edge)| {
            nrz(&bits, lo, lo + swing, edge)
                .iter()
                .enumerate()
                .map(|(i, v)| v + noise[(i * 7) % noise.len()])
                .collect()
        })
}

proptest! {
    #[test]
    fn opening_is_translation_invariant(w in waveform(), shift in -2.0f64..2.0) {
        let s = EyeSettings::new(UI, 2.0 * UI);
        let a = measure_eye(0, &w, DT, 0.0, &s).unwrap();
        let moved: Vec<f64> = w.iter().map(|v| v + shift).collect();
        let b = measure_eye(0, &moved, DT, 0.0, &s).unwrap();
        prop_assert!((a.vertical_opening - b.vertical_opening).abs() < 1e-9);
    }

    #[test]
    fn folding_is_periodic_in_phase(w in waveform(), offset in 0.0f64..50e-12, turns in -3i32..3) {
        let a = fold_eye(&w, DT, UI, offset, 0.0).unwrap();
        let b = fold_eye(&w, DT, UI, offset + turns as f64 * UI, 0.0).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            let d = (p.0 - q.0).abs();
            prop_assert!(d < 1e-6 || (1.0 - d) < 1e-6);
            prop_assert_eq!(p.1, q.1);
        }
        let oa = vertical_eye_opening(&a, 0.2).unwrap().volts;
        let ob = vertical_eye_opening(&b, 0.2).unwrap().volts;
        prop_assert!((oa - ob).abs() < 1e-12);
    }

    #[test]
    fn opening_bounded_by_range(w in waveform()) {
        let m = measure_eye(0, &w, DT, 0.0, &EyeSettings::new(UI, 0.0)).unwrap();
        let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(m.vertical_opening >= 0.0);
        prop_assert!(m.vertical_opening <= hi - lo + 1e-12);
    }

    #[test]
    fn differential_doubles_symmetric_eye(
        bits in proptest::collection::vec(any::<bool>(), 20..40),
        swing in 0.1f64..1.0,
        mid in -1.0f64..1.0,
        edge in 1e-12f64..30e-12,
    ) {
        let w = nrz(&bits, mid - swing / 2.0, mid + swing / 2.0, edge);
        let c: Vec<f64> = w.iter().map(|v| 2.0 * mid + 0.3 - v).collect();
        let s = EyeSettings::new(UI, 2.0 * UI);
        let single = measure_eye(0, &w, DT, 0.0, &s).unwrap().vertical_opening;
        let diff = differential_eye(0, &w, &c, DT, 0.0, &s).unwrap().full.vertical_opening;
        prop_assert!((diff - 2.0 * single).abs() < 1e-9);
    }

    #[test]
    fn summary_ignores_lane_order(
        mut v in proptest::collection::vec(0.0f64..1.0, 1..40),
        seed in any::<u64>(),
    ) {
        let a = summarize_values(&v).unwrap();
        let n = v.len();
        for i in (1..n).rev() {
            v.swap(i, (seed.wrapping_mul(i as u64 + 13) % (i as u64 + 1)) as usize);
        }
        let b = summarize_values(&v).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.min <= a.mean && a.mean <= a.max);
    }

    #[test]
    fn ripple_zero_iff_constant_difference(
        base in proptest::collection::vec(-1.0f64..1.0, 10..60),
        k in 0usize..10,
        bump in -0.5f64..0.5,
    ) {
        let vdd: Vec<f64> = base.iter().map(|v| v + 1.0).collect();
        let r = rail_ripple(&vdd, &base, DT, 1.0, 0.0).unwrap();
        prop_assert!(r.peak_to_peak.abs() < 1e-12);
        let mut bent = vdd.clone();
        bent[k] += bump;
        let r = rail_ripple(&bent, &base, DT, 1.0, 0.0).unwrap();
        prop_assert!((r.peak_to_peak - bump.abs()).abs() < 1e-9);
    }
}
