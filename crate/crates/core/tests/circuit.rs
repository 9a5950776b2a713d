use zerosum_core::circuit::{
    dc_operating_point, dc_operating_point_with, transient, CircuitError, DriveSignal, Element,
    LinkDraw, LinkParams, LinkRanges, Netlist, NodeId, SourceWave, TlineModel, TransientConfig,
    INCH, MIL, SPEED_OF_LIGHT,
};
use zerosum_core::codec::{DisparityBound, SchemeKind};
use zerosum_core::experiment::{bit_center_variation, SliceConfig};
use zerosum_core::stimulus::{DriveWaveform, EdgeShape};

fn step_source(n: &mut Netlist, name: &str, from: f64, to: f64) -> NodeId {
    let s = n.add_node(name);
    n.source(s, SourceWave::Step { from, to, at: 0.0 });
    s
}

#[test]
fn rc_step_response() {
    let (r, c) = (1e3, 1e-9);
    let tau = r * c;
    let mut n = Netlist::new();
    let s = step_source(&mut n, "s", 0.0, 1.0);
    let out = n.add_node("out");
    n.resistor(s, out, r);
    n.capacitor(out, NodeId::GROUND, c);
    n.probe_voltage("out", out);
    let dt = tau / 100.0;
    let w = transient(&n, &[], &TransientConfig::new(dt, 8.0 * tau)).unwrap();
    let v = w.get("out").unwrap();
    let worst = v
        .iter()
        .enumerate()
        .map(|(i, x)| (x - (1.0 - (-(i as f64) * dt / tau).exp())).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.005, "max error {worst}");
}

// Times of upward crossings of `level`, linearly interpolated.
fn crossings(v: &[f64], dt: f64, level: f64) -> Vec<f64> {
    v.windows(2)
        .enumerate()
        .filter(|(_, p)| p[0] < level && p[1] >= level)
        .map(|(i, p)| (i as f64 + (level - p[0]) / (p[1] - p[0])) * dt)
        .collect()
}

#[test]
fn lc_ring_frequency() {
    let (l, c): (f64, f64) = (1e-9, 1e-12);
    let f0 = 1.0 / (2.0 * std::f64::consts::PI * (l * c).sqrt());
    let mut n = Netlist::new();
    let s = step_source(&mut n, "s", 0.0, 1.0);
    let out = n.add_node("out");
    n.inductor(s, out, l, 0.0);
    n.capacitor(out, NodeId::GROUND, c);
    n.probe_voltage("out", out);
    let dt = 1.0 / f0 / 200.0;
    let w = transient(&n, &[], &TransientConfig::new(dt, 20.0 / f0)).unwrap();
    let x = crossings(w.get("out").unwrap(), dt, 1.0);
    assert!(x.len() >= 15);
    let period = (x[x.len() - 1] - x[1]) / (x.len() - 2) as f64;
    let f = 1.0 / period;
    assert!((f / f0 - 1.0).abs() < 0.01, "{f} vs {f0}");
}

struct Matched {
    netlist: Netlist,
    pad: NodeId,
    rx: NodeId,
    delay: f64,
}

// Driver on ideal 1 V / 0 V rails, 50 Ω lossless line, 50 Ω to 0.5 V.
fn matched_link() -> Matched {
    let tline = TlineModel::lossless(50.0, 4.0);
    let delay = tline.delay(4.0 * INCH);
    let mut n = Netlist::new();
    let vdd = n.add_node("vdd");
    n.source(vdd, SourceWave::Dc(1.0));
    let term = n.add_node("vterm");
    n.source(term, SourceWave::Dc(0.5));
    let input = n.add_node("i");
    n.source(
        input,
        SourceWave::Drive {
            lane: 0,
            low: 0.0,
            high: 1.0,
        },
    );
    let pad = n.add_node("pad");
    let rx = n.add_node("rx");
    n.add(Element::Driver {
        input,
        vdd,
        vss: NodeId::GROUND,
        out: pad,
        r_out: 50.0,
        input_swing: 1.0,
        overlap: 0.0,
    });
    n.add(Element::TransmissionLine {
        near: pad,
        far: rx,
        z0: 50.0,
        delay,
    });
    n.resistor(rx, term, 50.0);
    n.probe_voltage("pad", pad);
    n.probe_voltage("rx", rx);
    Matched {
        netlist: n,
        pad,
        rx,
        delay,
    }
}

#[test]
fn matched_line_levels_delay_and_reflection() {
    let m = matched_link();
    assert!((m.delay - 4.0 * INCH * 2.0 / SPEED_OF_LIGHT).abs() < 1e-18);

    let low = |_t: f64| 0.0;
    let high = |_t: f64| 1.0;
    let dc = dc_operating_point_with(&m.netlist, &[&low]).unwrap();
    assert!((dc.voltage(m.rx) - 0.25).abs() < 1e-12, "{} {}", dc.voltage(m.rx), dc.voltage(m.pad));
    let dc = dc_operating_point_with(&m.netlist, &[&high]).unwrap();
    assert!((dc.voltage(m.rx) - 0.75).abs() < 1e-12);

    // hard step at t0; delay deliberately not a multiple of dt
    let dt = 0.37e-12;
    let t0 = 50e-12;
    let step = move |t: f64| if t < t0 { 0.0 } else { 1.0 };
    let t_stop = t0 + 4.0 * m.delay;
    let w = transient(&m.netlist, &[&step], &TransientConfig::new(dt, t_stop)).unwrap();
    let rx = w.get("rx").unwrap();
    let pad = w.get("pad").unwrap();
    let arrival = crossings(rx, dt, 0.5)[0];
    assert!(
        (arrival - (t0 + m.delay)).abs() <= dt,
        "arrival {arrival:e} expected {:e}",
        t0 + m.delay
    );
    let incident = 0.5;
    let after = |t: f64| (t / dt).ceil() as usize + 2;
    let rx_dev = rx[after(t0 + m.delay)..]
        .iter()
        .map(|v| (v - 0.75).abs())
        .fold(0.0, f64::max);
    let pad_dev = pad[after(t0 + 2.0 * m.delay)..]
        .iter()
        .map(|v| (v - 0.75).abs())
        .fold(0.0, f64::max);
    let reflected = rx_dev.max(pad_dev) / incident;
    assert!(reflected * reflected < 0.01, "reflection {reflected}");
}

#[test]
fn matched_line_steady_swing() {
    let m = matched_link();
    let ui = 1e-9;
    let bits: Vec<bool> = (0..16).map(|k| k % 2 == 1).collect();
    let drive = DriveWaveform::new(bits, ui, 0.1 * ui, EdgeShape::RaisedCosine).unwrap();
    let dt = 1e-12;
    let w = transient(&m.netlist, &[&drive], &TransientConfig::new(dt, 16.0 * ui)).unwrap();
    let rx = w.get("rx").unwrap();
    for k in 4..15 {
        let t = k as f64 * ui + 0.5 * ui + m.delay;
        let v = rx[(t / dt).round() as usize];
        let want = if k % 2 == 1 { 0.75 } else { 0.25 };
        assert!((v - want).abs() < 0.02 * 0.5, "bit {k}: {v}");
    }
}

#[test]
fn dc_zero_sources_and_floating_node() {
    let mut n = Netlist::new();
    let s = n.add_node("s");
    n.source(s, SourceWave::Dc(0.0));
    let a = n.add_node("a");
    let b = n.add_node("b");
    n.resistor(s, a, 10.0);
    n.inductor(a, b, 1e-9, 0.1);
    n.capacitor(b, NodeId::GROUND, 1e-12);
    n.resistor(b, NodeId::GROUND, 5.0);
    let dc = dc_operating_point(&n).unwrap();
    assert!(dc.voltages().iter().all(|&v| v == 0.0));

    let f = n.add_node("island");
    n.capacitor(b, f, 1e-12);
    match dc_operating_point(&n) {
        Err(CircuitError::Singular { node }) => assert_eq!(node, "island"),
        other => panic!("expected a singular-system error, got {other:?}"),
    }
}

#[test]
fn line_shorter_than_step_is_rejected() {
    let m = matched_link();
    let low = |_t: f64| 0.0;
    let cfg = TransientConfig::new(2.0 * m.delay, 10.0 * m.delay);
    assert!(matches!(
        transient(&m.netlist, &[&low], &cfg),
        Err(CircuitError::Config(_))
    ));
}

// Source-free RLC after a 1 V -> 0 V step: stored energy never grows.
#[test]
fn passive_network_energy_decays() {
    let (c1, c2, l) = (2e-12, 1e-12, 3e-9);
    let mut n = Netlist::new();
    let s = step_source(&mut n, "s", 1.0, 0.0);
    let a = n.add_node("a");
    let b = n.add_node("b");
    n.resistor(s, a, 20.0);
    n.capacitor(a, NodeId::GROUND, c1);
    let ind = n.inductor(a, b, l, 0.5);
    n.capacitor(b, NodeId::GROUND, c2);
    n.resistor(b, NodeId::GROUND, 200.0);
    n.probe_voltage("a", a);
    n.probe_voltage("b", b);
    n.probe_current("il", vec![ind]);
    let w = transient(&n, &[], &TransientConfig::new(1e-12, 2e-9)).unwrap();
    let (va, vb, il) = (w.get("a").unwrap(), w.get("b").unwrap(), w.get("il").unwrap());
    let energy: Vec<f64> = (0..w.len())
        .map(|i| 0.5 * (c1 * va[i] * va[i] + c2 * vb[i] * vb[i] + l * il[i] * il[i]))
        .collect();
    assert!(energy[0] > 0.0);
    for i in 1..energy.len() {
        assert!(
            energy[i] <= energy[i - 1] * (1.0 + 1e-12),
            "energy rose at step {i}"
        );
    }
    assert!(energy[energy.len() - 1] < 0.01 * energy[0]);
}

fn small_slice(scheme: SchemeKind, lanes: usize) -> zerosum_core::circuit::SliceNetlist {
    let cfg = SliceConfig {
        signals_per_pg_pair: 4,
        ..SliceConfig::default()
    };
    cfg.build(scheme, lanes).unwrap()
}

fn toggles(lanes: usize, ui: f64, invert_from: usize) -> Vec<DriveWaveform> {
    (0..lanes)
        .map(|k| {
            let bits = (0..120).map(|b| (b % 2 == 0) ^ (k >= invert_from)).collect();
            DriveWaveform::new(bits, ui, 0.25 * ui, EdgeShape::RaisedCosine).unwrap()
        })
        .collect()
}

#[test]
fn slice_with_static_drivers_stays_at_dc() {
    let s = small_slice(SchemeKind::SingleEnded, 4);
    let half = |_t: f64| 1.0;
    let drives: Vec<&dyn DriveSignal> = (0..4).map(|_| &half as &dyn DriveSignal).collect();
    let w = transient(&s.netlist, &drives, &TransientConfig::new(0.5e-12, 300e-12)).unwrap();
    for (name, trace) in w.names().iter().zip(w.traces()) {
        let spread = trace.iter().fold(0.0f64, |m, v| m.max((v - trace[0]).abs()));
        assert!(spread < 1e-10, "{name} moved by {spread}");
    }
}

#[test]
fn slice_kcl_residual() {
    let s = small_slice(SchemeKind::SingleEnded, 8);
    let ui = 62.5e-12;
    let d = toggles(8, ui, 8);
    let drives: Vec<&dyn DriveSignal> = d.iter().map(|x| x as &dyn DriveSignal).collect();
    let mut cfg = TransientConfig::new(ui / 128.0, 20.0 * ui);
    cfg.check_kcl = true;
    let w = transient(&s.netlist, &drives, &cfg).unwrap();
    assert!(w.stats.max_branch_current > 1e-3);
    assert!(
        w.stats.max_kcl_residual < 1e-9 * w.stats.max_branch_current,
        "residual {} vs {}",
        w.stats.max_kcl_residual,
        w.stats.max_branch_current
    );
}

#[test]
fn transient_is_bit_reproducible() {
    let run = || {
        let s = small_slice(SchemeKind::SingleEnded, 4);
        let d = toggles(4, 62.5e-12, 2);
        let drives: Vec<&dyn DriveSignal> = d.iter().map(|x| x as &dyn DriveSignal).collect();
        transient(&s.netlist, &drives, &TransientConfig::new(0.5e-12, 1e-9)).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.names(), b.names());
    for (x, y) in a.traces().iter().zip(b.traces()) {
        assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

// Identical lanes, complementary halves, identical edges: the board-side
// supply current is the same at every bit center.
#[test]
fn zero_sum_plane_current_is_flat() {
    let cfg = SliceConfig {
        link_draw: LinkDraw::Nominal,
        ..SliceConfig::default()
    };
    let lanes = 8;
    let s = cfg
        .build(SchemeKind::ZeroSum(DisparityBound::BALANCED), lanes)
        .unwrap();
    let ui = 62.5e-12;
    let d = toggles(lanes, ui, lanes / 2);
    let drives: Vec<&dyn DriveSignal> = d.iter().map(|x| x as &dyn DriveSignal).collect();
    let dt = ui / 128.0;
    let settle = 8.0 * ui + 6.0 * s.max_line_delay;
    let t_stop = settle + 32.0 * ui;
    let w = transient(&s.netlist, &drives, &TransientConfig::new(dt, t_stop)).unwrap();
    let i = w.get("i_vdd_plane").unwrap();
    let (variation, mean) = bit_center_variation(i, dt, ui, settle);
    assert!(mean > 1e-3);
    assert!(variation < 0.01, "variation {variation}");
}

fn census_text(c: &zerosum_core::circuit::Census) -> String {
    format!(
        "nodes {}\nresistors {}\ninductors {}\ncapacitors {}\nsources {}\ndrivers {}\nlines {}\nprobes {}\n",
        c.nodes, c.resistors, c.inductors, c.capacitors, c.sources, c.drivers, c.lines, c.probes
    )
}

#[test]
fn se32_census_matches_golden_file() {
    let s = SliceConfig::default()
        .build(SchemeKind::SingleEnded, 32)
        .unwrap();
    let c = s.netlist.census();
    // composition: ground, VDD plane, termination rail, one bump per via,
    // and per lane i, two ladder mid nodes, two cell rails, pad, near, far, rx
    let lanes = 32;
    let pairs = 1;
    assert_eq!(c.nodes, 3 + 2 * pairs + 9 * lanes);
    assert_eq!(c.inductors, 2 * pairs + 4 * lanes + lanes);
    assert_eq!(c.capacitors, 2 * lanes);
    assert_eq!(c.resistors, 2 * (lanes - 1) + 2 * lanes);
    assert_eq!(c.sources, 2 + lanes);
    assert_eq!((c.drivers, c.lines), (lanes, lanes));
    assert_eq!(c.probes, 4 * lanes + 2);
    let golden = include_str!("golden/se32_census.txt");
    assert_eq!(census_text(&c), golden);
}

#[test]
fn link_draws_stay_in_range() {
    let r = LinkRanges::default();
    for seed in 0..20 {
        let links = LinkParams::draw(&r, 64, true, LinkDraw::Random { seed });
        for l in &links.lanes {
            assert!((3.98 * INCH..=4.02 * INCH).contains(&l.length));
            assert!((49.0..=51.0).contains(&l.r_term));
            assert!((0.3e-12..=0.5e-12).contains(&l.c_load));
        }
        for p in links.lanes.chunks(2) {
            assert!((p[0].length - p[1].length).abs() <= 20.0 * MIL + 1e-15);
        }
        assert_eq!(links, LinkParams::draw(&r, 64, true, LinkDraw::Random { seed }));
    }
    let diff = SliceConfig::default()
        .build(SchemeKind::Differential, 64)
        .unwrap();
    assert_eq!(diff.links.lanes.len(), 64);
    for p in diff.links.lanes.chunks(2) {
        assert!((p[0].length - p[1].length).abs() <= 20.0 * MIL + 1e-15);
    }
}

#[test]
fn slice_rejects_inconsistent_counts() {
    let cfg = SliceConfig::default();
    assert!(matches!(
        cfg.build(SchemeKind::Differential, 7),
        Err(CircuitError::Config(_))
    ));
    let pins = cfg.pinfield(4).unwrap();
    let links = LinkParams::draw(&cfg.link_ranges, 5, false, LinkDraw::Nominal);
    let r = zerosum_core::circuit::build_slice_netlist(
        SchemeKind::SingleEnded,
        &pins,
        &cfg.pdn,
        &cfg.buffer,
        &cfg.tline,
        &links,
        cfg.rails,
    );
    assert!(matches!(r, Err(CircuitError::Config(_))));
}
