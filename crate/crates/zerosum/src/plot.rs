//! Minimal SVG eye diagrams and sweep charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn open(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag)
}

fn y_axis(s: &mut String, f: &Frame, label: &str) {
    let step = nice_step(f.y1 - f.y0);
    let mut y = (f.y0 / step).ceil() * step;
    while y <= f.y1 + 1e-9 * step {
        let py = f.py(y);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" x2="{}" y1="{py:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            py + 4.0,
            trim(y)
        );
        y += step;
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(label)
    );
}

fn x_label(s: &mut String, label: &str) {
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 10.0,
        escape(label)
    );
}

fn x_tick(s: &mut String, px: f64, text: &str) {
    let _ = writeln!(
        s,
        r##"<line x1="{px:.1}" x2="{px:.1}" y1="{TOP}" y2="{}" stroke="#eee"/><text x="{px:.1}" y="{}" text-anchor="middle">{}</text>"##,
        H - BOTTOM,
        H - BOTTOM + 16.0,
        escape(text)
    );
}

fn border(s: &mut String) {
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
}

fn trim(v: f64) -> String {
    let t = format!("{v:.6}");
    let t = t.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.into()
    }
}

/// Eye diagram of one trace: every UI is drawn over a two-UI window with
/// the bit center in the middle. Voltages are shown relative to the trace
/// mean; the data files keep the true voltages.
pub struct EyePlot<'a> {
    pub title: &'a str,
    pub samples: &'a [f64],
    pub dt: f64,
    pub ui: f64,
    /// Time of a bit boundary.
    pub phase_offset: f64,
    pub settle_time: f64,
    pub aperture: f64,
}

impl EyePlot<'_> {
    pub fn to_svg(&self) -> String {
        let start = (self.settle_time / self.dt).ceil() as usize;
        let kept = self.samples.get(start..).unwrap_or(&[]);
        let mean = if kept.is_empty() {
            0.0
        } else {
            kept.iter().sum::<f64>() / kept.len() as f64
        };
        let (lo, hi) = kept.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v - mean), b.max(v - mean))
        });
        let pad = ((hi - lo) * 0.08).max(1e-3);
        let f = Frame {
            x0: -0.5,
            x1: 1.5,
            y0: if lo.is_finite() { lo - pad } else { -0.5 },
            y1: if hi.is_finite() { hi + pad } else { 0.5 },
        };
        let mut s = String::new();
        open(&mut s, self.title);
        y_axis(&mut s, &f, "V - mean");
        for x in [-0.5, 0.0, 0.5, 1.0, 1.5] {
            x_tick(&mut s, f.px(x), &trim(x));
        }
        x_label(&mut s, "time (UI)");
        for x in [0.5 - self.aperture / 2.0, 0.5 + self.aperture / 2.0] {
            let px = f.px(x);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.1}" x2="{px:.1}" y1="{TOP}" y2="{}" stroke="#d62728" stroke-dasharray="4 3"/>"##,
                H - BOTTOM
            );
        }
        let mut k = ((self.settle_time - self.phase_offset) / self.ui + 0.5).ceil() as i64;
        loop {
            let b = self.phase_offset + k as f64 * self.ui;
            let i0 = ((b - 0.5 * self.ui) / self.dt).ceil().max(0.0) as usize;
            let i1 = ((b + 1.5 * self.ui) / self.dt).floor() as usize;
            if i1 >= self.samples.len() || i0 >= i1 {
                break;
            }
            s.push_str(r##"<polyline fill="none" stroke="#1f77b4" stroke-opacity="0.35" stroke-width="0.8" points=""##);
            for i in i0..=i1 {
                let x = (i as f64 * self.dt - b) / self.ui;
                let _ = write!(
                    s,
                    "{:.1},{:.1} ",
                    f.px(x),
                    f.py(self.samples[i] - mean)
                );
            }
            s.push_str("\"/>\n");
            k += 1;
        }
        border(&mut s);
        s.push_str("</svg>\n");
        s
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Line chart of one metric against a swept parameter. With `categories`
/// set, x values are indices into it.
pub struct SweepPlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub categories: Option<Vec<String>>,
    pub series: Vec<Series>,
}

impl SweepPlot<'_> {
    pub fn to_svg(&self) -> String {
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let xs: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| tx(p.0)))
            .collect();
        let ys: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .collect();
        let (mut x0, mut x1) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !x0.is_finite() {
            (x0, x1) = (0.0, 1.0);
        }
        let span = (x1 - x0).max(1e-9);
        let y1 = ys.iter().copied().fold(0.0, f64::max) * 1.1 + 1e-9;
        let f = Frame {
            x0: x0 - 0.06 * span,
            x1: x1 + 0.06 * span,
            y0: 0.0,
            y1,
        };
        let mut s = String::new();
        open(&mut s, self.title);
        y_axis(&mut s, &f, self.y_label);
        let mut ticks: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .collect();
        ticks.sort_by(f64::total_cmp);
        ticks.dedup();
        for x in ticks {
            let text = match &self.categories {
                Some(c) => c.get(x as usize).cloned().unwrap_or_default(),
                None => trim(x),
            };
            x_tick(&mut s, f.px(tx(x)), &text);
        }
        x_label(&mut s, self.x_label);
        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .map(|&(x, y)| format!("{:.1},{:.1}", f.px(tx(x)), f.py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                pts.join(" ")
            );
            for p in &pts {
                let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
            }
            let ly = TOP + 16.0 + 16.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                W - RIGHT - 150.0,
                W - RIGHT - 130.0,
                W - RIGHT - 124.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        border(&mut s);
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eye_svg_has_one_trace_per_ui() {
        let ui = 10.0;
        let samples: Vec<f64> = (0..200).map(|i| if (i / 10) % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let svg = EyePlot {
            title: "t",
            samples: &samples,
            dt: 1.0,
            ui,
            phase_offset: 0.0,
            settle_time: 20.0,
            aperture: 0.1,
        }
        .to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        // windows start at boundaries 3..=18 UI (need half a UI before, 1.5 after)
        assert_eq!(svg.matches("<polyline").count(), 16);
    }

    #[test]
    fn sweep_svg_lists_series() {
        let svg = SweepPlot {
            title: "rates",
            x_label: "Gbit/s",
            y_label: "mV",
            log_x: true,
            categories: None,
            series: vec![
                Series {
                    label: "SE".into(),
                    points: vec![(1.0, 300.0), (16.0, 50.0)],
                },
                Series {
                    label: "ZS<2>".into(),
                    points: vec![(1.0, 310.0), (16.0, 250.0)],
                },
            ],
        }
        .to_svg();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("ZS&lt;2&gt;"));
    }
}
