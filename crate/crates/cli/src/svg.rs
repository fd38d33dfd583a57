//! Minimal self-contained SVG charts.

use std::fmt::Write as _;

pub const WIDTH: f64 = 720.0;
pub const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub const PALETTE: [&str; 8] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Layer {
    pub label: String,
    pub color: String,
    pub values: Vec<f64>,
}

/// Linear map from a data range onto the plot area.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Frame {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { x: widen(x), y: widen(y) }
    }

    pub fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    pub fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo > 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        return (lo, hi);
    }
    let pad = 0.05 * lo.abs().max(1.0);
    (lo - pad, hi + pad)
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.into() }
    }
}

fn ticks((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn header(out: &mut String, title: &str, frame: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1) = (frame.px(frame.x.0), frame.px(frame.x.1));
    let (y0, y1) = (frame.py(frame.y.0), frame.py(frame.y.1));
    for t in ticks(frame.x, 5) {
        let x = frame.px(t);
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##, y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 18.0, num(t));
    }
    for t in ticks(frame.y, 5) {
        let y = frame.py(t);
        let _ = writeln!(out, r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#333"/>"##, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, num(t));
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn axes_and_legend(out: &mut String, frame: &Frame, legend: &[(&str, &str)]) {
    let (x0, x1) = (frame.px(frame.x.0), frame.px(frame.x.1));
    let (y0, y1) = (frame.py(frame.y.0), frame.py(frame.y.1));
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        x1 - x0,
        y0 - y1
    );
    for (i, (label, color)) in legend.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="14" height="10" fill="{}"/>"#,
            x1 + 12.0,
            y - 9.0,
            escape(color)
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, x1 + 32.0, escape(label));
    }
    out.push_str("</svg>\n");
}

fn shade(out: &mut String, frame: &Frame, until: Option<f64>) {
    if let Some(n0) = until {
        let x0 = frame.px(frame.x.0);
        let x1 = frame.px(n0.clamp(frame.x.0, frame.x.1));
        let _ = writeln!(
            out,
            r##"<rect id="initial-phase" x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#bbbbbb" fill-opacity="0.5"/>"##,
            frame.py(frame.y.1),
            x1 - x0,
            frame.py(frame.y.0) - frame.py(frame.y.1)
        );
    }
}

/// Line chart; `shade_until` greys the region `x <= shade_until`.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    shade_until: Option<f64>,
) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut xr, mut yr) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for &(x, y) in all {
        xr = (xr.0.min(x), xr.1.max(x));
        yr = (yr.0.min(y), yr.1.max(y));
    }
    xr.0 = xr.0.min(0.0);
    let frame = Frame::new(xr, yr);
    let mut out = String::new();
    header(&mut out, title, &frame, x_label, y_label);
    shade(&mut out, &frame, shade_until);
    for s in series {
        let pts: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            escape(&s.label),
            escape(&s.color),
            pts.join(" ")
        );
    }
    let legend: Vec<(&str, &str)> = series.iter().map(|s| (s.label.as_str(), s.color.as_str())).collect();
    axes_and_legend(&mut out, &frame, &legend);
    out
}

/// Stacked area chart; layers are stacked bottom-up in the given order.
pub fn stacked_area(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    layers: &[Layer],
    shade_until: Option<f64>,
) -> String {
    let top: f64 = (0..xs.len())
        .map(|i| layers.iter().map(|l| l.values[i]).sum::<f64>())
        .fold(0.0, f64::max);
    let xr = xs.iter().fold((0.0f64, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let frame = Frame::new(xr, (0.0, top));
    let mut out = String::new();
    header(&mut out, title, &frame, x_label, y_label);
    let mut base = vec![0.0; xs.len()];
    for l in layers {
        let upper: Vec<f64> = base.iter().zip(&l.values).map(|(b, v)| b + v).collect();
        let mut pts: Vec<String> =
            xs.iter().zip(&upper).map(|(&x, &y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
        pts.extend(
            xs.iter().zip(&base).rev().map(|(&x, &y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))),
        );
        let _ = writeln!(
            out,
            r#"<polygon class="layer" data-label="{}" fill="{}" fill-opacity="0.85" stroke="none" points="{}"/>"#,
            escape(&l.label),
            escape(&l.color),
            pts.join(" ")
        );
        base = upper;
    }
    if let Some(n0) = shade_until {
        let x = frame.px(n0);
        let _ = writeln!(
            out,
            r##"<line id="initial-phase" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="4 3"/>"##,
            frame.py(frame.y.0),
            frame.py(frame.y.1)
        );
    }
    let legend: Vec<(&str, &str)> = layers.iter().map(|l| (l.label.as_str(), l.color.as_str())).collect();
    axes_and_legend(&mut out, &frame, &legend);
    out
}
