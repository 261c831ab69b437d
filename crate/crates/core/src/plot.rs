//! Minimal self-contained SVG charts. Output depends only on the inputs,
//! so plots are reproducible byte for byte.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    out: String,
}

impl Frame {
    fn new(
        title: &str,
        x_label: &str,
        y_label: &str,
        x: (f64, f64),
        y: (f64, f64),
        x_ticks: bool,
    ) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
        let _ = writeln!(
            out,
            r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 14.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
        let mut f = Frame { x, y, out };
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = x.0 + t * (x.1 - x.0);
            let yv = y.0 + t * (y.1 - y.0);
            let (px, py) = (f.px(xv), f.py(yv));
            if x_ticks {
                let _ = writeln!(
                    f.out,
                    r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                    y0 + 16.0,
                    tick(xv)
                );
            }
            let _ = writeln!(
                f.out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                py + 4.0,
                tick(yv)
            );
        }
        f
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn legend(&mut self, names: &[String]) {
        for (i, name) in names.iter().enumerate() {
            let y = TOP + 8.0 + 16.0 * i as f64;
            let x = W - RIGHT - 150.0;
            let _ = writeln!(
                self.out,
                r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                y - 9.0,
                PALETTE[i % PALETTE.len()],
                x + 14.0,
                y,
                escape(name)
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || (v.fract().abs() < 1e-9 && v.abs() >= 10.0) {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let xs = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let ys = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut f = Frame::new(title, x_label, y_label, xs, ys, true);
    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (j, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2} {:.2} ",
                if j == 0 { "M" } else { "L" },
                f.px(x),
                f.py(y)
            );
        }
        let _ = writeln!(
            f.out,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            d.trim_end(),
            PALETTE[i % PALETTE.len()]
        );
    }
    let names: Vec<String> = series.iter().map(|s| s.name.clone()).collect();
    f.legend(&names);
    f.finish()
}

/// Scatter plot of `(label, x, y)`; points are colored by label in sorted
/// label order.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(String, f64, f64)]) -> String {
    let xs = bounds(points.iter().map(|p| p.1));
    let ys = bounds(points.iter().map(|p| p.2));
    let mut f = Frame::new(title, x_label, y_label, xs, ys, true);
    let mut labels: Vec<String> = points.iter().map(|p| p.0.clone()).collect();
    labels.sort();
    labels.dedup();
    for (label, x, y) in points {
        let c = labels.binary_search(label).unwrap_or(0);
        let _ = writeln!(
            f.out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}" fill-opacity="0.8"/>"#,
            f.px(*x),
            f.py(*y),
            PALETTE[c % PALETTE.len()]
        );
    }
    f.legend(&labels);
    f.finish()
}

/// Grouped bars: one group per category, one bar per series.
pub fn bar_chart(
    title: &str,
    y_label: &str,
    categories: &[String],
    series: &[(String, Vec<f64>)],
) -> String {
    let top = series
        .iter()
        .flat_map(|s| s.1.iter().copied())
        .fold(0.0_f64, f64::max);
    let ys = (0.0, if top > 0.0 { top * 1.05 } else { 1.0 });
    let n = categories.len().max(1) as f64;
    let mut f = Frame::new(title, "", y_label, (0.0, n), ys, false);
    let group_w = (W - LEFT - RIGHT) / n;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (ci, cat) in categories.iter().enumerate() {
        let gx = LEFT + group_w * ci as f64 + group_w * 0.1;
        for (si, (_, values)) in series.iter().enumerate() {
            let v = values.get(ci).copied().unwrap_or(0.0);
            let (y0, y1) = (f.py(0.0), f.py(v));
            let _ = writeln!(
                f.out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                gx + bar_w * si as f64,
                y1,
                bar_w,
                (y0 - y1).max(0.0),
                PALETTE[si % PALETTE.len()]
            );
        }
        let _ = writeln!(
            f.out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            gx + group_w * 0.4,
            H - BOTTOM + 30.0,
            escape(cat)
        );
    }
    let names: Vec<String> = series.iter().map(|s| s.0.clone()).collect();
    f.legend(&names);
    f.finish()
}
