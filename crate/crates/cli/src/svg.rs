//! Minimal self-contained SVG line and bar charts.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

enum Item {
    Line { points: Vec<(f64, f64)>, color: String, width: f64, opacity: f64, label: Option<String> },
    Bars { bars: Vec<(f64, f64, f64)>, color: String, label: Option<String> },
}

pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    x_range: Option<(f64, f64)>,
    y_range: Option<(f64, f64)>,
    equal_aspect: bool,
    items: Vec<Item>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_range: None,
            y_range: None,
            equal_aspect: false,
            items: Vec::new(),
        }
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }

    /// Same data scale on both axes.
    pub fn equal_aspect(mut self) -> Self {
        self.equal_aspect = true;
        self
    }

    pub fn line(&mut self, points: Vec<(f64, f64)>, color: &str, width: f64, label: Option<&str>) {
        self.items.push(Item::Line { points, color: color.into(), width, opacity: 1.0, label: label.map(Into::into) });
    }

    pub fn faint_line(&mut self, points: Vec<(f64, f64)>, color: &str, label: Option<&str>) {
        self.items.push(Item::Line { points, color: color.into(), width: 0.8, opacity: 0.35, label: label.map(Into::into) });
    }

    /// Bars given as `(left, right, height)`.
    pub fn bars(&mut self, bars: Vec<(f64, f64, f64)>, color: &str, label: Option<&str>) {
        self.items.push(Item::Bars { bars, color: color.into(), label: label.map(Into::into) });
    }

    fn data_bounds(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        let mut add = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                xs = (xs.0.min(x), xs.1.max(x));
                ys = (ys.0.min(y), ys.1.max(y));
            }
        };
        for item in &self.items {
            match item {
                Item::Line { points, .. } => points.iter().for_each(|&(x, y)| add(x, y)),
                Item::Bars { bars, .. } => bars.iter().for_each(|&(l, r, h)| {
                    add(l, 0.0);
                    add(r, h);
                }),
            }
        }
        let pad = |(lo, hi): (f64, f64)| {
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                let d = 0.04 * (hi - lo);
                (lo - d, hi + d)
            }
        };
        (pad(xs), pad(ys))
    }

    pub fn render(&self) -> String {
        let (auto_x, auto_y) = self.data_bounds();
        let (mut x0, mut x1) = self.x_range.unwrap_or(auto_x);
        let (mut y0, mut y1) = self.y_range.unwrap_or(auto_y);
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        if self.equal_aspect {
            // Grow the tighter axis so one data unit has the same length on both.
            let scale = ((x1 - x0) / pw).max((y1 - y0) / ph);
            let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
            (x0, x1) = (cx - 0.5 * scale * pw, cx + 0.5 * scale * pw);
            (y0, y1) = (cy - 0.5 * scale * ph, cy + 0.5 * scale * ph);
        }
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#);

        for t in ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##, TOP + ph);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, label(t));
        }
        for t in ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##, LEFT + pw);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, label(t));
        }

        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
        for item in &self.items {
            match item {
                Item::Bars { bars, color, .. } => {
                    for &(l, r, h) in bars {
                        let (xa, xb) = (sx(l), sx(r));
                        let (ya, yb) = (sy(h), sy(0.0));
                        let _ = writeln!(
                            s,
                            r##"<rect x="{xa:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.45" stroke="#ffffff" stroke-width="0.5"/>"##,
                            ya.min(yb),
                            (xb - xa).max(0.0),
                            (yb - ya).abs()
                        );
                    }
                }
                Item::Line { points, color, width, opacity, .. } => {
                    let pts: Vec<String> = points
                        .iter()
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity}"/>"#,
                        pts.join(" ")
                    );
                }
            }
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333333"/>"##);

        let _ = writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 14.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let mut ly = TOP + 16.0;
        for item in &self.items {
            let (color, text) = match item {
                Item::Line { color, label: Some(l), .. } | Item::Bars { color, label: Some(l), .. } => (color, l),
                _ => continue,
            };
            let lx = LEFT + pw - 170.0;
            let _ = writeln!(s, r#"<rect x="{lx:.2}" y="{:.2}" width="18" height="4" fill="{color}"/>"#, ly - 4.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 24.0, escape(text));
            ly += 16.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Round tick positions (steps of 1, 2 or 5 times a power of ten).
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !span.is_finite() || span <= 0.0 {
        return Vec::new();
    }
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|k| k * mag).find(|&st| st >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{x:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
