//! Minimal static SVG line charts with a logarithmic x axis.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub dashed: bool,
    pub y: &'a [f64],
}

pub struct Chart<'a> {
    pub title: &'a str,
    pub y_label: &'a str,
    pub log_y: bool,
    pub x: &'a [f64],
    pub series: Vec<Series<'a>>,
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn decades(lo: f64, hi: f64) -> Vec<f64> {
    (lo.log10().ceil() as i32..=hi.log10().floor() as i32)
        .map(|k| 10f64.powi(k))
        .collect()
}

impl Chart<'_> {
    pub fn render(&self) -> String {
        let (x_lo, x_hi) = (self.x[0].ln(), self.x[self.x.len() - 1].ln());
        let transform = |v: f64| if self.log_y { v.max(1e-300).log10() } else { v };
        let finite: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.y.iter().map(|&v| transform(v)))
            .filter(|v| v.is_finite())
            .collect();
        let mut y_lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let mut y_hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if self.log_y {
            y_lo = y_lo.max(y_hi - 12.0).floor();
            y_hi = y_hi.ceil();
        } else {
            let pad = 0.05 * (y_hi - y_lo).max(1e-12);
            y_lo -= pad;
            y_hi += pad;
        }
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + (x.ln() - x_lo) / (x_hi - x_lo) * plot_w;
        let py = |y: f64| {
            let t = (transform(y).clamp(y_lo, y_hi) - y_lo) / (y_hi - y_lo);
            TOP + (1.0 - t) * plot_h
        };

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );

        for t in decades(self.x[0], self.x[self.x.len() - 1]) {
            let x = px(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="#ddd"/><text x="{x:.2}" y="{}" text-anchor="middle">{t}</text>"##,
                TOP + plot_h,
                TOP + plot_h + 18.0
            );
        }
        let y_ticks = if self.log_y {
            (y_lo as i32..=y_hi as i32).map(f64::from).collect()
        } else {
            nice_ticks(y_lo, y_hi)
        };
        for t in y_ticks {
            let (value, label) = if self.log_y {
                (10f64.powf(t), format!("1e{t}"))
            } else {
                (t, format!("{t:.3}"))
            };
            let y = py(value);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{label}</text>"##,
                LEFT + plot_w,
                LEFT - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">x</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 14.0
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            TOP + plot_h / 2.0,
            TOP + plot_h / 2.0,
            escape(self.y_label)
        );

        for (k, series) in self.series.iter().enumerate() {
            let mut points = String::new();
            for (&x, &y) in self.x.iter().zip(series.y) {
                if transform(y).is_finite() {
                    let _ = write!(points, "{:.2},{:.2} ", px(x), py(y));
                }
            }
            let dash = if series.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.6"{dash} points="{}"/>"#,
                series.color,
                points.trim_end()
            );
            let ly = TOP + 16.0 + 18.0 * k as f64;
            let lx = LEFT + plot_w - 190.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 24.0,
                series.color,
                lx + 30.0,
                ly + 4.0,
                escape(series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
