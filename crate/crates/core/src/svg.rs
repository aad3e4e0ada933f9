//! Minimal self-contained SVG charts for reports.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Fixed axis ranges; computed from the data when `None`.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Chart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_range: None,
            y_range: None,
        }
    }

    pub fn x_range(mut self, lo: f64, hi: f64) -> Self {
        self.x_range = Some((lo, hi));
        self
    }

    pub fn y_range(mut self, lo: f64, hi: f64) -> Self {
        self.y_range = Some((lo, hi));
        self
    }

    pub fn line(&self, series: &[Series]) -> String {
        self.render(series, Mark::Line)
    }

    pub fn scatter(&self, series: &[Series]) -> String {
        self.render(series, Mark::Scatter)
    }

    /// Stacked areas over a shared x axis. Every layer must list the same xs.
    pub fn stacked_area(&self, layers: &[Series]) -> String {
        let mut cumulative: Vec<Series> = Vec::with_capacity(layers.len());
        for layer in layers {
            let pts = layer
                .points
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| {
                    let below = cumulative.last().map_or(0.0, |s: &Series| s.points[i].1);
                    (x, below + y)
                })
                .collect();
            cumulative.push(Series::new(layer.label.clone(), pts));
        }
        self.render(&cumulative, Mark::Area)
    }

    fn render(&self, series: &[Series], mark: Mark) -> String {
        let all = || {
            series
                .iter()
                .flat_map(|s| s.points.iter())
                .filter(|p| p.0.is_finite() && p.1.is_finite())
        };
        let (x0, x1) = self.x_range.unwrap_or_else(|| padded(all().map(|p| p.0)));
        let y_auto = padded(all().map(|p| p.1));
        let (y0, y1) = self.y_range.unwrap_or(if mark == Mark::Area {
            (0.0, y_auto.1)
        } else {
            y_auto
        });
        let frame = Frame { x0, x1, y0, y1 };

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            s,
            r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            escape(&self.title)
        );
        frame.axes(&mut s, &self.x_label, &self.y_label);

        for (i, ser) in series.iter().enumerate().rev() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<(f64, f64)> = ser
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| frame.map(x, y))
                .collect();
            match mark {
                Mark::Line => {
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                        path(&pts)
                    );
                }
                Mark::Scatter => {
                    for (x, y) in &pts {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#
                        );
                    }
                }
                Mark::Area => {
                    if let (Some(first), Some(last)) = (pts.first(), pts.last()) {
                        let base = frame.map(0.0, y0.max(0.0)).1;
                        let _ = writeln!(
                            s,
                            r#"<polygon fill="{color}" fill-opacity="0.85" stroke="none" points="{:.2},{base:.2} {} {:.2},{base:.2}"/>"#,
                            first.0,
                            path(&pts),
                            last.0
                        );
                    }
                }
            }
        }

        for (i, ser) in series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let y = MARGIN_T + 10.0 + 18.0 * i as f64;
            let x = WIDTH - MARGIN_R + 12.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{}" width="12" height="12" fill="{color}"/>"#,
                y - 10.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}">{}</text>"#,
                x + 18.0,
                escape(&ser.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Line,
    Scatter,
    Area,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let w = WIDTH - MARGIN_L - MARGIN_R;
        let h = HEIGHT - MARGIN_T - MARGIN_B;
        (
            MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * w,
            HEIGHT - MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * h,
        )
    }

    fn axes(&self, s: &mut String, x_label: &str, y_label: &str) {
        let (left, bottom) = (MARGIN_L, HEIGHT - MARGIN_B);
        let (right, top) = (WIDTH - MARGIN_R, MARGIN_T);
        let _ = writeln!(
            s,
            r##"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" fill="none" stroke="#333333"/>"##
        );
        for i in 0..=5 {
            let f = i as f64 / 5.0;
            let xv = self.x0 + f * (self.x1 - self.x0);
            let yv = self.y0 + f * (self.y1 - self.y0);
            let (px, _) = self.map(xv, self.y0);
            let (_, py) = self.map(self.x0, yv);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{bottom}" x2="{px:.2}" y2="{}" stroke="#333333"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"##,
                bottom + 5.0,
                bottom + 18.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="#333333"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                left - 5.0,
                left - 8.0,
                py + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (left + right) / 2.0,
            HEIGHT - 16.0,
            escape(x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            (top + bottom) / 2.0,
            escape(y_label)
        );
    }
}

fn padded(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo.abs() > 1e-12 {
            lo.abs() * 0.1
        } else {
            1.0
        };
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn path(pts: &[(f64, f64)]) -> String {
    pts.iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}
