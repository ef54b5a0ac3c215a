//! Minimal log–log SVG charts. Plots are views of the CSV outputs.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const MAX_POINTS: usize = 2000;

pub const DATA_COLOR: &str = "#d62728";
pub const MODEL_COLOR: &str = "#1f77b4";

pub enum Series {
    Points {
        data: Vec<(f64, f64)>,
        color: &'static str,
        label: String,
    },
    Steps {
        data: Vec<(f64, f64)>,
        color: &'static str,
        label: String,
    },
    Band {
        x: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        color: &'static str,
        label: String,
    },
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Keep at most `MAX_POINTS` points, evenly spaced in `ln x`.
fn thin_log(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let (lo, hi) = (points[0].0.ln(), points[points.len() - 1].0.ln());
    let mut out = Vec::with_capacity(MAX_POINTS + 1);
    let mut next = lo;
    let step = (hi - lo) / MAX_POINTS as f64;
    for &p in points {
        if p.0.ln() >= next {
            out.push(p);
            next = p.0.ln() + step;
        }
    }
    if out.last() != points.last() {
        out.push(points[points.len() - 1]);
    }
    out
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x.log10() - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y.log10() - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn positive_extent(plot: &Plot) -> Option<(f64, f64, f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in &plot.series {
        match s {
            Series::Points { data, .. } | Series::Steps { data, .. } => {
                for &(x, y) in data {
                    xs.push(x);
                    ys.push(y);
                }
            }
            Series::Band {
                x, lower, upper, ..
            } => {
                xs.extend(x);
                ys.extend(lower);
                ys.extend(upper);
            }
        }
    }
    let fold = |v: &[f64]| {
        v.iter()
            .filter(|a| **a > 0.0 && a.is_finite())
            .fold(None, |acc: Option<(f64, f64)>, &a| match acc {
                None => Some((a, a)),
                Some((l, h)) => Some((l.min(a), h.max(a))),
            })
    };
    let (xl, xh) = fold(&xs)?;
    let (yl, yh) = fold(&ys)?;
    Some((xl, xh, yl, yh))
}

fn decade_bounds(lo: f64, hi: f64) -> (f64, f64) {
    let a = lo.log10().floor();
    let b = hi.log10().ceil();
    if b > a {
        (a, b)
    } else {
        (a, a + 1.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn render_loglog(plot: &Plot) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&plot.title)
    );
    let Some((xl, xh, yl, yh)) = positive_extent(plot) else {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">no positive data</text></svg>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        return out;
    };
    let (x0, x1) = decade_bounds(xl, xh);
    let (y0, y1) = decade_bounds(yl, yh);
    let ax = Axes { x0, x1, y0, y1 };
    let floor_y = 10f64.powf(y0);

    // Frame, decade ticks and labels.
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for d in x0 as i32..=x1 as i32 {
        let x = ax.px(10f64.powi(d));
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{t}" x2="{x:.2}" y2="{b}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#,
            b + 16.0
        );
    }
    for d in y0 as i32..=y1 as i32 {
        let y = ax.py(10f64.powi(d));
        let _ = writeln!(
            out,
            r##"<line x1="{l}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
            l - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        HEIGHT - 12.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(&plot.y_label)
    );

    let mut legend_y = t + 16.0;
    for s in &plot.series {
        let (color, label) = match s {
            Series::Band {
                x,
                lower,
                upper,
                color,
                label,
            } => {
                let pts: Vec<(f64, f64, f64)> = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .filter(|(x, (_, u))| **x > 0.0 && **u > 0.0)
                    .map(|(x, (l, u))| (*x, l.max(floor_y), *u))
                    .collect();
                let up: Vec<(f64, f64)> =
                    thin_log(&pts.iter().map(|p| (p.0, p.2)).collect::<Vec<_>>());
                let lo: Vec<(f64, f64)> =
                    thin_log(&pts.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>());
                if !up.is_empty() {
                    let mut d = String::new();
                    for (i, (x, y)) in up.iter().enumerate() {
                        let _ = write!(
                            d,
                            "{}{:.2},{:.2} ",
                            if i == 0 { "M" } else { "L" },
                            ax.px(*x),
                            ax.py(*y)
                        );
                    }
                    for (x, y) in lo.iter().rev() {
                        let _ = write!(d, "L{:.2},{:.2} ", ax.px(*x), ax.py(*y));
                    }
                    let _ = writeln!(
                        out,
                        r#"<path d="{d}Z" fill="{color}" fill-opacity="0.3" stroke="{color}" stroke-width="0.5"/>"#
                    );
                }
                (*color, label)
            }
            Series::Points { data, color, label } => {
                let pts: Vec<(f64, f64)> = data
                    .iter()
                    .copied()
                    .filter(|p| p.0 > 0.0 && p.1 > 0.0)
                    .collect();
                for (x, y) in thin_log(&pts) {
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{color}"/>"#,
                        ax.px(x),
                        ax.py(y)
                    );
                }
                (*color, label)
            }
            Series::Steps { data, color, label } => {
                let pts: Vec<(f64, f64)> = data
                    .iter()
                    .copied()
                    .filter(|p| p.0 > 0.0 && p.1 > 0.0)
                    .collect();
                let pts = thin_log(&pts);
                if !pts.is_empty() {
                    let mut d = String::new();
                    for (i, (x, y)) in pts.iter().enumerate() {
                        if i == 0 {
                            let _ = write!(d, "M{:.2},{:.2} ", ax.px(*x), ax.py(*y));
                        } else {
                            let _ = write!(d, "H{:.2} V{:.2} ", ax.px(*x), ax.py(*y));
                        }
                    }
                    let _ = writeln!(
                        out,
                        r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
                    );
                }
                (*color, label)
            }
        };
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/>"#,
            r - 150.0,
            legend_y - 10.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{legend_y}">{}</text>"#,
            r - 132.0,
            escape(label)
        );
        legend_y += 18.0;
    }
    out.push_str("</svg>\n");
    out
}
