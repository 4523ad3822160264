//! Standalone SVG line charts.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Optional symmetric band (e.g. one standard deviation) per point.
    pub band: Option<Vec<f64>>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            band: None,
        }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round tick spacing covering `span` in about five steps.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    mag * if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn tick_label(v: f64, step: f64) -> String {
    if step >= 1.0 && v.abs() >= 1e4 {
        format!("{:.0}k", v / 1e3)
    } else if step >= 1.0 {
        format!("{v:.0}")
    } else {
        let digits = (-step.log10()).ceil().max(0.0) as usize;
        format!("{v:.digits$}")
    }
}

fn bounds(series: &[Series]) -> Option<(f64, f64, f64, f64)> {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (k, &(x, y)) in s.points.iter().enumerate() {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            let e = s.band.as_ref().map_or(0.0, |band| band[k]);
            b.0 = b.0.min(x);
            b.1 = b.1.max(x);
            b.2 = b.2.min(y - e);
            b.3 = b.3.max(y + e);
        }
    }
    if !b.0.is_finite() {
        return None;
    }
    if b.1 - b.0 < 1e-12 {
        b.1 = b.0 + 1.0;
    }
    if b.3 - b.2 < 1e-12 {
        b.2 -= 0.5;
        b.3 += 0.5;
    }
    Some(b)
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title)
    );
    let Some((x0, x1, y0, y1)) = bounds(series) else {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, W / 2.0, H / 2.0);
        out.push_str("</svg>\n");
        return out;
    };
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for (axis, lo, hi) in [('x', x0, x1), ('y', y0, y1)] {
        let step = tick_step(hi - lo);
        let mut v = (lo / step).ceil() * step;
        while v <= hi + step * 1e-9 {
            let label = tick_label(v, step);
            if axis == 'x' {
                let px = sx(v);
                let _ = writeln!(
                    out,
                    r##"<line x1="{px:.1}" y1="{}" x2="{px:.1}" y2="{}" stroke="#ddd"/><text x="{px:.1}" y="{}" text-anchor="middle">{label}</text>"##,
                    TOP,
                    TOP + ph,
                    TOP + ph + 16.0
                );
            } else {
                let py = sy(v);
                let _ = writeln!(
                    out,
                    r##"<line x1="{LEFT}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{label}</text>"##,
                    LEFT + pw,
                    LEFT - 6.0,
                    py + 4.0
                );
            }
            v += step;
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(usize, f64, f64)> = s
            .points
            .iter()
            .enumerate()
            .filter(|(_, (x, y))| x.is_finite() && y.is_finite())
            .map(|(i, &(x, y))| (i, x, y))
            .collect();
        if let Some(band) = &s.band {
            if pts.len() > 1 {
                let mut d = String::new();
                for &(i, x, y) in &pts {
                    let _ = write!(d, "{:.1},{:.1} ", sx(x), sy(y + band[i]));
                }
                for &(i, x, y) in pts.iter().rev() {
                    let _ = write!(d, "{:.1},{:.1} ", sx(x), sy(y - band[i]));
                }
                let _ = writeln!(
                    out,
                    r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                    d.trim_end()
                );
            }
        }
        let d: Vec<String> = pts.iter().map(|&(_, x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            d.join(" ")
        );
        if pts.len() == 1 {
            let (_, x, y) = pts[0];
            let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = TOP + 12.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_handles_empty() {
        let s = Series {
            label: "a<b".into(),
            points: vec![(0.0, 0.1), (1000.0, 0.5), (2000.0, f64::NAN), (3000.0, 0.7)],
            band: Some(vec![0.05; 4]),
        };
        let svg = line_chart("t", "steps", "success", &[s]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("<polygon"));
        assert!(line_chart("t", "x", "y", &[]).contains("no data"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(1.0), 0.2);
        assert_eq!(tick_step(300_000.0), 50_000.0);
        assert_eq!(tick_label(0.4, 0.2), "0.4");
        assert_eq!(tick_label(150_000.0, 50_000.0), "150k");
    }
}
