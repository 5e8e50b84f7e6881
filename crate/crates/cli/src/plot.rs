//! Self-contained SVG charts. No rendering dependency: output is a plain
//! SVG document, deterministic for identical input, diffable in review.

use std::fmt::Write as _;

#[derive(Debug)]
pub enum PlotError {
    Empty,
    Schema(String),
}

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlotError::Empty => write!(f, "no data rows to plot"),
            PlotError::Schema(msg) => write!(f, "schema mismatch: {msg}"),
        }
    }
}

impl std::error::Error for PlotError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 54.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn fmt_coord(x: f64) -> String {
    format!("{x:.2}")
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_series(series: &[Series]) -> Result<Self, PlotError> {
        let mut pts = series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .peekable();
        if pts.peek().is_none() {
            return Err(PlotError::Empty);
        }
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in pts {
            x_min = x_min.min(*x);
            x_max = x_max.max(*x);
            y_min = y_min.min(*y);
            y_max = y_max.max(*y);
        }
        if x_min == x_max {
            x_min -= 0.5;
            x_max += 0.5;
        }
        if y_min == y_max {
            y_min -= 0.5;
            y_max += 0.5;
        }
        let pad = (y_max - y_min) * 0.05;
        Ok(Frame {
            x_min,
            x_max,
            y_min: y_min - pad,
            y_max: y_max + pad,
        })
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

/// Tick positions with a 1-2-5 step covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.abs().log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        mag
    } else if norm < 3.5 {
        2.0 * mag
    } else if norm < 7.5 {
        5.0 * mag
    } else {
        10.0 * mag
    };
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn chart_scaffold(out: &mut String, title: &str, x_label: &str, y_label: &str, frame: &Frame) {
    let _ = write!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect width="{w}" height="{h}" fill="white"/>
<text x="{tx}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>
"##,
        w = WIDTH,
        h = HEIGHT,
        tx = (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        title = title,
    );
    // Axes box.
    let _ = write!(
        out,
        r##"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="none" stroke="black" stroke-width="1"/>
"##,
        x = fmt_coord(MARGIN_LEFT),
        y = fmt_coord(MARGIN_TOP),
        w = fmt_coord(WIDTH - MARGIN_LEFT - MARGIN_RIGHT),
        h = fmt_coord(HEIGHT - MARGIN_TOP - MARGIN_BOTTOM),
    );
    for t in ticks(frame.x_min, frame.x_max) {
        let x = frame.x(t);
        let _ = write!(
            out,
            r##"<line x1="{x}" y1="{y0}" x2="{x}" y2="{y1}" stroke="#cccccc" stroke-width="0.5"/>
<text x="{x}" y="{ty}" font-family="sans-serif" font-size="11" text-anchor="middle">{label}</text>
"##,
            x = fmt_coord(x),
            y0 = fmt_coord(MARGIN_TOP),
            y1 = fmt_coord(HEIGHT - MARGIN_BOTTOM),
            ty = fmt_coord(HEIGHT - MARGIN_BOTTOM + 16.0),
            label = fmt_num(t),
        );
    }
    for t in ticks(frame.y_min, frame.y_max) {
        let y = frame.y(t);
        let _ = write!(
            out,
            r##"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#cccccc" stroke-width="0.5"/>
<text x="{tx}" y="{ty}" font-family="sans-serif" font-size="11" text-anchor="end">{label}</text>
"##,
            x0 = fmt_coord(MARGIN_LEFT),
            x1 = fmt_coord(WIDTH - MARGIN_RIGHT),
            y = fmt_coord(y),
            tx = fmt_coord(MARGIN_LEFT - 6.0),
            ty = fmt_coord(y + 4.0),
            label = fmt_num(t),
        );
    }
    let _ = write!(
        out,
        r##"<text x="{xx}" y="{xy}" font-family="sans-serif" font-size="13" text-anchor="middle">{x_label}</text>
<text x="18" y="{yy}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {yy})">{y_label}</text>
"##,
        xx = fmt_coord((MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0),
        xy = fmt_coord(HEIGHT - 14.0),
        yy = fmt_coord((MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0),
    );
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_TOP + 14.0 + i as f64 * 20.0;
        let _ = write!(
            out,
            r##"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="{color}" stroke-width="2"/>
<text x="{tx}" y="{ty}" font-family="sans-serif" font-size="12">{name}</text>
"##,
            x0 = fmt_coord(WIDTH - MARGIN_RIGHT + 12.0),
            x1 = fmt_coord(WIDTH - MARGIN_RIGHT + 36.0),
            y = fmt_coord(y),
            tx = fmt_coord(WIDTH - MARGIN_RIGHT + 42.0),
            ty = fmt_coord(y + 4.0),
        );
    }
}

/// Multi-series polyline chart.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<String, PlotError> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty);
    }
    let frame = Frame::from_series(series)?;
    let mut out = String::new();
    chart_scaffold(&mut out, title, x_label, y_label, &frame);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for (x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            if !path.is_empty() {
                path.push(' ');
            }
            let _ = write!(path, "{},{}", fmt_coord(frame.x(*x)), fmt_coord(frame.y(*y)));
        }
        let _ = write!(
            out,
            r##"<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>
"##,
        );
    }
    legend(&mut out, &series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    Ok(out)
}

/// Grouped marker chart (one marker per point, no connecting lines).
pub fn marker_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<String, PlotError> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty);
    }
    let frame = Frame::from_series(series)?;
    let mut out = String::new();
    chart_scaffold(&mut out, title, x_label, y_label, &frame);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for (x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let (cx, cy) = (frame.x(*x), frame.y(*y));
            match i % 3 {
                0 => {
                    let _ = write!(
                        out,
                        r##"<circle cx="{}" cy="{}" r="3.5" fill="{color}"/>
"##,
                        fmt_coord(cx),
                        fmt_coord(cy),
                    );
                }
                1 => {
                    let _ = write!(
                        out,
                        r##"<rect x="{}" y="{}" width="6" height="6" fill="{color}"/>
"##,
                        fmt_coord(cx - 3.0),
                        fmt_coord(cy - 3.0),
                    );
                }
                _ => {
                    let _ = write!(
                        out,
                        r##"<polygon points="{},{} {},{} {},{}" fill="{color}"/>
"##,
                        fmt_coord(cx),
                        fmt_coord(cy - 4.0),
                        fmt_coord(cx - 3.5),
                        fmt_coord(cy + 3.0),
                        fmt_coord(cx + 3.5),
                        fmt_coord(cy + 3.0),
                    );
                }
            }
        }
    }
    legend(&mut out, &series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    Ok(out)
}

/// Node/edge layout plot for a network topology.
pub fn network_chart(
    positions: &[(f64, f64)],
    edges: &[(usize, usize)],
    region: f64,
) -> Result<String, PlotError> {
    if positions.is_empty() {
        return Err(PlotError::Empty);
    }
    let side = 460.0;
    let margin = 40.0;
    let scale = side / region;
    let px = |x: f64| margin + x * scale;
    let py = |y: f64| margin + side - y * scale;
    let mut out = String::new();
    let total = side + 2.0 * margin;
    let _ = write!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{t}" height="{t}" viewBox="0 0 {t} {t}">
<rect width="{t}" height="{t}" fill="white"/>
<rect x="{m}" y="{m}" width="{s}" height="{s}" fill="none" stroke="#999999"/>
"##,
        t = total,
        m = margin,
        s = side,
    );
    for &(l, k) in edges {
        if l >= positions.len() || k >= positions.len() {
            return Err(PlotError::Schema(format!(
                "edge ({l},{k}) references a missing node"
            )));
        }
        let _ = write!(
            out,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#7f7f7f" stroke-width="0.8"/>
"##,
            fmt_coord(px(positions[l].0)),
            fmt_coord(py(positions[l].1)),
            fmt_coord(px(positions[k].0)),
            fmt_coord(py(positions[k].1)),
        );
    }
    for (i, &(x, y)) in positions.iter().enumerate() {
        let _ = write!(
            out,
            r##"<circle cx="{cx}" cy="{cy}" r="6" fill="#1f77b4"/>
<text x="{cx}" y="{ty}" font-family="sans-serif" font-size="9" fill="white" text-anchor="middle">{n}</text>
"##,
            cx = fmt_coord(px(x)),
            cy = fmt_coord(py(y)),
            ty = fmt_coord(py(y) + 3.0),
            n = i + 1,
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
