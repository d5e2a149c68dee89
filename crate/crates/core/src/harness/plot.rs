//! Static SVG renderings of a metrics file: the cost curve and the planar
//! trajectories of every robot.

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::output::NumericTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Option<Self> {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = x;
        for (a, b) in points {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
        if !x.0.is_finite() {
            return None;
        }
        let pad = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Some(Self { x: pad(x), y: pad(y) })
    }

    fn map(&self, (a, b): (f64, f64)) -> (f64, f64) {
        let u = MARGIN + (a - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN);
        let v = HEIGHT - MARGIN - (b - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN);
        (u, v)
    }
}

fn open_svg(title: &str, frame: &Frame, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, WIDTH / 2.0);
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" text-anchor="start">{:.4}</text>"#, y0 + 16.0, frame.x.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.4}</text>"#, WIDTH - MARGIN, y0 + 16.0, frame.x.1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, WIDTH / 2.0, HEIGHT - 10.0);
    let _ = writeln!(s, r#"<text x="4" y="{}" text-anchor="start">{:.4e}</text>"#, y0, frame.y.0);
    let _ = writeln!(s, r#"<text x="4" y="{}" text-anchor="start">{:.4e}</text>"#, MARGIN - 4.0, frame.y.1);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    s
}

fn polyline(s: &mut String, frame: &Frame, pts: &[(f64, f64)], color: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (u, v) = frame.map(*p);
            format!("{u:.2},{v:.2}")
        })
        .collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
}

/// Global cost against iteration.
pub fn cost_svg(metrics: &NumericTable) -> Result<String> {
    let k = metrics.column("k").ok_or_else(|| Error::Config("metrics file has no k column".into()))?;
    let cost = metrics.column("global_cost").ok_or_else(|| Error::Config("metrics file has no global_cost column".into()))?;
    let pts: Vec<(f64, f64)> = k.iter().zip(&cost).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
    let frame = Frame::fit(pts.iter().copied()).ok_or_else(|| Error::Config("metrics file has no rows".into()))?;
    let mut s = open_svg("Global cost", &frame, "iteration", "cost");
    polyline(&mut s, &frame, &pts, PALETTE[0]);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Paths of every robot in its first two coordinates. Robots appear as gaps
/// while inactive; the start is marked with a circle and the end with a square.
pub fn trajectory_svg(metrics: &NumericTable) -> Result<String> {
    let mut paths: Vec<Vec<Vec<(f64, f64)>>> = Vec::new();
    for i in 0.. {
        let (Some(xs), Some(ys)) = (metrics.column(&format!("x_{i}_0")), metrics.column(&format!("x_{i}_1"))) else {
            break;
        };
        let mut segments = vec![Vec::new()];
        for (x, y) in xs.iter().zip(&ys) {
            match (x, y) {
                (Some(x), Some(y)) => segments.last_mut().expect("non-empty").push((*x, *y)),
                _ if !segments.last().expect("non-empty").is_empty() => segments.push(Vec::new()),
                _ => {}
            }
        }
        segments.retain(|s| !s.is_empty());
        paths.push(segments);
    }
    if paths.is_empty() {
        return Err(Error::Config("metrics file has no planar position columns".into()));
    }
    let frame = Frame::fit(paths.iter().flatten().flatten().copied())
        .ok_or_else(|| Error::Config("metrics file has no positions".into()))?;
    let mut s = open_svg("Robot trajectories", &frame, "x_0", "x_1");
    for (i, segments) in paths.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for seg in segments {
            polyline(&mut s, &frame, seg, color);
        }
        if let (Some(first), Some(last)) = (segments.first().and_then(|s| s.first()), segments.last().and_then(|s| s.last())) {
            let (u, v) = frame.map(*first);
            let _ = writeln!(s, r#"<circle cx="{u:.2}" cy="{v:.2}" r="3" fill="{color}"/>"#);
            let (u, v) = frame.map(*last);
            let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="{color}"/>"#, u - 3.0, v - 3.0);
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
