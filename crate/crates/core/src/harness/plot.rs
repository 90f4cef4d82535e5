//! SVG reward curves: one moving-average polyline per run with a shaded
//! one-sigma band, axis labels and a legend.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::metrics::{moving_average, RunRecord};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the figure as an SVG document.
pub fn render_svg(records: &[RunRecord], window: usize) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Usage("nothing to plot".into()));
    }
    let curves = records
        .iter()
        .map(|r| moving_average(&r.rewards(), window))
        .collect::<Result<Vec<_>>>()?;
    let x_max = curves.iter().map(|c| c.mean.len()).max().unwrap_or(0).max(2) as f64 - 1.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in &curves {
        for (m, s) in c.mean.iter().zip(&c.std) {
            lo = lo.min(m - s);
            hi = hi.max(m + s);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let sx = |i: usize| MARGIN + i as f64 / x_max * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">Episode</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {})">Reward (moving average, window {window})</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{hi:.1}</text>"#, x0 - 4.0, y1 + 4.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{lo:.1}</text>"#, x0 - 4.0, y0);
    let _ = writeln!(svg, r#"<text x="{x1}" y="{}" font-size="11" text-anchor="end">{x_max}</text>"#, y0 + 16.0);

    for (k, (rec, c)) in records.iter().zip(&curves).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if c.mean.is_empty() {
            continue;
        }
        let upper = c.mean.iter().zip(&c.std).enumerate().map(|(i, (m, s))| format!("{:.2},{:.2}", sx(i), sy(m + s)));
        let lower =
            c.mean.iter().zip(&c.std).enumerate().rev().map(|(i, (m, s))| format!("{:.2},{:.2}", sx(i), sy(m - s)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = c.mean.iter().enumerate().map(|(i, m)| format!("{:.2},{:.2}", sx(i), sy(*m))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="curve" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = MARGIN + 18.0 * k as f64;
        let lx = WIDTH - MARGIN - 200.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}" font-size="12">{}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&rec.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(records: &[RunRecord], out: &Path, window: usize) -> Result<()> {
    let svg = render_svg(records, window)?;
    std::fs::write(out, svg).map_err(|e| Error::Io(format!("{}: {e}", out.display())))
}
