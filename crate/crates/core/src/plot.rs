//! Static SVG and CSV exports: learned filters and F0 contours.

use std::fmt::Write as _;

use crate::contour::F0Contour;
use crate::engine::Tensor;
use crate::error::{Error, Result};

const PANEL_W: f64 = 220.0;
const PANEL_H: f64 = 140.0;
const MARGIN: f64 = 30.0;
const COLUMNS: usize = 3;

fn filter_rows(weights: &Tensor) -> Result<Vec<&[f64]>> {
    if weights.shape().len() != 3 {
        return Err(Error::Shape(format!(
            "filter bank must be [filters, channels, taps], got {:?}",
            weights.shape()
        )));
    }
    let per_filter = weights.shape()[1] * weights.shape()[2];
    Ok(weights.data().chunks(per_filter).collect())
}

/// One row per filter, taps in order (channels concatenated), no header.
/// Values use Rust's shortest round-trip formatting.
pub fn filters_csv(weights: &Tensor) -> Result<String> {
    let mut out = String::new();
    for row in filter_rows(weights)? {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn points_attr(points: &[(f64, f64)]) -> String {
    points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Small multiples, one panel per filter. Each panel has its own x axis
/// (tap index) and y axis (weight), drawn as `<line>` elements, and exactly
/// one `<polyline>`.
pub fn filters_svg(weights: &Tensor) -> Result<String> {
    let rows = filter_rows(weights)?;
    let n = rows.len();
    let grid_rows = n.div_ceil(COLUMNS);
    let width = COLUMNS.min(n) as f64 * (PANEL_W + MARGIN) + MARGIN;
    let height = grid_rows as f64 * (PANEL_H + 2.0 * MARGIN) + MARGIN;
    let bound = weights
        .data()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    );
    for (i, row) in rows.iter().enumerate() {
        let x0 = MARGIN + (i % COLUMNS) as f64 * (PANEL_W + MARGIN);
        let y0 = MARGIN + (i / COLUMNS) as f64 * (PANEL_H + 2.0 * MARGIN);
        let mid = y0 + PANEL_H / 2.0;
        let taps = row.len();
        let step = if taps > 1 { PANEL_W / (taps - 1) as f64 } else { 0.0 };
        let pts: Vec<(f64, f64)> = row
            .iter()
            .enumerate()
            .map(|(k, v)| (x0 + k as f64 * step, mid - v / bound * (PANEL_H / 2.0)))
            .collect();
        let _ = writeln!(svg, r#"<g id="filter-{i}">"#);
        let _ = writeln!(
            svg,
            r#"<text x="{x0:.2}" y="{:.2}">filter {}</text>"#,
            y0 - 8.0,
            i + 1
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.2}" y1="{mid:.2}" x2="{:.2}" y2="{mid:.2}" stroke="#888"/>"##,
            x0 + PANEL_W
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{:.2}" stroke="#888"/>"##,
            y0 + PANEL_H
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x0:.2}" y="{:.2}">0</text><text x="{:.2}" y="{:.2}" text-anchor="end">tap {}</text>"#,
            y0 + PANEL_H + 14.0,
            x0 + PANEL_W,
            y0 + PANEL_H + 14.0,
            taps - 1
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{bound:.3}</text>"#,
            x0 - 2.0,
            y0 + 8.0
        );
        let _ = writeln!(
            svg,
            r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{}"/>"##,
            points_attr(&pts)
        );
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// F0 over time. Voiced runs are separate polylines, so unvoiced gaps show
/// as breaks in the curve.
pub fn contour_svg(contour: &F0Contour, title: &str) -> String {
    let (w, h) = (640.0, 320.0);
    let (left, right, top, bottom) = (60.0, 20.0, 30.0, 40.0);
    let pts = contour.points();
    let t_max = contour.duration().max(1e-9);
    let t_min = pts[0].time;
    let voiced: Vec<f64> = pts.iter().map(|p| p.f0).filter(|&f| f > 0.0).collect();
    let f_lo = voiced.iter().copied().fold(f64::INFINITY, f64::min);
    let f_hi = voiced.iter().copied().fold(0.0f64, f64::max);
    let (f_lo, f_hi) = ((f_lo - 10.0).max(0.0), f_hi + 10.0);
    let span_t = (t_max - t_min).max(1e-9);
    let to_xy = |t: f64, f: f64| {
        (
            left + (t - t_min) / span_t * (w - left - right),
            h - bottom - (f - f_lo) / (f_hi - f_lo) * (h - top - bottom),
        )
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="{left}" y="18">{}</text>"#, escape(title));
    let (x_axis_y, y_axis_x) = (h - bottom, left);
    let _ = writeln!(
        svg,
        r##"<line x1="{left}" y1="{x_axis_y}" x2="{}" y2="{x_axis_y}" stroke="#444"/>"##,
        w - right
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{y_axis_x}" y1="{top}" x2="{y_axis_x}" y2="{x_axis_y}" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (s): {t_min:.3} to {t_max:.3}</text>"#,
        (left + w - right) / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="12" y="{:.1}" transform="rotate(-90 12 {:.1})" text-anchor="middle">F0 (Hz): {f_lo:.0} to {f_hi:.0}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    );
    let mut run: Vec<(f64, f64)> = Vec::new();
    fn flush(run: &mut Vec<(f64, f64)>, svg: &mut String) {
        if !run.is_empty() {
            let _ = writeln!(
                svg,
                r##"<polyline fill="none" stroke="#b03a2e" stroke-width="1.5" points="{}"/>"##,
                points_attr(run)
            );
            run.clear();
        }
    }
    for p in pts {
        if p.f0 > 0.0 {
            run.push(to_xy(p.time, p.f0));
        } else {
            flush(&mut run, &mut svg);
        }
    }
    flush(&mut run, &mut svg);
    svg.push_str("</svg>\n");
    svg
}
