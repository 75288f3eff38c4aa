//! Static SVG rendering of an aggregate CSV: one polyline per method, NMSE
//! in dB against α or r_x.

use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use super::config::Method;
use super::experiment::AggregateRow;
use super::output::read_aggregate_csv;
use crate::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
/// dB value drawn for an NMSE of exactly zero.
const DB_FLOOR: f64 = -100.0;
const PALETTE: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XAxis {
    /// α when only α varies (or both vary), r_x when only r_x varies.
    #[default]
    Auto,
    Alpha,
    Rate,
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Keeps the sweep along `axis`: the rows sharing the fixed coordinate that
/// has the most distinct x values (smallest fixed value on ties).
fn select_sweep(rows: &[AggregateRow], axis: XAxis) -> (XAxis, Vec<&AggregateRow>) {
    let axis = match axis {
        XAxis::Auto => {
            let alphas = distinct(rows.iter().map(|r| r.alpha)).len();
            let rates = distinct(rows.iter().map(|r| r.r_x)).len();
            if rates > 1 && alphas == 1 {
                XAxis::Rate
            } else {
                XAxis::Alpha
            }
        }
        a => a,
    };
    type Key = fn(&AggregateRow) -> f64;
    let (x_of, fixed_of): (Key, Key) = match axis {
        XAxis::Rate => (|r| r.r_x, |r| r.alpha),
        _ => (|r| r.alpha, |r| r.r_x),
    };
    let mut best: Option<(usize, f64)> = None;
    for f in distinct(rows.iter().map(fixed_of)) {
        let count = distinct(rows.iter().filter(|r| fixed_of(r) == f).map(x_of)).len();
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, f));
        }
    }
    let fixed = best.map_or(f64::NAN, |(_, f)| f);
    (axis, rows.iter().filter(|r| fixed_of(r) == fixed).collect())
}

fn db(row: &AggregateRow) -> f64 {
    let v = if row.nmse_db.is_finite() { row.nmse_db } else { DB_FLOOR };
    v.max(DB_FLOOR)
}

/// Renders the SVG document for aggregate rows.
pub fn render_svg(rows: &[AggregateRow], axis: XAxis) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("CSV has no data rows".into()));
    }
    let (axis, rows) = select_sweep(rows, axis);
    let x_of = |r: &AggregateRow| if axis == XAxis::Rate { r.r_x } else { r.alpha };
    let mut methods: Vec<Method> = Vec::new();
    for r in &rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }

    let xs = distinct(rows.iter().map(|r| x_of(r)));
    let (mut x_lo, mut x_hi) = (xs[0], xs[xs.len() - 1]);
    if x_hi - x_lo <= 0.0 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    let ys: Vec<f64> = rows.iter().map(|r| db(r)).collect();
    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut y_lo = (y_min / 5.0).floor() * 5.0;
    let mut y_hi = (y_max / 5.0).ceil() * 5.0;
    if y_hi - y_lo < 5.0 {
        y_lo -= 2.5;
        y_hi += 2.5;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let x_label = if axis == XAxis::Rate {
        "quantization rate r_x (bits/component)"
    } else {
        "measurement rate alpha = N/M"
    };
    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );

    // y grid every 5 dB, or coarser when the span is wide
    let span = y_hi - y_lo;
    let step = if span > 60.0 { 20.0 } else if span > 30.0 { 10.0 } else { 5.0 };
    let mut tick = (y_lo / step).ceil() * step;
    while tick <= y_hi + 1e-9 {
        let y = py(tick);
        let _ = writeln!(
            w,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{tick:.0}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
        tick += step;
    }
    for &x in &xs {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(x),
            TOP + plot_h + 18.0,
            trim_number(x)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        w,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">NMSE (dB)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, method) in methods.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.method == *method)
            .map(|r| (x_of(r), db(r)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            w,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        for &(x, y) in &pts {
            let _ = writeln!(
                w,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = TOP + 16.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(
            w,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}">{method}</text>"#, lx + 30.0, ly + 4.0);
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Reads an aggregate CSV and writes its SVG plot.
pub fn emit_plot(csv_path: &Path, out_path: &Path, axis: XAxis) -> Result<()> {
    let file = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let rows = read_aggregate_csv(file)?;
    let svg = render_svg(&rows, axis)?;
    std::fs::write(out_path, svg).map_err(|e| Error::io(out_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, alpha: f64, r_x: f64, nmse: f64) -> AggregateRow {
        AggregateRow {
            method,
            alpha,
            r_x,
            n: 0,
            r_y_base: 0,
            trials: 1,
            nmse,
            nmse_db: super::super::to_db(nmse),
            mean_iterations: 0.0,
            mean_recon_calls: 0.0,
        }
    }

    #[test]
    fn one_polyline_per_method() {
        let rows = vec![
            row(Method::Abs, 0.1, 0.75, 0.9),
            row(Method::Abs, 0.25, 0.75, 0.05),
            row(Method::NearestNeighbor, 0.1, 0.75, 0.95),
            row(Method::NearestNeighbor, 0.25, 0.75, 0.1),
        ];
        let svg = render_svg(&rows, XAxis::Auto).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg, render_svg(&rows, XAxis::Auto).unwrap());
        assert!(svg.contains("measurement rate"));
    }

    #[test]
    fn unit_nmse_sits_at_zero_db() {
        let rows = vec![
            row(Method::SupportSet, 0.1, 0.75, 1.0),
            row(Method::SupportSet, 0.25, 0.75, 1.0),
        ];
        let svg = render_svg(&rows, XAxis::Alpha).unwrap();
        // y range becomes [-2.5, 2.5]; 0 dB maps to the vertical middle
        let mid = TOP + (HEIGHT - TOP - BOTTOM) / 2.0;
        assert!(svg.contains(&format!("{:.2},{mid:.2}", LEFT)), "{svg}");
    }

    #[test]
    fn empty_rows_rejected() {
        assert!(matches!(render_svg(&[], XAxis::Auto), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn mixed_sweeps_pick_one_axis() {
        let rows = vec![
            row(Method::Abs, 0.1, 0.75, 0.9),
            row(Method::Abs, 0.25, 0.75, 0.1),
            row(Method::Abs, 0.5, 0.75, 0.2),
            row(Method::Abs, 0.25, 0.5, 0.3),
            row(Method::Abs, 0.25, 1.0, 0.05),
        ];
        let by_alpha = render_svg(&rows, XAxis::Auto).unwrap();
        assert_eq!(by_alpha.matches("<circle").count(), 3);
        let by_rate = render_svg(&rows, XAxis::Rate).unwrap();
        assert_eq!(by_rate.matches("<circle").count(), 3);
        assert!(by_rate.contains("quantization rate"));
    }
}
