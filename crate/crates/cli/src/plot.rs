//! Deterministic SVG line charts and their companion point files.
//!
//! The renderer is hand-rolled so figures are byte-identical across runs and
//! machines: fixed canvas, fixed palette, fixed-precision coordinates, and no
//! dependence on system fonts beyond a generic monospace request. The exact
//! plotted points always accompany the image as CSV so every figure is
//! auditable.

use std::path::Path;

use anyhow::{Context, Result};

/// Fixed series palette, assigned in series order.
pub const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

/// One plotted point: position plus a symmetric error-bar half-height.
#[derive(Debug, Clone, Copy)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub stderr: f64,
}

/// One polyline with its legend label.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<PlotPoint>,
}

/// Columns of the point file accompanying each chart.
pub const POINTS_HEADER: [&str; 5] = ["experiment", "series", "x", "y", "stderr"];

/// Writes the exact plotted points as CSV.
pub fn write_points_csv(path: &Path, experiment: &str, series: &[Series]) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    writer.write_record(POINTS_HEADER)?;
    for s in series {
        for p in &s.points {
            writer.write_record([
                experiment,
                &s.name,
                &p.x.to_string(),
                &p.y.to_string(),
                &p.stderr.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn tick_label(value: f64) -> String {
    let magnitude = value.abs();
    if magnitude >= 100.0 || value == value.trunc() {
        format!("{value:.0}")
    } else if magnitude >= 1.0 {
        format!("{value:.2}")
    } else {
        format!("{value:.3}")
    }
}

/// Renders a self-contained line chart with error bars and a legend.
///
/// The data ranges are padded by 5%; a flat range is widened symmetrically
/// so single-point or constant series still render.
#[must_use]
pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let points: Vec<PlotPoint> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .collect();
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &points {
        x_lo = x_lo.min(p.x);
        x_hi = x_hi.max(p.x);
        y_lo = y_lo.min(p.y - p.stderr);
        y_hi = y_hi.max(p.y + p.stderr);
    }
    let pad = |lo: f64, hi: f64| -> (f64, f64) {
        let span = hi - lo;
        let pad = if span > 0.0 {
            span * 0.05
        } else {
            lo.abs().max(1.0) * 0.05
        };
        (lo - pad, hi + pad)
    };
    let (x_lo, x_hi) = pad(x_lo, x_hi);
    let (y_lo, y_hi) = pad(y_lo.max(0.0), y_hi);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = move |y: f64| MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{HEIGHT:.0}\" \
         viewBox=\"0 0 {WIDTH:.0} {HEIGHT:.0}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-family=\"monospace\" \
         font-size=\"15\" fill=\"#000\">{title}</text>\n",
        WIDTH / 2.0
    ));

    // Frame and ticks.
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT:.2}\" y=\"{MARGIN_TOP:.2}\" width=\"{plot_w:.2}\" \
         height=\"{plot_h:.2}\" fill=\"none\" stroke=\"#333333\"/>\n"
    ));
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        let xp = sx(xv);
        let yp = sy(yv);
        svg.push_str(&format!(
            "<line x1=\"{xp:.2}\" y1=\"{:.2}\" x2=\"{xp:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>\n",
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{xp:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"monospace\" \
             font-size=\"11\" fill=\"#000\">{}</text>\n",
            MARGIN_TOP + plot_h + 18.0,
            tick_label(xv)
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{yp:.2}\" x2=\"{MARGIN_LEFT:.2}\" y2=\"{yp:.2}\" \
             stroke=\"#333333\"/>\n",
            MARGIN_LEFT - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"monospace\" \
             font-size=\"11\" fill=\"#000\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            yp + 4.0,
            tick_label(yv)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"monospace\" \
         font-size=\"12\" fill=\"#000\">{x_label}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"monospace\" \
         font-size=\"12\" fill=\"#000\" transform=\"rotate(-90 16 {:.2})\">{y_label}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));

    // Series: error bars under the polyline, markers on top.
    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        for p in &s.points {
            if p.stderr > 0.0 {
                let (xp, y_top, y_bot) = (sx(p.x), sy(p.y + p.stderr), sy(p.y - p.stderr));
                svg.push_str(&format!(
                    "<line x1=\"{xp:.2}\" y1=\"{y_top:.2}\" x2=\"{xp:.2}\" y2=\"{y_bot:.2}\" \
                     stroke=\"{color}\"/>\n"
                ));
                for y_cap in [y_top, y_bot] {
                    svg.push_str(&format!(
                        "<line x1=\"{:.2}\" y1=\"{y_cap:.2}\" x2=\"{:.2}\" y2=\"{y_cap:.2}\" \
                         stroke=\"{color}\"/>\n",
                        xp - 4.0,
                        xp + 4.0
                    ));
                }
            }
        }
        let path: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        for p in &s.points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(p.x),
                sy(p.y)
            ));
        }
    }

    // Legend, top-right inside the frame.
    let legend_x = WIDTH - MARGIN_RIGHT - 160.0;
    let legend_y = MARGIN_TOP + 12.0;
    svg.push_str(&format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"150\" height=\"{:.2}\" fill=\"#ffffff\" \
         stroke=\"#999999\"/>\n",
        legend_x,
        legend_y,
        series.len() as f64 * 18.0 + 10.0
    ));
    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let row_y = legend_y + 14.0 + idx as f64 * 18.0;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{row_y:.2}\" x2=\"{:.2}\" y2=\"{row_y:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n",
            legend_x + 8.0,
            legend_x + 30.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" \
             fill=\"#000\">{}</text>\n",
            legend_x + 36.0,
            row_y + 4.0,
            s.name
        ));
    }

    svg.push_str("</svg>\n");
    svg
}
