//! Minimal SVG scatter plots for run outputs (savings vs slider, amenity vs
//! slider). No plotting dependency: the charts are simple enough to emit as
//! hand-built SVG.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 25.0;
const MARGIN_T: f64 = 45.0;
const MARGIN_B: f64 = 60.0;

/// One scatter chart: points plus axis labels and a title.
pub struct Scatter<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub points: &'a [(f64, f64)],
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(mag * 10.0);
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-9 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

/// Render the chart as a standalone SVG document.
pub fn render_scatter(chart: &Scatter) -> String {
    let (mut x_lo, mut x_hi) = (f64::MAX, f64::MIN);
    let (mut y_lo, mut y_hi) = (f64::MAX, f64::MIN);
    for &(x, y) in chart.points {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if chart.points.is_empty() {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    // pad the data box so points don't sit on the frame
    let x_pad = (x_hi - x_lo).max(1e-9) * 0.08;
    let y_pad = (y_hi - y_lo).max(1e-9) * 0.08;
    x_lo -= x_pad;
    x_hi += x_pad;
    y_lo -= y_pad;
    y_hi += y_pad;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="25" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        chart.title
    );

    // gridlines and tick labels
    for t in nice_ticks(x_lo, x_hi) {
        let x = sx(t);
        let _ = write!(
            svg,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##,
            MARGIN_T,
            MARGIN_T + plot_h
        );
        let _ = write!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            MARGIN_T + plot_h + 18.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y_lo, y_hi) {
        let y = sy(t);
        let _ = write!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##,
            MARGIN_L,
            MARGIN_L + plot_w
        );
        let _ = write!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            MARGIN_L - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
    }

    // frame
    let _ = write!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="black"/>"#
    );
    // axis labels
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 15.0,
        chart.x_label
    );
    let _ = write!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.1})">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        chart.y_label
    );

    for &(x, y) in chart.points {
        let _ = write!(
            svg,
            r##"<circle cx="{:.1}" cy="{:.1}" r="4" fill="#1f77b4" fill-opacity="0.75"/>"##,
            sx(x),
            sy(y)
        );
    }
    svg.push_str("</svg>");
    svg
}

/// Write the chart to an .svg file.
pub fn write_scatter(chart: &Scatter, path: &Path) -> Result<()> {
    std::fs::write(path, render_scatter(chart))?;
    Ok(())
}

/// Read a per_agent.csv written by the simulator and emit the two standard
/// scatter plots (savings vs slider, amenity vs slider) into `out_dir`.
pub fn plot_per_agent(per_agent_csv: &Path, out_dir: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(per_agent_csv)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (si, vi, ai) = match (col("slider"), col("savings_pct"), col("amenity_pct")) {
        (Some(s), Some(v), Some(a)) => (s, v, a),
        _ => {
            return Err(crate::error::Error::Config(format!(
                "{}: expected columns slider, savings_pct, amenity_pct",
                per_agent_csv.display()
            )))
        }
    };
    let mut savings = Vec::new();
    let mut amenity = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|e| crate::error::Error::Config(format!("bad number in per-agent CSV: {e}")))
        };
        let s = parse(si)?;
        savings.push((s, parse(vi)?));
        amenity.push((s, parse(ai)?));
    }
    std::fs::create_dir_all(out_dir)?;
    write_scatter(
        &Scatter {
            title: "Bill savings vs participation slider",
            x_label: "slider",
            y_label: "savings (%)",
            points: &savings,
        },
        &out_dir.join("savings_vs_slider.svg"),
    )?;
    write_scatter(
        &Scatter {
            title: "Amenity vs participation slider",
            x_label: "slider",
            y_label: "amenity (%)",
            points: &amenity,
        },
        &out_dir.join("amenity_vs_slider.svg"),
    )?;
    Ok(())
}
