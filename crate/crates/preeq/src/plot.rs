//! Minimal SVG line plots for metrics CSVs. No drawing dependencies:
//! plots are polylines with labeled, linearly scaled axes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One named polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Axis labels and title of a plot.
#[derive(Debug, Clone, Default)]
pub struct PlotLabels {
    pub title: String,
    pub x: String,
    pub y: String,
}

fn data_bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            if x.is_finite() {
                xs = (xs.0.min(x), xs.1.max(x));
            }
            if y.is_finite() {
                ys = (ys.0.min(y), ys.1.max(y));
            }
        }
    }
    if !xs.0.is_finite() {
        xs = (0.0, 1.0);
    }
    if !ys.0.is_finite() {
        ys = (0.0, 1.0);
    }
    if xs.0 == xs.1 {
        xs = (xs.0 - 0.5, xs.1 + 0.5);
    }
    if ys.0 == ys.1 {
        ys = (ys.0 - 0.5, ys.1 + 0.5);
    }
    (xs, ys)
}

/// Renders series into a standalone SVG document. Empty input yields a
/// valid plot with axes and no polylines; non-finite points are dropped.
pub fn render_svg(series: &[Series], labels: &PlotLabels) -> String {
    let ((x0, x1), (y0, y1)) = data_bounds(series);
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    // Axes.
    let (ax0, ax1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (ay0, ay1) = (HEIGHT - MARGIN_B, MARGIN_T);
    let _ = writeln!(
        svg,
        r#"<line x1="{ax0}" y1="{ay0}" x2="{ax1}" y2="{ay0}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{ax0}" y1="{ay0}" x2="{ax0}" y2="{ay1}" stroke="black"/>"#
    );
    // Tick labels at the extremes, plus axis titles.
    let _ = writeln!(
        svg,
        r#"<text x="{ax0}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        ay0 + 18.0,
        fmt_tick(x0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{ax1}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        ay0 + 18.0,
        fmt_tick(x1)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{}</text>"#,
        ax0 - 6.0,
        ay0 + 4.0,
        fmt_tick(y0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{}</text>"#,
        ax0 - 6.0,
        ay1 + 4.0,
        fmt_tick(y1)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
        (ax0 + ax1) / 2.0,
        HEIGHT - 12.0,
        escape(&labels.x)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" font-size="14" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0,
        escape(&labels.y)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
        (ax0 + ax1) / 2.0,
        escape(&labels.title)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.3},{:.3}", px(x), py(y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        // Legend entry.
        let ly = MARGIN_T + 16.0 * i as f64 + 10.0;
        let lx = WIDTH - MARGIN_R + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Loads series from a CSV: the first column is x, the chosen columns
/// (all numeric columns when `columns` is empty) become one series each.
/// Rows with a non-numeric or non-finite value in a column are skipped
/// for that series only.
pub fn series_from_csv(path: &Path, columns: &[String]) -> Result<(String, Vec<Series>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Csv("empty file".into()))?
        .split(',')
        .collect();
    if header.len() < 2 {
        return Err(Error::Csv("need at least two columns".into()));
    }
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != header.len() {
            return Err(Error::Csv(format!("row {}: wrong field count", i + 2)));
        }
    }

    let wanted: Vec<usize> = if columns.is_empty() {
        // All columns (past x) that parse as numbers on every row.
        (1..header.len())
            .filter(|&c| rows.iter().all(|r| r[c].parse::<f64>().is_ok()))
            .collect()
    } else {
        columns
            .iter()
            .map(|name| {
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Csv(format!("no column {name:?}")))
            })
            .collect::<Result<_>>()?
    };
    if wanted.is_empty() {
        return Err(Error::Csv("no numeric columns to plot".into()));
    }

    let mut series = Vec::with_capacity(wanted.len());
    for &c in &wanted {
        let mut points = Vec::new();
        for r in &rows {
            let (Ok(x), Ok(y)) = (r[0].parse::<f64>(), r[c].parse::<f64>()) else {
                continue;
            };
            if x.is_finite() && y.is_finite() {
                points.push((x, y));
            }
        }
        series.push(Series {
            name: header[c].to_string(),
            points,
        });
    }
    Ok((header[0].to_string(), series))
}

/// Plots a CSV into an SVG file. See [`series_from_csv`] for column
/// selection.
pub fn plot_csv(csv: &Path, columns: &[String], out: &Path) -> Result<()> {
    let (x_name, series) = series_from_csv(csv, columns)?;
    let labels = PlotLabels {
        title: csv
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        x: x_name,
        y: series
            .iter()
            .map(|s| s.name.clone())
            .collect::<Vec<_>>()
            .join(", "),
    };
    fs::write(out, render_svg(&series, &labels))?;
    Ok(())
}
