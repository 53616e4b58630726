//! Artifact writers: CSV of kept iterates, an SVG line plot, and the JSON run
//! report. All floats are written with 17 significant digits so a reader can
//! reproduce them bitwise.

use crate::operator::GridFunction;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Shape(String),
}

fn write_file(path: &Path, text: &str) -> Result<(), ExportError> {
    std::fs::write(path, text).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_shape(kept: &[(usize, GridFunction)]) -> Result<(), ExportError> {
    let Some((_, first)) = kept.first() else {
        return Err(ExportError::Shape("no iterates to export".into()));
    };
    if kept.iter().any(|(_, g)| !g.same_grid(first)) {
        return Err(ExportError::Shape("iterates live on different grids".into()));
    }
    Ok(())
}

pub fn csv_text(kept: &[(usize, GridFunction)]) -> Result<String, ExportError> {
    check_shape(kept)?;
    let grid = &kept[0].1;
    let mut out = String::from("x");
    for (idx, _) in kept {
        let _ = write!(out, ",f{idx}");
    }
    out.push('\n');
    for i in 0..grid.len() {
        let _ = write!(out, "{:.16e}", grid.x_at(i));
        for (_, g) in kept {
            let _ = write!(out, ",{:.16e}", g.values()[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn export_csv(kept: &[(usize, GridFunction)], path: &Path) -> Result<(), ExportError> {
    write_file(path, &csv_text(kept)?)
}

const VIEW_W: f64 = 800.0;
const VIEW_H: f64 = 600.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#d62728", "#8c564b",
];

pub fn svg_text(kept: &[(usize, GridFunction)]) -> Result<String, ExportError> {
    check_shape(kept)?;
    let grid = &kept[0].1;
    let (a, b) = (grid.a(), grid.b());
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, g) in kept {
        for &v in g.values() {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if !(y_max > y_min) {
        // flat plot: give it one unit of headroom on each side
        y_min -= 1.0;
        y_max += 1.0;
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {VIEW_W:.0} {VIEW_H:.0}\">"
    );
    out.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    for (plot_i, (idx, g)) in kept.iter().enumerate() {
        let _ = write!(
            out,
            "  <polyline data-iterate=\"f{idx}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"",
            PALETTE[plot_i % PALETTE.len()]
        );
        for i in 0..g.len() {
            let px = (g.x_at(i) - a) / (b - a) * VIEW_W;
            let py = (y_max - g.values()[i]) / (y_max - y_min) * VIEW_H;
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{px:.2},{py:.2}");
        }
        out.push_str("\"/>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn export_svg(kept: &[(usize, GridFunction)], path: &Path) -> Result<(), ExportError> {
    write_file(path, &svg_text(kept)?)
}

pub fn export_report(report: &serde_json::Value, path: &Path) -> Result<(), ExportError> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    write_file(path, &text)
}
