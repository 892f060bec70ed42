//! Static SVG line plots of result files.

use std::fmt::Write as _;
use std::path::Path;

use super::run::OPTIMUM_SCHEMA;
use super::spec::SweepKind;
use super::table::CsvTable;
use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Net rates: deterministic as lines, simulated as markers.
    Rate,
    /// Optimal training lengths (optimum files only).
    Tau,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct Curve {
    label: String,
    line: Vec<(f64, f64)>,
    markers: Vec<(f64, f64)>,
}

fn points(x: &[Option<f64>], y: &[Option<f64>]) -> Vec<(f64, f64)> {
    x.iter()
        .zip(y)
        .filter_map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Some((*a, *b)),
            _ => None,
        })
        .collect()
}

fn curve(table: &CsvTable, kind: PlotKind) -> Result<Curve, ExperimentError> {
    let (line_col, marker_col) = match kind {
        PlotKind::Rate => ("r_net_det_bits", "r_net_mc_bits"),
        PlotKind::Tau => {
            if table.schema() != OPTIMUM_SCHEMA {
                return Err(ExperimentError::MalformedCsv {
                    origin: table.origin.clone(),
                    message: "training-length plots need an optimum file".into(),
                });
            }
            ("tau_star_det", "tau_star_mc")
        }
    };
    let x = table.values("sweep_value")?;
    Ok(Curve {
        label: table.meta("label").unwrap_or(&table.origin).to_string(),
        line: points(&x, &table.values(line_col)?),
        markers: points(&x, &table.values(marker_col)?),
    })
}

/// "Nice" tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|m| m as f64 * step).collect()
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn render(curves: &[Curve], x_label: &str, y_label: &str) -> String {
    let all = curves.iter().flat_map(|c| c.line.iter().chain(&c.markers));
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1) = padded(x0, x1);
    let (y0, y1) = padded(y0, y1);
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let yb = MARGIN_TOP + ph;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{MARGIN_TOP}" x2="{x:.2}" y2="{yb}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"##,
            yb + 16.0
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let xr = MARGIN_LEFT + pw;
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{xr}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t}</text>"##,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let cy = MARGIN_TOP + ph / 2.0;
    let _ = writeln!(
        s,
        r#"<text x="20" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 20 {cy:.2})">{}</text>"#,
        escape(y_label)
    );

    for (n, c) in curves.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        if !c.line.is_empty() {
            let path: Vec<String> = c
                .line
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        for &(x, y) in &c.markers {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="none" stroke="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = MARGIN_TOP + 14.0 + 20.0 * n as f64;
        let lx = MARGIN_LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{color}" stroke-width="1.5"/><circle cx="{:.2}" cy="{ly}" r="3" fill="none" stroke="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 24.0,
            lx + 12.0,
            lx + 30.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Plots one curve per CSV file into `out`. Nothing is written when any
/// input is malformed or there is nothing to draw.
pub fn emit_plot(inputs: &[&Path], kind: PlotKind, out: &Path) -> Result<(), ExperimentError> {
    if inputs.is_empty() {
        return Err(ExperimentError::EmptyData {
            origin: "no input files".into(),
        });
    }
    let tables = inputs
        .iter()
        .map(|p| CsvTable::read(p))
        .collect::<Result<Vec<_>, _>>()?;
    let curves = tables
        .iter()
        .map(|t| curve(t, kind))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some((t, _)) = tables
        .iter()
        .zip(&curves)
        .find(|(_, c)| c.line.is_empty() && c.markers.is_empty())
    {
        return Err(ExperimentError::EmptyData {
            origin: t.origin.clone(),
        });
    }

    let x_label = match tables[0].meta("sweep") {
        Some("snr") => SweepKind::Snr.axis_label(),
        Some("tau") => SweepKind::Tau.axis_label(),
        Some("backhaul") => SweepKind::Backhaul.axis_label(),
        _ => "sweep value",
    };
    let y_label = match kind {
        PlotKind::Rate => "net rate R_net [bits/channel use]",
        PlotKind::Tau => "optimal training length [channel uses]",
    };
    let svg = render(&curves, x_label, y_label);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    }
    std::fs::write(out, svg).map_err(|e| ExperimentError::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(-11.0, 31.0);
        assert!(t.len() >= 4 && t.len() <= 7, "{t:?}");
        assert!(t.iter().all(|v| (-11.0..=31.0).contains(v)));
        assert_eq!(t[1] - t[0], 10.0);
        let t = ticks(0.12, 0.58);
        assert!(t.len() >= 3, "{t:?}");
    }

    #[test]
    fn skips_nonfinite_points() {
        let x = [Some(1.0), Some(f64::INFINITY), None, Some(3.0)];
        let y = [Some(2.0), Some(1.0), Some(1.0), None];
        assert_eq!(points(&x, &y), vec![(1.0, 2.0)]);
    }
}
