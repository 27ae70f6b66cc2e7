//! Learning curves as SVG.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::ExperimentError;

/// One curve: mean return and its spread per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub iterations: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn label_for(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match path.parent().and_then(Path::file_name) {
        Some(dir) if stem == "summary" => dir.to_string_lossy().into_owned(),
        _ => stem,
    }
}

/// Reads `iteration`, `return_mean` and `return_std` columns from a summary
/// (or per-seed) CSV. Lines starting with `#` are comments.
pub fn read_curve(path: &Path, text: &str) -> Result<Curve, ExperimentError> {
    let fail = |line: usize, message: String| ExperimentError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (header_line, header) = rows.next().ok_or_else(|| fail(0, "no header row".into()))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let column = |name: &str| {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| fail(header_line, format!("missing column {name}")))
    };
    let cols = [
        column("iteration")?,
        column("return_mean")?,
        column("return_std")?,
    ];
    let mut curve = Curve {
        label: label_for(path),
        iterations: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
    };
    for (n, row) in rows {
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(fail(
                n,
                format!("expected {} fields, found {}", names.len(), cells.len()),
            ));
        }
        let mut values = [0.0; 3];
        for (slot, (&c, name)) in
            values
                .iter_mut()
                .zip(cols.iter().zip(["iteration", "return_mean", "return_std"]))
        {
            *slot = cells[c]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(n, format!("{name} is not a number: {:?}", cells[c])))?;
        }
        curve.iterations.push(values[0]);
        curve.mean.push(values[1]);
        curve.std.push(values[2]);
    }
    if curve.iterations.is_empty() {
        return Err(fail(header_line, "no data rows".into()));
    }
    Ok(curve)
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Renders curves as a standalone SVG document: a mean line and a ±1 std
/// band per curve, labelled axes and a legend.
pub fn render_svg(curves: &[Curve]) -> String {
    let all = |f: &dyn Fn(&Curve) -> Vec<f64>| curves.iter().flat_map(f).collect::<Vec<f64>>();
    let xs = all(&|c| c.iterations.clone());
    let lows = all(&|c| c.mean.iter().zip(&c.std).map(|(m, s)| m - s).collect());
    let highs = all(&|c| c.mean.iter().zip(&c.std).map(|(m, s)| m + s).collect());
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1) = padded(min(&xs), max(&xs));
    let (y0, y1) = padded(min(&lows), max(&highs));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(x),
            TOP + plot_h,
            px(x),
            TOP + plot_h + 5.0,
            px(x),
            TOP + plot_h + 18.0,
            format_tick(x)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            py(y),
            LEFT,
            py(y),
            LEFT - 8.0,
            py(y) + 4.0,
            format_tick(y)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iterations</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">unscaled return</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = c
            .iterations
            .iter()
            .zip(c.mean.iter().zip(&c.std))
            .map(|(&x, (m, s))| (x, m + s));
        let lower = c
            .iterations
            .iter()
            .zip(c.mean.iter().zip(&c.std))
            .map(|(&x, (m, s))| (x, m - s));
        let band: Vec<(f64, f64)> = upper.chain(lower.rev()).collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            points(&band, &px, &py)
        );
        let line: Vec<(f64, f64)> = c
            .iterations
            .iter()
            .cloned()
            .zip(c.mean.iter().cloned())
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points(&line, &px, &py)
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend-entry"><rect x="{lx}" y="{:.2}" width="14" height="10" fill="{color}"/><text x="{}" y="{:.2}">{}</text></g>"#,
            ly - 9.0,
            lx + 20.0,
            ly,
            escape(&c.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn points(pts: &[(f64, f64)], px: &dyn Fn(f64) -> f64, py: &dyn Fn(f64) -> f64) -> String {
    pts.iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Reads each input CSV and writes one SVG with all curves.
pub fn plot_curves(inputs: &[PathBuf], out: &Path) -> Result<(), ExperimentError> {
    if inputs.is_empty() {
        return Err(ExperimentError::Config(
            "plot needs at least one input".into(),
        ));
    }
    let curves = inputs
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| ExperimentError::io(p, e))?;
            read_curve(p, &text)
        })
        .collect::<Result<Vec<_>, _>>()?;
    std::fs::write(out, render_svg(&curves)).map_err(|e| ExperimentError::io(out, e))
}
