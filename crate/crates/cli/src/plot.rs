//! Minimal SVG line charts from CSV columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{ExperimentError, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: String,
    /// One polyline per distinct value; a single unnamed series when absent.
    pub group: Option<String>,
    /// Keep only rows whose `column` equals `value`.
    pub filter: Option<(String, String)>,
    pub log_x: bool,
    pub log_y: bool,
}

type Series = BTreeMap<String, Vec<(f64, f64)>>;

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| ExperimentError::UnknownColumn(name.to_string()))
}

fn read_series(csv_path: &Path, spec: &PlotSpec) -> Result<Series> {
    let file = fs::File::open(csv_path).map_err(|e| ExperimentError::io(csv_path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(ExperimentError::EmptyInput);
    }
    let xi = column(&headers, &spec.x)?;
    let yi = column(&headers, &spec.y)?;
    let gi = spec.group.as_deref().map(|g| column(&headers, g)).transpose()?;
    let fi = match &spec.filter {
        Some((c, v)) => Some((column(&headers, c)?, v.as_str())),
        None => None,
    };
    let mut series = Series::new();
    for record in reader.records() {
        let record = record?;
        if let Some((c, v)) = fi {
            if record.get(c) != Some(v) {
                continue;
            }
        }
        let parse = |i: usize| record.get(i).and_then(|s| s.trim().parse::<f64>().ok());
        let (Some(x), Some(y)) = (parse(xi), parse(yi)) else {
            continue;
        };
        if !(x.is_finite() && y.is_finite()) || (spec.log_x && x <= 0.0) || (spec.log_y && y <= 0.0) {
            continue;
        }
        let key = gi.and_then(|g| record.get(g)).unwrap_or("").to_string();
        series.entry(key).or_default().push((x, y));
    }
    if series.is_empty() {
        return Err(ExperimentError::EmptyInput);
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    Ok(series)
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = values
            .map(|v| if log { v.log10() } else { v })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { lo, hi, log }
    }

    /// Fraction of the axis length for data value `v`.
    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn tick(&self, i: usize) -> (f64, String) {
        let t = self.lo + (self.hi - self.lo) * i as f64 / TICKS as f64;
        let label = tick_label(if self.log { 10f64.powf(t) } else { t });
        (i as f64 / TICKS as f64, label)
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.into()
        }
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn render(series: &Series, spec: &PlotSpec) -> String {
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let ax = Axis::new(series.values().flatten().map(|p| p.0), spec.log_x);
    let ay = Axis::new(series.values().flatten().map(|p| p.1), spec.log_y);
    let px = |x: f64| LEFT + ax.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - ay.frac(y)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=TICKS {
        let (f, label) = ax.tick(i);
        let x = LEFT + f * pw;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="black"/><text x="{x:.2}" y="{ty:.2}" text-anchor="middle">{label}</text>"#,
            y0 = TOP + ph,
            y1 = TOP + ph + 5.0,
            ty = TOP + ph + 20.0,
        );
        let (f, label) = ay.tick(i);
        let y = TOP + (1.0 - f) * ph;
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{label}</text>"#,
            x0 = LEFT - 5.0,
            tx = LEFT - 8.0,
            ty = y + 4.0,
        );
    }
    let scale = |log: bool| if log { " (log scale)" } else { "" };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&spec.x),
        scale(spec.log_x)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{y:.2}" text-anchor="middle" transform="rotate(-90 15 {y:.2})">{}{}</text>"#,
        escape(&spec.y),
        scale(spec.log_y),
        y = TOP + ph / 2.0
    );

    for (i, pts) in series.values().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
    }
    if spec.group.is_some() {
        let _ = writeln!(s, r#"<g class="legend">"#);
        for (i, name) in series.keys().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = WIDTH - RIGHT + 15.0;
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{tx:.2}" y="{ty:.2}">{}</text>"#,
                escape(name),
                x2 = x + 20.0,
                tx = x + 26.0,
                ty = y + 4.0,
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

/// Renders `csv_path` as a line chart at `out_path`. Nothing is written when
/// a column is missing or no row survives filtering.
pub fn render_plot(csv_path: &Path, spec: &PlotSpec, out_path: &Path) -> Result<()> {
    let series = read_series(csv_path, spec)?;
    let svg = render(&series, spec);
    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    }
    fs::write(out_path, svg).map_err(|e| ExperimentError::io(out_path, e))
}
