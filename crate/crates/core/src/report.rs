//! Result tables and charts: JSON, CSV with fixed column order, and SVG line
//! charts. Output is byte-identical for identical input.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::metrics::{ACCEL_BINS, ACCEL_RANGE, JERK_THRESHOLD, LAPLACE_ALPHA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub run_id: String,
    pub method: String,
    pub attackers: usize,
    pub agent: String,
    pub success_rate: f64,
    pub scenarios: usize,
    pub seconds_per_scenario: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealismRow {
    pub run_id: String,
    pub method: String,
    pub accel_kl: f64,
    pub jerk_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub run_id: String,
    pub dataset: String,
    pub condition: String,
    pub crash_rate: f64,
    pub crash_spread: f64,
    pub route_completion: f64,
    pub completion_spread: f64,
}

/// A named line series of (x, y) points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub success: Vec<SuccessRow>,
    pub realism: Vec<RealismRow>,
    pub training: Vec<TrainingRow>,
    /// Success rate against search iteration, one series per search round.
    pub search_curves: Vec<Series>,
    /// Crash rate / route completion against training step.
    pub training_curves: Vec<Series>,
    /// Run id → config hash and seed.
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(Format::Json),
            "csv" => Some(Format::Csv),
            "svg" => Some(Format::Svg),
            _ => None,
        }
    }
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, MetricsError> {
    std::fs::write(&path, text).map_err(|source| MetricsError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn header_comment() -> String {
    format!(
        "# accel histogram {} bins over [{}, {}] m/s^2, laplace alpha {}; jerk threshold {} m/s^3\n",
        ACCEL_BINS, ACCEL_RANGE.0, ACCEL_RANGE.1, LAPLACE_ALPHA, JERK_THRESHOLD
    )
}

pub fn success_csv(r: &Report) -> String {
    let mut s = String::from("run_id,method,attackers,agent,success_rate,scenarios,seconds_per_scenario\n");
    for row in &r.success {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{},{:.6}",
            row.run_id, row.method, row.attackers, row.agent, row.success_rate, row.scenarios, row.seconds_per_scenario
        );
    }
    s
}

pub fn realism_csv(r: &Report) -> String {
    let mut s = header_comment();
    s.push_str("run_id,method,accel_kl,jerk_rate\n");
    for row in &r.realism {
        let _ = writeln!(s, "{},{},{:.6},{:.6}", row.run_id, row.method, row.accel_kl, row.jerk_rate);
    }
    s
}

pub fn training_csv(r: &Report) -> String {
    let mut s = String::from("run_id,dataset,condition,crash_rate,crash_spread,route_completion,completion_spread\n");
    for row in &r.training {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            row.run_id,
            row.dataset,
            row.condition,
            row.crash_rate,
            row.crash_spread,
            row.route_completion,
            row.completion_spread
        );
    }
    s
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Minimal line chart: one `<polyline>` per series.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        h - m,
        w - m,
        h - m
    );
    let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 10.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    let _ = writeln!(s, r#"<text x="{m}" y="{}" font-size="10">{x0:.3}</text>"#, h - m + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{x1:.3}</text>"#, w - m, h - m + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y0:.3}</text>"#, m - 4.0, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{m}" font-size="10" text-anchor="end">{y1:.3}</text>"#, m - 4.0);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = ser
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            coords.join(" "),
            escape(&ser.name)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - m - 120.0,
            m + 14.0 * i as f64,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes the requested formats into `dir` and returns the created paths.
pub fn emit_report(report: &Report, dir: impl AsRef<Path>, formats: &[Format]) -> Result<Vec<PathBuf>, MetricsError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| MetricsError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for f in formats {
        match f {
            Format::Json => {
                let v = serde_json::to_value(report).expect("report serializes");
                out.push(write(dir.join("report.json"), &crate::io::to_canonical_string(&v))?);
            }
            Format::Csv => {
                out.push(write(dir.join("success.csv"), &success_csv(report))?);
                out.push(write(dir.join("realism.csv"), &realism_csv(report))?);
                out.push(write(dir.join("training.csv"), &training_csv(report))?);
            }
            Format::Svg => {
                out.push(write(
                    dir.join("search.svg"),
                    &line_chart_svg("Attack success rate by search iteration", "iteration", "success rate", &report.search_curves),
                )?);
                out.push(write(
                    dir.join("training.svg"),
                    &line_chart_svg("Evaluation during training", "step", "rate", &report.training_curves),
                )?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_has_headers_only() {
        let r = Report::default();
        assert_eq!(success_csv(&r).lines().count(), 1);
        assert_eq!(training_csv(&r).lines().count(), 1);
        assert_eq!(realism_csv(&r).lines().filter(|l| !l.starts_with('#')).count(), 1);
    }

    #[test]
    fn one_polyline_per_series() {
        let series: Vec<Series> = (0..3)
            .map(|i| Series {
                name: format!("round {i}"),
                points: vec![(0.0, 0.4), (1.0, 0.5 + 0.1 * i as f64)],
            })
            .collect();
        let svg = line_chart_svg("t", "x", "y", &series);
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
}
