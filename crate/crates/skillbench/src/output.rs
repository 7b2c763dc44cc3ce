//! Report files.
//!
//! Every file carries the configuration fingerprint: a leading `#` line in
//! CSVs, a line above the table in Markdown, a comment in SVG and a field
//! in JSON. CSV and Markdown output is a pure function of the results and
//! the fingerprint; only `run_manifest.json` holds timestamps.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use skillbench_core::{
    format_latency, format_metric, format_size, format_usd, plottable, sort_results,
    BenchmarkResult, ConfigFingerprint,
};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no results to report")]
    Empty,
    #[error("no model has a value for the {0} axis")]
    NoPlottableRows(Axis),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("reading {path}: {message}")]
    Read { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Size,
    Time,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Size => "size",
            Axis::Time => "time",
        }
    }

    fn value(self, r: &BenchmarkResult) -> Option<f64> {
        match self {
            Axis::Size => r.model_size_params.map(|p| p as f64),
            Axis::Time => r.mean_latency_sec,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Axis::Size => "Model size (parameters, log scale)",
            Axis::Time => "Time per vacancy (sec, log scale)",
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const LEADERBOARD_COLUMNS: [&str; 6] =
    ["Model", "Accuracy", "F1", "Precision", "Recall", "ROC AUC"];
pub const EFFICIENCY_COLUMNS: [&str; 4] = ["Model", "F1", "Model size", "Time per vacancy (sec)"];
const NA: &str = "n/a";

fn csv_doc(fp: &ConfigFingerprint, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields");
    format!("# {}\n{body}", fp.line())
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

fn md_doc(fp: &ConfigFingerprint, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = format!("Config: `{}`\n\n", fp.line());
    let line = |cells: Vec<String>| format!("| {} |\n", cells.join(" | "));
    s += &line(header.iter().map(|h| md_cell(h)).collect());
    s += &line(header.iter().map(|_| "---".to_string()).collect());
    for r in rows {
        s += &line(r.iter().map(|c| md_cell(c)).collect());
    }
    s
}

fn sorted(results: &[BenchmarkResult]) -> Result<Vec<BenchmarkResult>, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut v = results.to_vec();
    sort_results(&mut v);
    Ok(v)
}

fn leaderboard_rows(results: &[BenchmarkResult]) -> Vec<Vec<String>> {
    results
        .iter()
        .map(|r| {
            let m = &r.metrics;
            vec![
                m.model.clone(),
                format_metric(m.accuracy),
                format_metric(m.f1),
                format_metric(m.precision),
                format_metric(m.recall),
                m.auc.map_or_else(|| NA.to_string(), format_metric),
            ]
        })
        .collect()
}

/// `leaderboard.csv` contents: rounded metrics, best F1 first.
pub fn leaderboard_csv(
    results: &[BenchmarkResult],
    fp: &ConfigFingerprint,
) -> Result<String, ReportError> {
    Ok(csv_doc(
        fp,
        &LEADERBOARD_COLUMNS,
        &leaderboard_rows(&sorted(results)?),
    ))
}

pub fn leaderboard_md(
    results: &[BenchmarkResult],
    fp: &ConfigFingerprint,
) -> Result<String, ReportError> {
    Ok(md_doc(
        fp,
        &LEADERBOARD_COLUMNS,
        &leaderboard_rows(&sorted(results)?),
    ))
}

/// Leaderboard at full precision, plus the bookkeeping columns.
pub fn leaderboard_raw_csv(
    results: &[BenchmarkResult],
    fp: &ConfigFingerprint,
) -> Result<String, ReportError> {
    let rows: Vec<Vec<String>> = sorted(results)?
        .iter()
        .map(|r| {
            let m = &r.metrics;
            vec![
                m.model.clone(),
                m.accuracy.to_string(),
                m.f1.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.auc.map_or_else(|| NA.to_string(), |a| a.to_string()),
                m.aggregation.as_str().to_string(),
                m.accuracy_mode.as_str().to_string(),
                r.evaluated.to_string(),
                r.failed.to_string(),
            ]
        })
        .collect();
    let mut header = LEADERBOARD_COLUMNS.to_vec();
    header.extend(["Aggregation", "Accuracy mode", "Evaluated", "Failed"]);
    Ok(csv_doc(fp, &header, &rows))
}

fn efficiency_rows(results: &[BenchmarkResult]) -> Vec<Vec<String>> {
    results
        .iter()
        .map(|r| {
            vec![
                r.name().to_string(),
                format_metric(r.metrics.f1),
                r.model_size_params
                    .map_or_else(|| NA.to_string(), format_size),
                r.mean_latency_sec
                    .map_or_else(|| NA.to_string(), format_latency),
            ]
        })
        .collect()
}

pub fn efficiency_csv(
    results: &[BenchmarkResult],
    fp: &ConfigFingerprint,
) -> Result<String, ReportError> {
    Ok(csv_doc(
        fp,
        &EFFICIENCY_COLUMNS,
        &efficiency_rows(&sorted(results)?),
    ))
}

pub fn efficiency_md(
    results: &[BenchmarkResult],
    fp: &ConfigFingerprint,
) -> Result<String, ReportError> {
    Ok(md_doc(
        fp,
        &EFFICIENCY_COLUMNS,
        &efficiency_rows(&sorted(results)?),
    ))
}

pub fn costs_csv(
    results: &[BenchmarkResult],
    fp: &ConfigFingerprint,
) -> Result<String, ReportError> {
    let rows: Vec<Vec<String>> = sorted(results)?
        .iter()
        .map(|r| match &r.cost {
            Some(c) => vec![
                r.name().to_string(),
                format_usd(c.total_usd),
                c.records.to_string(),
                c.records_unpriced.to_string(),
                c.complete().to_string(),
            ],
            None => vec![
                r.name().to_string(),
                NA.into(),
                NA.into(),
                NA.into(),
                "false".into(),
            ],
        })
        .collect();
    Ok(csv_doc(
        fp,
        &[
            "Model",
            "Total cost (USD)",
            "Records",
            "Records without cost",
            "Complete",
        ],
        &rows,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub model: String,
    pub x: f64,
    pub log10_x: f64,
    pub f1: f64,
}

/// Points for one axis, best F1 first. Models without a value for the axis
/// are left out and named in the second element.
pub fn scatter_points(
    results: &[BenchmarkResult],
    axis: Axis,
) -> Result<(Vec<ScatterPoint>, Vec<String>), ReportError> {
    let results = sorted(results)?;
    let (points, omitted) = plottable(&results, |r| axis.value(r));
    if points.is_empty() {
        return Err(ReportError::NoPlottableRows(axis));
    }
    let points = points
        .into_iter()
        .map(|(r, x)| ScatterPoint {
            model: r.name().to_string(),
            x,
            log10_x: x.log10(),
            f1: r.metrics.f1,
        })
        .collect();
    Ok((points, omitted.into_iter().map(String::from).collect()))
}

pub fn scatter_csv(points: &[ScatterPoint], fp: &ConfigFingerprint) -> String {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.model.clone(),
                p.x.to_string(),
                p.log10_x.to_string(),
                p.f1.to_string(),
            ]
        })
        .collect();
    csv_doc(fp, &["Model", "x", "log10_x", "f1"], &rows)
}

pub fn read_scatter_csv(path: &Path) -> Result<Vec<ScatterPoint>, ReportError> {
    let read_err = |message: String| ReportError::Read {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| read_err(e.to_string()))?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| read_err(e.to_string()))?;
        let num = |i: usize| -> Result<f64, ReportError> {
            row.get(i)
                .ok_or_else(|| read_err(format!("missing column {i}")))?
                .parse()
                .map_err(|e: std::num::ParseFloatError| read_err(e.to_string()))
        };
        out.push(ScatterPoint {
            model: row.get(0).unwrap_or_default().to_string(),
            x: num(1)?,
            log10_x: num(2)?,
            f1: num(3)?,
        });
    }
    Ok(out)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// A labeled scatter with a log-scaled x axis and F1 on y.
pub fn scatter_svg(points: &[ScatterPoint], axis: Axis, fp: &ConfigFingerprint) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const L: f64 = 70.0;
    const R: f64 = 30.0;
    const T: f64 = 40.0;
    const B: f64 = 60.0;
    let (mut lo, mut hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.log10_x), hi.max(p.log10_x))
        });
    lo = lo.floor();
    hi = hi.ceil();
    if hi <= lo {
        hi = lo + 1.0;
    }
    let px = |lx: f64| L + (lx - lo) / (hi - lo) * (W - L - R);
    let py = |f1: f64| T + (1.0 - f1) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, "<!-- {} -->", fp.line().replace("--", "- -"));
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">F1 vs {}</text>"#,
        W / 2.0,
        axis.as_str()
    );
    let _ = writeln!(
        s,
        r#"<line x1="{L}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        H - B,
        W - R,
        H - B
    );
    let _ = writeln!(
        s,
        r#"<line x1="{L}" y1="{T}" x2="{L}" y2="{:.2}" stroke="black"/>"#,
        H - B
    );
    for decade in (lo as i64)..=(hi as i64) {
        let x = px(decade as f64);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{decade}</text>"#,
            H - B + 18.0
        );
    }
    for tick in 0..=5 {
        let f = tick as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{f:.1}</text>"#,
            L - 6.0,
            py(f) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        L + (W - L - R) / 2.0,
        H - 16.0,
        axis.label()
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">F1</text>"#,
        T + (H - T - B) / 2.0,
        T + (H - T - B) / 2.0
    );
    for p in points {
        let (x, y) = (px(p.log10_x), py(p.f1));
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="steelblue"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 6.0,
            y - 6.0,
            xml_escape(&p.model)
        );
    }
    s += "</g>\n</svg>\n";
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: PathBuf,
    pub sha256: String,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub fingerprint: ConfigFingerprint,
    pub dataset: DatasetInfo,
    pub started_at: String,
    pub finished_at: String,
    pub results: Vec<BenchmarkResult>,
    /// Adapters that could not be run at all, with the reason.
    pub adapter_errors: Vec<(String, String)>,
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), ReportError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| ReportError::Io { path, source })
}

/// Writes the full report set into `dir`. Returns the warnings raised
/// (omitted scatter points, empty axes).
pub fn write_reports(dir: &Path, manifest: &RunManifest) -> Result<Vec<String>, ReportError> {
    let fp = &manifest.fingerprint;
    let results = &manifest.results;
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write(dir, "leaderboard.csv", &leaderboard_csv(results, fp)?)?;
    write(dir, "leaderboard.md", &leaderboard_md(results, fp)?)?;
    write(
        dir,
        "leaderboard_raw.csv",
        &leaderboard_raw_csv(results, fp)?,
    )?;
    write(dir, "efficiency.csv", &efficiency_csv(results, fp)?)?;
    write(dir, "efficiency.md", &efficiency_md(results, fp)?)?;
    write(dir, "costs.csv", &costs_csv(results, fp)?)?;

    let mut warnings = Vec::new();
    for axis in [Axis::Size, Axis::Time] {
        match scatter_points(results, axis) {
            Ok((points, omitted)) => {
                for m in omitted {
                    warnings.push(format!(
                        "scatter {axis}: model {m} has no {axis} value, omitted"
                    ));
                }
                write(
                    dir,
                    &format!("scatter_{axis}.csv"),
                    &scatter_csv(&points, fp),
                )?;
                write(
                    dir,
                    &format!("scatter_{axis}.svg"),
                    &scatter_svg(&points, axis, fp),
                )?;
            }
            Err(e @ ReportError::NoPlottableRows(_)) => {
                warnings.push(format!("scatter {axis}: {e}, not written"))
            }
            Err(e) => return Err(e),
        }
    }
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write(dir, "run_manifest.json", &json)?;
    for w in &warnings {
        warn!("{w}");
    }
    Ok(warnings)
}
