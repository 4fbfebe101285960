//! JSON and CSV report files.
//!
//! CSV columns, in order: `name, lhs, rhs, margin, tolerance, pass, model,
//! seed, N, M, T, K, lhs_stderr, rhs_stderr, status`. `N` is the step count,
//! `M` the path count and `K` is empty for checks without a curvature bound.

use crate::config::Format;
use serde::Serialize;
use srpath_core::error::{Error, Result};
use srpath_core::verify::{CheckReport, Status};
use std::path::{Path, PathBuf};

/// Published JSON schema of one report object.
pub const REPORT_SCHEMA: &str = include_str!("../report.schema.json");

pub const CSV_COLUMNS: &[&str] = &[
    "name", "lhs", "rhs", "margin", "tolerance", "pass", "model", "seed", "N", "M", "T", "K", "lhs_stderr", "rhs_stderr", "status",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    name: &'a str,
    lhs: f64,
    rhs: f64,
    margin: f64,
    tolerance: f64,
    pass: bool,
    model: &'a str,
    seed: u64,
    #[serde(rename = "N")]
    steps: usize,
    #[serde(rename = "M")]
    paths: usize,
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(rename = "K")]
    k: Option<f64>,
    lhs_stderr: f64,
    rhs_stderr: f64,
    status: Status,
}

pub fn to_json(reports: &[CheckReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::Config(e.to_string()))
}

pub fn to_csv(reports: &[CheckReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if reports.is_empty() {
        w.write_record(CSV_COLUMNS).map_err(csv_error)?;
    }
    for r in reports {
        let m = &r.metadata;
        w.serialize(CsvRow {
            name: &r.name,
            lhs: r.lhs.mean,
            rhs: r.rhs.mean,
            margin: r.margin,
            tolerance: r.tolerance,
            pass: r.pass,
            model: &m.model,
            seed: m.seed,
            steps: m.steps,
            paths: m.paths,
            horizon: m.horizon,
            k: m.k,
            lhs_stderr: r.lhs.stderr,
            rhs_stderr: r.rhs.stderr,
            status: r.status,
        })
        .map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(e.to_string())
}

/// Writes `<stem>.json` and/or `<stem>.csv` into `dir`; returns the paths.
pub fn write_reports(dir: &Path, stem: &str, reports: &[CheckReport], format: Format) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.json() {
        let p = dir.join(format!("{stem}.json"));
        std::fs::write(&p, to_json(reports)?)?;
        written.push(p);
    }
    if format.csv() {
        let p = dir.join(format!("{stem}.csv"));
        std::fs::write(&p, to_csv(reports)?)?;
        written.push(p);
    }
    Ok(written)
}

/// One line per report for the terminal.
pub fn summary_line(r: &CheckReport) -> String {
    let tag = match r.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Inconclusive => "INCONCLUSIVE",
    };
    format!(
        "{tag:<12} {:<28} {:<14} lhs {:+.6e} ± {:.2e}  rhs {:+.6e} ± {:.2e}  margin {:+.3e}  tol {:.3e}",
        r.name, r.metadata.model, r.lhs.mean, r.lhs.stderr, r.rhs.mean, r.rhs.stderr, r.margin, r.tolerance
    )
}
