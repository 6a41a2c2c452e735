//! Per-cell result rows, their CSV/JSON serialization, and aggregation
//! into per-(dataset, method) summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::config::OutputFormat;
use crate::metrics::CoverageReport;

pub const STATUS_OK: &str = "ok";

/// Metric columns in output order.
pub const METRIC_COLUMNS: [&str; 6] = [
    "marginal_coverage",
    "msce_k10",
    "msce_k50",
    "oracle_msce",
    "wsc",
    "log_volume_per_dim",
];

const HEADER: [&str; 11] = [
    "dataset",
    "method",
    "seed",
    "status",
    "marginal_coverage",
    "msce_k10",
    "msce_k50",
    "oracle_msce",
    "wsc",
    "log_volume_per_dim",
    "wall_time_seconds",
];

/// One (dataset, method, repetition) cell. `seed` is the repetition index.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub method: String,
    pub seed: usize,
    /// `"ok"` or `"error: <message>"`.
    pub status: String,
    pub marginal_coverage: f64,
    pub msce_k10: f64,
    pub msce_k50: f64,
    /// Only present for synthetic data.
    pub oracle_msce: Option<f64>,
    pub wsc: f64,
    pub log_volume_per_dim: f64,
    pub wall_time_seconds: Option<f64>,
}

impl ResultRow {
    pub fn ok(dataset: &str, method: &str, seed: usize, r: CoverageReport) -> Self {
        ResultRow {
            dataset: dataset.into(),
            method: method.into(),
            seed,
            status: STATUS_OK.into(),
            marginal_coverage: r.marginal_coverage,
            msce_k10: r.msce_k10,
            msce_k50: r.msce_k50,
            oracle_msce: r.oracle_msce,
            wsc: r.wsc,
            log_volume_per_dim: r.log_volume_per_dim,
            wall_time_seconds: None,
        }
    }

    pub fn failed(dataset: &str, method: &str, seed: usize, message: &str) -> Self {
        ResultRow {
            dataset: dataset.into(),
            method: method.into(),
            seed,
            status: format!("error: {}", message.replace(['\n', '\r'], " ")),
            marginal_coverage: f64::NAN,
            msce_k10: f64::NAN,
            msce_k50: f64::NAN,
            oracle_msce: None,
            wsc: f64::NAN,
            log_volume_per_dim: f64::NAN,
            wall_time_seconds: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    /// Metric by column name; `None` for an absent oracle value.
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "marginal_coverage" => Some(self.marginal_coverage),
            "msce_k10" => Some(self.msce_k10),
            "msce_k50" => Some(self.msce_k50),
            "oracle_msce" => self.oracle_msce,
            "wsc" => Some(self.wsc),
            "log_volume_per_dim" => Some(self.log_volume_per_dim),
            "wall_time_seconds" => self.wall_time_seconds,
            _ => None,
        }
    }
}

/// Shortest decimal that parses back to the same `f64`; `NaN`, `inf`, `-inf`
/// for non-finite values.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(s: &str, row: usize, col: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        row,
        col: col.into(),
        message: e.to_string(),
    })
}

fn parse_opt(s: &str, row: usize, col: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s, row, col).map(Some)
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("CSV encoding: {e}"));
    w.write_record(HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.method.clone(),
            r.seed.to_string(),
            r.status.clone(),
            fmt_f64(r.marginal_coverage),
            fmt_f64(r.msce_k10),
            fmt_f64(r.msce_k50),
            fmt_opt(r.oracle_msce),
            fmt_f64(r.wsc),
            fmt_f64(r.log_volume_per_dim),
            fmt_opt(r.wall_time_seconds),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Config(format!("CSV header: {e}")))?
        .clone();
    let index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let cols: Vec<usize> = HEADER.iter().map(|h| index(h)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            col: String::new(),
            message: e.to_string(),
        })?;
        let field = |k: usize| rec.get(cols[k]).unwrap_or("");
        rows.push(ResultRow {
            dataset: field(0).into(),
            method: field(1).into(),
            seed: field(2).trim().parse().map_err(|_| Error::Parse {
                row,
                col: "seed".into(),
                message: format!("not an integer: '{}'", field(2)),
            })?,
            status: field(3).into(),
            marginal_coverage: parse_f64(field(4), row, HEADER[4])?,
            msce_k10: parse_f64(field(5), row, HEADER[5])?,
            msce_k50: parse_f64(field(6), row, HEADER[6])?,
            oracle_msce: parse_opt(field(7), row, HEADER[7])?,
            wsc: parse_f64(field(8), row, HEADER[8])?,
            log_volume_per_dim: parse_f64(field(9), row, HEADER[9])?,
            wall_time_seconds: parse_opt(field(10), row, HEADER[10])?,
        });
    }
    Ok(rows)
}

/// JSON record; non-finite metrics become `null`.
#[derive(Serialize, Deserialize)]
struct JsonRow {
    dataset: String,
    method: String,
    seed: usize,
    status: String,
    marginal_coverage: Option<f64>,
    msce_k10: Option<f64>,
    msce_k50: Option<f64>,
    oracle_msce: Option<f64>,
    wsc: Option<f64>,
    log_volume_per_dim: Option<f64>,
    wall_time_seconds: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn rows_to_json(rows: &[ResultRow]) -> Result<String> {
    let records: Vec<JsonRow> = rows
        .iter()
        .map(|r| JsonRow {
            dataset: r.dataset.clone(),
            method: r.method.clone(),
            seed: r.seed,
            status: r.status.clone(),
            marginal_coverage: finite(r.marginal_coverage),
            msce_k10: finite(r.msce_k10),
            msce_k50: finite(r.msce_k50),
            oracle_msce: r.oracle_msce.and_then(finite),
            wsc: finite(r.wsc),
            log_volume_per_dim: finite(r.log_volume_per_dim),
            wall_time_seconds: r.wall_time_seconds,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&records).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn rows_from_json(text: &str) -> Result<Vec<ResultRow>> {
    let records: Vec<JsonRow> =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("JSON results: {e}")))?;
    let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
    Ok(records
        .into_iter()
        .map(|j| ResultRow {
            dataset: j.dataset,
            method: j.method,
            seed: j.seed,
            status: j.status,
            marginal_coverage: nan(j.marginal_coverage),
            msce_k10: nan(j.msce_k10),
            msce_k50: nan(j.msce_k50),
            oracle_msce: j.oracle_msce,
            wsc: nan(j.wsc),
            log_volume_per_dim: nan(j.log_volume_per_dim),
            wall_time_seconds: j.wall_time_seconds,
        })
        .collect())
}

pub fn write_results(
    path: impl AsRef<Path>,
    rows: &[ResultRow],
    format: OutputFormat,
) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        OutputFormat::Csv => rows_to_csv(rows)?,
        OutputFormat::Json => rows_to_json(rows)?,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a results file, detecting JSON by its leading `[`.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim_start().starts_with('[') {
        rows_from_json(&text)
    } else {
        rows_from_csv(&text)
    }
}

/// Mean and sample standard deviation over the finite values of successful
/// rows. `std` is NaN with fewer than two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        let n = v.len();
        if n == 0 {
            return MetricSummary {
                count: 0,
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            f64::NAN
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MetricSummary {
            count: n,
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub dataset: String,
    pub method: String,
    pub repetitions: usize,
    pub failures: usize,
    /// Keyed by metric column name, in [`METRIC_COLUMNS`] order.
    pub metrics: Vec<(String, MetricSummary)>,
}

impl MethodSummary {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

/// Groups rows by (dataset, method), sorted by that key.
pub fn summarize(rows: &[ResultRow]) -> Vec<MethodSummary> {
    let mut groups: BTreeMap<(&str, &str), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.dataset, &r.method)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((dataset, method), members)| {
            let ok: Vec<&&ResultRow> = members.iter().filter(|r| r.is_ok()).collect();
            let metrics = METRIC_COLUMNS
                .iter()
                .map(|&m| {
                    (
                        m.to_string(),
                        MetricSummary::from_values(ok.iter().filter_map(|r| r.metric(m))),
                    )
                })
                .collect();
            MethodSummary {
                dataset: dataset.into(),
                method: method.into(),
                repetitions: members.len(),
                failures: members.len() - ok.len(),
                metrics,
            }
        })
        .collect()
}

/// Fixed-width text table of `mean ± std` per metric.
pub fn format_summary(summaries: &[MethodSummary]) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{:<16} {:<14} {:>5} {:>4}",
        "dataset", "method", "reps", "err"
    );
    let short = [
        "coverage", "msce@10", "msce@50", "oracle", "wsc", "logvol/d",
    ];
    for s in short {
        let _ = write!(out, " {s:>21}");
    }
    out.push('\n');
    for s in summaries {
        let _ = write!(
            out,
            "{:<16} {:<14} {:>5} {:>4}",
            s.dataset, s.method, s.repetitions, s.failures
        );
        for (_, m) in &s.metrics {
            let cell = if m.count == 0 {
                "-".to_string()
            } else if m.std.is_nan() {
                format!("{:.4}", m.mean)
            } else {
                format!("{:.4} ± {:.4}", m.mean, m.std)
            };
            let _ = write!(out, " {cell:>21}");
        }
        out.push('\n');
    }
    out
}
