//! File formats of the command-line surface.
//!
//! Datasets are comma-separated CSV, one observation per row, with an
//! optional single header row `x0,…,x{p-1}`. Scatter matrices are p rows of
//! p comma-separated numbers. Fit reports and experiment configs are JSON.
//! Floats are always written in the shortest decimal form that round-trips,
//! so regenerated files are byte-stable.
//!
//! `metrics.csv` columns, in order:
//! `experiment,mode,p,rho,m_true,beta_true,n,runs,bias_norm,consistency,beta_mean,beta_var,beta_mse,mean_iterations,failure_count`
//! (`beta_true` is the cell's generating shape, which varies along a shape
//! sweep). Trace files have a `k` column followed by one column per
//! criterion; columns that stopped earlier leave their cells empty.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::FitReport;
use crate::experiments::{ExperimentConfig, MetricsRecord, TraceTable};
use crate::model::{ModelError, SampleSet};

/// Version stamp of the report JSON layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error("{path}:{row}: expected {expected} fields, got {got}")]
    FieldCount {
        path: String,
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("{path}:{row}: cannot parse \"{token}\" as a number")]
    BadNumber {
        path: String,
        row: usize,
        token: String,
    },

    #[error("{path}: file holds no data rows")]
    Empty { path: String },

    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },

    #[error(transparent)]
    Model(#[from] ModelError),
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

/// Writes a dataset with the `x0,…,x{p-1}` header row.
pub fn write_dataset(path: &Path, data: &SampleSet) -> Result<(), IoError> {
    let mut out = String::new();
    let header: Vec<String> = (0..data.dim()).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in data.iter_rows() {
        push_float_row(&mut out, row);
    }
    fs::write(path, out).map_err(|e| file_err(path, e))
}

fn push_float_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_float(*v));
    }
    out.push('\n');
}

/// Shortest decimal representation that parses back to the same f64.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

/// Reads a numeric CSV table; a single leading header row is skipped when
/// its first field does not parse as a number.
fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut expected = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && fields[0].parse::<f64>().is_err() {
            continue; // header row
        }
        let mut row = Vec::with_capacity(fields.len());
        for token in &fields {
            let v: f64 = token.parse().map_err(|_| IoError::BadNumber {
                path: path.display().to_string(),
                row: idx + 1,
                token: token.to_string(),
            })?;
            row.push(v);
        }
        if let Some(e) = expected {
            if row.len() != e {
                return Err(IoError::FieldCount {
                    path: path.display().to_string(),
                    row: idx + 1,
                    expected: e,
                    got: row.len(),
                });
            }
        } else {
            expected = Some(row.len());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IoError::Empty {
            path: path.display().to_string(),
        });
    }
    Ok(rows)
}

/// Reads a dataset CSV into a validated sample set.
pub fn read_dataset(path: &Path) -> Result<SampleSet, IoError> {
    let rows = read_numeric_csv(path)?;
    Ok(SampleSet::from_rows(&rows)?)
}

/// Reads a p×p scatter CSV as raw rows; validation happens at `SpdMatrix`
/// construction so the caller can map failures to its own exit code.
pub fn read_scatter_rows(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    read_numeric_csv(path)
}

/// Writes a p×p matrix as plain CSV rows.
pub fn write_matrix_csv(path: &Path, rows: &[Vec<f64>]) -> Result<(), IoError> {
    let mut out = String::new();
    for row in rows {
        push_float_row(&mut out, row);
    }
    fs::write(path, out).map_err(|e| file_err(path, e))
}

/// Options echoed into a fit report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptionsEcho {
    pub tol_c: f64,
    pub max_iter: usize,
    pub beta_fixed: Option<f64>,
    pub beta_init: f64,
    pub init: String,
    pub newton_max_step: f64,
    pub beta_clamp: (f64, f64),
}

/// JSON mirror of a `FitReport`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBody {
    pub scatter: Vec<Vec<f64>>,
    pub scale_m: f64,
    pub beta: f64,
    pub iterations: usize,
    pub c_trace: Vec<f64>,
    pub alpha_residual: f64,
    pub converged: bool,
    pub objective: f64,
}

/// The on-disk fit report: schema-versioned, with tool version, options
/// echo, wall-clock duration and the generating master seed when the data
/// came from an in-process sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub tool_version: String,
    pub options: FitOptionsEcho,
    pub master_seed: Option<u64>,
    pub duration_seconds: f64,
    pub report: ReportBody,
}

impl ReportFile {
    pub fn new(
        report: &FitReport,
        options: FitOptionsEcho,
        master_seed: Option<u64>,
        duration_seconds: f64,
    ) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            options,
            master_seed,
            duration_seconds,
            report: ReportBody {
                scatter: report.scatter.rows(),
                scale_m: report.scale,
                beta: report.beta,
                iterations: report.iterations,
                c_trace: report.c_trace.clone(),
                alpha_residual: report.alpha_residual,
                converged: report.converged,
                objective: report.objective,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.to_json() + "\n").map_err(|e| file_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| IoError::Json {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// Reads and validates an experiment config JSON.
pub fn read_experiment_config(path: &Path) -> Result<ExperimentConfig, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.display().to_string(),
        source: e,
    })
}

/// One row per sweep cell, columns as documented in the module header.
pub fn write_metrics_csv(
    path: &Path,
    cfg: &ExperimentConfig,
    records: &[MetricsRecord],
) -> Result<(), IoError> {
    let mut out = String::from(
        "experiment,mode,p,rho,m_true,beta_true,n,runs,bias_norm,consistency,beta_mean,beta_var,beta_mse,mean_iterations,failure_count\n",
    );
    let kind = serde_json::to_value(cfg.kind).expect("enum");
    let mode = serde_json::to_value(cfg.mode).expect("enum");
    for r in records {
        let fields = [
            kind.as_str().unwrap().to_string(),
            mode.as_str().unwrap().to_string(),
            cfg.p.to_string(),
            format_float(cfg.rho),
            format_float(cfg.m_true),
            format_float(r.beta_true),
            r.n.to_string(),
            cfg.runs.to_string(),
            format_float(r.bias_norm),
            format_float(r.consistency),
            format_float(r.beta_mean),
            format_float(r.beta_var),
            format_float(r.beta_mse),
            format_float(r.mean_iterations),
            r.failure_count.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| file_err(path, e))
}

/// Trace CSV: one row per iteration index until the slowest column stops.
pub fn write_trace_csv(path: &Path, table: &TraceTable) -> Result<(), IoError> {
    let mut out = String::from("k");
    for (name, _) in &table.columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for k in 0..table.max_len() {
        out.push_str(&k.to_string());
        for (_, values) in &table.columns {
            out.push(',');
            if let Some(v) = values.get(k) {
                out.push_str(&format_float(*v));
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| file_err(path, e))
}

/// Renders a metrics table for standard output.
pub fn summary_table(records: &[MetricsRecord]) -> String {
    let mut out = String::from(
        "       n  beta_true   bias_norm  consistency     beta_var  mean_iter  failures\n",
    );
    for r in records {
        out.push_str(&format!(
            "{:>8}  {:>9.4}  {:>10.6}  {:>11.6}  {:>11.4e}  {:>9.1}  {:>8}\n",
            r.n,
            r.beta_true,
            r.bias_norm,
            r.consistency,
            r.beta_var,
            r.mean_iterations,
            r.failure_count
        ));
    }
    out
}

/// Appends stdout-facing flush helper so the CLI can stream the summary.
pub fn print_flush(text: &str) {
    let mut stdout = std::io::stdout();
    let _ = stdout.write_all(text.as_bytes());
    let _ = stdout.flush();
}
