//! CSV and JSON output. Files are written to a temporary sibling and
//! renamed into place, so a failed write never leaves a partial file.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{CellResult, ExperimentResults};
use crate::stats::TrialStatistics;

pub const CSV_HEADER: &str = "pop_size,c1,c2,metric,mean,std,ci_low,ci_high,n";
pub const SAMPLES_HEADER: &str =
    "pop_size,c1,c2,initial_pso_iterations,trial,seed,converged,iterations,model_calls,final_cost,error";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guess from the file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format `{other}` (csv or json)"))),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn metric_name(base: &str, cell: &CellResult, tag_initial: bool) -> String {
    if tag_initial {
        format!("{base}@initial={}", cell.cell.initial_pso_iterations)
    } else {
        base.to_string()
    }
}

fn stats_row(out: &mut String, cell: &CellResult, metric: &str, s: &TrialStatistics) {
    let c = &cell.cell;
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        c.pop_size, c.c1, c.c2, metric, s.mean, s.std, s.ci95.0, s.ci95.1, s.n
    );
}

/// One row per (cell, metric). Metrics without a single sample are left out.
pub fn render_csv(results: &ExperimentResults) -> String {
    let tag_initial = results.spec.sweep.initial_pso_iterations.len() > 1;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for cell in &results.cells {
        let metrics = [
            ("iterations", cell.iterations.as_ref()),
            ("model_calls", cell.model_calls.as_ref()),
            ("final_cost", cell.final_cost.as_ref()),
            ("model_call_delta", cell.paired.as_ref().and_then(|p| p.delta_stats.as_ref())),
        ];
        for (name, stats) in metrics {
            if let Some(s) = stats {
                stats_row(&mut out, cell, &metric_name(name, cell, tag_initial), s);
            }
        }
    }
    out
}

/// Per-run raw values behind [`render_csv`].
pub fn render_samples_csv(results: &ExperimentResults) -> String {
    let mut out = String::from(SAMPLES_HEADER);
    out.push('\n');
    for cell in &results.cells {
        let c = &cell.cell;
        for (trial, t) in cell.trials.iter().enumerate() {
            let (converged, iterations, calls, cost) = match &t.report {
                Some(r) => (
                    r.converged.to_string(),
                    r.iterations_used.to_string(),
                    r.model_calls.to_string(),
                    r.global_best_cost.to_string(),
                ),
                None => Default::default(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                c.pop_size,
                c.c1,
                c.c2,
                c.initial_pso_iterations,
                trial,
                t.seed,
                converged,
                iterations,
                calls,
                cost,
                csv_field(t.error.as_deref().unwrap_or(""))
            );
        }
    }
    out
}

pub fn render_json(results: &ExperimentResults) -> Result<String> {
    let mut s = serde_json::to_string_pretty(results)?;
    s.push('\n');
    Ok(s)
}

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Companion file for per-run samples: `r.csv` -> `r.samples.csv`.
pub fn samples_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}.samples.csv"))
}

/// Write the report; returns the paths written.
pub fn emit_report(results: &ExperimentResults, format: Format, path: &Path) -> Result<Vec<PathBuf>> {
    if results.cells.is_empty() {
        return Err(Error::Config("nothing to report".into()));
    }
    match format {
        Format::Json => {
            write_atomic(path, &render_json(results)?)?;
            Ok(vec![path.to_path_buf()])
        }
        Format::Csv => {
            let samples = samples_path(path);
            write_atomic(path, &render_csv(results))?;
            write_atomic(&samples, &render_samples_csv(results))?;
            Ok(vec![path.to_path_buf(), samples])
        }
    }
}

pub fn load_json(path: &Path) -> Result<ExperimentResults> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
