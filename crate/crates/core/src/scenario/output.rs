use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::ConvergenceDiagnostics;
use crate::error::{GeoError, Result};

use super::{OutputTarget, RunResult, ScenarioConfig, SweepRow, TraceRecord};

/// Diagnostic and bookkeeping columns that follow the vector columns.
/// `clock` is the observer clock used by the diagnostics.
pub const TRACE_COLUMNS_TAIL: [&str; 12] = [
    "clock",
    "D_xi",
    "D_q",
    "speed_err",
    "norm_err",
    "angle",
    "angle_bound",
    "in_trap",
    "qdot_norm",
    "vhat_norm",
    "tau",
    "noise_norm",
];

const VECTOR_COLUMNS: [&str; 6] = ["q_true", "qdot_true", "q_meas", "xi_hat", "v_hat", "xi_ref"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> GeoError {
    GeoError::invalid(format!("{}: {e}", path.display()))
}

fn trace_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for name in VECTOR_COLUMNS {
        h.extend((0..n).map(|i| format!("{name}_{i}")));
    }
    h.extend(TRACE_COLUMNS_TAIL.iter().map(|s| s.to_string()));
    h
}

fn trace_row(r: &TraceRecord) -> Vec<String> {
    let d = &r.diagnostics;
    let mut row = vec![r.t.to_string()];
    for v in [
        r.q_true.coords(),
        &r.qdot_true.components,
        r.q_meas.coords(),
        r.xi_hat.coords(),
        &r.v_hat.components,
        r.xi_ref.coords(),
    ] {
        row.extend(v.iter().map(f64::to_string));
    }
    row.extend(
        [
            d.t,
            d.d_xi,
            d.d_q,
            d.speed_err,
            d.norm_err,
            d.angle,
            d.angle_bound,
            f64::from(u8::from(d.in_trap)),
            d.qdot_norm,
            d.vhat_norm,
            r.tau,
            r.noise_norm,
        ]
        .iter()
        .map(f64::to_string),
    );
    row
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Write the configured outputs of one run into `dir`; returns the files
/// written.
pub fn write_outputs(result: &RunResult, cfg: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    for target in &cfg.outputs {
        match target {
            OutputTarget::TraceCsv => {
                let n = result.records.first().map_or(0, |r| r.q_true.len());
                let header = trace_header(n);
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                let path = dir.join("trace.csv");
                write_csv(&path, &header, result.records.iter().map(trace_row))?;
                written.push(path);
            }
            OutputTarget::ReportJson => {
                let path = dir.join("report.json");
                write_json(&path, &result.report)?;
                written.push(path);
                let path = dir.join("summary.json");
                write_json(&path, &result.summary)?;
                written.push(path);
            }
            OutputTarget::PlotData => {
                type Column = fn(&TraceRecord) -> f64;
                let plots: [(&str, Column); 3] = [
                    ("D_xi", |r| r.diagnostics.d_xi),
                    ("speed_err", |r| r.diagnostics.speed_err),
                    ("angle", |r| r.diagnostics.angle),
                ];
                for (name, f) in plots {
                    let path = dir.join(format!("plot_{name}.csv"));
                    let rows = result
                        .records
                        .iter()
                        .map(|r| [r.diagnostics.t.to_string(), f(r).to_string()]);
                    write_csv(&path, &["t", name], rows)?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

/// Write `sweep_summary.csv` into `dir`.
pub fn write_sweep_summary(rows: &[SweepRow], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("sweep_summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Read the diagnostic columns of a saved trace.
pub fn read_trace_diagnostics(path: &Path) -> Result<Vec<ConvergenceDiagnostics>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?.clone();
    let mut idx = [0usize; 10];
    for (slot, name) in idx.iter_mut().zip(TRACE_COLUMNS_TAIL) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| io_err(path, format!("missing column {name}")))?;
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let mut v = [0.0; 10];
        for (k, &i) in idx.iter().enumerate() {
            let cell = rec.get(i).unwrap_or("");
            v[k] = cell
                .parse()
                .map_err(|e| io_err(path, format!("row {}: {}: {e}", line + 2, TRACE_COLUMNS_TAIL[k])))?;
        }
        out.push(ConvergenceDiagnostics {
            t: v[0],
            d_xi: v[1],
            d_q: v[2],
            speed_err: v[3],
            norm_err: v[4],
            angle: v[5],
            angle_bound: v[6],
            in_trap: v[7] != 0.0,
            qdot_norm: v[8],
            vhat_norm: v[9],
        });
    }
    Ok(out)
}
