//! JSON and CSV writers. CSV files open with a `# config:` line echoing the
//! effective configuration, and floats carry 17 significant digits.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use snsqkd::{OptimizeResult, WindowTally};

use crate::config::ExperimentConfig;
use crate::Failure;

pub struct CurveRow {
    pub distance_km: f64,
    pub e_a: f64,
    pub result: OptimizeResult,
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(e: csv::Error) -> Failure {
    Failure::validation(format!("csv: {e}"))
}

fn write_with_header(path: &Path, cfg: &ExperimentConfig, body: Vec<u8>) -> Result<(), Failure> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# config: {}", cfg.echo())?;
    file.write_all(&body)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::validation(format!("json: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn write_tally_csv(path: &Path, cfg: &ExperimentConfig, tally: &WindowTally, with_accepted: bool) -> Result<(), Failure> {
    // Header `class,detector,n_windows,n_effective,subset` comes from the
    // row type.
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in tally.rows(with_accepted) {
        w.serialize(row).map_err(csv_error)?;
    }
    let body = w.into_inner().map_err(|e| Failure::validation(e.to_string()))?;
    write_with_header(path, cfg, body)
}

/// Columns `L_km, e_a, q, mu, lambda, E_Z, e_ph_upper, rate_per_window,
/// no_key` and optionally `log10_rate`, which is left empty when there is no
/// key. `lambda` is empty in compensation mode.
pub fn write_curve_csv(path: &Path, cfg: &ExperimentConfig, rows: &[CurveRow], log10: bool) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "L_km",
        "e_a",
        "q",
        "mu",
        "lambda",
        "E_Z",
        "e_ph_upper",
        "rate_per_window",
        "no_key",
    ];
    if log10 {
        header.push("log10_rate");
    }
    w.write_record(&header).map_err(csv_error)?;
    for row in rows {
        let r = &row.result;
        let mut rec = vec![
            float(row.distance_km),
            float(row.e_a),
            float(r.q),
            float(r.mu),
            r.lambda.map(float).unwrap_or_default(),
            float(r.report.e_z),
            float(r.report.e_ph_upper),
            float(r.report.rate_per_window),
            r.report.no_key.to_string(),
        ];
        if log10 {
            rec.push(if r.report.no_key {
                String::new()
            } else {
                float(r.report.rate_per_window.log10())
            });
        }
        w.write_record(&rec).map_err(csv_error)?;
    }
    let body = w.into_inner().map_err(|e| Failure::validation(e.to_string()))?;
    write_with_header(path, cfg, body)
}
