//! Plot-ready CSV/JSON export of aggregated sweep rows.
//!
//! Both formats carry the same schema
//! (`sweep_param, sweep_value, scheme, metric, mean, std, n_trials`) and are
//! byte-deterministic for a given row list: floats print as their shortest
//! round-trip decimal.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::run::AggregateRow;

/// Output format of [`export`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Config(format!("unknown export format '{other}'"))),
        }
    }
}

/// Serializes rows as CSV with a fixed header.
pub fn write_csv(rows: &[AggregateRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "sweep_param,sweep_value,scheme,metric,mean,std,n_trials")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.sweep_param, row.sweep_value, row.scheme, row.metric, row.mean, row.std, row.n_trials
        )?;
    }
    Ok(())
}

/// Serializes rows as a JSON records array with the CSV schema.
pub fn write_json(rows: &[AggregateRow], mut out: impl Write) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(rows).expect("rows serialize");
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")
}

/// Writes rows to `path` in the requested format.
pub fn export(rows: &[AggregateRow], path: &Path, format: ExportFormat) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io { path: path.to_path_buf(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut writer = std::io::BufWriter::new(file);
    match format {
        ExportFormat::Csv => write_csv(rows, &mut writer).map_err(io_err)?,
        ExportFormat::Json => write_json(rows, &mut writer).map_err(io_err)?,
    }
    writer.flush().map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<AggregateRow> {
        vec![
            AggregateRow {
                sweep_param: "p_u_dbm".into(),
                sweep_value: 6.0,
                scheme: "proposed".into(),
                metric: "sum_rate".into(),
                mean: 4.125,
                std: 0.5,
                n_trials: 50,
            },
            AggregateRow {
                sweep_param: "p_u_dbm".into(),
                sweep_value: 6.0,
                scheme: "proposed".into(),
                metric: "eop_percent".into(),
                mean: 40.0,
                std: 0.0,
                n_trials: 50,
            },
        ]
    }

    #[test]
    fn empty_rows_give_header_only_csv() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "sweep_param,sweep_value,scheme,metric,mean,std,n_trials\n"
        );
    }

    #[test]
    fn csv_and_json_row_counts_match() {
        let rows = sample_rows();
        let mut csv = Vec::new();
        write_csv(&rows, &mut csv).unwrap();
        let csv_rows = String::from_utf8(csv).unwrap().lines().count() - 1;
        let mut json = Vec::new();
        write_json(&rows, &mut json).unwrap();
        let parsed: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(parsed.as_array().unwrap().len(), csv_rows);
    }

    #[test]
    fn export_is_byte_idempotent() {
        let rows = sample_rows();
        let dir = tempfile::tempdir().unwrap();
        let path_a = dir.path().join("a.csv");
        let path_b = dir.path().join("b.csv");
        export(&rows, &path_a, ExportFormat::Csv).unwrap();
        export(&rows, &path_b, ExportFormat::Csv).unwrap();
        assert_eq!(std::fs::read(path_a).unwrap(), std::fs::read(path_b).unwrap());
    }

    #[test]
    fn floats_round_trip_through_csv() {
        let mut rows = sample_rows();
        rows[0].mean = 0.1 + 0.2; // 0.30000000000000004
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let field: f64 = text.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(field, rows[0].mean);
    }

    #[test]
    fn unwritable_path_reports_io_error() {
        let rows = sample_rows();
        let err = export(&rows, Path::new("/nonexistent-dir/out.csv"), ExportFormat::Csv);
        match err {
            Err(Error::Io { path, .. }) => {
                assert!(path.to_string_lossy().contains("nonexistent"));
            }
            other => panic!("expected io error, got {other:?}"),
        }
    }
}
