//! CSV input and run outputs.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::data::RawSeriesSet;
use crate::engine::PosteriorSummary;
use crate::error::{data_err, NetcpError, Result};

/// Reads a CSV with one header row of labels and one column per series.
pub fn load_csv(path: impl AsRef<Path>, sample_rate_hz: f64) -> Result<RawSeriesSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let labels: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if labels.is_empty() || labels.iter().all(String::is_empty) {
        return data_err(format!("{}: missing header row", path.display()));
    }
    let mut values = vec![Vec::new(); labels.len()];
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = r + 2;
        if record.len() != labels.len() {
            return data_err(format!(
                "{} row {row}: {} of {} columns",
                path.display(),
                record.len(),
                labels.len()
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                NetcpError::Data(format!("{} row {row}, column {} ({}): {cell:?} is not a number", path.display(), c + 1, labels[c]))
            })?;
            values[c].push(v);
        }
    }
    RawSeriesSet::new(labels, values, sample_rate_hz)
}

/// Writes series as columns under a header of labels, 17 significant digits.
pub fn write_csv(path: impl AsRef<Path>, labels: &[String], columns: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(labels)?;
    let len = columns.first().map_or(0, Vec::len);
    for t in 0..len {
        w.write_record(columns.iter().map(|c| format!("{:e}", c[t])))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a square matrix written by [`write_outputs`] (`edge_prob.csv`).
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row: Result<Vec<f64>> = record
            .iter()
            .skip(1)
            .enumerate()
            .map(|(c, cell)| {
                cell.parse()
                    .map_err(|_| NetcpError::Data(format!("row {}, column {}: {cell:?} is not a number", r + 2, c + 2)))
            })
            .collect();
        rows.push(row?);
    }
    Ok(rows)
}

/// Run manifest written next to the output tables.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub seed: u64,
    pub series_labels: &'a [String],
    pub config: &'a C,
    pub filter_mode: &'a str,
    pub diagnostics: &'a crate::engine::Diagnostics,
    pub log_evidence: Option<f64>,
    pub param_traces: &'a [crate::engine::ParamDraw],
}

/// Writes `cp_prob.csv` (one row per time, one column per series),
/// `edge_prob.csv` (labelled square matrix) and `manifest.json`.
pub fn write_outputs<C: Serialize>(
    summary: &PosteriorSummary,
    labels: &[String],
    seed: u64,
    config: &C,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    if labels.len() != summary.cp_prob.len() {
        return data_err(format!("{} labels for {} series", labels.len(), summary.cp_prob.len()));
    }
    let mut header = vec!["time".to_owned()];
    header.extend(labels.iter().cloned());
    let mut w = csv::Writer::from_path(dir.join("cp_prob.csv"))?;
    w.write_record(&header)?;
    let len = summary.cp_prob.first().map_or(0, Vec::len);
    for t in 0..len {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(summary.cp_prob.iter().map(|r| format!("{:e}", r[t])));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut header = vec!["from".to_owned()];
    header.extend(labels.iter().cloned());
    let mut w = csv::Writer::from_path(dir.join("edge_prob.csv"))?;
    w.write_record(&header)?;
    for (i, row) in summary.edge_prob.iter().enumerate() {
        let mut rec = vec![labels[i].clone()];
        rec.extend(row.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let manifest = Manifest {
        seed,
        series_labels: labels,
        config,
        filter_mode: crate::preprocess::PreprocessConfig::FILTER_MODE,
        diagnostics: &summary.diagnostics,
        log_evidence: summary.log_evidence,
        param_traces: &summary.param_traces,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
