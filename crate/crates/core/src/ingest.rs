use std::path::Path;

use crate::error::{DsmError, Result};
use crate::load_shift::LoadProfile;

fn csv_err(path: &Path, reason: impl Into<String>) -> DsmError {
    DsmError::Csv {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Read the named columns of a headered CSV with exactly `horizon` data rows,
/// one row per hour in hour order.
pub fn read_columns(path: &Path, columns: &[String], horizon: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DsmError::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            ),
            _ => csv_err(path, e.to_string()),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| csv_err(path, e.to_string()))?
        .clone();
    let positions = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| csv_err(path, format!("missing column {c:?}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = vec![Vec::with_capacity(horizon); columns.len()];
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e.to_string()))?;
        rows += 1;
        for (col, &pos) in positions.iter().enumerate() {
            let cell = record.get(pos).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| {
                csv_err(
                    path,
                    format!(
                        "row {rows}, column {:?}: {cell:?} is not a number",
                        columns[col]
                    ),
                )
            })?;
            if !value.is_finite() || value < 0.0 {
                return Err(csv_err(
                    path,
                    format!(
                        "row {rows}, column {:?}: negative or non-finite demand {value}",
                        columns[col]
                    ),
                ));
            }
            out[col].push(value);
        }
    }
    if rows != horizon {
        return Err(csv_err(
            path,
            format!("expected {horizon} hourly rows, found {rows}"),
        ));
    }
    Ok(out)
}

/// One profile per listed column.
pub fn ingest_csv(path: &Path, columns: &[String], horizon: usize) -> Result<Vec<LoadProfile>> {
    read_columns(path, columns, horizon)?
        .into_iter()
        .zip(columns)
        .map(|(demand, id)| LoadProfile::new(id.clone(), demand))
        .collect()
}

/// Split an aggregate hourly series into customers by fixed shares summing to 1.
pub fn split_aggregate(
    aggregate: &[f64],
    shares: &[f64],
    ids: &[String],
) -> Result<Vec<LoadProfile>> {
    if shares.is_empty() || shares.len() != ids.len() {
        return Err(DsmError::dim(format!(
            "{} shares for {} customers",
            shares.len(),
            ids.len()
        )));
    }
    if let Some(s) = shares.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(DsmError::invalid(format!(
            "share {s} must be finite and >= 0"
        )));
    }
    let total: f64 = shares.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(DsmError::invalid(format!(
            "shares sum to {total}, expected 1"
        )));
    }
    shares
        .iter()
        .zip(ids)
        .map(|(&s, id)| LoadProfile::new(id.clone(), aggregate.iter().map(|x| x * s).collect()))
        .collect()
}
