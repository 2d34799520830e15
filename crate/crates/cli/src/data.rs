// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV series I/O: comma-separated, header row required, one row per time
//! step, no index column.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use tsbreak_core::TimeSeries;

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader
        .headers()
        .with_context(|| format!("{}: cannot read header", path.display()))?
        .clone();
    let p = headers.len();
    if p == 0 {
        bail!("{}: empty header", path.display());
    }

    let mut values = Vec::new();
    let mut n = 0;
    for (i, record) in reader.records().enumerate() {
        // Row 1 is the first data row; the header is line 1 of the file.
        let row = i + 1;
        let record = record.with_context(|| format!("{}: data row {row}", path.display()))?;
        if record.len() != p {
            bail!(
                "{}: data row {row} has {} fields, header has {p}",
                path.display(),
                record.len()
            );
        }
        for (j, field) in record.iter().enumerate() {
            let column = &headers[j];
            let v: f64 = field.trim().parse().map_err(|_| {
                anyhow::anyhow!(
                    "{}: data row {row}, column {} ({column}): cannot parse {field:?} as a number",
                    path.display(),
                    j + 1
                )
            })?;
            if !v.is_finite() {
                bail!(
                    "{}: data row {row}, column {} ({column}): non-finite value {field:?}",
                    path.display(),
                    j + 1
                );
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        bail!("{}: no data rows", path.display());
    }
    Ok(TimeSeries::new(DMatrix::from_row_slice(n, p, &values))?)
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    writer.write_record((1..=series.dim()).map(|j| format!("x{j}")))?;
    let data = series.data();
    for row in data.row_iter() {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer
        .flush()
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
