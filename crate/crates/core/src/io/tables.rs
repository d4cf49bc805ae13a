//! CSV reading and writing. Comma separated, dot decimal, header row
//! mandatory. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::series::{Series, SeriesKind};
use crate::channel::{LossModel, PassProfile, PassSample};
use crate::error::{Error, Result};

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        format_err(path, e.to_string())
    }
}

/// Reads a two-column numeric CSV whose header must equal `headers`.
pub fn read_columns(path: &Path, headers: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.len() != 2 || found.get(0) != Some(headers[0]) || found.get(1) != Some(headers[1]) {
        return Err(format_err(
            path,
            format!(
                "expected header `{},{}`, found `{}`",
                headers[0],
                headers[1],
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let parse = |i: usize| -> Result<f64> {
            let field = record.get(i).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| format_err(path, format!("row {}: `{field}` is not a number", line + 2)))
        };
        xs.push(parse(0)?);
        ys.push(parse(1)?);
    }
    Ok((xs, ys))
}

pub fn read_series(path: &Path, kind: SeriesKind) -> Result<Series> {
    let (x, y) = read_columns(path, kind.headers())?;
    Series::new(kind, x, y).map_err(|e| format_err(path, e.to_string()))
}

pub fn read_pass_profile(path: &Path, min_elevation_deg: f64, loss_model: LossModel) -> Result<PassProfile> {
    let (t, el) = read_columns(path, SeriesKind::Pass.headers())?;
    let samples = t
        .into_iter()
        .zip(el)
        .map(|(time_s, elevation_deg)| PassSample { time_s, elevation_deg })
        .collect();
    PassProfile::new(samples, min_elevation_deg, loss_model).map_err(|e| format_err(path, e.to_string()))
}

/// Writes rows of already formatted fields under `headers`.
pub fn write_rows<I, R>(path: &Path, headers: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(headers).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series(path: &Path, series: &Series) -> Result<()> {
    let rows = series
        .x()
        .iter()
        .zip(series.y())
        .map(|(x, y)| [x.to_string(), y.to_string()]);
    write_rows(path, &series.kind().headers(), rows)
}

pub fn write_pass_profile(path: &Path, profile: &PassProfile) -> Result<()> {
    let rows = profile
        .samples()
        .iter()
        .map(|s| [s.time_s.to_string(), s.elevation_deg.to_string()]);
    write_rows(path, &SeriesKind::Pass.headers(), rows)
}

/// Writes a pretty-printed JSON document followed by a newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| format_err(path, e.to_string()))?;
    f.write_all(b"\n")?;
    Ok(())
}
