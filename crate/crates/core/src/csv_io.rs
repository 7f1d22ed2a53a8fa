//! CSV ingestion and emission of step signals and numeric tables.
//!
//! A signal file has header `t,value` (scalar) or `t,u1,...,uL` (vector) and
//! one row per division point; the last row holds the value at the final
//! time. Values are written with the shortest decimal that round-trips, so
//! write-then-read is lossless.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::signals::{ParamSignal, StepSignal};

fn csv_error(line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        line,
        message: message.into(),
    }
}

fn from_csv(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => csv_error(line, format!("{kind:?}")),
    }
}

fn parse_number(field: &str, line: u64) -> Result<f64> {
    let value: f64 = field
        .parse()
        .map_err(|_| csv_error(line, format!("not a number: {field:?}")))?;
    if !value.is_finite() {
        return Err(csv_error(line, format!("non-finite value: {field:?}")));
    }
    Ok(value)
}

/// Header, times and value rows.
type Rows = (Vec<String>, Vec<f64>, Vec<Vec<f64>>);

fn read_rows<R: Read>(reader: R) -> Result<Rows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(from_csv)?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.len() < 2 || headers[0] != "t" {
        return Err(csv_error(
            1,
            format!("expected header starting with `t`, got {headers:?}"),
        ));
    }
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(from_csv)?;
        let line = record.position().map_or(0, |p| p.line());
        let t = parse_number(&record[0], line)?;
        let values = record
            .iter()
            .skip(1)
            .map(|f| parse_number(f, line))
            .collect::<Result<Vec<_>>>()?;
        times.push(t);
        rows.push(values);
    }
    if times.is_empty() {
        return Err(csv_error(1, "no data rows"));
    }
    Ok((headers, times, rows))
}

pub fn read_step_signal<R: Read>(reader: R) -> Result<StepSignal> {
    let (headers, times, rows) = read_rows(reader)?;
    if headers != ["t", "value"] {
        return Err(csv_error(
            1,
            format!("expected header `t,value`, got {headers:?}"),
        ));
    }
    StepSignal::new(times, rows.into_iter().map(|r| r[0]).collect())
}

pub fn read_param_signal<R: Read>(reader: R) -> Result<ParamSignal> {
    let (headers, times, rows) = read_rows(reader)?;
    if headers == ["t", "value"] {
        return ParamSignal::new(times, rows);
    }
    for (i, h) in headers.iter().enumerate().skip(1) {
        if *h != format!("u{i}") {
            return Err(csv_error(1, format!("expected column `u{i}`, got `{h}`")));
        }
    }
    ParamSignal::new(times, rows)
}

pub fn load_step_signal(path: impl AsRef<Path>) -> Result<StepSignal> {
    read_step_signal(std::fs::File::open(path)?)
}

pub fn load_param_signal(path: impl AsRef<Path>) -> Result<ParamSignal> {
    read_param_signal(std::fs::File::open(path)?)
}

/// Shortest round-trip decimal; exponent form outside `[1e-5, 1e16)`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Writes a header row and numeric rows.
pub fn write_table<W: Write>(writer: W, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(headers).map_err(from_csv)?;
    for row in rows {
        if row.len() != headers.len() {
            return Err(Error::DimensionMismatch {
                expected: headers.len(),
                found: row.len(),
            });
        }
        wtr.write_record(row.iter().map(|&v| format_number(v)))
            .map_err(from_csv)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_step_signal<W: Write>(writer: W, x: &StepSignal) -> Result<()> {
    let rows: Vec<Vec<f64>> = x
        .division()
        .iter()
        .zip(x.values())
        .map(|(&t, &v)| vec![t, v])
        .collect();
    write_table(writer, &["t", "value"], &rows)
}

pub fn write_param_signal<W: Write>(writer: W, u: &ParamSignal) -> Result<()> {
    let names: Vec<String> = (1..=u.dim()).map(|i| format!("u{i}")).collect();
    let mut headers = vec!["t"];
    headers.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<f64>> = u
        .division()
        .iter()
        .zip(u.values())
        .map(|(&t, v)| std::iter::once(t).chain(v.iter().copied()).collect())
        .collect();
    write_table(writer, &headers, &rows)
}

pub fn save_step_signal(path: impl AsRef<Path>, x: &StepSignal) -> Result<()> {
    write_step_signal(std::fs::File::create(path)?, x)
}
