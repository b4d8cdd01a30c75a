//! Run-log CSV: one header line, one row per control step, and an optional
//! trailing `# failure: ...` line when the run stopped early.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::metrics::ErrorSample;
use super::run::RunLog;
use crate::error::{JpcmError, Result};

pub const HEADER: [&str; 22] = [
    "t", "px", "py", "pz", "px_ref", "py_ref", "pz_ref", "rx", "ry", "rz", "u0", "u1", "u2", "u3",
    "ex", "ey", "ez", "erx", "ery", "erz", "iters", "solve_ms",
];

pub const FAILURE_PREFIX: &str = "# failure: ";

/// One parsed CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub position: [f64; 3],
    pub reference: [f64; 3],
    pub attitude: [f64; 3],
    pub rotors: [f64; 4],
    pub position_error: [f64; 3],
    pub rotation_error: [f64; 3],
    pub iterations: usize,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvLog {
    pub rows: Vec<CsvRow>,
    pub failure: Option<String>,
}

impl CsvLog {
    pub fn error_samples(&self) -> Vec<ErrorSample> {
        self.rows
            .iter()
            .map(|r| ErrorSample {
                t: r.t,
                position: Vector3::from(r.position_error),
                rotation: Vector3::from(r.rotation_error),
            })
            .collect()
    }
}

/// Rows of a run log. Solve times are written only when `with_timing` is set,
/// otherwise zero, so that the output depends on the seed alone.
pub fn log_rows(log: &RunLog, with_timing: bool) -> Vec<CsvRow> {
    log.records
        .iter()
        .enumerate()
        .map(|(k, r)| CsvRow {
            t: r.t,
            position: r.truth.position.into(),
            reference: r.reference.position.into(),
            attitude: r.truth.rotation.log().into(),
            rotors: r.rotors.0.into(),
            position_error: r.position_error().into(),
            rotation_error: r.rotation_error().into(),
            iterations: r.iterations,
            solve_ms: if with_timing { log.solve_ms.get(k).copied().unwrap_or(0.0) } else { 0.0 },
        })
        .collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(out: W, log: &RunLog, with_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in log_rows(log, with_timing) {
        let mut fields: Vec<String> = Vec::with_capacity(HEADER.len());
        fields.push(fmt(r.t));
        for v in r
            .position
            .iter()
            .chain(&r.reference)
            .chain(&r.attitude)
            .chain(&r.rotors)
            .chain(&r.position_error)
            .chain(&r.rotation_error)
        {
            fields.push(fmt(*v));
        }
        fields.push(r.iterations.to_string());
        fields.push(fmt(r.solve_ms));
        w.write_record(&fields)?;
    }
    let mut inner = w.into_inner().map_err(|e| JpcmError::Io(e.into_error()))?;
    if let Some(msg) = &log.failure {
        writeln!(inner, "{FAILURE_PREFIX}{}", msg.replace('\n', " "))?;
    }
    inner.flush()?;
    Ok(())
}

pub fn emit_csv(log: &RunLog, path: &Path, with_timing: bool) -> Result<()> {
    write_csv(std::io::BufWriter::new(File::create(path)?), log, with_timing)
}

fn parse_row(rec: &csv::StringRecord) -> Result<CsvRow> {
    if rec.len() != HEADER.len() {
        return Err(JpcmError::Config(format!(
            "expected {} columns, found {}",
            HEADER.len(),
            rec.len()
        )));
    }
    let f = |i: usize| -> Result<f64> {
        rec[i]
            .trim()
            .parse::<f64>()
            .map_err(|e| JpcmError::Config(format!("column {}: {e}", HEADER[i])))
    };
    let arr3 = |s: usize| -> Result<[f64; 3]> { Ok([f(s)?, f(s + 1)?, f(s + 2)?]) };
    Ok(CsvRow {
        t: f(0)?,
        position: arr3(1)?,
        reference: arr3(4)?,
        attitude: arr3(7)?,
        rotors: [f(10)?, f(11)?, f(12)?, f(13)?],
        position_error: arr3(14)?,
        rotation_error: arr3(17)?,
        iterations: rec[20]
            .trim()
            .parse()
            .map_err(|e| JpcmError::Config(format!("column iters: {e}")))?,
        solve_ms: f(21)?,
    })
}

pub fn parse_csv<R: BufRead>(input: R) -> Result<CsvLog> {
    let mut body = String::new();
    let mut failure = None;
    for line in input.lines() {
        let line = line?;
        if let Some(msg) = line.strip_prefix(FAILURE_PREFIX) {
            failure = Some(msg.to_string());
        } else if !line.starts_with('#') {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(JpcmError::Config("unexpected CSV header".into()));
    }
    let rows = reader
        .records()
        .map(|rec| parse_row(&rec?))
        .collect::<Result<Vec<_>>>()?;
    Ok(CsvLog { rows, failure })
}

pub fn read_csv(path: &Path) -> Result<CsvLog> {
    parse_csv(BufReader::new(File::open(path)?))
}
