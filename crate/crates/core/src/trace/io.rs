//! CSV readers and writers for the two sensor channels.
//!
//! Force traces carry the header `t_s,voltage_v`, kinematic traces
//! `t_s,z_mm`. Values are written with Rust's shortest round-trip float
//! formatting so a write-then-read cycle is bit-exact.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{ForceSample, ForceTrace, KinSample, KinTrace, NOMINAL_FORCE_RATE_HZ, NOMINAL_KIN_RATE_HZ};

pub const FORCE_HEADER: [&str; 2] = ["t_s", "voltage_v"];
pub const KIN_HEADER: [&str; 2] = ["t_s", "z_mm"];

/// Reads `(t, value)` rows, enforcing the header and strictly increasing time.
fn read_pairs<R: Read>(source: R, header: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);

    let found = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    if found.is_empty() || (found.len() == 1 && found[0].trim().is_empty()) {
        return Err(Error::Parse {
            line: 1,
            message: "empty file, expected header".into(),
        });
    }
    let names: Vec<&str> = found.iter().map(str::trim).collect();
    if names != header {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`, found `{}`", header.join(","), names.join(",")),
        });
    }

    let mut rows: Vec<(f64, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            csv_error(e, line)
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> Result<f64> {
            let raw = record[i].trim();
            let value: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{raw}` is not a number in column `{}`", header[i]),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value in column `{}`", header[i]),
                });
            }
            Ok(value)
        };
        let t = field(0)?;
        let v = field(1)?;
        if let Some(&(prev, _)) = rows.last() {
            if t <= prev {
                return Err(Error::Sequencing { line });
            }
        }
        rows.push((t, v));
    }
    Ok(rows)
}

fn csv_error(err: csv::Error, line: u64) -> Error {
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

pub fn ingest_force_trace<R: Read>(source: R) -> Result<ForceTrace> {
    let rows = read_pairs(source, FORCE_HEADER)?;
    let samples = rows
        .into_iter()
        .map(|(t_s, voltage_v)| ForceSample { t_s, voltage_v })
        .collect();
    ForceTrace::new(samples, NOMINAL_FORCE_RATE_HZ)
}

pub fn ingest_kin_trace<R: Read>(source: R) -> Result<KinTrace> {
    let rows = read_pairs(source, KIN_HEADER)?;
    let samples = rows.into_iter().map(|(t_s, z_mm)| KinSample { t_s, z_mm }).collect();
    KinTrace::new(samples, NOMINAL_KIN_RATE_HZ)
}

pub fn write_force_trace<W: Write>(trace: &ForceTrace, mut out: W) -> Result<()> {
    writeln!(out, "{}", FORCE_HEADER.join(","))?;
    for s in trace.samples() {
        writeln!(out, "{},{}", s.t_s, s.voltage_v)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_kin_trace<W: Write>(trace: &KinTrace, mut out: W) -> Result<()> {
    writeln!(out, "{}", KIN_HEADER.join(","))?;
    for s in trace.samples() {
        writeln!(out, "{},{}", s.t_s, s.z_mm)?;
    }
    out.flush()?;
    Ok(())
}

pub fn force_trace_to_csv(trace: &ForceTrace) -> String {
    let mut buf = Vec::with_capacity(trace.len() * 24);
    write_force_trace(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

pub fn kin_trace_to_csv(trace: &KinTrace) -> String {
    let mut buf = Vec::with_capacity(trace.len() * 24);
    write_kin_trace(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}
