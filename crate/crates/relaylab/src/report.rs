//! CSV interchange for sweep results.
//!
//! Format: header `sweep_value,scheme,mean_rate_per_subcarrier,std_error,trials`,
//! one row per (sweep value, scheme), UTF-8, LF line endings, floats printed
//! in their shortest round-trip representation. Every emitted file reparses
//! into the exact `SweepResult` that produced it.

use std::io;

use crate::error::{Error, Result};
use crate::experiments::{SweepResult, SweepRow};

pub fn write_csv<W: io::Write>(result: &SweepResult, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in &result.rows {
        out.serialize(row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(reader: R) -> Result<SweepResult> {
    let mut input = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for record in input.deserialize::<SweepRow>() {
        rows.push(record.map_err(csv_error)?);
    }
    Ok(SweepResult { rows })
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io_err) => Error::Io(io_err),
            _ => unreachable!("is_io_error guarantees an io kind"),
        }
    } else {
        Error::Format(e.to_string())
    }
}
