//! CSV serialization of experiment results.

use std::io::{Read, Write};

use super::config::Method;
use super::experiment::{AggregateRow, TrialRecord};
use super::format_float;
use crate::{Error, Result};

pub const AGGREGATE_HEADER: &str = "method,alpha,r_x,n,r_y_base,trials,nmse,nmse_db,mean_iterations,mean_recon_calls";
pub const TRIAL_HEADER: &str = "method,alpha,r_x,trial_id,squared_error,signal_energy,iterations,recon_calls";

fn io_err(e: std::io::Error) -> Error {
    Error::io("<csv writer>", e)
}

pub fn write_aggregate_csv<W: Write>(mut out: W, rows: &[AggregateRow]) -> Result<()> {
    writeln!(out, "{AGGREGATE_HEADER}").map_err(io_err)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            format_float(r.alpha),
            format_float(r.r_x),
            r.n,
            r.r_y_base,
            r.trials,
            format_float(r.nmse),
            format_float(r.nmse_db),
            format_float(r.mean_iterations),
            format_float(r.mean_recon_calls),
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_trial_csv<W: Write>(mut out: W, records: &[TrialRecord]) -> Result<()> {
    writeln!(out, "{TRIAL_HEADER}").map_err(io_err)?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method,
            format_float(r.alpha),
            format_float(r.r_x),
            r.trial_id,
            format_float(r.squared_error),
            format_float(r.signal_energy),
            r.iterations,
            r.recon_calls,
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Parses an aggregate CSV. Errors carry the 1-based line number.
pub fn read_aggregate_csv<R: Read>(input: R) -> Result<Vec<AggregateRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != AGGREGATE_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header '{AGGREGATE_HEADER}', found '{header}'"),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let float = |i: usize| -> Result<f64> {
            field(i).trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("column {}: '{}': {e}", i + 1, field(i)),
            })
        };
        let int = |i: usize| -> Result<u64> {
            field(i).trim().parse::<u64>().map_err(|e| Error::Parse {
                line,
                message: format!("column {}: '{}': {e}", i + 1, field(i)),
            })
        };
        let method = field(0).parse::<Method>().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        rows.push(AggregateRow {
            method,
            alpha: float(1)?,
            r_x: float(2)?,
            n: int(3)? as usize,
            r_y_base: int(4)? as u32,
            trials: int(5)? as usize,
            nmse: float(6)?,
            nmse_db: float(7)?,
            mean_iterations: float(8)?,
            mean_recon_calls: float(9)?,
        });
    }
    Ok(rows)
}
