//! Number formatting and file writers.
//!
//! Every number goes through [`round_sig`], so CSV and JSON agree digit for
//! digit and repeated runs are byte-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::Value;

use super::CliError;

/// Digits kept after the leading digit of every printed number.
pub const MANTISSA_DIGITS: usize = 9;

/// Rounds to `1 + MANTISSA_DIGITS` significant digits (`4/3` prints as `1.333333333`).
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", MANTISSA_DIGITS, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest text that reads back as `round_sig(x)`.
pub fn fmt_num(x: f64) -> String {
    let v = round_sig(x);
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Applies [`round_sig`] to every float inside a JSON tree.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Key used for a probe time, e.g. `rho_tau10`.
pub fn probe_key(prefix: &str, tau: f64) -> String {
    format!("{prefix}_tau{}", fmt_num(tau))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

/// Writes a CSV file; `None` cells stay empty.
pub fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<Option<f64>>>,
) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|c| c.map(fmt_num).unwrap_or_default()))
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: Value) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, &round_json(value))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)
}
