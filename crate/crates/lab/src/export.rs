//! Deterministic text output: trajectory CSV and JSON summaries.
//!
//! Every number is written with 17 significant digits, positionally when the
//! decimal exponent lies in `[-7, 20]` and in scientific notation otherwise,
//! so identical runs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hyperdelay_core::solver::Trajectory;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot serialize summary: {0}")]
    Json(#[from] serde_json::Error),
}

const DIGITS: usize = 17;

/// Decimal text with 17 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return String::from("nan");
    }
    if x.is_infinite() {
        return String::from(if x > 0.0 { "inf" } else { "-inf" });
    }
    if x == 0.0 {
        return format!("{:.*}", DIGITS - 1, 0.0);
    }
    let sci = format!("{:.*e}", DIGITS - 1, x);
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-7..=20).contains(&exp) {
        let decimals = (DIGITS as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

/// A float that serializes through [`format_number`]; non-finite values
/// become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        let raw = RawValue::from_string(format_number(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

impl From<f64> for Num {
    fn from(x: f64) -> Self {
        Num(x)
    }
}

pub fn nums(values: &[f64]) -> Vec<Num> {
    values.iter().copied().map(Num).collect()
}

pub fn trajectory_header(n: usize) -> String {
    let mut header = String::from("t,l2_total,l2_high,l2_low,linf,l1");
    for i in 1..=n {
        let _ = write!(header, ",comp_{i}");
    }
    header
}

pub fn trajectory_csv(traj: &Trajectory, n: usize) -> String {
    let mut out = trajectory_header(n);
    out.push('\n');
    for s in &traj.samples {
        let mut fields = vec![s.t, s.l2_total, s.l2_high, s.l2_low, s.linf, s.l1];
        fields.extend(s.components.iter().copied());
        let row: Vec<String> = fields.into_iter().map(format_number).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Any table with a fixed header, one row per record.
pub fn table_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let row: Vec<String> = row.into_iter().map(format_number).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, ExportError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ExportError> {
    fs::create_dir_all(dir).map_err(|source| ExportError::Io { path: dir.to_path_buf(), source })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| ExportError::Io { path: path.clone(), source })?;
    Ok(path)
}
