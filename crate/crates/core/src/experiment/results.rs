use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Variant;

/// Column names, in file order.
pub const CSV_HEADER: [&str; 7] = ["L_m", "variant", "seed", "wsr_bps_hz", "iterations", "converged", "wall_s"];

/// Outcome of a cell, written to the `converged` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    #[serde(rename = "true")]
    Converged,
    /// Hit the outer iteration cap.
    #[serde(rename = "false")]
    NotConverged,
    /// A subsolver or the channel model raised an error.
    #[serde(rename = "failed")]
    Failed,
}

/// One row of the sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "L_m")]
    pub distance_m: f64,
    pub variant: Variant,
    pub seed: u64,
    pub wsr_bps_hz: f64,
    pub iterations: usize,
    #[serde(rename = "converged")]
    pub status: CellStatus,
    pub wall_s: f64,
}

pub(super) fn create_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes `records` to `path` as CSV with the fixed [`CSV_HEADER`].
pub fn emit_results(records: &[SweepRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Contract("no records to emit".into()));
    }
    let mut writer = create_writer(path)?;
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Parses a file written by [`emit_results`] or the sweep writer.
pub fn read_results(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Contract(format!("unexpected header {header:?}")));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}
