use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Result, WsaaError};

use super::engine::{ExperimentOutput, ExperimentSummary, ReplicationRecord};

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes `records.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_outputs(
    dir: impl AsRef<Path>,
    output: &ExperimentOutput,
) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let records = dir.join(RECORDS_FILE);
    write_records(&records, &output.records)?;
    let summary = dir.join(SUMMARY_FILE);
    fs::write(
        &summary,
        serde_json::to_string_pretty(&output.summary)? + "\n",
    )?;
    Ok((records, summary))
}

pub fn write_records(path: impl AsRef<Path>, records: &[ReplicationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ReplicationRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(WsaaError::from))
        .collect()
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<ExperimentSummary> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
