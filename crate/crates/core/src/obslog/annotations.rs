//! Per-recording ground-truth annotations, stored as CSV.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ObslogError;
use crate::session::RecordingKind;

pub const HEADER: [&str; 6] = ["recording_id", "has_speech", "male_spoke", "female_spoke", "conversation", "kind"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingAnnotation {
    pub recording_id: String,
    pub has_speech: bool,
    pub male_spoke: bool,
    pub female_spoke: bool,
    pub conversation: bool,
    pub kind: RecordingKind,
}

impl RecordingAnnotation {
    pub fn validate(&self) -> Result<(), String> {
        if self.conversation && !(self.male_spoke && self.female_spoke) {
            return Err(format!("{}: conversation without both partners speaking", self.recording_id));
        }
        if (self.male_spoke || self.female_spoke) && !self.has_speech {
            return Err(format!("{}: a partner spoke but has_speech is false", self.recording_id));
        }
        Ok(())
    }
}

pub fn write_annotations(path: &Path, rows: &[RecordingAnnotation]) -> Result<(), ObslogError> {
    let bytes = annotations_to_bytes(rows)?;
    fs::write(path, bytes).map_err(|source| ObslogError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn annotations_to_bytes(rows: &[RecordingAnnotation]) -> Result<Vec<u8>, ObslogError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(HEADER).map_err(|e| ObslogError::Csv(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| ObslogError::Csv(e.to_string()))?;
    }
    w.into_inner().map_err(|e| ObslogError::Csv(e.to_string()))
}

/// Reads and validates an annotation file. Errors name the 1-based file
/// line (the header is line 1).
pub fn read_annotations(path: &Path) -> Result<Vec<RecordingAnnotation>, ObslogError> {
    let data = fs::read(path).map_err(|source| ObslogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_annotations(&data)
}

pub fn parse_annotations(data: &[u8]) -> Result<Vec<RecordingAnnotation>, ObslogError> {
    let mut r = csv::Reader::from_reader(data);
    let headers = r.headers().map_err(|e| ObslogError::Parse { line: 1, msg: e.to_string() })?;
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(ObslogError::Parse {
            line: 1,
            msg: format!("expected header {}", HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<RecordingAnnotation>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| ObslogError::Parse { line, msg: e.to_string() })?;
        row.validate().map_err(|msg| ObslogError::Schema { line, msg })?;
        out.push(row);
    }
    Ok(out)
}
