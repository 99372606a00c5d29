//! Directory-scan ingestion with a (path, label) manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::resample::resample;
use super::segment::{SegmentSet, TRAINING_RATE};
use super::wav::read_wav;
use crate::error::{AncError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: String,
}

/// Every `.wav` under `root`, sorted by path. The label is the name of the
/// containing directory (or the file stem for files directly under `root`).
pub fn scan_corpus(root: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            match e.into_io_error() {
                Some(io) => AncError::io(path, io),
                None => AncError::Format(format!("cannot walk {}", path.display())),
            }
        })?;
        let path = entry.path();
        let is_wav = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if !entry.file_type().is_file() || !is_wav {
            continue;
        }
        let label = match path.parent() {
            Some(p) if p != root => p.file_name().map(|n| n.to_string_lossy().into_owned()),
            _ => path.file_stem().map(|n| n.to_string_lossy().into_owned()),
        }
        .unwrap_or_default();
        out.push(ManifestEntry {
            path: path.to_path_buf(),
            label,
        });
    }
    Ok(out)
}

pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for e in entries {
        w.serialize(e).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| AncError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

fn csv_err(path: &Path, e: csv::Error) -> AncError {
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return AncError::io(path, io);
        }
        unreachable!()
    }
    AncError::Format(format!("{}: {e}", path.display()))
}

/// Reads, resamples to 16 kHz and slices every manifest entry.
pub fn load_segments(entries: &[ManifestEntry], seconds: f64, seed: u64) -> Result<SegmentSet> {
    let mut set = SegmentSet::new(seed);
    for e in entries {
        let sig = resample(&read_wav(&e.path)?, TRAINING_RATE)?;
        set.push_signal(&sig, seconds, &e.label)?;
    }
    Ok(set)
}
