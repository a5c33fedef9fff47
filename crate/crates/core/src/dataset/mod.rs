//! Turning synchronized windows into train/test sample files.

mod export;
mod prep;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::frames::FrameError;
use crate::recording::RecordingMeta;
use crate::sync::{window_recording_file, SyncError, SyncPolicy, SyncStats};

pub use export::*;
pub use prep::*;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: I/O error at byte {offset}: {source}", path.display())]
    Io {
        path: PathBuf,
        offset: u64,
        #[source]
        source: io::Error,
    },

    #[error("{}: file ends inside the record at byte {offset}", path.display())]
    Truncated { path: PathBuf, offset: u64 },

    #[error("{}: {reason}", path.display())]
    BadHeader { path: PathBuf, reason: String },

    #[error("refusing to export an empty dataset")]
    EmptyDataset,

    #[error("sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },

    #[error(transparent)]
    Frame(#[from] FrameError),

    #[error(transparent)]
    Sync(#[from] SyncError),
}

/// Samples of one recording file in window order, with the sync counters.
pub fn samples_from_recording(
    path: &Path,
    policy: &SyncPolicy,
) -> Result<(RecordingMeta, Vec<LabeledSample>, SyncStats), DatasetError> {
    let (meta, windows, stats) = window_recording_file(path, *policy)?;
    let mut samples = Vec::new();
    for w in &windows {
        if let Some(s) = LabeledSample::from_window(w, meta.width, meta.height, &meta.id)? {
            samples.push(s);
        }
    }
    Ok((meta, samples, stats))
}
