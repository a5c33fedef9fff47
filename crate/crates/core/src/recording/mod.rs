//! Recording data model and the chunked binary container.

mod codec;
mod model;
mod stats;

use thiserror::Error;

pub use codec::{
    open_recording, payload_len, read_recording, write_recording, Packets, RecordingWriter,
    APS_HEADER_LEN, DVS_EVENT_LEN, HEADER_FIXED_LEN, MAGIC, MAX_PAYLOAD_LEN, RECORD_HEADER_LEN,
    VEHICLE_PAYLOAD_LEN, VERSION,
};
pub use model::{
    ApsFrame, Event, Payload, Polarity, RecordingMeta, StampedPacket, StreamId, VehicleChannel,
    VehicleSample, APS_FULL_SCALE, MAX_EVENTS_PER_PACKET,
};
pub use stats::{stream_stats, RecordingStats, StreamSummary};

#[derive(Debug, Error)]
pub enum RecordingError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid metadata: {0}")]
    InvalidMeta(String),

    #[error("invalid packet: {0}")]
    InvalidPacket(String),

    #[error(
        "packet {index} on stream {stream} has host time {host_ts_ms} ms, \
         earlier than the previous {previous_ms} ms"
    )]
    OutOfOrder {
        index: usize,
        stream: StreamId,
        previous_ms: u64,
        host_ts_ms: u64,
    },

    #[error("packet {index} payload of {len} bytes exceeds the record size bound")]
    PayloadTooLarge { index: usize, len: usize },

    #[error("truncated record at byte offset {offset}")]
    Truncated { offset: u64 },

    #[error("corrupt record at byte offset {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },
}

impl RecordingError {
    pub(crate) fn at_index(self, index: usize) -> Self {
        match self {
            RecordingError::InvalidPacket(msg) => {
                RecordingError::InvalidPacket(format!("packet {index}: {msg}"))
            }
            other => other,
        }
    }
}
