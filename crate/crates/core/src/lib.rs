//! Desk-scale data path for event+frame camera driving studies.
//!
//! * [`recording`]: data model and the `DDRC` record-log container.
//! * [`simulator`]: log-intensity DVS model and synthetic road scenes.
//! * [`sync`]: host-clock stream merge and 50 ms windowing with labels.
//! * [`frames`]: DVS histograms, normalization and downsampling.
//! * [`dataset`]: filtering, rebalancing, temporal split and export.
//! * [`metrics`]: RMSE, explained variance and run summaries.

pub mod dataset;
pub mod frames;
pub mod kv;
pub mod metrics;
pub mod recording;
pub mod simulator;
pub mod sync;

pub use frames::{DvsHistogram, NormalizedImage};
pub use recording::{
    ApsFrame, Event, Payload, Polarity, RecordingMeta, StampedPacket, StreamId, VehicleChannel,
    VehicleSample,
};
pub use sync::{SyncPolicy, WindowedRecord};
