//! DVS event simulation and synthetic driving scenes.

mod profile;
mod scene;
mod sensor;

use thiserror::Error;

pub use profile::Profile;
pub use scene::{
    default_steering_gain, exposure_for_lighting, generate_scene, radiance_gain, ScenarioParams,
    Scene, SceneRenderer, TimedSample, APS_FRAME_INTERVAL_US, INTERNAL_FRAME_INTERVAL_US,
    MAX_EXPOSURE_US, MIN_EXPOSURE_US, STEERING_RATIO, VEHICLE_SAMPLE_INTERVAL_US, WHEELBASE_M,
};
pub use sensor::{
    events_from_frames, reconstruct_log_intensity, reconstruct_trace, EventGenerator,
    IntensityFrame, PixelState, SensorParams, CROSSING_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid sensor parameters: {0}")]
    InvalidParams(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("scenario config: {0}")]
    Config(String),

    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),

    #[error("frame {index} is {}x{}, expected {}x{}", found.0, found.1, expected.0, expected.1)]
    DimensionMismatch {
        index: usize,
        expected: (u16, u16),
        found: (u16, u16),
    },

    #[error("frame {index} timestamp {ts_us} us does not follow {previous_us} us")]
    NonIncreasingTimestamps {
        index: usize,
        previous_us: u64,
        ts_us: u64,
    },

    #[error("event {index} at ({x}, {y}) lies outside the sensor")]
    EventOutOfBounds { index: usize, x: u16, y: u16 },

    #[error("event {index} is earlier than its predecessor")]
    UnsortedEvents { index: usize },
}
