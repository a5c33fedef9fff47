//! Recording data model: events, frames, vehicle telemetry and the
//! host-stamped packets that carry them.

use std::fmt;
use std::sync::Arc;

use super::RecordingError;

/// Maximum number of events carried by a single DVS packet.
pub const MAX_EVENTS_PER_PACKET: usize = u16::MAX as usize;

/// Sign of a brightness change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    /// Brightness increased (+1).
    On,
    /// Brightness decreased (-1).
    Off,
}

impl Polarity {
    #[inline]
    pub fn sign(self) -> i32 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    #[inline]
    pub fn from_sign(sign: f64) -> Self {
        if sign >= 0.0 {
            Polarity::On
        } else {
            Polarity::Off
        }
    }

    pub(crate) fn to_wire(self) -> i8 {
        self.sign() as i8
    }

    pub(crate) fn from_wire(value: i8) -> Option<Self> {
        match value {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }
}

/// One DVS brightness-change event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
    /// Camera clock, microseconds.
    pub device_ts_us: u64,
}

impl Event {
    pub fn new(x: u16, y: u16, polarity: Polarity, device_ts_us: u64) -> Self {
        Self {
            x,
            y,
            polarity,
            device_ts_us,
        }
    }

    #[inline]
    pub fn in_bounds(&self, width: u16, height: u16) -> bool {
        self.x < width && self.y < height
    }
}

/// Full scale of the 10-bit APS ADC.
pub const APS_FULL_SCALE: u16 = 1023;

/// Grayscale APS frame. Pixels are row-major 10-bit intensities stored in
/// 16 bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApsFrame {
    pub width: u16,
    pub height: u16,
    pub exposure_us: u32,
    /// Frame start on the camera clock, microseconds.
    pub device_ts_us: u64,
    pub pixels: Vec<u16>,
}

impl ApsFrame {
    pub fn new(
        width: u16,
        height: u16,
        exposure_us: u32,
        device_ts_us: u64,
        pixels: Vec<u16>,
    ) -> Result<Self, RecordingError> {
        let frame = Self {
            width,
            height,
            exposure_us,
            device_ts_us,
            pixels,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub(crate) fn validate(&self) -> Result<(), RecordingError> {
        let expected = self.width as usize * self.height as usize;
        if self.pixels.len() != expected {
            return Err(RecordingError::InvalidPacket(format!(
                "APS frame {}x{} carries {} pixels, expected {expected}",
                self.width,
                self.height,
                self.pixels.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width as usize + x]
    }
}

/// Vehicle telemetry channels, numbered as on the vehicle bus listing
/// (1-indexed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum VehicleChannel {
    AcceleratorPedal = 1,
    BrakeStatus = 2,
    EngineRpm = 3,
    HeadlampStatus = 4,
    Latitude = 5,
    Longitude = 6,
    Odometer = 7,
    SteeringWheelAngle = 8,
    Gear = 9,
    Speed = 10,
    WiperStatus = 11,
}

impl VehicleChannel {
    pub const ALL: [VehicleChannel; 11] = [
        VehicleChannel::AcceleratorPedal,
        VehicleChannel::BrakeStatus,
        VehicleChannel::EngineRpm,
        VehicleChannel::HeadlampStatus,
        VehicleChannel::Latitude,
        VehicleChannel::Longitude,
        VehicleChannel::Odometer,
        VehicleChannel::SteeringWheelAngle,
        VehicleChannel::Gear,
        VehicleChannel::Speed,
        VehicleChannel::WiperStatus,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get((id as usize).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            VehicleChannel::AcceleratorPedal => "accelerator_pedal_position",
            VehicleChannel::BrakeStatus => "brake_pedal_status",
            VehicleChannel::EngineRpm => "engine_speed",
            VehicleChannel::HeadlampStatus => "headlamp_status",
            VehicleChannel::Latitude => "latitude",
            VehicleChannel::Longitude => "longitude",
            VehicleChannel::Odometer => "odometer",
            VehicleChannel::SteeringWheelAngle => "steering_wheel_angle",
            VehicleChannel::Gear => "transmission_gear_position",
            VehicleChannel::Speed => "vehicle_speed",
            VehicleChannel::WiperStatus => "windshield_wiper_status",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(
            self,
            VehicleChannel::BrakeStatus
                | VehicleChannel::HeadlampStatus
                | VehicleChannel::WiperStatus
        )
    }

    /// Whether `value` lies in the channel's physical range.
    pub fn accepts(self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match self {
            VehicleChannel::SteeringWheelAngle => (-720.0..=720.0).contains(&value),
            VehicleChannel::Speed => (0.0..=160.0).contains(&value),
            VehicleChannel::AcceleratorPedal => (0.0..=100.0).contains(&value),
            c if c.is_binary() => value == 0.0 || value == 1.0,
            _ => true,
        }
    }
}

impl fmt::Display for VehicleChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleSample {
    pub channel: VehicleChannel,
    pub value: f64,
}

impl VehicleSample {
    pub fn new(channel: VehicleChannel, value: f64) -> Result<Self, RecordingError> {
        if !channel.accepts(value) {
            return Err(RecordingError::InvalidPacket(format!(
                "value {value} out of range for channel {channel}"
            )));
        }
        Ok(Self { channel, value })
    }
}

/// Stream identifiers in container order. The numeric value doubles as the
/// tie-break rank when merging streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum StreamId {
    Dvs = 0,
    Aps = 1,
    Vehicle = 2,
}

impl StreamId {
    pub const ALL: [StreamId; 3] = [StreamId::Dvs, StreamId::Aps, StreamId::Vehicle];

    pub fn from_wire(id: u8) -> Option<Self> {
        match id {
            0 => Some(StreamId::Dvs),
            1 => Some(StreamId::Aps),
            2 => Some(StreamId::Vehicle),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            StreamId::Dvs => "dvs",
            StreamId::Aps => "aps",
            StreamId::Vehicle => "vehicle",
        }
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Dvs(Vec<Event>),
    /// Shared so that held frames can be paired with several windows.
    Aps(Arc<ApsFrame>),
    Vehicle(VehicleSample),
}

impl Payload {
    pub fn stream_id(&self) -> StreamId {
        match self {
            Payload::Dvs(_) => StreamId::Dvs,
            Payload::Aps(_) => StreamId::Aps,
            Payload::Vehicle(_) => StreamId::Vehicle,
        }
    }
}

/// A payload stamped with the recording computer's millisecond clock.
#[derive(Debug, Clone, PartialEq)]
pub struct StampedPacket {
    pub host_ts_ms: u64,
    pub payload: Payload,
}

impl StampedPacket {
    pub fn new(host_ts_ms: u64, payload: Payload) -> Self {
        Self {
            host_ts_ms,
            payload,
        }
    }

    pub fn aps(host_ts_ms: u64, frame: ApsFrame) -> Self {
        Self::new(host_ts_ms, Payload::Aps(Arc::new(frame)))
    }

    pub fn vehicle(host_ts_ms: u64, sample: VehicleSample) -> Self {
        Self::new(host_ts_ms, Payload::Vehicle(sample))
    }

    /// Packs an event burst into as many DVS packets as the per-packet cap
    /// requires, all stamped with the same host time.
    pub fn dvs_batches(host_ts_ms: u64, events: &[Event]) -> Vec<Self> {
        if events.is_empty() {
            return vec![Self::new(host_ts_ms, Payload::Dvs(Vec::new()))];
        }
        events
            .chunks(MAX_EVENTS_PER_PACKET)
            .map(|chunk| Self::new(host_ts_ms, Payload::Dvs(chunk.to_vec())))
            .collect()
    }

    #[inline]
    pub fn stream_id(&self) -> StreamId {
        self.payload.stream_id()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingMeta {
    pub width: u16,
    pub height: u16,
    pub id: String,
    /// Free-text scenario tag such as `day` or `night`.
    pub scenario: String,
    pub created_ms: u64,
}

impl RecordingMeta {
    pub fn new(
        width: u16,
        height: u16,
        id: impl Into<String>,
        scenario: impl Into<String>,
    ) -> Self {
        Self {
            width,
            height,
            id: id.into(),
            scenario: scenario.into(),
            created_ms: 0,
        }
    }

    pub fn with_created_ms(mut self, created_ms: u64) -> Self {
        self.created_ms = created_ms;
        self
    }

    pub(crate) fn validate(&self) -> Result<(), RecordingError> {
        if self.width == 0 || self.height == 0 {
            return Err(RecordingError::InvalidMeta(format!(
                "sensor size must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        for (key, value) in [("id", &self.id), ("scenario", &self.scenario)] {
            if value.contains(['\n', '\r']) {
                return Err(RecordingError::InvalidMeta(format!(
                    "{key} must be a single line"
                )));
            }
        }
        Ok(())
    }
}
