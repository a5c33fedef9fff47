use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use super::codec::open_recording;
use super::model::{Payload, RecordingMeta, StampedPacket, StreamId, VehicleChannel};
use super::RecordingError;

/// Packet count and host-time span of one stream or channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamSummary {
    pub count: u64,
    pub first_ms: Option<u64>,
    pub last_ms: Option<u64>,
}

impl StreamSummary {
    fn observe(&mut self, ts_ms: u64) {
        self.count += 1;
        self.first_ms = Some(self.first_ms.map_or(ts_ms, |f| f.min(ts_ms)));
        self.last_ms = Some(self.last_ms.map_or(ts_ms, |l| l.max(ts_ms)));
    }

    pub fn span_ms(&self) -> Option<u64> {
        Some(self.last_ms? - self.first_ms?)
    }

    /// Mean sample rate from the inter-sample intervals: `(count - 1) / span`.
    /// Absent with fewer than two samples or a zero span.
    pub fn rate_hz(&self) -> Option<f64> {
        let span = self.span_ms()?;
        if self.count < 2 || span == 0 {
            return None;
        }
        Some((self.count - 1) as f64 * 1000.0 / span as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordingStats {
    pub streams: [StreamSummary; 3],
    /// Total DVS events across all DVS packets.
    pub event_count: u64,
    pub channels: BTreeMap<VehicleChannel, StreamSummary>,
    pub skipped_unknown: u64,
}

impl RecordingStats {
    pub fn observe(&mut self, packet: &StampedPacket) {
        self.streams[packet.stream_id().index()].observe(packet.host_ts_ms);
        match &packet.payload {
            Payload::Dvs(events) => self.event_count += events.len() as u64,
            Payload::Vehicle(sample) => self
                .channels
                .entry(sample.channel)
                .or_default()
                .observe(packet.host_ts_ms),
            Payload::Aps(_) => {}
        }
    }

    pub fn from_packets<'a>(packets: impl IntoIterator<Item = &'a StampedPacket>) -> Self {
        let mut stats = Self::default();
        for p in packets {
            stats.observe(p);
        }
        stats
    }

    pub fn stream(&self, id: StreamId) -> &StreamSummary {
        &self.streams[id.index()]
    }

    /// Plain-text `key=value` report.
    pub fn render(&self, meta: &RecordingMeta) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "id={}", meta.id);
        let _ = writeln!(out, "scenario={}", meta.scenario);
        let _ = writeln!(out, "sensor={}x{}", meta.width, meta.height);
        let mut line = |prefix: &str, s: &StreamSummary| {
            let _ = writeln!(out, "{prefix}.packets={}", s.count);
            if let (Some(first), Some(last)) = (s.first_ms, s.last_ms) {
                let _ = writeln!(out, "{prefix}.first_ms={first}");
                let _ = writeln!(out, "{prefix}.last_ms={last}");
            }
            if let Some(rate) = s.rate_hz() {
                let _ = writeln!(out, "{prefix}.rate_hz={rate:.3}");
            }
        };
        for id in StreamId::ALL {
            line(id.name(), self.stream(id));
        }
        for (channel, s) in &self.channels {
            line(&format!("vehicle.{}", channel.name()), s);
        }
        let _ = writeln!(out, "dvs.events={}", self.event_count);
        let _ = writeln!(out, "skipped_unknown={}", self.skipped_unknown);
        out
    }
}

/// Scans a container and reports per-stream counts, spans and rates.
pub fn stream_stats<R: Read>(source: R) -> Result<(RecordingMeta, RecordingStats), RecordingError> {
    let (meta, mut packets) = open_recording(source)?;
    let mut stats = RecordingStats::default();
    for packet in packets.by_ref() {
        stats.observe(&packet?);
    }
    stats.skipped_unknown = packets.skipped_unknown();
    Ok((meta, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::{write_recording, VehicleSample};

    #[test]
    fn vehicle_rate_ten_hz() {
        let packets: Vec<_> = (0..100)
            .map(|i| {
                StampedPacket::vehicle(
                    1_000 + i * 100,
                    VehicleSample::new(VehicleChannel::SteeringWheelAngle, 0.0).unwrap(),
                )
            })
            .collect();
        let stats = RecordingStats::from_packets(&packets);
        let v = stats.stream(StreamId::Vehicle);
        assert_eq!(v.count, 100);
        assert_eq!(v.span_ms(), Some(9_900));
        assert!((v.rate_hz().unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(
            stats.channels[&VehicleChannel::SteeringWheelAngle].count,
            100
        );
    }

    #[test]
    fn empty_recording_reports_zero() {
        let meta = RecordingMeta::new(2, 2, "e", "day");
        let mut bytes = Vec::new();
        write_recording(&meta, &[], &mut bytes).unwrap();
        let (_, stats) = stream_stats(bytes.as_slice()).unwrap();
        for id in StreamId::ALL {
            assert_eq!(stats.stream(id).count, 0);
            assert_eq!(stats.stream(id).rate_hz(), None);
            assert_eq!(stats.stream(id).first_ms, None);
        }
        assert_eq!(stats.event_count, 0);
        let text = stats.render(&meta);
        assert!(text.contains("dvs.packets=0\n"));
        assert!(!text.contains("rate_hz"));
    }
}
