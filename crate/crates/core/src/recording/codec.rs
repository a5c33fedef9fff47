//! Flat record-log container.
//!
//! ```text
//! header : "DDRC" | version u16 | meta_len u32 | meta (UTF-8 key=value lines)
//! record : stream_id u8 | host_ts_ms u64 | payload_len u32 | payload
//! dvs    : count u16 | count x (x u16 | y u16 | polarity i8 | device_ts_us u64)
//! aps    : width u16 | height u16 | exposure_us u32 | device_ts_us u64 | pixels u16...
//! vehicle: channel u8 | value f64
//! ```
//!
//! All integers are little-endian. Readers scan sequentially and hold at most
//! one payload in memory.

use std::io::{self, BufReader, Read, Write};
use std::sync::Arc;

use super::model::{
    ApsFrame, Event, Payload, Polarity, RecordingMeta, StampedPacket, StreamId, VehicleChannel,
    VehicleSample, MAX_EVENTS_PER_PACKET,
};
use super::RecordingError;
use crate::kv::KeyValues;

pub const MAGIC: [u8; 4] = *b"DDRC";
pub const VERSION: u16 = 1;
/// magic + version + meta length.
pub const HEADER_FIXED_LEN: usize = 4 + 2 + 4;
/// stream id + host timestamp + payload length.
pub const RECORD_HEADER_LEN: usize = 1 + 8 + 4;
pub const DVS_EVENT_LEN: usize = 2 + 2 + 1 + 8;
pub const APS_HEADER_LEN: usize = 2 + 2 + 4 + 8;
pub const VEHICLE_PAYLOAD_LEN: usize = 1 + 8;
/// Upper bound on a single record payload, in bytes.
pub const MAX_PAYLOAD_LEN: usize = 16 << 20;
const MAX_META_LEN: usize = 64 << 10;

pub(crate) fn encode_meta(meta: &RecordingMeta) -> String {
    format!(
        "width={}\nheight={}\nid={}\nscenario={}\ncreated_ms={}\n",
        meta.width, meta.height, meta.id, meta.scenario, meta.created_ms
    )
}

fn decode_meta(text: &str) -> Result<RecordingMeta, RecordingError> {
    let kv = KeyValues::parse(text).map_err(|e| RecordingError::InvalidMeta(e.to_string()))?;
    let field = |key: &str| -> Result<&str, RecordingError> {
        kv.get(key)
            .ok_or_else(|| RecordingError::InvalidMeta(format!("missing key `{key}`")))
    };
    let number = |key: &str| -> Result<u64, RecordingError> {
        let raw = field(key)?;
        raw.parse()
            .map_err(|_| RecordingError::InvalidMeta(format!("bad value for `{key}`: {raw:?}")))
    };
    let dimension = |key: &str| -> Result<u16, RecordingError> {
        u16::try_from(number(key)?)
            .map_err(|_| RecordingError::InvalidMeta(format!("`{key}` exceeds 65535")))
    };
    let meta = RecordingMeta {
        width: dimension("width")?,
        height: dimension("height")?,
        id: field("id")?.to_owned(),
        scenario: field("scenario")?.to_owned(),
        created_ms: number("created_ms")?,
    };
    meta.validate()?;
    Ok(meta)
}

/// Size in bytes of the encoded payload for `payload`.
pub fn payload_len(payload: &Payload) -> usize {
    match payload {
        Payload::Dvs(events) => 2 + events.len() * DVS_EVENT_LEN,
        Payload::Aps(frame) => APS_HEADER_LEN + frame.pixels.len() * 2,
        Payload::Vehicle(_) => VEHICLE_PAYLOAD_LEN,
    }
}

fn encode_payload(payload: &Payload, out: &mut Vec<u8>) {
    out.clear();
    match payload {
        Payload::Dvs(events) => {
            out.reserve(2 + events.len() * DVS_EVENT_LEN);
            out.extend_from_slice(&(events.len() as u16).to_le_bytes());
            for e in events {
                out.extend_from_slice(&e.x.to_le_bytes());
                out.extend_from_slice(&e.y.to_le_bytes());
                out.push(e.polarity.to_wire() as u8);
                out.extend_from_slice(&e.device_ts_us.to_le_bytes());
            }
        }
        Payload::Aps(frame) => {
            out.reserve(APS_HEADER_LEN + frame.pixels.len() * 2);
            out.extend_from_slice(&frame.width.to_le_bytes());
            out.extend_from_slice(&frame.height.to_le_bytes());
            out.extend_from_slice(&frame.exposure_us.to_le_bytes());
            out.extend_from_slice(&frame.device_ts_us.to_le_bytes());
            for p in &frame.pixels {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        Payload::Vehicle(sample) => {
            out.push(sample.channel.id());
            out.extend_from_slice(&sample.value.to_le_bytes());
        }
    }
}

#[inline]
fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

#[inline]
fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

#[inline]
fn le_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn decode_payload(stream: StreamId, bytes: &[u8]) -> Result<Payload, String> {
    match stream {
        StreamId::Dvs => {
            if bytes.len() < 2 {
                return Err("DVS payload shorter than its count field".into());
            }
            let count = le_u16(bytes, 0) as usize;
            if bytes.len() != 2 + count * DVS_EVENT_LEN {
                return Err(format!(
                    "DVS payload of {} bytes does not hold {count} events",
                    bytes.len()
                ));
            }
            let mut events = Vec::with_capacity(count);
            for chunk in bytes[2..].chunks_exact(DVS_EVENT_LEN) {
                let polarity = Polarity::from_wire(chunk[4] as i8)
                    .ok_or_else(|| format!("invalid polarity byte {:#04x}", chunk[4]))?;
                events.push(Event {
                    x: le_u16(chunk, 0),
                    y: le_u16(chunk, 2),
                    polarity,
                    device_ts_us: le_u64(chunk, 5),
                });
            }
            Ok(Payload::Dvs(events))
        }
        StreamId::Aps => {
            if bytes.len() < APS_HEADER_LEN {
                return Err("APS payload shorter than its header".into());
            }
            let width = le_u16(bytes, 0);
            let height = le_u16(bytes, 2);
            let n = width as usize * height as usize;
            if bytes.len() != APS_HEADER_LEN + 2 * n {
                return Err(format!(
                    "APS payload of {} bytes does not hold a {width}x{height} frame",
                    bytes.len()
                ));
            }
            let pixels = bytes[APS_HEADER_LEN..]
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect();
            Ok(Payload::Aps(Arc::new(ApsFrame {
                width,
                height,
                exposure_us: le_u32(bytes, 4),
                device_ts_us: le_u64(bytes, 8),
                pixels,
            })))
        }
        StreamId::Vehicle => {
            if bytes.len() != VEHICLE_PAYLOAD_LEN {
                return Err(format!(
                    "vehicle payload must be 9 bytes, got {}",
                    bytes.len()
                ));
            }
            let channel = VehicleChannel::from_id(bytes[0])
                .ok_or_else(|| format!("unknown vehicle channel {}", bytes[0]))?;
            let value = f64::from_le_bytes(bytes[1..9].try_into().unwrap());
            Ok(Payload::Vehicle(VehicleSample { channel, value }))
        }
    }
}

/// Incremental container writer. Enforces per-stream timestamp order.
pub struct RecordingWriter<W: Write> {
    sink: W,
    last_ts: [Option<u64>; 3],
    index: usize,
    written: u64,
    scratch: Vec<u8>,
}

impl<W: Write> RecordingWriter<W> {
    pub fn new(meta: &RecordingMeta, mut sink: W) -> Result<Self, RecordingError> {
        meta.validate()?;
        let text = encode_meta(meta);
        sink.write_all(&MAGIC)?;
        sink.write_all(&VERSION.to_le_bytes())?;
        sink.write_all(&(text.len() as u32).to_le_bytes())?;
        sink.write_all(text.as_bytes())?;
        Ok(Self {
            sink,
            last_ts: [None; 3],
            index: 0,
            written: (HEADER_FIXED_LEN + text.len()) as u64,
            scratch: Vec::new(),
        })
    }

    pub fn write_packet(&mut self, packet: &StampedPacket) -> Result<(), RecordingError> {
        let index = self.index;
        let stream = packet.stream_id();
        if let Some(previous) = self.last_ts[stream.index()] {
            if packet.host_ts_ms < previous {
                return Err(RecordingError::OutOfOrder {
                    index,
                    stream,
                    previous_ms: previous,
                    host_ts_ms: packet.host_ts_ms,
                });
            }
        }
        match &packet.payload {
            Payload::Dvs(events) if events.len() > MAX_EVENTS_PER_PACKET => {
                return Err(RecordingError::PayloadTooLarge {
                    index,
                    len: payload_len(&packet.payload),
                })
            }
            Payload::Aps(frame) => frame.validate().map_err(|e| e.at_index(index))?,
            Payload::Vehicle(s) if !s.channel.accepts(s.value) => {
                return Err(RecordingError::InvalidPacket(format!(
                    "packet {index}: value {} out of range for {}",
                    s.value, s.channel
                )))
            }
            _ => {}
        }
        let len = payload_len(&packet.payload);
        if len > MAX_PAYLOAD_LEN {
            return Err(RecordingError::PayloadTooLarge { index, len });
        }

        encode_payload(&packet.payload, &mut self.scratch);
        debug_assert_eq!(self.scratch.len(), len);
        self.sink.write_all(&[stream as u8])?;
        self.sink.write_all(&packet.host_ts_ms.to_le_bytes())?;
        self.sink.write_all(&(len as u32).to_le_bytes())?;
        self.sink.write_all(&self.scratch)?;

        self.last_ts[stream.index()] = Some(packet.host_ts_ms);
        self.index += 1;
        self.written += (RECORD_HEADER_LEN + len) as u64;
        Ok(())
    }

    pub fn bytes_written(&self) -> u64 {
        self.written
    }

    /// Flushes and returns the sink together with the total byte count.
    pub fn finish(mut self) -> Result<(W, u64), RecordingError> {
        self.sink.flush()?;
        Ok((self.sink, self.written))
    }
}

/// Writes a complete container and returns the number of bytes written.
pub fn write_recording<'a, W, I>(
    meta: &RecordingMeta,
    packets: I,
    sink: W,
) -> Result<u64, RecordingError>
where
    W: Write,
    I: IntoIterator<Item = &'a StampedPacket>,
{
    let mut writer = RecordingWriter::new(meta, sink)?;
    for packet in packets {
        writer.write_packet(packet)?;
    }
    Ok(writer.finish()?.1)
}

/// Reads up to `buf.len()` bytes, stopping early only at end of input.
fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Parses the header and returns the metadata plus a lazy packet iterator.
pub fn open_recording<R: Read>(source: R) -> Result<(RecordingMeta, Packets<R>), RecordingError> {
    let mut reader = BufReader::new(source);
    let mut fixed = [0u8; HEADER_FIXED_LEN];
    let got = read_full(&mut reader, &mut fixed)?;
    if got < 4 || fixed[..4] != MAGIC {
        return Err(RecordingError::UnsupportedFormat(
            "missing DDRC magic".to_owned(),
        ));
    }
    if got < HEADER_FIXED_LEN {
        return Err(RecordingError::Truncated { offset: 0 });
    }
    let version = le_u16(&fixed, 4);
    if version != VERSION {
        return Err(RecordingError::UnsupportedFormat(format!(
            "container version {version}, expected {VERSION}"
        )));
    }
    let meta_len = le_u32(&fixed, 6) as usize;
    if meta_len > MAX_META_LEN {
        return Err(RecordingError::Corrupt {
            offset: 6,
            reason: format!("metadata length {meta_len} exceeds {MAX_META_LEN}"),
        });
    }
    let mut text = vec![0u8; meta_len];
    if read_full(&mut reader, &mut text)? < meta_len {
        return Err(RecordingError::Truncated { offset: 0 });
    }
    let text = String::from_utf8(text)
        .map_err(|_| RecordingError::InvalidMeta("metadata is not UTF-8".to_owned()))?;
    let meta = decode_meta(&text)?;
    let packets = Packets {
        reader,
        offset: (HEADER_FIXED_LEN + meta_len) as u64,
        buf: Vec::new(),
        filter: None,
        skipped_unknown: 0,
        done: false,
    };
    Ok((meta, packets))
}

/// Sequential packet iterator over a container body.
///
/// Structural failures (I/O, truncation, oversized records) end iteration
/// after the error is yielded. A record whose framing is intact but whose
/// payload does not decode yields a [`RecordingError::Corrupt`] and iteration
/// continues with the next record.
pub struct Packets<R: Read> {
    reader: BufReader<R>,
    offset: u64,
    buf: Vec<u8>,
    filter: Option<StreamId>,
    skipped_unknown: u64,
    done: bool,
}

impl<R: Read> Packets<R> {
    /// Restricts iteration to one stream. Other records are skipped without
    /// being decoded.
    pub fn only(mut self, stream: StreamId) -> Self {
        self.filter = Some(stream);
        self
    }

    /// Byte offset of the next record.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Number of records skipped because their stream id is unknown.
    pub fn skipped_unknown(&self) -> u64 {
        self.skipped_unknown
    }

    fn fail(&mut self, err: RecordingError) -> Option<Result<StampedPacket, RecordingError>> {
        self.done = true;
        Some(Err(err))
    }

    fn skip(&mut self, len: usize, record_start: u64) -> Result<(), RecordingError> {
        let copied = io::copy(&mut (&mut self.reader).take(len as u64), &mut io::sink())?;
        if copied < len as u64 {
            return Err(RecordingError::Truncated {
                offset: record_start,
            });
        }
        Ok(())
    }
}

impl<R: Read> Iterator for Packets<R> {
    type Item = Result<StampedPacket, RecordingError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.done {
                return None;
            }
            let record_start = self.offset;
            let mut head = [0u8; RECORD_HEADER_LEN];
            let got = match read_full(&mut self.reader, &mut head) {
                Ok(n) => n,
                Err(e) => return self.fail(e.into()),
            };
            if got == 0 {
                self.done = true;
                return None;
            }
            if got < RECORD_HEADER_LEN {
                return self.fail(RecordingError::Truncated {
                    offset: record_start,
                });
            }
            let host_ts_ms = le_u64(&head, 1);
            let len = le_u32(&head, 9) as usize;
            if len > MAX_PAYLOAD_LEN {
                return self.fail(RecordingError::Corrupt {
                    offset: record_start,
                    reason: format!("payload length {len} exceeds {MAX_PAYLOAD_LEN}"),
                });
            }

            let stream = StreamId::from_wire(head[0]);
            let wanted = match (stream, self.filter) {
                (None, _) => {
                    log::warn!(
                        "skipping record with unknown stream id {} at offset {record_start}",
                        head[0]
                    );
                    self.skipped_unknown += 1;
                    false
                }
                (Some(s), Some(f)) => s == f,
                (Some(_), None) => true,
            };
            if !wanted {
                if let Err(e) = self.skip(len, record_start) {
                    return self.fail(e);
                }
                self.offset = record_start + (RECORD_HEADER_LEN + len) as u64;
                continue;
            }

            self.buf.resize(len, 0);
            match read_full(&mut self.reader, &mut self.buf) {
                Ok(n) if n == len => {}
                Ok(_) => {
                    return self.fail(RecordingError::Truncated {
                        offset: record_start,
                    })
                }
                Err(e) => return self.fail(e.into()),
            }
            self.offset = record_start + (RECORD_HEADER_LEN + len) as u64;

            let stream = stream.expect("unknown streams are skipped above");
            return Some(
                decode_payload(stream, &self.buf)
                    .map(|payload| StampedPacket::new(host_ts_ms, payload))
                    .map_err(|reason| RecordingError::Corrupt {
                        offset: record_start,
                        reason,
                    }),
            );
        }
    }
}

/// Reads a whole container into memory.
pub fn read_recording<R: Read>(
    source: R,
) -> Result<(RecordingMeta, Vec<StampedPacket>), RecordingError> {
    let (meta, packets) = open_recording(source)?;
    let packets = packets.collect::<Result<Vec<_>, _>>()?;
    Ok((meta, packets))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> RecordingMeta {
        RecordingMeta::new(346, 260, "rec-1", "day").with_created_ms(1_600_000_000_000)
    }

    fn write_vec(meta: &RecordingMeta, packets: &[StampedPacket]) -> Vec<u8> {
        let mut out = Vec::new();
        let n = write_recording(meta, packets, &mut out).unwrap();
        assert_eq!(n as usize, out.len());
        out
    }

    fn three_events() -> Vec<Event> {
        vec![
            Event::new(1, 2, Polarity::On, 10),
            Event::new(345, 259, Polarity::Off, 11),
            Event::new(0, 0, Polarity::On, u64::MAX),
        ]
    }

    #[test]
    fn empty_recording_is_header_only() {
        let m = meta();
        let bytes = write_vec(&m, &[]);
        assert_eq!(bytes.len(), HEADER_FIXED_LEN + encode_meta(&m).len());
        let (back, packets) = read_recording(bytes.as_slice()).unwrap();
        assert_eq!(back, m);
        assert!(packets.is_empty());
    }

    #[test]
    fn dvs_batch_byte_length() {
        let m = meta();
        let meta_text = encode_meta(&m);
        // "width=346\nheight=260\nid=rec-1\nscenario=day\ncreated_ms=1600000000000\n"
        assert_eq!(meta_text.len(), 10 + 11 + 9 + 13 + 25);
        let packets = StampedPacket::dvs_batches(5, &three_events());
        let bytes = write_vec(&m, &packets);
        // 10 fixed header bytes + 68 meta + 13 record header + 2 count + 3 x 13
        assert_eq!(bytes.len(), 10 + 68 + 13 + 2 + 39);
        assert_eq!(bytes.len(), 132);
    }

    #[test]
    fn header_layout_is_little_endian() {
        let m = meta();
        let packets = vec![StampedPacket::vehicle(
            0x0102,
            VehicleSample::new(VehicleChannel::Speed, 42.5).unwrap(),
        )];
        let bytes = write_vec(&m, &packets);
        assert_eq!(&bytes[..4], b"DDRC");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(le_u32(&bytes, 6) as usize, encode_meta(&m).len());
        let rec = HEADER_FIXED_LEN + encode_meta(&m).len();
        assert_eq!(bytes[rec], 2);
        assert_eq!(&bytes[rec + 1..rec + 9], &[2, 1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[rec + 9..rec + 13], &[9, 0, 0, 0]);
        assert_eq!(bytes[rec + 13], 10);
        assert_eq!(&bytes[rec + 14..], &42.5f64.to_le_bytes());
    }

    #[test]
    fn decreasing_timestamps_rejected_at_index() {
        let packets = vec![
            StampedPacket::new(10, Payload::Dvs(three_events())),
            StampedPacket::new(9, Payload::Dvs(three_events())),
        ];
        let err = write_recording(&meta(), &packets, Vec::new()).unwrap_err();
        match err {
            RecordingError::OutOfOrder { index, stream, .. } => {
                assert_eq!(index, 1);
                assert_eq!(stream, StreamId::Dvs);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn order_is_only_enforced_within_a_stream() {
        let packets = vec![
            StampedPacket::new(10, Payload::Dvs(vec![])),
            StampedPacket::vehicle(3, VehicleSample::new(VehicleChannel::Speed, 1.0).unwrap()),
            StampedPacket::new(10, Payload::Dvs(vec![])),
        ];
        assert!(write_recording(&meta(), &packets, Vec::new()).is_ok());
    }

    #[test]
    fn oversized_dvs_packet_rejected() {
        let events = vec![Event::new(0, 0, Polarity::On, 0); MAX_EVENTS_PER_PACKET + 1];
        let packets = vec![StampedPacket::new(0, Payload::Dvs(events))];
        assert!(matches!(
            write_recording(&meta(), &packets, Vec::new()),
            Err(RecordingError::PayloadTooLarge { index: 0, .. })
        ));
    }

    #[test]
    fn oversized_aps_frame_rejected() {
        let frame = ApsFrame::new(4096, 4096, 50, 0, vec![0; 4096 * 4096]).unwrap();
        let packets = vec![StampedPacket::aps(0, frame)];
        assert!(matches!(
            write_recording(&meta(), &packets, Vec::new()),
            Err(RecordingError::PayloadTooLarge { .. })
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        assert!(matches!(
            open_recording(&b"NOPE\x01\x00"[..]),
            Err(RecordingError::UnsupportedFormat(_))
        ));
        let mut bytes = write_vec(&meta(), &[]);
        bytes[4] = 2;
        assert!(matches!(
            open_recording(bytes.as_slice()),
            Err(RecordingError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            open_recording(&b""[..]),
            Err(RecordingError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn truncated_file_yields_prefix_then_offset() {
        let m = meta();
        let packets = vec![
            StampedPacket::new(1, Payload::Dvs(three_events())),
            StampedPacket::vehicle(2, VehicleSample::new(VehicleChannel::Speed, 30.0).unwrap()),
            StampedPacket::new(3, Payload::Dvs(three_events())),
        ];
        let bytes = write_vec(&m, &packets);
        let last_start = bytes.len() - (RECORD_HEADER_LEN + 2 + 3 * DVS_EVENT_LEN);
        for cut in [
            last_start + 1,
            last_start + 5,
            last_start + 13,
            bytes.len() - 1,
        ] {
            let (_, iter) = open_recording(&bytes[..cut]).unwrap();
            let items: Vec<_> = iter.collect();
            assert_eq!(items.len(), 3, "cut at {cut}");
            assert_eq!(items[0].as_ref().unwrap(), &packets[0]);
            assert_eq!(items[1].as_ref().unwrap(), &packets[1]);
            match &items[2] {
                Err(RecordingError::Truncated { offset }) => {
                    assert_eq!(*offset as usize, last_start)
                }
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
        // Cutting exactly at a record boundary is a clean end.
        let (_, iter) = open_recording(&bytes[..last_start]).unwrap();
        assert_eq!(iter.map(Result::unwrap).count(), 2);
    }

    #[test]
    fn unknown_stream_is_skipped() {
        let m = meta();
        let packets = vec![
            StampedPacket::new(1, Payload::Dvs(three_events())),
            StampedPacket::vehicle(2, VehicleSample::new(VehicleChannel::Speed, 30.0).unwrap()),
            StampedPacket::new(3, Payload::Dvs(three_events())),
        ];
        let mut bytes = write_vec(&m, &packets);
        // Patch the second record's stream id to 7.
        let second = HEADER_FIXED_LEN + encode_meta(&m).len() + RECORD_HEADER_LEN + 2 + 39;
        assert_eq!(bytes[second], 2);
        bytes[second] = 7;
        let (_, mut iter) = open_recording(bytes.as_slice()).unwrap();
        let got: Vec<_> = iter.by_ref().map(Result::unwrap).collect();
        assert_eq!(got, vec![packets[0].clone(), packets[2].clone()]);
        assert_eq!(iter.skipped_unknown(), 1);
    }

    #[test]
    fn corrupt_payload_does_not_stop_iteration() {
        let m = meta();
        let packets = vec![
            StampedPacket::new(1, Payload::Dvs(three_events())),
            StampedPacket::new(2, Payload::Dvs(three_events())),
        ];
        let mut bytes = write_vec(&m, &packets);
        let first = HEADER_FIXED_LEN + encode_meta(&m).len();
        // Polarity byte of the first event.
        bytes[first + RECORD_HEADER_LEN + 2 + 4] = 0;
        let (_, iter) = open_recording(bytes.as_slice()).unwrap();
        let items: Vec<_> = iter.collect();
        assert!(matches!(
            items[0],
            Err(RecordingError::Corrupt { offset, .. }) if offset as usize == first
        ));
        assert_eq!(items[1].as_ref().unwrap(), &packets[1]);
    }

    #[test]
    fn stream_filter() {
        let packets = vec![
            StampedPacket::new(1, Payload::Dvs(three_events())),
            StampedPacket::vehicle(2, VehicleSample::new(VehicleChannel::Speed, 30.0).unwrap()),
            StampedPacket::aps(3, ApsFrame::new(2, 1, 60, 7, vec![1, 1023]).unwrap()),
        ];
        let bytes = write_vec(&meta(), &packets);
        let (_, iter) = open_recording(bytes.as_slice()).unwrap();
        let aps: Vec<_> = iter.only(StreamId::Aps).map(Result::unwrap).collect();
        assert_eq!(aps, vec![packets[2].clone()]);
    }

    #[test]
    fn meta_with_newline_rejected() {
        let m = RecordingMeta::new(4, 4, "a\nb", "day");
        assert!(matches!(
            write_recording(&m, &[], Vec::new()),
            Err(RecordingError::InvalidMeta(_))
        ));
        let m = RecordingMeta::new(0, 4, "a", "day");
        assert!(write_recording(&m, &[], Vec::new()).is_err());
    }

    #[test]
    fn meta_values_may_contain_equals() {
        let m = RecordingMeta::new(4, 4, "run=3", "night rain");
        let bytes = write_vec(&m, &[]);
        assert_eq!(read_recording(bytes.as_slice()).unwrap().0, m);
    }
}
