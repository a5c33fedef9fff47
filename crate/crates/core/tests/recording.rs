use std::io::Cursor;

use proptest::collection::vec;
use proptest::prelude::*;

use evdrive_core::recording::{
    open_recording, read_recording, stream_stats, write_recording, ApsFrame, Event, Payload,
    Polarity, RecordingError, RecordingMeta, StampedPacket, StreamId, VehicleChannel,
    VehicleSample, HEADER_FIXED_LEN, MAX_EVENTS_PER_PACKET,
};

fn event() -> impl Strategy<Value = Event> {
    (any::<u16>(), any::<u16>(), any::<bool>(), any::<u64>()).prop_map(|(x, y, on, ts)| {
        Event::new(x, y, if on { Polarity::On } else { Polarity::Off }, ts)
    })
}

fn payload() -> impl Strategy<Value = Payload> {
    prop_oneof![
        vec(event(), 0..50).prop_map(Payload::Dvs),
        (1u16..8, 1u16..8, any::<u32>(), any::<u64>(), any::<u64>()).prop_map(
            |(w, h, exposure, ts, seed)| {
                let pixels = (0..w as u64 * h as u64)
                    .map(|i| ((seed.wrapping_mul(i + 1) >> 7) % 1024) as u16)
                    .collect();
                Payload::Aps(ApsFrame::new(w, h, exposure, ts, pixels).unwrap().into())
            }
        ),
        (0usize..11, any::<f64>()).prop_filter_map("valid value", |(c, v)| {
            VehicleSample::new(VehicleChannel::ALL[c], v)
                .ok()
                .map(Payload::Vehicle)
        }),
    ]
}

fn packets() -> impl Strategy<Value = Vec<StampedPacket>> {
    vec((0u64..1000, payload()), 0..40).prop_map(|raw| {
        let mut clock = [0u64; 3];
        raw.into_iter()
            .map(|(step, payload)| {
                let p = StampedPacket::new(0, payload);
                let s = p.stream_id().index();
                clock[s] += step;
                StampedPacket::new(clock[s], p.payload)
            })
            .collect()
    })
}

fn meta() -> impl Strategy<Value = RecordingMeta> {
    (
        1u16..2000,
        1u16..2000,
        "[a-z0-9_-]{1,12}",
        "[a-z]{1,8}",
        any::<u64>(),
    )
        .prop_map(|(w, h, id, sc, ms)| RecordingMeta::new(w, h, id, sc).with_created_ms(ms))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn round_trip_is_identity(meta in meta(), packets in packets()) {
        let mut bytes = Vec::new();
        let n = write_recording(&meta, &packets, &mut bytes).unwrap();
        prop_assert_eq!(n, bytes.len() as u64);
        let (m, back) = read_recording(Cursor::new(&bytes)).unwrap();
        prop_assert_eq!(&m, &meta);
        prop_assert_eq!(&back, &packets);
        let mut again = Vec::new();
        write_recording(&m, &back, &mut again).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn any_cut_yields_a_prefix(meta in meta(), packets in packets(), frac in 0.0f64..1.0) {
        let mut bytes = Vec::new();
        write_recording(&meta, &packets, &mut bytes).unwrap();
        let header = HEADER_FIXED_LEN + u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let cut = header + ((bytes.len() - header) as f64 * frac) as usize;
        let (_, iter) = open_recording(Cursor::new(&bytes[..cut])).unwrap();
        let mut ok = Vec::new();
        for item in iter {
            match item {
                Ok(p) => ok.push(p),
                Err(RecordingError::Truncated { offset }) => {
                    prop_assert!((offset as usize) < cut);
                    prop_assert!(offset as usize >= header);
                }
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
        prop_assert!(packets.starts_with(&ok));
    }

    #[test]
    fn stream_filter_selects_one_stream(packets in packets()) {
        let meta = RecordingMeta::new(4, 4, "f", "day");
        let mut bytes = Vec::new();
        write_recording(&meta, &packets, &mut bytes).unwrap();
        for stream in StreamId::ALL {
            let (_, iter) = open_recording(Cursor::new(&bytes)).unwrap();
            let got: Vec<_> = iter.only(stream).map(Result::unwrap).collect();
            let want: Vec<_> = packets.iter().filter(|p| p.stream_id() == stream).cloned().collect();
            prop_assert_eq!(got, want);
        }
    }
}

#[test]
fn oversized_bursts_are_split() {
    let events: Vec<_> = (0..MAX_EVENTS_PER_PACKET + 10)
        .map(|i| Event::new(0, 0, Polarity::Off, i as u64))
        .collect();
    let batches = StampedPacket::dvs_batches(5, &events);
    assert_eq!(batches.len(), 2);
    let meta = RecordingMeta::new(1, 1, "burst", "day");
    let mut bytes = Vec::new();
    write_recording(&meta, &batches, &mut bytes).unwrap();
    let (_, stats) = stream_stats(Cursor::new(bytes)).unwrap();
    assert_eq!(stats.event_count, events.len() as u64);
    assert_eq!(stats.stream(StreamId::Dvs).count, 2);
}

#[test]
fn empty_recording_has_no_rates() {
    let meta = RecordingMeta::new(1, 1, "e", "day");
    let mut bytes = Vec::new();
    write_recording(&meta, std::iter::empty::<&StampedPacket>(), &mut bytes).unwrap();
    let (_, stats) = stream_stats(Cursor::new(bytes)).unwrap();
    for s in StreamId::ALL {
        assert_eq!(stats.stream(s).count, 0);
        assert_eq!(stats.stream(s).rate_hz(), None);
    }
    assert_eq!(stats.event_count, 0);
}
