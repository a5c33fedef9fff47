//! Host-clock stream synchronization.
//!
//! [`StreamMerge`] interleaves per-stream packet sequences into one
//! non-decreasing host-time order (ties: DVS, then APS, then vehicle).
//! [`Windower`] cuts the merged sequence into consecutive half-open windows
//! anchored at the first DVS event and attaches the most recent APS frame and
//! a steering/speed label evaluated at each window's end.

use std::collections::VecDeque;
use std::convert::Infallible;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::recording::{
    open_recording, ApsFrame, Event, Packets, Payload, RecordingError, RecordingMeta,
    StampedPacket, StreamId, VehicleChannel,
};

/// Default window length, matching a 20 Hz frame rate.
pub const DEFAULT_WINDOW_MS: u64 = 50;
pub const DEFAULT_MAX_LABEL_GAP_MS: u64 = 200;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LabelMode {
    /// Most recent sample at or before the label time.
    #[default]
    ZeroOrderHold,
    /// Linear interpolation between the bracketing samples.
    Linear,
}

impl FromStr for LabelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zoh" | "zero-order-hold" => Ok(LabelMode::ZeroOrderHold),
            "linear" | "linear-interpolate" => Ok(LabelMode::Linear),
            other => Err(format!(
                "unknown label mode `{other}` (expected zoh or linear)"
            )),
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::ZeroOrderHold => "zoh",
            LabelMode::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncPolicy {
    pub window_ms: u64,
    pub label_mode: LabelMode,
    pub max_label_gap_ms: u64,
}

impl Default for SyncPolicy {
    fn default() -> Self {
        Self {
            window_ms: DEFAULT_WINDOW_MS,
            label_mode: LabelMode::ZeroOrderHold,
            max_label_gap_ms: DEFAULT_MAX_LABEL_GAP_MS,
        }
    }
}

impl SyncPolicy {
    pub fn validate(&self) -> Result<(), SyncError> {
        if self.window_ms == 0 {
            return Err(SyncError::InvalidPolicy(
                "window length must be positive".into(),
            ));
        }
        if self.max_label_gap_ms == 0 {
            return Err(SyncError::InvalidPolicy(
                "max label gap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SyncError {
    #[error("invalid sync policy: {0}")]
    InvalidPolicy(String),

    #[error(transparent)]
    Recording(#[from] RecordingError),
}

/// K-way merge of per-stream packet iterators.
///
/// Each input must be non-decreasing in host time. An input that yields an
/// error is dropped after the error is passed through.
pub struct StreamMerge<I, E>
where
    I: Iterator<Item = Result<StampedPacket, E>>,
{
    inputs: Vec<I>,
    heads: Vec<Option<StampedPacket>>,
    primed: bool,
    pending_error: Option<E>,
}

impl<I, E> StreamMerge<I, E>
where
    I: Iterator<Item = Result<StampedPacket, E>>,
{
    pub fn new(inputs: Vec<I>) -> Self {
        let heads = inputs.iter().map(|_| None).collect();
        Self {
            inputs,
            heads,
            primed: false,
            pending_error: None,
        }
    }

    fn refill(&mut self, i: usize) {
        match self.inputs[i].next() {
            Some(Ok(p)) => self.heads[i] = Some(p),
            Some(Err(e)) => {
                self.heads[i] = None;
                if self.pending_error.is_none() {
                    self.pending_error = Some(e);
                }
            }
            None => self.heads[i] = None,
        }
    }
}

impl<I, E> Iterator for StreamMerge<I, E>
where
    I: Iterator<Item = Result<StampedPacket, E>>,
{
    type Item = Result<StampedPacket, E>;

    fn next(&mut self) -> Option<Self::Item> {
        if !self.primed {
            self.primed = true;
            for i in 0..self.inputs.len() {
                self.refill(i);
            }
        }
        if let Some(e) = self.pending_error.take() {
            return Some(Err(e));
        }
        let best = self
            .heads
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.as_ref().map(|p| (p.host_ts_ms, p.stream_id(), i)))
            .min()?;
        let packet = self.heads[best.2].take();
        self.refill(best.2);
        packet.map(Ok)
    }
}

/// Merges packets held in memory. Packets are first split by stream, so the
/// input order across streams does not matter.
pub fn merge_streams<It>(packets: It) -> impl Iterator<Item = StampedPacket>
where
    It: IntoIterator<Item = StampedPacket>,
{
    let mut by_stream: Vec<Vec<Result<StampedPacket, Infallible>>> = vec![Vec::new(); 3];
    for p in packets {
        by_stream[p.stream_id().index()].push(Ok(p));
    }
    StreamMerge::new(by_stream.into_iter().map(Vec::into_iter).collect()).map(|r| match r {
        Ok(p) => p,
        Err(never) => match never {},
    })
}

/// Opens a container once per stream and merges the three sequential scans,
/// keeping memory bounded by a few packets.
#[allow(clippy::type_complexity)]
pub fn merge_recording_file(
    path: &Path,
) -> Result<
    (
        RecordingMeta,
        StreamMerge<Packets<BufReader<File>>, RecordingError>,
    ),
    RecordingError,
> {
    let mut meta = None;
    let mut inputs = Vec::with_capacity(3);
    for stream in StreamId::ALL {
        let (m, packets) = open_recording(BufReader::new(File::open(path)?))?;
        meta.get_or_insert(m);
        inputs.push(packets.only(stream));
    }
    Ok((
        meta.expect("three streams opened"),
        StreamMerge::new(inputs),
    ))
}

/// Adapter that yields `Ok` items until the first error, which it keeps for
/// later inspection.
pub struct StopOnError<I, E> {
    inner: I,
    error: Option<E>,
}

impl<I, E> StopOnError<I, E> {
    pub fn new(inner: I) -> Self {
        Self { inner, error: None }
    }

    pub fn take_error(&mut self) -> Option<E> {
        self.error.take()
    }
}

impl<T, I, E> Iterator for StopOnError<I, E>
where
    I: Iterator<Item = Result<T, E>>,
{
    type Item = T;

    fn next(&mut self) -> Option<T> {
        if self.error.is_some() {
            return None;
        }
        match self.inner.next()? {
            Ok(v) => Some(v),
            Err(e) => {
                self.error = Some(e);
                None
            }
        }
    }
}

/// Steering and speed evaluated at a window's end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Label {
    pub steering_deg: f64,
    pub speed_kmh: f64,
    /// Age of the oldest evidence used (for linear mode, the wider of the
    /// two bracketing distances).
    pub gap_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedRecord {
    pub start_ms: u64,
    /// Exclusive end; also the label time.
    pub end_ms: u64,
    pub events: Vec<Event>,
    pub frame: Arc<ApsFrame>,
    pub frame_host_ms: u64,
    pub label: Option<Label>,
    /// Set when the label is missing or older than the policy allows. Flagged
    /// records are excluded from datasets.
    pub flagged: bool,
}

impl WindowedRecord {
    pub fn is_usable(&self) -> bool {
        !self.flagged && self.label.is_some()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SyncStats {
    pub windows: u64,
    pub emitted: u64,
    /// Windows dropped because no APS frame preceded their end.
    pub skipped_no_frame: u64,
    pub skipped_events: u64,
    pub flagged: u64,
}

impl SyncStats {
    pub fn render(&self, prefix: &str) -> String {
        format!(
            "{prefix}windows={}\n{prefix}emitted={}\n{prefix}skipped_no_frame={}\n\
             {prefix}skipped_events={}\n{prefix}flagged={}\n",
            self.windows, self.emitted, self.skipped_no_frame, self.skipped_events, self.flagged
        )
    }

    pub fn merge(&mut self, other: &SyncStats) {
        self.windows += other.windows;
        self.emitted += other.emitted;
        self.skipped_no_frame += other.skipped_no_frame;
        self.skipped_events += other.skipped_events;
        self.flagged += other.flagged;
    }
}

struct OpenWindow {
    index: u64,
    events: Vec<Event>,
}

struct ClosedWindow {
    start: u64,
    end: u64,
    events: Vec<Event>,
}

const STEERING: usize = 0;
const SPEED: usize = 1;

fn label_slot(channel: VehicleChannel) -> Option<usize> {
    match channel {
        VehicleChannel::SteeringWheelAngle => Some(STEERING),
        VehicleChannel::Speed => Some(SPEED),
        _ => None,
    }
}

/// Streaming windowing transform; see [`window_records`].
pub struct Windower<I> {
    input: I,
    policy: SyncPolicy,
    anchor: Option<u64>,
    next_index: u64,
    open: Option<OpenWindow>,
    pending: VecDeque<ClosedWindow>,
    aps: VecDeque<(u64, Arc<ApsFrame>)>,
    vehicle: [VecDeque<(u64, f64)>; 2],
    watermark: Option<u64>,
    finished: bool,
    stats: SyncStats,
}

/// Cuts a merged packet sequence into labelled windows.
pub fn window_records<I>(merged: I, policy: SyncPolicy) -> Result<Windower<I::IntoIter>, SyncError>
where
    I: IntoIterator<Item = StampedPacket>,
{
    policy.validate()?;
    Ok(Windower {
        input: merged.into_iter(),
        policy,
        anchor: None,
        next_index: 0,
        open: None,
        pending: VecDeque::new(),
        aps: VecDeque::new(),
        vehicle: [VecDeque::new(), VecDeque::new()],
        watermark: None,
        finished: false,
        stats: SyncStats::default(),
    })
}

impl<I> Windower<I> {
    pub fn stats(&self) -> &SyncStats {
        &self.stats
    }

    fn bounds(&self, index: u64) -> (u64, u64) {
        let start = self.anchor.expect("windows exist only after anchoring")
            + index * self.policy.window_ms;
        (start, start + self.policy.window_ms)
    }

    fn close(&mut self, window: OpenWindow) {
        let (start, end) = self.bounds(window.index);
        self.pending.push_back(ClosedWindow {
            start,
            end,
            events: window.events,
        });
    }

    fn ingest(&mut self, packet: StampedPacket) {
        let ts = packet.host_ts_ms;
        self.watermark = Some(ts);
        if let Some(open) = &self.open {
            if ts >= self.bounds(open.index).1 {
                let open = self.open.take().unwrap();
                self.close(open);
            }
        }
        match packet.payload {
            Payload::Dvs(events) if !events.is_empty() => {
                let anchor = *self.anchor.get_or_insert(ts);
                let index = (ts - anchor) / self.policy.window_ms;
                if self.open.as_ref().map(|w| w.index) != Some(index) {
                    for empty in self.next_index..index {
                        let (start, end) = self.bounds(empty);
                        self.pending.push_back(ClosedWindow {
                            start,
                            end,
                            events: Vec::new(),
                        });
                    }
                    self.open = Some(OpenWindow {
                        index,
                        events: Vec::new(),
                    });
                    self.next_index = index + 1;
                }
                self.open.as_mut().unwrap().events.extend(events);
            }
            Payload::Dvs(_) => {}
            Payload::Aps(frame) => self.aps.push_back((ts, frame)),
            Payload::Vehicle(sample) => {
                if let Some(slot) = label_slot(sample.channel) {
                    self.vehicle[slot].push_back((ts, sample.value));
                }
            }
        }
        if self.anchor.is_none() {
            // No window can end at or before the current time.
            prune_before(&mut self.aps, |f| f.0 < ts);
            for h in &mut self.vehicle {
                prune_before(h, |s| s.0 <= ts);
            }
        }
    }

    /// Whether every packet that can influence `window` has been seen.
    fn resolvable(&self, window: &ClosedWindow) -> bool {
        if self.finished {
            return true;
        }
        let Some(mark) = self.watermark else {
            return false;
        };
        match self.policy.label_mode {
            LabelMode::ZeroOrderHold => mark > window.end,
            LabelMode::Linear => {
                mark > window.end + self.policy.max_label_gap_ms
                    || self
                        .vehicle
                        .iter()
                        .all(|h| h.back().is_some_and(|s| s.0 > window.end))
            }
        }
    }

    fn channel_value(&self, slot: usize, t: u64) -> Option<(f64, u64)> {
        let history = &self.vehicle[slot];
        let k = history.partition_point(|s| s.0 <= t);
        let prev = history.get(k.checked_sub(1)?).copied()?;
        match self.policy.label_mode {
            LabelMode::ZeroOrderHold => Some((prev.1, t - prev.0)),
            LabelMode::Linear => match history.get(k) {
                Some(&(t1, v1)) if prev.0 < t => {
                    let v = prev.1 + (v1 - prev.1) * (t - prev.0) as f64 / (t1 - prev.0) as f64;
                    Some((v, (t - prev.0).max(t1 - t)))
                }
                Some(_) => Some((prev.1, 0)),
                None => Some((prev.1, t - prev.0)),
            },
        }
    }

    fn resolve(&mut self, window: ClosedWindow) -> Option<WindowedRecord> {
        self.stats.windows += 1;
        let end = window.end;
        let frame_idx = self.aps.partition_point(|f| f.0 < end);
        let frame = frame_idx.checked_sub(1).map(|i| self.aps[i].clone());

        let label = match (
            self.channel_value(STEERING, end),
            self.channel_value(SPEED, end),
        ) {
            (Some((steering, g1)), Some((speed, g2))) => Some(Label {
                steering_deg: steering,
                speed_kmh: speed,
                gap_ms: g1.max(g2),
            }),
            _ => None,
        };

        // Later windows end later: keep only the newest item at or before
        // this end, plus everything after it.
        prune_before(&mut self.aps, |f| f.0 < end);
        for h in &mut self.vehicle {
            prune_before(h, |s| s.0 <= end);
        }

        let Some((frame_host_ms, frame)) = frame else {
            self.stats.skipped_no_frame += 1;
            self.stats.skipped_events += window.events.len() as u64;
            return None;
        };
        let flagged = label.is_none_or(|l| l.gap_ms > self.policy.max_label_gap_ms);
        self.stats.emitted += 1;
        if flagged {
            self.stats.flagged += 1;
        }
        Some(WindowedRecord {
            start_ms: window.start,
            end_ms: end,
            events: window.events,
            frame,
            frame_host_ms,
            label,
            flagged,
        })
    }
}

/// Drops leading items while the *second* item still satisfies `before`,
/// so the newest item satisfying it is retained.
fn prune_before<T>(queue: &mut VecDeque<T>, before: impl Fn(&T) -> bool) {
    while queue.len() >= 2 && before(&queue[1]) {
        queue.pop_front();
    }
}

impl<I> Iterator for Windower<I>
where
    I: Iterator<Item = StampedPacket>,
{
    type Item = WindowedRecord;

    fn next(&mut self) -> Option<WindowedRecord> {
        loop {
            let ready = self.pending.front().is_some_and(|w| self.resolvable(w));
            if let Some(window) = ready.then(|| self.pending.pop_front()).flatten() {
                match self.resolve(window) {
                    Some(record) => return Some(record),
                    None => continue,
                }
            }
            if self.finished {
                if let Some(open) = self.open.take() {
                    self.close(open);
                    continue;
                }
                if self.pending.is_empty() {
                    return None;
                }
                continue;
            }
            match self.input.next() {
                Some(packet) => self.ingest(packet),
                None => self.finished = true,
            }
        }
    }
}

/// Reads, merges and windows a container file in one streaming pass.
pub fn window_recording_file(
    path: &Path,
    policy: SyncPolicy,
) -> Result<(RecordingMeta, Vec<WindowedRecord>, SyncStats), SyncError> {
    let (meta, merged) = merge_recording_file(path)?;
    let mut latch = StopOnError::new(merged);
    let mut windows = window_records(latch.by_ref(), policy)?;
    let records: Vec<_> = windows.by_ref().collect();
    let stats = *windows.stats();
    if let Some(e) = latch.take_error() {
        return Err(e.into());
    }
    Ok((meta, records, stats))
}
