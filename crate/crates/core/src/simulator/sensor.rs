//! Log-intensity change detector.
//!
//! Each pixel memorizes a log intensity. When the current log intensity
//! departs from the memorized value by at least one threshold, the pixel
//! emits one event per whole threshold crossed and advances its memory by
//! the same amount. Crossing times are linearly interpolated between the two
//! frames bracketing the change.

use crate::recording::{Event, Polarity};

use super::SimError;

/// Relative slack applied when counting threshold crossings, so that a change
/// of exactly `n` thresholds fires `n` events despite rounding in `ln`.
pub const CROSSING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorParams {
    /// Log-intensity change per event.
    pub threshold: f64,
    pub width: u16,
    pub height: u16,
    /// Offset added to normalized intensity before taking the log, as a
    /// fraction of full scale.
    pub log_eps: f64,
    /// Intensity that maps to 1.0 before the log. `None` uses the peak
    /// intensity of the frame sequence being converted.
    pub full_scale: Option<f64>,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            threshold: 0.2,
            width: 346,
            height: 260,
            log_eps: 1e-3,
            full_scale: None,
        }
    }
}

impl SensorParams {
    pub fn with_size(mut self, width: u16, height: u16) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(SimError::InvalidParams(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if !(self.log_eps.is_finite() && self.log_eps > 0.0) {
            return Err(SimError::InvalidParams(format!(
                "log_eps must be positive, got {}",
                self.log_eps
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SimError::InvalidParams(
                "sensor size must be positive".into(),
            ));
        }
        if let Some(fs) = self.full_scale {
            if !(fs.is_finite() && fs > 0.0) {
                return Err(SimError::InvalidParams(format!(
                    "full scale must be positive, got {fs}"
                )));
            }
        }
        Ok(())
    }

    fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Log conversion used by the detector.
    #[inline]
    pub fn log_intensity(&self, intensity: f64, full_scale: f64) -> f64 {
        (intensity / full_scale + self.log_eps).ln()
    }
}

/// Linear intensity frame on the camera clock.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFrame {
    pub ts_us: u64,
    pub width: u16,
    pub height: u16,
    /// Row-major, non-negative.
    pub values: Vec<f64>,
}

impl IntensityFrame {
    pub fn new(ts_us: u64, width: u16, height: u16, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width as usize * height as usize);
        Self {
            ts_us,
            width,
            height,
            values,
        }
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Memorized log intensity per pixel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelState {
    pub width: u16,
    pub height: u16,
    pub values: Vec<f64>,
}

impl PixelState {
    pub fn uniform(width: u16, height: u16, value: f64) -> Self {
        Self {
            width,
            height,
            values: vec![value; width as usize * height as usize],
        }
    }

    /// Log intensity of `frame` under `params`.
    pub fn from_frame(frame: &IntensityFrame, params: &SensorParams, full_scale: f64) -> Self {
        Self {
            width: frame.width,
            height: frame.height,
            values: frame
                .values
                .iter()
                .map(|&v| params.log_intensity(v, full_scale))
                .collect(),
        }
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// Interpolated timestamp of a crossing at `level`, strictly after the
/// interval start and no later than its end.
#[inline]
fn crossing_ts(level: f64, prev_log: f64, cur_log: f64, t0: u64, dt: u64) -> u64 {
    let frac = ((level - prev_log) / (cur_log - prev_log)).clamp(0.0, 1.0);
    let offset = (frac * dt as f64).round() as u64;
    t0 + offset.clamp(1, dt)
}

/// Streaming event generator: feed frames in time order, receive the events
/// each new frame triggers.
#[derive(Debug, Clone)]
pub struct EventGenerator {
    params: SensorParams,
    full_scale: f64,
    memorized: PixelState,
    prev_log: Vec<f64>,
    cur_log: Vec<f64>,
    prev_ts: u64,
    frames_seen: usize,
    emitted: u64,
}

impl EventGenerator {
    /// Initializes pixel memory from `first`.
    pub fn new(
        params: SensorParams,
        full_scale: f64,
        first: &IntensityFrame,
    ) -> Result<Self, SimError> {
        params.validate()?;
        if !(full_scale.is_finite() && full_scale > 0.0) {
            return Err(SimError::InvalidParams(format!(
                "full scale must be positive, got {full_scale}"
            )));
        }
        check_dims(&params, first, 0)?;
        let memorized = PixelState::from_frame(first, &params, full_scale);
        Ok(Self {
            prev_log: memorized.values.clone(),
            cur_log: vec![0.0; params.pixel_count()],
            memorized,
            params,
            full_scale,
            prev_ts: first.ts_us,
            frames_seen: 1,
            emitted: 0,
        })
    }

    pub fn memorized(&self) -> &PixelState {
        &self.memorized
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Appends the events triggered between the previous frame and `frame`
    /// to `out`, sorted by timestamp.
    pub fn push_frame(
        &mut self,
        frame: &IntensityFrame,
        out: &mut Vec<Event>,
    ) -> Result<(), SimError> {
        let index = self.frames_seen;
        check_dims(&self.params, frame, index)?;
        if frame.ts_us <= self.prev_ts {
            return Err(SimError::NonIncreasingTimestamps {
                index,
                previous_us: self.prev_ts,
                ts_us: frame.ts_us,
            });
        }
        let theta = self.params.threshold;
        let t0 = self.prev_ts;
        let dt = frame.ts_us - t0;
        let width = self.params.width as usize;
        let start = out.len();

        for (dst, &v) in self.cur_log.iter_mut().zip(&frame.values) {
            *dst = self.params.log_intensity(v, self.full_scale);
        }
        for (i, mem) in self.memorized.values.iter_mut().enumerate() {
            let cur = self.cur_log[i];
            let delta = cur - *mem;
            let crossings = (delta.abs() / theta + CROSSING_TOLERANCE).floor();
            if crossings < 1.0 {
                continue;
            }
            let n = crossings as u64;
            let sign = delta.signum();
            let polarity = Polarity::from_sign(sign);
            let prev = self.prev_log[i];
            let x = (i % width) as u16;
            let y = (i / width) as u16;
            for j in 1..=n {
                let level = *mem + sign * j as f64 * theta;
                out.push(Event::new(
                    x,
                    y,
                    polarity,
                    crossing_ts(level, prev, cur, t0, dt),
                ));
            }
            *mem += sign * crossings * theta;
        }
        // Stable: ties keep row-major pixel order, then crossing order.
        out[start..].sort_by_key(|e| e.device_ts_us);

        std::mem::swap(&mut self.prev_log, &mut self.cur_log);
        self.prev_ts = frame.ts_us;
        self.frames_seen += 1;
        self.emitted += (out.len() - start) as u64;
        Ok(())
    }
}

fn check_dims(params: &SensorParams, frame: &IntensityFrame, index: usize) -> Result<(), SimError> {
    let expected = params.pixel_count();
    if frame.width != params.width
        || frame.height != params.height
        || frame.values.len() != expected
    {
        return Err(SimError::DimensionMismatch {
            index,
            expected: (params.width, params.height),
            found: (frame.width, frame.height),
        });
    }
    Ok(())
}

/// Converts a frame sequence into a time-sorted event stream.
pub fn events_from_frames(
    frames: &[IntensityFrame],
    params: &SensorParams,
) -> Result<Vec<Event>, SimError> {
    if frames.len() < 2 {
        return Err(SimError::TooFewFrames(frames.len()));
    }
    params.validate()?;
    let full_scale = match params.full_scale {
        Some(fs) => fs,
        None => {
            let peak = frames.iter().map(IntensityFrame::peak).fold(0.0, f64::max);
            if peak > 0.0 {
                peak
            } else {
                1.0
            }
        }
    };
    let mut gen = EventGenerator::new(params.clone(), full_scale, &frames[0])?;
    let mut events = Vec::new();
    for frame in &frames[1..] {
        gen.push_frame(frame, &mut events)?;
    }
    Ok(events)
}

fn apply_event(
    state: &mut PixelState,
    event: &Event,
    index: usize,
    threshold: f64,
    last_ts: &mut u64,
) -> Result<(), SimError> {
    if !event.in_bounds(state.width, state.height) {
        return Err(SimError::EventOutOfBounds {
            index,
            x: event.x,
            y: event.y,
        });
    }
    if event.device_ts_us < *last_ts {
        return Err(SimError::UnsortedEvents { index });
    }
    *last_ts = event.device_ts_us;
    let i = event.y as usize * state.width as usize + event.x as usize;
    state.values[i] += event.polarity.sign() as f64 * threshold;
    Ok(())
}

/// Integrates events onto `initial`: each event adds `polarity * threshold`
/// to its pixel.
pub fn reconstruct_log_intensity(
    events: &[Event],
    initial: &PixelState,
    params: &SensorParams,
) -> Result<PixelState, SimError> {
    params.validate()?;
    let mut state = initial.clone();
    let mut last_ts = 0;
    for (index, e) in events.iter().enumerate() {
        apply_event(&mut state, e, index, params.threshold, &mut last_ts)?;
    }
    Ok(state)
}

/// Like [`reconstruct_log_intensity`], but snapshots the state at each of
/// `times_us` (ascending), including every event stamped at or before it.
pub fn reconstruct_trace(
    events: &[Event],
    initial: &PixelState,
    params: &SensorParams,
    times_us: &[u64],
) -> Result<Vec<PixelState>, SimError> {
    params.validate()?;
    if times_us.windows(2).any(|w| w[1] < w[0]) {
        return Err(SimError::InvalidParams(
            "snapshot times must be ascending".into(),
        ));
    }
    let mut state = initial.clone();
    let mut last_ts = 0;
    let mut next = 0;
    let mut snapshots = Vec::with_capacity(times_us.len());
    for &t in times_us {
        while next < events.len() && events[next].device_ts_us <= t {
            apply_event(
                &mut state,
                &events[next],
                next,
                params.threshold,
                &mut last_ts,
            )?;
            next += 1;
        }
        snapshots.push(state.clone());
    }
    // Remaining events are still validated.
    while next < events.len() {
        apply_event(
            &mut state,
            &events[next],
            next,
            params.threshold,
            &mut last_ts,
        )?;
        next += 1;
    }
    Ok(snapshots)
}
