//! Synthetic driving scenes: a perspective two-lane road with roadside posts,
//! rendered by scanline with analytic horizontal antialiasing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kv::KeyValues;
use crate::recording::{
    ApsFrame, Event, RecordingMeta, StampedPacket, VehicleChannel, VehicleSample, APS_FULL_SCALE,
};

use super::profile::Profile;
use super::sensor::{EventGenerator, IntensityFrame, SensorParams};
use super::SimError;

/// Internal render rate feeding the event generator.
pub const INTERNAL_FRAME_INTERVAL_US: u64 = 20_000;
/// APS frame rate: 20 fps.
pub const APS_FRAME_INTERVAL_US: u64 = 50_000;
/// Vehicle bus rate: 10 Hz.
pub const VEHICLE_SAMPLE_INTERVAL_US: u64 = 100_000;

pub const STEERING_RATIO: f64 = 15.0;
pub const WHEELBASE_M: f64 = 2.7;

/// Steering wheel degrees per unit road curvature (1/m):
/// `ratio * wheelbase * 180 / pi`, the small-angle bicycle model.
pub fn default_steering_gain() -> f64 {
    STEERING_RATIO * WHEELBASE_M * 180.0 / PI
}

pub const MIN_EXPOSURE_US: u32 = 50;
pub const MAX_EXPOSURE_US: u32 = 200_000;

/// Auto-exposure emulation: 50 us in full light, rising geometrically to
/// 200 ms in darkness.
pub fn exposure_for_lighting(lighting: f64) -> u32 {
    let ratio = MAX_EXPOSURE_US as f64 / MIN_EXPOSURE_US as f64;
    let e = MIN_EXPOSURE_US as f64 * ratio.powf(1.0 - lighting.clamp(0.0, 1.0));
    (e.round() as u32).clamp(MIN_EXPOSURE_US, MAX_EXPOSURE_US)
}

/// Scene radiance multiplier. The event stream is invariant to it; APS
/// frames lose contrast as it drops.
pub fn radiance_gain(lighting: f64) -> f64 {
    0.05 + 0.95 * lighting.clamp(0.0, 1.0)
}

fn aps_gain(lighting: f64) -> f64 {
    0.3 + 0.7 * lighting.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub duration_s: f64,
    /// km/h over time.
    pub speed: Profile,
    /// Signed road curvature in 1/m over time; positive bends right.
    pub curvature: Profile,
    /// 0 (dark) to 1 (bright).
    pub lighting: f64,
    pub seed: u64,
    pub scenario: String,
    pub id: String,
    pub sensor: SensorParams,
    pub steering_gain_deg_m: f64,
    pub host_start_ms: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            speed: Profile::constant(50.0),
            curvature: Profile::constant(0.0),
            lighting: 1.0,
            seed: 0,
            scenario: "day".into(),
            id: "sim".into(),
            sensor: SensorParams::default(),
            steering_gain_deg_m: default_steering_gain(),
            host_start_ms: 0,
        }
    }
}

const SCENARIO_KEYS: &[&str] = &[
    "duration_s",
    "seed",
    "curvature",
    "speed",
    "lighting",
    "scenario",
    "id",
    "width",
    "height",
    "theta",
    "steering_gain_deg_m",
    "host_start_ms",
];

impl ScenarioParams {
    /// Parses a `key=value` scenario file. Only `duration_s` is required.
    pub fn from_config(text: &str) -> Result<Self, SimError> {
        let kv = KeyValues::parse(text).map_err(|e| SimError::Config(e.to_string()))?;
        if let Some(unknown) = kv.keys().find(|k| !SCENARIO_KEYS.contains(k)) {
            return Err(SimError::Config(format!("unknown key `{unknown}`")));
        }
        fn num<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<Option<T>, SimError> {
            kv.get(key)
                .map(|raw| {
                    raw.parse().map_err(|_| {
                        SimError::Config(format!(
                            "line {}: bad value for `{key}`: {raw:?}",
                            kv.line_of(key).unwrap_or(0)
                        ))
                    })
                })
                .transpose()
        }
        let profile = |key: &str| -> Result<Option<Profile>, SimError> {
            kv.get(key)
                .map(|raw| {
                    raw.parse()
                        .map_err(|e| SimError::Config(format!("`{key}`: {e}")))
                })
                .transpose()
        };

        let mut p = ScenarioParams {
            duration_s: num(&kv, "duration_s")?
                .ok_or_else(|| SimError::Config("missing key `duration_s`".into()))?,
            ..ScenarioParams::default()
        };
        if let Some(seed) = num(&kv, "seed")? {
            p.seed = seed;
        }
        p.id = format!("sim-{}", p.seed);
        if let Some(c) = profile("curvature")? {
            p.curvature = c;
        }
        if let Some(s) = profile("speed")? {
            p.speed = s;
        }
        if let Some(l) = num(&kv, "lighting")? {
            p.lighting = l;
        }
        if let Some(tag) = kv.get("scenario") {
            p.scenario = tag.to_owned();
        }
        if let Some(id) = kv.get("id") {
            p.id = id.to_owned();
        }
        if let Some(w) = num(&kv, "width")? {
            p.sensor.width = w;
        }
        if let Some(h) = num(&kv, "height")? {
            p.sensor.height = h;
        }
        if let Some(t) = num(&kv, "theta")? {
            p.sensor.threshold = t;
        }
        if let Some(g) = num(&kv, "steering_gain_deg_m")? {
            p.steering_gain_deg_m = g;
        }
        if let Some(h) = num(&kv, "host_start_ms")? {
            p.host_start_ms = h;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(SimError::InvalidScenario(format!(
                "duration must be positive, got {}",
                self.duration_s
            )));
        }
        if self.speed.min() < 0.0 {
            return Err(SimError::InvalidScenario(
                "speed must be non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lighting) {
            return Err(SimError::InvalidScenario(format!(
                "lighting must lie in [0, 1], got {}",
                self.lighting
            )));
        }
        if !self.steering_gain_deg_m.is_finite() {
            return Err(SimError::InvalidScenario(
                "steering gain must be finite".into(),
            ));
        }
        self.sensor.validate()
    }

    pub fn duration_us(&self) -> u64 {
        (self.duration_s * 1e6).round() as u64
    }

    /// Steering wheel angle label in degrees at `t_s`, clamped to the
    /// physical +-720 degree range.
    pub fn steering_deg(&self, t_s: f64) -> f64 {
        (self.steering_gain_deg_m * self.curvature.eval(t_s)).clamp(-720.0, 720.0)
    }

    pub fn speed_kmh(&self, t_s: f64) -> f64 {
        self.speed.eval(t_s).clamp(0.0, 160.0)
    }

    pub fn meta(&self) -> RecordingMeta {
        RecordingMeta::new(
            self.sensor.width,
            self.sensor.height,
            self.id.clone(),
            self.scenario.clone(),
        )
        .with_created_ms(self.host_start_ms)
    }
}

const CAMERA_HEIGHT_M: f64 = 1.3;
const HORIZON_FRACTION: f64 = 0.42;
const FOCAL_FRACTION: f64 = 0.75;
const MAX_DISTANCE_M: f64 = 400.0;
const LANE_WIDTH_M: f64 = 3.6;
const LINE_WIDTH_M: f64 = 0.15;
const DASH_PERIOD_M: f64 = 9.0;
const DASH_LENGTH_M: f64 = 3.0;
const POST_SPACING_M: f64 = 20.0;
const POST_OFFSET_M: f64 = 5.5;
const POST_HEIGHT_M: f64 = 1.2;
const POST_WIDTH_M: f64 = 0.2;
const POST_RANGE_M: (f64, f64) = (2.0, 150.0);
const POST_TABLE_LEN: usize = 1024;
const SUBSCANLINES: usize = 4;

const SKY: f64 = 0.8;
const HAZE: f64 = 0.6;
const GRASS: f64 = 0.38;
const ASPHALT: f64 = 0.18;
const PAINT: f64 = 0.92;

/// Paints `[u0, u1)` onto `row` with exact fractional pixel coverage.
fn paint_span(row: &mut [f64], u0: f64, u1: f64, color: f64) {
    if u1 <= 0.0 || u0 >= row.len() as f64 || u1 <= u0 {
        return;
    }
    let first = u0.max(0.0).floor() as usize;
    let last = (u1.ceil() as usize).min(row.len());
    for (p, px) in row.iter_mut().enumerate().take(last).skip(first) {
        let cov = (u1.min(p as f64 + 1.0) - u0.max(p as f64)).clamp(0.0, 1.0);
        *px += (color - *px) * cov;
    }
}

/// Deterministic renderer of base intensities in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SceneRenderer {
    width: usize,
    height: usize,
    focal: f64,
    horizon: f64,
    cx: f64,
    curvature: Profile,
    speed: Profile,
    post_phase: f64,
    post_brightness: Vec<f64>,
}

impl SceneRenderer {
    pub fn new(scenario: &ScenarioParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        let post_phase = rng.gen_range(0.0..POST_SPACING_M);
        let post_brightness = (0..POST_TABLE_LEN)
            .map(|_| rng.gen_range(0.55..0.98))
            .collect();
        let width = scenario.sensor.width as usize;
        let height = scenario.sensor.height as usize;
        Self {
            width,
            height,
            focal: FOCAL_FRACTION * width as f64,
            horizon: HORIZON_FRACTION * height as f64,
            cx: width as f64 / 2.0,
            curvature: scenario.curvature.clone(),
            speed: scenario.speed.clone(),
            post_phase,
            post_brightness,
        }
    }

    /// Distance travelled since t = 0, metres.
    pub fn odometer_m(&self, t_s: f64) -> f64 {
        self.speed.integral(t_s) / 3.6
    }

    pub fn render(&self, t_s: f64) -> Vec<f64> {
        let c = self.curvature.eval(t_s);
        let travelled = self.odometer_m(t_s);
        let posts = self.visible_posts(travelled);

        let mut image = vec![0.0; self.width * self.height];
        let mut scan = vec![0.0; self.width];
        for r in 0..self.height {
            let out = &mut image[r * self.width..(r + 1) * self.width];
            for k in 0..SUBSCANLINES {
                let v = r as f64 + (k as f64 + 0.5) / SUBSCANLINES as f64;
                self.scanline(v, c, travelled, &posts, &mut scan);
                for (o, s) in out.iter_mut().zip(&scan) {
                    *o += s;
                }
            }
            for o in out.iter_mut() {
                *o /= SUBSCANLINES as f64;
            }
        }
        image
    }

    /// `(distance ahead, lateral x, brightness)`, far to near.
    fn visible_posts(&self, travelled: f64) -> Vec<(f64, f64, f64)> {
        let base = (travelled / POST_SPACING_M).floor();
        let into = travelled - base * POST_SPACING_M;
        let mut posts = Vec::new();
        let mut k = 0i64;
        loop {
            let d = self.post_phase + k as f64 * POST_SPACING_M - into;
            if d > POST_RANGE_M.1 {
                break;
            }
            if d >= POST_RANGE_M.0 {
                let id = (base as i64 + k).rem_euclid(POST_TABLE_LEN as i64) as usize;
                let side = if id.is_multiple_of(3) { -1.0 } else { 1.0 };
                posts.push((d, side, self.post_brightness[id]));
            }
            k += 1;
        }
        posts.reverse();
        posts
    }

    fn centerline(&self, curvature: f64, d: f64) -> f64 {
        // Car drives in the right lane; the road centre is one half lane to
        // the left.
        0.5 * curvature * d * d - LANE_WIDTH_M / 2.0
    }

    fn scanline(
        &self,
        v: f64,
        curvature: f64,
        travelled: f64,
        posts: &[(f64, f64, f64)],
        row: &mut [f64],
    ) {
        if v <= self.horizon {
            let shade = SKY - 0.1 * (1.0 - v / self.horizon);
            row.fill(shade);
            return;
        }
        let d = self.focal * CAMERA_HEIGHT_M / (v - self.horizon);
        if d > MAX_DISTANCE_M {
            row.fill(HAZE);
        } else {
            row.fill(GRASS);
            let centre = self.centerline(curvature, d);
            let to_u = |x: f64| self.cx + self.focal * x / d;
            let half = LINE_WIDTH_M / 2.0;
            paint_span(
                row,
                to_u(centre - LANE_WIDTH_M),
                to_u(centre + LANE_WIDTH_M),
                ASPHALT,
            );
            for edge in [centre - LANE_WIDTH_M + 0.2, centre + LANE_WIDTH_M - 0.2] {
                paint_span(row, to_u(edge - half), to_u(edge + half), PAINT);
            }
            let along = (d + travelled).rem_euclid(DASH_PERIOD_M);
            if along < DASH_LENGTH_M {
                paint_span(row, to_u(centre - half), to_u(centre + half), PAINT);
            }
        }
        for &(pd, side, brightness) in posts {
            let v_base = self.horizon + self.focal * CAMERA_HEIGHT_M / pd;
            let v_top = self.horizon + self.focal * (CAMERA_HEIGHT_M - POST_HEIGHT_M) / pd;
            if v < v_top || v > v_base {
                continue;
            }
            let x = self.centerline(curvature, pd) + side * POST_OFFSET_M;
            let u = self.cx + self.focal * x / pd;
            let w = self.focal * POST_WIDTH_M / pd / 2.0;
            paint_span(row, u - w, u + w, brightness);
        }
    }
}

/// Vehicle reading on the simulation clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedSample {
    pub ts_us: u64,
    pub sample: VehicleSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub meta: RecordingMeta,
    pub aps_frames: Vec<ApsFrame>,
    pub vehicle: Vec<TimedSample>,
    pub events: Vec<Event>,
    /// Number of internal frames rendered for event generation.
    pub internal_frames: usize,
}

impl Scene {
    /// Stamps every payload with the host clock (`host_start_ms` plus the
    /// simulation time, floored to milliseconds) and returns packets in
    /// host-time order. Events are batched per host millisecond.
    pub fn packets(&self) -> Vec<StampedPacket> {
        let start = self.meta.created_ms;
        let host = |ts_us: u64| start + ts_us / 1000;
        let mut packets = Vec::new();
        let mut rest = self.events.as_slice();
        while let Some(first) = rest.first() {
            let ms = host(first.device_ts_us);
            let n = rest.partition_point(|e| host(e.device_ts_us) == ms);
            packets.extend(StampedPacket::dvs_batches(ms, &rest[..n]));
            rest = &rest[n..];
        }
        for f in &self.aps_frames {
            packets.push(StampedPacket::aps(host(f.device_ts_us), f.clone()));
        }
        for s in &self.vehicle {
            packets.push(StampedPacket::vehicle(host(s.ts_us), s.sample));
        }
        // Stable: keeps each stream's internal order.
        packets.sort_by_key(|p| (p.host_ts_ms, p.stream_id()));
        packets
    }
}

/// Renders a scenario: APS frames at 20 fps, steering and speed at 10 Hz, and
/// events from the 50 fps internal sequence.
pub fn generate_scene(scenario: &ScenarioParams) -> Result<Scene, SimError> {
    scenario.validate()?;
    let duration_us = scenario.duration_us();
    if duration_us == 0 {
        return Err(SimError::InvalidScenario("duration rounds to zero".into()));
    }
    let sensor = &scenario.sensor;
    let renderer = SceneRenderer::new(scenario);
    let gain = radiance_gain(scenario.lighting);
    let frame_at = |ts_us: u64| {
        let values = renderer
            .render(ts_us as f64 / 1e6)
            .into_iter()
            .map(|v| v * gain)
            .collect();
        IntensityFrame::new(ts_us, sensor.width, sensor.height, values)
    };

    let full_scale = sensor.full_scale.unwrap_or(gain);
    let mut generator = EventGenerator::new(sensor.clone(), full_scale, &frame_at(0))?;
    let mut events = Vec::new();
    let mut internal_frames = 1;
    let mut ts = INTERNAL_FRAME_INTERVAL_US;
    while ts <= duration_us {
        generator.push_frame(&frame_at(ts), &mut events)?;
        internal_frames += 1;
        ts += INTERNAL_FRAME_INTERVAL_US;
    }

    let exposure_us = exposure_for_lighting(scenario.lighting);
    let contrast = aps_gain(scenario.lighting);
    let mut aps_frames = Vec::new();
    let mut ts = 0;
    while ts < duration_us {
        let pixels = renderer
            .render(ts as f64 / 1e6)
            .into_iter()
            .map(|v| ((v * contrast).clamp(0.0, 1.0) * APS_FULL_SCALE as f64).round() as u16)
            .collect();
        aps_frames.push(ApsFrame {
            width: sensor.width,
            height: sensor.height,
            exposure_us,
            device_ts_us: ts,
            pixels,
        });
        ts += APS_FRAME_INTERVAL_US;
    }

    let mut vehicle = Vec::new();
    let mut ts = 0;
    while ts < duration_us {
        let t_s = ts as f64 / 1e6;
        vehicle.push(TimedSample {
            ts_us: ts,
            sample: VehicleSample {
                channel: VehicleChannel::SteeringWheelAngle,
                value: scenario.steering_deg(t_s),
            },
        });
        vehicle.push(TimedSample {
            ts_us: ts,
            sample: VehicleSample {
                channel: VehicleChannel::Speed,
                value: scenario.speed_kmh(t_s),
            },
        });
        ts += VEHICLE_SAMPLE_INTERVAL_US;
    }

    Ok(Scene {
        meta: scenario.meta(),
        aps_frames,
        vehicle,
        events,
        internal_frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(duration_s: f64) -> ScenarioParams {
        ScenarioParams {
            duration_s,
            sensor: SensorParams::default().with_size(64, 48),
            ..ScenarioParams::default()
        }
    }

    fn steering(scene: &Scene) -> Vec<f64> {
        scene
            .vehicle
            .iter()
            .filter(|s| s.sample.channel == VehicleChannel::SteeringWheelAngle)
            .map(|s| s.sample.value)
            .collect()
    }

    #[test]
    fn straight_road_has_zero_steering() {
        let scene = generate_scene(&small(1.0)).unwrap();
        let s = steering(&scene);
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_curvature_gives_constant_steering() {
        let mut p = small(0.5);
        p.curvature = Profile::constant(0.004);
        let scene = generate_scene(&p).unwrap();
        let expected = 0.004 * 15.0 * 2.7 * 180.0 / PI;
        assert!((expected - 9.28183).abs() < 1e-4);
        for v in steering(&scene) {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_is_clamped() {
        let mut p = small(0.2);
        p.curvature = Profile::constant(1.0);
        assert_eq!(p.steering_deg(0.0), 720.0);
    }

    #[test]
    fn sample_counts_follow_rates() {
        let scene = generate_scene(&small(1.0)).unwrap();
        assert_eq!(scene.aps_frames.len(), 20);
        assert_eq!(scene.vehicle.len(), 20);
        assert_eq!(scene.internal_frames, 51);
    }

    #[test]
    fn same_seed_is_identical() {
        let mut p = small(0.4);
        p.seed = 9;
        p.curvature = "0:0, 0.4:0.01".parse().unwrap();
        assert_eq!(generate_scene(&p).unwrap(), generate_scene(&p).unwrap());
        let mut q = p.clone();
        q.seed = 10;
        assert_ne!(
            generate_scene(&p).unwrap().events,
            generate_scene(&q).unwrap().events
        );
    }

    #[test]
    fn moving_scene_produces_events_and_static_one_does_not() {
        let moving = generate_scene(&small(0.3)).unwrap();
        assert!(!moving.events.is_empty());
        let mut p = small(0.3);
        p.speed = Profile::constant(0.0);
        assert!(generate_scene(&p).unwrap().events.is_empty());
    }

    #[test]
    fn exposure_range() {
        assert_eq!(exposure_for_lighting(1.0), 50);
        assert_eq!(exposure_for_lighting(0.0), 200_000);
        let mid = exposure_for_lighting(0.5);
        assert!((50..200_000).contains(&mid));
    }

    #[test]
    fn rendered_values_in_unit_range() {
        let p = small(1.0);
        let img = SceneRenderer::new(&p).render(0.37);
        assert!(img.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn zero_duration_rejected() {
        assert!(matches!(
            generate_scene(&small(0.0)),
            Err(SimError::InvalidScenario(_))
        ));
    }

    #[test]
    fn config_parsing() {
        let p = ScenarioParams::from_config(
            "# test\nduration_s = 10\nseed = 3\ncurvature = 0:0, 5:0.01\nspeed=40\nlighting=0.2\nscenario=night\n",
        )
        .unwrap();
        assert_eq!(p.duration_s, 10.0);
        assert_eq!(p.seed, 3);
        assert_eq!(p.id, "sim-3");
        assert_eq!(p.curvature.eval(2.5), 0.005);
        assert_eq!(p.speed.eval(7.0), 40.0);
        assert_eq!(p.scenario, "night");
        assert_eq!(p.sensor.width, 346);
        assert!(ScenarioParams::from_config("seed=1").is_err());
        assert!(ScenarioParams::from_config("duration_s=1\nbogus=2").is_err());
        assert!(ScenarioParams::from_config("duration_s=1\nlighting=2").is_err());
        assert!(ScenarioParams::from_config("duration_s=1\nspeed=-5").is_err());
    }

    #[test]
    fn packets_are_stamped_and_ordered() {
        let mut p = small(0.5);
        p.host_start_ms = 1_000;
        let scene = generate_scene(&p).unwrap();
        let packets = scene.packets();
        assert!(packets
            .windows(2)
            .all(|w| w[0].host_ts_ms <= w[1].host_ts_ms));
        assert_eq!(packets[0].host_ts_ms, 1_000);
        let events: usize = packets
            .iter()
            .map(|p| match &p.payload {
                crate::recording::Payload::Dvs(e) => e.len(),
                _ => 0,
            })
            .sum();
        assert_eq!(events, scene.events.len());
    }
}
