//! Deterministic inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evdrive_core::recording::{Event, Polarity, RecordingMeta, StampedPacket};
use evdrive_core::simulator::{generate_scene, IntensityFrame, ScenarioParams, SensorParams};

pub fn random_events(n: usize, width: u16, height: u16, seed: u64) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|t| {
            Event::new(
                rng.gen_range(0..width),
                rng.gen_range(0..height),
                if rng.gen() {
                    Polarity::On
                } else {
                    Polarity::Off
                },
                t as u64,
            )
        })
        .collect()
}

/// Frames whose pixels drift by random log-domain steps.
pub fn drifting_frames(n: usize, width: u16, height: u16, seed: u64) -> Vec<IntensityFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..width as usize * height as usize)
        .map(|_| rng.gen_range(0.05..1.0))
        .collect();
    (0..n)
        .map(|k| {
            let frame = IntensityFrame::new(k as u64 * 20_000, width, height, values.clone());
            for v in values.iter_mut() {
                *v = (*v * rng.gen_range(0.7..1.4)).clamp(1e-3, 1.0);
            }
            frame
        })
        .collect()
}

/// A simulated drive at full sensor resolution.
pub fn scene_packets(duration_s: f64) -> (RecordingMeta, Vec<StampedPacket>) {
    let scenario = ScenarioParams {
        duration_s,
        curvature: "0:0, 1:0.004, 2:-0.003".parse().expect("profile"),
        sensor: SensorParams::default(),
        ..ScenarioParams::default()
    };
    let scene = generate_scene(&scenario).expect("scene");
    (scene.meta.clone(), scene.packets())
}
