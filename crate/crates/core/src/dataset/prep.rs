use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frames::{
    accumulate_dvs, downsample, normalize_aps, normalize_dvs, FrameError, NormalizedImage,
};
use crate::sync::WindowedRecord;

/// Samples slower than this are dropped.
pub const MIN_SPEED_KMH: f32 = 15.0;
/// Steering outliers beyond this many training-set standard deviations are
/// dropped.
pub const OUTLIER_SIGMAS: f64 = 3.0;
/// Half-width of the inclusive near-straight steering band, degrees.
pub const STRAIGHT_BAND_DEG: f32 = 5.0;
/// Probability of dropping each near-straight training sample.
pub const STRAIGHT_DROP_PROB: f64 = 0.7;
/// Fraction of each recording's samples that go to training.
pub const TRAIN_FRACTION: f64 = 0.7;

/// One training unit: network-resolution DVS and APS images plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub dvs: NormalizedImage,
    pub aps: NormalizedImage,
    pub steering_deg: f32,
    pub speed_kmh: f32,
    pub recording_id: String,
    pub window_end_ms: u64,
}

impl LabeledSample {
    /// Builds a sample from a usable window. Returns `Ok(None)` for flagged or
    /// unlabelled windows.
    pub fn from_window(
        record: &WindowedRecord,
        width: u16,
        height: u16,
        recording_id: &str,
    ) -> Result<Option<Self>, FrameError> {
        let Some(label) = record.label.filter(|_| record.is_usable()) else {
            return Ok(None);
        };
        let hist = accumulate_dvs(&record.events, width, height)?;
        let dvs = downsample(&normalize_dvs(&hist))?;
        let aps = downsample(&normalize_aps(&record.frame))?;
        Ok(Some(Self {
            dvs,
            aps,
            steering_deg: label.steering_deg as f32,
            speed_kmh: label.speed_kmh as f32,
            recording_id: recording_id.to_owned(),
            window_end_ms: record.end_ms,
        }))
    }
}

/// Per-split bookkeeping. `retained + dropped() == input` always holds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrepStats {
    /// Population standard deviation of training steering angles, degrees.
    pub steering_sigma: f64,
    pub input: usize,
    pub dropped_speed: usize,
    pub dropped_outlier: usize,
    pub dropped_rebalance: usize,
    pub retained: usize,
}

impl PrepStats {
    pub fn new(steering_sigma: f64) -> Self {
        Self {
            steering_sigma,
            ..Self::default()
        }
    }

    pub fn dropped(&self) -> usize {
        self.dropped_speed + self.dropped_outlier + self.dropped_rebalance
    }

    pub fn retained_fraction(&self) -> Option<f64> {
        (self.input > 0).then(|| self.retained as f64 / self.input as f64)
    }
}

/// Train/test partition of a recording set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

/// Number of leading samples that go to training for a recording of `n`.
pub fn train_count(n: usize) -> usize {
    // Integer arithmetic avoids 0.7 * n rounding below an exact integer.
    n * 7 / 10
}

/// Splits each recording independently: the first `floor(0.7 n)` samples
/// train, the rest test. Each inner vector must be time-ordered.
pub fn temporal_split(recordings: Vec<Vec<LabeledSample>>) -> Split {
    let mut split = Split::default();
    for (i, mut samples) in recordings.into_iter().enumerate() {
        if samples.is_empty() {
            log::warn!("recording #{i} has no samples; skipped");
            continue;
        }
        debug_assert!(samples
            .windows(2)
            .all(|w| w[0].window_end_ms <= w[1].window_end_ms));
        let test = samples.split_off(train_count(samples.len()));
        split.train.extend(samples);
        split.test.extend(test);
    }
    split
}

/// Population standard deviation of steering angles.
pub fn steering_sigma(samples: &[LabeledSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.steering_deg as f64).sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|s| (s.steering_deg as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    var.sqrt()
}

/// Drops low-speed samples and steering outliers beyond `3 * stats.steering_sigma`.
/// The same rule applies to both splits.
pub fn filter_samples(samples: Vec<LabeledSample>, stats: &mut PrepStats) -> Vec<LabeledSample> {
    let limit = OUTLIER_SIGMAS * stats.steering_sigma;
    stats.input += samples.len();
    let kept: Vec<_> = samples
        .into_iter()
        .filter(|s| {
            if s.speed_kmh < MIN_SPEED_KMH {
                stats.dropped_speed += 1;
                false
            } else if (s.steering_deg as f64).abs() > limit {
                stats.dropped_outlier += 1;
                false
            } else {
                true
            }
        })
        .collect();
    stats.retained = stats.input - stats.dropped();
    kept
}

/// Drops each sample with `|steering| <= 5` degrees independently with
/// probability 0.7. Deterministic for a given seed.
pub fn rebalance_straight(
    samples: Vec<LabeledSample>,
    seed: u64,
    stats: &mut PrepStats,
) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kept: Vec<_> = samples
        .into_iter()
        .filter(|s| {
            if s.steering_deg.abs() <= STRAIGHT_BAND_DEG && rng.gen_bool(STRAIGHT_DROP_PROB) {
                stats.dropped_rebalance += 1;
                false
            } else {
                true
            }
        })
        .collect();
    stats.retained = kept.len();
    stats.input = stats.input.max(stats.retained + stats.dropped());
    kept
}

/// Result of [`prepare`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prepared {
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    pub train_stats: PrepStats,
    pub test_stats: PrepStats,
}

/// Split, filter both splits against the training sigma, then rebalance the
/// training split.
pub fn prepare(recordings: Vec<Vec<LabeledSample>>, seed: u64) -> Prepared {
    let split = temporal_split(recordings);
    let sigma = steering_sigma(&split.train);
    let mut train_stats = PrepStats::new(sigma);
    let mut test_stats = PrepStats::new(sigma);
    let train = filter_samples(split.train, &mut train_stats);
    let train = rebalance_straight(train, seed, &mut train_stats);
    let test = filter_samples(split.test, &mut test_stats);
    Prepared {
        train,
        test,
        train_stats,
        test_stats,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sample(steering: f32, speed: f32, ts: u64) -> LabeledSample {
        LabeledSample {
            dvs: NormalizedImage::filled(2, 2, 0.5),
            aps: NormalizedImage::filled(2, 2, 0.25),
            steering_deg: steering,
            speed_kmh: speed,
            recording_id: "r".into(),
            window_end_ms: ts,
        }
    }

    fn recording(n: usize, id: &str) -> Vec<LabeledSample> {
        (0..n)
            .map(|i| LabeledSample {
                recording_id: id.into(),
                ..sample(i as f32, 30.0, i as u64 * 50)
            })
            .collect()
    }

    #[test]
    fn split_counts() {
        let s = temporal_split(vec![recording(10, "a")]);
        assert_eq!((s.train.len(), s.test.len()), (7, 3));
        let s = temporal_split(vec![recording(1, "a")]);
        assert_eq!((s.train.len(), s.test.len()), (0, 1));
        let s = temporal_split(vec![recording(10, "a"), Vec::new(), recording(20, "b")]);
        let count =
            |v: &[LabeledSample], id: &str| v.iter().filter(|x| x.recording_id == id).count();
        assert_eq!((count(&s.train, "a"), count(&s.test, "a")), (7, 3));
        assert_eq!((count(&s.train, "b"), count(&s.test, "b")), (14, 6));
    }

    #[test]
    fn split_is_causal() {
        let s = temporal_split(vec![recording(33, "a")]);
        let last_train = s.train.iter().map(|x| x.window_end_ms).max().unwrap();
        let first_test = s.test.iter().map(|x| x.window_end_ms).min().unwrap();
        assert!(last_train < first_test);
    }

    #[test]
    fn train_count_floor() {
        assert_eq!(train_count(0), 0);
        assert_eq!(train_count(1), 0);
        assert_eq!(train_count(2), 1);
        assert_eq!(train_count(10), 7);
        assert_eq!(train_count(30), 21);
        for n in 0..2000usize {
            assert_eq!(train_count(n), (n as f64 * 0.7 + 1e-9).floor() as usize);
        }
    }

    #[test]
    fn speed_filter() {
        let mut stats = PrepStats::new(100.0);
        let kept = filter_samples(vec![sample(0.0, 14.9, 0), sample(0.0, 15.0, 1)], &mut stats);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].speed_kmh, 15.0);
        assert_eq!(stats.dropped_speed, 1);
    }

    #[test]
    fn outlier_filter() {
        let mut stats = PrepStats::new(10.0);
        let kept = filter_samples(
            vec![
                sample(31.0, 50.0, 0),
                sample(29.0, 50.0, 1),
                sample(-31.0, 50.0, 2),
                sample(30.0, 50.0, 3),
            ],
            &mut stats,
        );
        let angles: Vec<f32> = kept.iter().map(|s| s.steering_deg).collect();
        assert_eq!(angles, vec![29.0, 30.0]);
        assert_eq!(stats.dropped_outlier, 2);
        assert_eq!(stats.retained + stats.dropped(), stats.input);
    }

    #[test]
    fn stationary_recording_is_emptied() {
        let mut stats = PrepStats::new(5.0);
        let kept = filter_samples((0..40).map(|i| sample(1.0, 0.0, i)).collect(), &mut stats);
        assert!(kept.is_empty());
        assert_eq!(stats.dropped_speed, 40);
        assert_eq!(stats.retained_fraction(), Some(0.0));
    }

    #[test]
    fn rebalance_leaves_turns_alone() {
        let input: Vec<_> = (0..500).map(|i| sample(20.0, 50.0, i)).collect();
        let mut stats = PrepStats {
            input: input.len(),
            ..PrepStats::default()
        };
        assert_eq!(rebalance_straight(input.clone(), 3, &mut stats), input);
        assert_eq!(stats.dropped_rebalance, 0);
    }

    #[test]
    fn rebalance_band_is_inclusive_and_deterministic() {
        let input: Vec<_> = (0..2000)
            .map(|i| sample(if i % 2 == 0 { 5.0 } else { -5.0 }, 50.0, i))
            .collect();
        let mut a = PrepStats::default();
        let mut b = PrepStats::default();
        let ra = rebalance_straight(input.clone(), 11, &mut a);
        let rb = rebalance_straight(input.clone(), 11, &mut b);
        assert_eq!(ra, rb);
        assert!(ra.len() < 1000, "boundary angles are in the band");
        let rc = rebalance_straight(input, 12, &mut PrepStats::default());
        assert_ne!(ra, rc);
    }

    #[test]
    fn prepare_uses_train_sigma_for_both_splits() {
        let mut rec = Vec::new();
        for i in 0..70 {
            rec.push(sample(if i % 2 == 0 { 10.0 } else { -10.0 }, 50.0, i));
        }
        // Test part: one outlier and one slow sample.
        for i in 70..100 {
            let steering = if i == 80 { 40.0 } else { 8.0 };
            let speed = if i == 90 { 10.0 } else { 50.0 };
            rec.push(sample(steering, speed, i));
        }
        let p = prepare(vec![rec], 1);
        assert_eq!(p.train_stats.steering_sigma, 10.0);
        assert_eq!(p.test_stats.steering_sigma, 10.0);
        assert_eq!(p.test.len(), 28);
        assert_eq!(p.test_stats.dropped_outlier, 1);
        assert_eq!(p.test_stats.dropped_speed, 1);
        assert_eq!(p.test_stats.dropped_rebalance, 0);
        assert_eq!(p.train.len(), 70);
    }
}
