use proptest::collection::vec;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evdrive_core::frames::{
    accumulate_dvs, downsample, normalize_aps, normalize_dvs, DvsHistogram, NormalizedImage,
    NETWORK_HEIGHT, NETWORK_WIDTH, SENSOR_HEIGHT, SENSOR_WIDTH,
};
use evdrive_core::recording::{ApsFrame, Event, Polarity};

fn random_events(rng: &mut ChaCha8Rng, n: usize, w: u16, h: u16) -> Vec<Event> {
    (0..n)
        .map(|t| {
            Event::new(
                rng.gen_range(0..w),
                rng.gen_range(0..h),
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

#[test]
fn accumulation_matches_per_event_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let events = random_events(&mut rng, 100_000, SENSOR_WIDTH, SENSOR_HEIGHT);
    let hist = accumulate_dvs(&events, SENSOR_WIDTH, SENSOR_HEIGHT).unwrap();
    let mut bins = vec![0i32; SENSOR_WIDTH as usize * SENSOR_HEIGHT as usize];
    for e in &events {
        bins[e.y as usize * SENSOR_WIDTH as usize + e.x as usize] +=
            if e.polarity == Polarity::On { 1 } else { -1 };
    }
    assert_eq!(hist.bins, bins);
}

#[test]
fn out_of_bounds_event_is_named() {
    let events = vec![
        Event::new(0, 0, Polarity::On, 0),
        Event::new(4, 1, Polarity::On, 1),
    ];
    let err = accumulate_dvs(&events, 4, 4).unwrap_err();
    assert!(err.to_string().contains("1"), "{err}");
}

/// Index oracle for the centre crop plus 2x2 pooling.
fn pooled(img: &NormalizedImage, i: usize, j: usize) -> f32 {
    let (x0, y0) = (1, 2);
    let px = |x: usize, y: usize| img.values[y * SENSOR_WIDTH as usize + x] as f64;
    let (x, y) = (x0 + 2 * i, y0 + 2 * j);
    ((px(x, y) + px(x + 1, y) + px(x, y + 1) + px(x + 1, y + 1)) / 4.0) as f32
}

#[test]
fn downsample_matches_crop_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let values = (0..SENSOR_WIDTH as usize * SENSOR_HEIGHT as usize)
            .map(|_| rng.gen_range(0.0..=1.0))
            .collect();
        let img = NormalizedImage::new(SENSOR_WIDTH, SENSOR_HEIGHT, values).unwrap();
        let out = downsample(&img).unwrap();
        assert_eq!((out.width, out.height), (NETWORK_WIDTH, NETWORK_HEIGHT));
        for j in 0..NETWORK_HEIGHT as usize {
            for i in 0..NETWORK_WIDTH as usize {
                assert_eq!(out.get(i, j), pooled(&img, i, j), "({i}, {j})");
            }
        }
    }
}

#[test]
fn pipeline_is_deterministic_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let events = random_events(&mut rng, 50_000, SENSOR_WIDTH, SENSOR_HEIGHT);
    let run = || {
        downsample(&normalize_dvs(
            &accumulate_dvs(&events, SENSOR_WIDTH, SENSOR_HEIGHT).unwrap(),
        ))
        .unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.in_unit_range());
    let pixels = (0..SENSOR_WIDTH as usize * SENSOR_HEIGHT as usize)
        .map(|_| rng.gen_range(0..=u16::MAX))
        .collect();
    let frame = ApsFrame::new(SENSOR_WIDTH, SENSOR_HEIGHT, 100, 0, pixels).unwrap();
    assert!(downsample(&normalize_aps(&frame)).unwrap().in_unit_range());
}

proptest! {
    #[test]
    fn accumulation_is_permutation_invariant(seed in any::<u64>(), n in 0usize..5000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut events = random_events(&mut rng, n, 37, 23);
        let a = accumulate_dvs(&events, 37, 23).unwrap();
        events.shuffle(&mut rng);
        prop_assert_eq!(a, accumulate_dvs(&events, 37, 23).unwrap());
    }

    #[test]
    fn normalize_dvs_properties(
        (w, h, bins) in (1u16..30, 1u16..30).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), vec(-500i32..500, w as usize * h as usize))
        })
    ) {
        let hist = DvsHistogram { width: w, height: h, bins };
        let img = normalize_dvs(&hist);
        let neg = normalize_dvs(&hist.negated());
        prop_assert!(img.in_unit_range());
        for ((v, n), b) in img.values.iter().zip(&neg.values).zip(&hist.bins) {
            prop_assert_eq!(*n, 1.0 - *v);
            if *b == 0 {
                prop_assert_eq!(*v, 0.5);
            }
            prop_assert_eq!(*b > 0, *v > 0.5);
        }
        // Monotone in the bin value.
        let mut pairs: Vec<_> = hist.bins.iter().zip(&img.values).collect();
        pairs.sort_by_key(|(b, _)| **b);
        prop_assert!(pairs.windows(2).all(|p| p[0].1 <= p[1].1));
    }

    #[test]
    fn normalize_aps_scales_by_full_scale(pixels in vec(any::<u16>(), 12)) {
        let frame = ApsFrame::new(4, 3, 1, 0, pixels.clone()).unwrap();
        let img = normalize_aps(&frame);
        for (p, v) in pixels.iter().zip(&img.values) {
            let want = (*p as f64 / 1023.0).min(1.0);
            prop_assert!((*v as f64 - want).abs() <= f32::EPSILON as f64, "{} vs {}", v, want);
        }
    }
}
