//! DVS histogram accumulation, DVS/APS normalization to `[0, 1]` and the
//! fixed 346x260 to 172x128 downsampling.

use std::io::{self, Write};

use thiserror::Error;

use crate::recording::{ApsFrame, Event, APS_FULL_SCALE};

pub const SENSOR_WIDTH: u16 = 346;
pub const SENSOR_HEIGHT: u16 = 260;
pub const NETWORK_WIDTH: u16 = 172;
pub const NETWORK_HEIGHT: u16 = 128;
/// Clip bound for DVS histograms, in standard deviations.
pub const DVS_CLIP_SIGMAS: f64 = 3.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("event {index} at ({x}, {y}) lies outside the {width}x{height} sensor")]
    EventOutOfBounds {
        index: usize,
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },

    #[error("expected a {}x{} image, got {}x{}", expected.0, expected.1, found.0, found.1)]
    WrongSize {
        expected: (u16, u16),
        found: (u16, u16),
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),
}

/// Signed per-pixel event counts: ON adds one, OFF subtracts one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DvsHistogram {
    pub width: u16,
    pub height: u16,
    pub bins: Vec<i32>,
}

impl DvsHistogram {
    pub fn zeros(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            bins: vec![0; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> i32 {
        self.bins[y as usize * self.width as usize + x as usize]
    }

    pub fn negated(&self) -> Self {
        Self {
            bins: self.bins.iter().map(|b| -b).collect(),
            ..self.clone()
        }
    }

    /// Population standard deviation over all pixels, zeros included.
    pub fn std_dev(&self) -> f64 {
        let n = self.bins.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let mean = self.bins.iter().map(|&b| b as f64).sum::<f64>() / n;
        let var = self
            .bins
            .iter()
            .map(|&b| {
                let d = b as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        var.sqrt()
    }
}

/// Image with every value in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    pub width: u16,
    pub height: u16,
    pub values: Vec<f32>,
}

impl NormalizedImage {
    pub fn new(width: u16, height: u16, values: Vec<f32>) -> Result<Self, FrameError> {
        if values.len() != width as usize * height as usize {
            return Err(FrameError::InvalidImage(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(FrameError::InvalidImage(format!(
                "value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: u16, height: u16, value: f32) -> Self {
        Self {
            width,
            height,
            values: vec![value; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width as usize + x]
    }

    pub fn in_unit_range(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// Sums event polarities per pixel.
pub fn accumulate_dvs(
    events: &[Event],
    width: u16,
    height: u16,
) -> Result<DvsHistogram, FrameError> {
    let mut hist = DvsHistogram::zeros(width, height);
    let w = width as usize;
    for (index, e) in events.iter().enumerate() {
        if e.x >= width || e.y >= height {
            return Err(FrameError::EventOutOfBounds {
                index,
                x: e.x,
                y: e.y,
                width,
                height,
            });
        }
        hist.bins[e.y as usize * w + e.x as usize] += e.polarity.sign();
    }
    Ok(hist)
}

/// Clips the histogram to three of its own standard deviations and maps
/// `-3 sigma -> 0`, `0 -> 0.5`, `+3 sigma -> 1`. A flat histogram maps to 0.5.
pub fn normalize_dvs(hist: &DvsHistogram) -> NormalizedImage {
    normalize_dvs_with_sigma(hist, hist.std_dev())
}

/// [`normalize_dvs`] with an externally supplied standard deviation, e.g. one
/// pooled over a dataset.
pub fn normalize_dvs_with_sigma(hist: &DvsHistogram, sigma: f64) -> NormalizedImage {
    if !(sigma.is_finite() && sigma > 0.0) {
        return NormalizedImage::filled(hist.width, hist.height, 0.5);
    }
    let bound = DVS_CLIP_SIGMAS * sigma;
    let values = hist
        .bins
        .iter()
        .map(|&b| {
            // Half-range offset from |b| so that b and -b land exactly on
            // v and 1 - v.
            let half = (0.5 * (b.unsigned_abs() as f64 / bound).min(1.0)) as f32;
            let up = 0.5f32 + half;
            if b >= 0 {
                up
            } else {
                1.0 - up
            }
        })
        .collect();
    NormalizedImage {
        width: hist.width,
        height: hist.height,
        values,
    }
}

/// Scales 10-bit APS values to `[0, 1]` by the fixed ADC full scale.
pub fn normalize_aps(frame: &ApsFrame) -> NormalizedImage {
    let scale = APS_FULL_SCALE as f32;
    NormalizedImage {
        width: frame.width,
        height: frame.height,
        values: frame
            .pixels
            .iter()
            .map(|&p| (p as f32 / scale).min(1.0))
            .collect(),
    }
}

/// Centre-crops 346x260 to 344x256 and mean-pools 2x2 blocks to 172x128.
pub fn downsample(img: &NormalizedImage) -> Result<NormalizedImage, FrameError> {
    if (img.width, img.height) != (SENSOR_WIDTH, SENSOR_HEIGHT) {
        return Err(FrameError::WrongSize {
            expected: (SENSOR_WIDTH, SENSOR_HEIGHT),
            found: (img.width, img.height),
        });
    }
    let crop_w = NETWORK_WIDTH as usize * 2;
    let crop_h = NETWORK_HEIGHT as usize * 2;
    let x0 = (SENSOR_WIDTH as usize - crop_w) / 2;
    let y0 = (SENSOR_HEIGHT as usize - crop_h) / 2;
    let src_w = img.width as usize;
    let mut values = Vec::with_capacity(NETWORK_WIDTH as usize * NETWORK_HEIGHT as usize);
    for j in 0..NETWORK_HEIGHT as usize {
        let top = (y0 + 2 * j) * src_w + x0;
        let bottom = top + src_w;
        for i in 0..NETWORK_WIDTH as usize {
            let c = 2 * i;
            let sum = img.values[top + c] as f64
                + img.values[top + c + 1] as f64
                + img.values[bottom + c] as f64
                + img.values[bottom + c + 1] as f64;
            values.push((sum / 4.0) as f32);
        }
    }
    Ok(NormalizedImage {
        width: NETWORK_WIDTH,
        height: NETWORK_HEIGHT,
        values,
    })
}

/// Encodes as binary PGM (P5, maxval 255), `round(v * 255)` per pixel.
pub fn write_pgm<W: Write>(img: &NormalizedImage, mut sink: W) -> io::Result<()> {
    write!(sink, "P5\n{} {}\n255\n", img.width, img.height)?;
    let bytes: Vec<u8> = img
        .values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    sink.write_all(&bytes)
}
