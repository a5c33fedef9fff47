//! Flat binary sample files.
//!
//! ```text
//! header : "DDSM" | version u16 | count u32 | 6 reserved zero bytes   (16 bytes)
//! record : steering f32 | speed f32 | dvs 172x128 f32 | aps 172x128 f32
//! ```
//!
//! Little-endian throughout. Each export also writes a `key=value` manifest
//! (`<stem>.manifest`) and a `recording_id,window_end_ms` index
//! (`<stem>.index.csv`) with one line per record.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::frames::{NormalizedImage, NETWORK_HEIGHT, NETWORK_WIDTH};

use super::prep::{
    LabeledSample, PrepStats, MIN_SPEED_KMH, OUTLIER_SIGMAS, STRAIGHT_BAND_DEG, STRAIGHT_DROP_PROB,
};
use super::DatasetError;

pub const DATASET_MAGIC: [u8; 4] = *b"DDSM";
pub const DATASET_VERSION: u16 = 1;
pub const DATASET_HEADER_LEN: usize = 16;
pub const IMAGE_VALUES: usize = NETWORK_WIDTH as usize * NETWORK_HEIGHT as usize;
/// Bytes per record: two f32 labels and two f32 images.
pub const RECORD_LEN: usize = 4 + 4 + 2 * IMAGE_VALUES * 4;

/// Which split a file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Test,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Test => "test",
        }
    }
}

/// Provenance written next to the sample file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportInfo {
    pub split: SplitKind,
    pub seed: u64,
    pub stats: PrepStats,
    pub recordings: Vec<String>,
    pub window_ms: u64,
    pub label_mode: String,
}

/// What [`export_dataset`] wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub data_path: PathBuf,
    pub manifest_path: PathBuf,
    pub index_path: PathBuf,
    pub count: usize,
    pub bytes: u64,
    pub text: String,
}

pub fn manifest_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("manifest")
}

pub fn index_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("index.csv")
}

fn io_err(path: &Path, offset: u64) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        offset,
        source,
    }
}

fn check_image(img: &NormalizedImage, index: usize, which: &str) -> Result<(), DatasetError> {
    if (img.width, img.height) != (NETWORK_WIDTH, NETWORK_HEIGHT) {
        return Err(DatasetError::InvalidSample {
            index,
            reason: format!(
                "{which} image is {}x{}, expected {NETWORK_WIDTH}x{NETWORK_HEIGHT}",
                img.width, img.height
            ),
        });
    }
    if !img.in_unit_range() {
        return Err(DatasetError::InvalidSample {
            index,
            reason: format!("{which} image has values outside [0, 1]"),
        });
    }
    Ok(())
}

fn validate(samples: &[LabeledSample]) -> Result<(), DatasetError> {
    if samples.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    if samples.len() > u32::MAX as usize {
        return Err(DatasetError::InvalidSample {
            index: u32::MAX as usize,
            reason: "too many samples for a u32 count".into(),
        });
    }
    for (i, s) in samples.iter().enumerate() {
        check_image(&s.dvs, i, "dvs")?;
        check_image(&s.aps, i, "aps")?;
        if !s.steering_deg.is_finite() || !s.speed_kmh.is_finite() {
            return Err(DatasetError::InvalidSample {
                index: i,
                reason: "non-finite label".into(),
            });
        }
        if s.recording_id.contains([',', '\n', '\r']) {
            return Err(DatasetError::InvalidSample {
                index: i,
                reason: "recording id may not contain commas or newlines".into(),
            });
        }
    }
    Ok(())
}

fn encode_header(count: usize) -> [u8; DATASET_HEADER_LEN] {
    let mut header = [0u8; DATASET_HEADER_LEN];
    header[..4].copy_from_slice(&DATASET_MAGIC);
    header[4..6].copy_from_slice(&DATASET_VERSION.to_le_bytes());
    header[6..10].copy_from_slice(&(count as u32).to_le_bytes());
    header
}

fn encode_record(s: &LabeledSample, record: &mut Vec<u8>) {
    record.clear();
    record.extend_from_slice(&s.steering_deg.to_le_bytes());
    record.extend_from_slice(&s.speed_kmh.to_le_bytes());
    for v in s.dvs.values.iter().chain(&s.aps.values) {
        record.extend_from_slice(&v.to_le_bytes());
    }
}

/// Encodes samples to the binary layout.
pub fn write_samples<W: Write>(samples: &[LabeledSample], mut sink: W) -> io::Result<u64> {
    sink.write_all(&encode_header(samples.len()))?;
    let mut record = Vec::with_capacity(RECORD_LEN);
    for s in samples {
        encode_record(s, &mut record);
        sink.write_all(&record)?;
    }
    sink.flush()?;
    Ok((DATASET_HEADER_LEN + samples.len() * RECORD_LEN) as u64)
}

fn render_manifest(info: &ExportInfo, count: usize, data_path: &Path) -> String {
    let s = &info.stats;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("format", "DDSM".into());
    kv("version", DATASET_VERSION.to_string());
    kv(
        "data",
        data_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    );
    kv("split", info.split.name().into());
    kv("count", count.to_string());
    kv("record_bytes", RECORD_LEN.to_string());
    kv("image_width", NETWORK_WIDTH.to_string());
    kv("image_height", NETWORK_HEIGHT.to_string());
    kv(
        "layout",
        "steering_f32,speed_f32,dvs_f32[128][172],aps_f32[128][172]".into(),
    );
    kv("window_ms", info.window_ms.to_string());
    kv("label_mode", info.label_mode.clone());
    kv("steering_sigma_deg", format!("{:.6}", s.steering_sigma));
    kv(
        "outlier_limit_deg",
        format!("{:.6}", OUTLIER_SIGMAS * s.steering_sigma),
    );
    kv("min_speed_kmh", MIN_SPEED_KMH.to_string());
    kv("seed", info.seed.to_string());
    kv(
        "rebalance",
        match info.split {
            SplitKind::Train => format!(
                "bernoulli p_drop={STRAIGHT_DROP_PROB} band_deg=+-{STRAIGHT_BAND_DEG} inclusive"
            ),
            SplitKind::Test => "none".into(),
        },
    );
    kv("input", s.input.to_string());
    kv("dropped_speed", s.dropped_speed.to_string());
    kv("dropped_outlier", s.dropped_outlier.to_string());
    kv("dropped_rebalance", s.dropped_rebalance.to_string());
    kv("retained", s.retained.to_string());
    kv(
        "retained_fraction",
        s.retained_fraction()
            .map_or("n/a".into(), |f| format!("{f:.4}")),
    );
    kv("recordings", info.recordings.join(","));
    out
}

/// Writes the sample file, its manifest and its index.
pub fn export_dataset(
    samples: &[LabeledSample],
    data_path: &Path,
    info: &ExportInfo,
) -> Result<Manifest, DatasetError> {
    validate(samples)?;

    let file = File::create(data_path).map_err(io_err(data_path, 0))?;
    let mut sink = BufWriter::new(file);
    let mut offset = 0u64;
    sink.write_all(&encode_header(samples.len()))
        .map_err(io_err(data_path, offset))?;
    offset += DATASET_HEADER_LEN as u64;
    let mut record = Vec::with_capacity(RECORD_LEN);
    for s in samples {
        encode_record(s, &mut record);
        sink.write_all(&record).map_err(io_err(data_path, offset))?;
        offset += RECORD_LEN as u64;
    }
    sink.flush().map_err(io_err(data_path, offset))?;

    let idx_path = index_path(data_path);
    let mut index = String::from("recording_id,window_end_ms\n");
    for s in samples {
        let _ = writeln!(index, "{},{}", s.recording_id, s.window_end_ms);
    }
    std::fs::write(&idx_path, index).map_err(io_err(&idx_path, 0))?;

    let text = render_manifest(info, samples.len(), data_path);
    let man_path = manifest_path(data_path);
    std::fs::write(&man_path, &text).map_err(io_err(&man_path, 0))?;

    Ok(Manifest {
        data_path: data_path.to_path_buf(),
        manifest_path: man_path,
        index_path: idx_path,
        count: samples.len(),
        bytes: offset,
        text,
    })
}

/// Labels and images of one stored record.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub steering_deg: f32,
    pub speed_kmh: f32,
    pub dvs: NormalizedImage,
    pub aps: NormalizedImage,
}

fn read_exact_at<R: Read>(
    reader: &mut R,
    buf: &mut [u8],
    path: &Path,
    offset: u64,
) -> Result<(), DatasetError> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            DatasetError::Truncated {
                path: path.to_path_buf(),
                offset,
            }
        } else {
            io_err(path, offset)(e)
        }
    })
}

fn decode_image(bytes: &[u8]) -> NormalizedImage {
    NormalizedImage {
        width: NETWORK_WIDTH,
        height: NETWORK_HEIGHT,
        values: bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    }
}

/// Reads the binary sample file only.
pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut reader = BufReader::new(File::open(path).map_err(io_err(path, 0))?);
    let mut header = [0u8; DATASET_HEADER_LEN];
    read_exact_at(&mut reader, &mut header, path, 0)?;
    if header[..4] != DATASET_MAGIC {
        return Err(DatasetError::BadHeader {
            path: path.to_path_buf(),
            reason: "missing DDSM magic".into(),
        });
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != DATASET_VERSION {
        return Err(DatasetError::BadHeader {
            path: path.to_path_buf(),
            reason: format!("version {version}, expected {DATASET_VERSION}"),
        });
    }
    let count = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    let mut buf = vec![0u8; RECORD_LEN];
    for i in 0..count {
        let offset = (DATASET_HEADER_LEN + i * RECORD_LEN) as u64;
        read_exact_at(&mut reader, &mut buf, path, offset)?;
        let split = 8 + IMAGE_VALUES * 4;
        records.push(DatasetRecord {
            steering_deg: f32::from_le_bytes(buf[0..4].try_into().unwrap()),
            speed_kmh: f32::from_le_bytes(buf[4..8].try_into().unwrap()),
            dvs: decode_image(&buf[8..split]),
            aps: decode_image(&buf[split..]),
        });
    }
    Ok(records)
}

/// Reads a sample file together with its index.
pub fn read_dataset(path: &Path) -> Result<Vec<LabeledSample>, DatasetError> {
    let records = read_records(path)?;
    let idx_path = index_path(path);
    let reader = BufReader::new(File::open(&idx_path).map_err(io_err(&idx_path, 0))?);
    let mut index = Vec::with_capacity(records.len());
    for (i, line) in reader.lines().enumerate().skip(1) {
        let line = line.map_err(io_err(&idx_path, 0))?;
        let bad = || DatasetError::BadHeader {
            path: idx_path.clone(),
            reason: format!("line {}: expected recording_id,window_end_ms", i + 1),
        };
        let (id, ts) = line.rsplit_once(',').ok_or_else(bad)?;
        let ts: u64 = ts.trim().parse().map_err(|_| bad())?;
        index.push((id.to_owned(), ts));
    }
    if index.len() != records.len() {
        return Err(DatasetError::BadHeader {
            path: idx_path,
            reason: format!("{} index lines for {} records", index.len(), records.len()),
        });
    }
    Ok(records
        .into_iter()
        .zip(index)
        .map(|(r, (recording_id, window_end_ms))| LabeledSample {
            dvs: r.dvs,
            aps: r.aps,
            steering_deg: r.steering_deg,
            speed_kmh: r.speed_kmh,
            recording_id,
            window_end_ms,
        })
        .collect())
}
