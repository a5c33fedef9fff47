//! Steering prediction metrics: RMSE, explained variance (EVA) and
//! summaries over repeated runs. All variances are population variances.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction set is empty")]
    Empty,

    #[error("need at least 2 samples, got {0}")]
    TooFew(usize),

    #[error("prediction and ground-truth lengths differ ({pred} vs {gt})")]
    LengthMismatch { pred: usize, gt: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("ground truth is constant; explained variance is undefined")]
    ConstantGroundTruth,

    #[error("CSV line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("timestamp mismatch at row {row}: prediction {pred_ms} ms vs ground truth {gt_ms} ms")]
    TimestampMismatch {
        row: usize,
        pred_ms: u64,
        gt_ms: u64,
    },
}

/// Paired predicted and ground-truth steering angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pred: Vec<f64>,
    gt: Vec<f64>,
}

impl PredictionSet {
    pub fn new(pred: Vec<f64>, gt: Vec<f64>) -> Result<Self, MetricsError> {
        if pred.len() != gt.len() {
            return Err(MetricsError::LengthMismatch {
                pred: pred.len(),
                gt: gt.len(),
            });
        }
        match pred.len() {
            0 => return Err(MetricsError::Empty),
            1 => return Err(MetricsError::TooFew(1)),
            _ => {}
        }
        if let Some(i) = pred
            .iter()
            .zip(&gt)
            .position(|(p, g)| !p.is_finite() || !g.is_finite())
        {
            return Err(MetricsError::NonFinite(i));
        }
        Ok(Self { pred, gt })
    }

    pub fn len(&self) -> usize {
        self.pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pred.is_empty()
    }

    pub fn predicted(&self) -> &[f64] {
        &self.pred
    }

    pub fn ground_truth(&self) -> &[f64] {
        &self.gt
    }

    fn residuals(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.pred.iter().zip(&self.gt).map(|(p, g)| p - g)
    }
}

fn population_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    // Shift by the first value so constant input gives exactly zero.
    let Some(first) = values.clone().next() else {
        return 0.0;
    };
    let (sum, n) = values
        .clone()
        .fold((0.0, 0usize), |(s, n), v| (s + (v - first), n + 1));
    let mean = sum / n as f64;
    values.map(|v| (v - first - mean).powi(2)).sum::<f64>() / n as f64
}

/// Root mean squared error, degrees.
pub fn rmse(set: &PredictionSet) -> f64 {
    let sq: f64 = set.residuals().map(|r| r * r).sum();
    (sq / set.len() as f64).sqrt()
}

/// `1 - Var(pred - gt) / Var(gt)`.
pub fn eva(set: &PredictionSet) -> Result<f64, MetricsError> {
    let var_gt = population_variance(set.gt.iter().copied());
    if var_gt == 0.0 {
        return Err(MetricsError::ConstantGroundTruth);
    }
    let var_res = population_variance(set.residuals());
    Ok(1.0 - var_res / var_gt)
}

/// Mean and population standard deviation of one metric over repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn summarize_runs(values: &[f64]) -> Result<RunSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let std = population_variance(values.iter().copied()).sqrt();
    Ok(RunSummary {
        values: values.to_vec(),
        mean,
        std,
    })
}

impl RunSummary {
    pub fn cell(&self, decimals: usize) -> String {
        format!("{:.*} ± {:.*}", decimals, self.mean, decimals, self.std)
    }
}

/// CSV header of the prediction exchange format.
pub const CSV_HEADER: &str = "ts_ms,deg";

/// One `(window_end_ms, degrees)` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringRow {
    pub ts_ms: u64,
    pub deg: f64,
}

pub fn read_steering_csv<R: BufRead>(reader: R) -> Result<Vec<SteeringRow>, MetricsError> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| MetricsError::Csv {
            line: line_no,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line.trim() != CSV_HEADER {
                return Err(MetricsError::Csv {
                    line: line_no,
                    message: format!("expected header `{CSV_HEADER}`"),
                });
            }
            saw_header = true;
            continue;
        }
        let bad = |message: String| MetricsError::Csv {
            line: line_no,
            message,
        };
        let (ts, deg) = line
            .split_once(',')
            .ok_or_else(|| bad("expected two columns".into()))?;
        let ts_ms = ts
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad timestamp {:?}", ts.trim())))?;
        let deg: f64 = deg
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad angle {:?}", deg.trim())))?;
        if !deg.is_finite() {
            return Err(bad("angle is not finite".into()));
        }
        rows.push(SteeringRow { ts_ms, deg });
    }
    if !saw_header {
        return Err(MetricsError::Csv {
            line: 0,
            message: "missing header".into(),
        });
    }
    Ok(rows)
}

pub fn write_steering_csv<W: Write>(rows: &[SteeringRow], mut sink: W) -> std::io::Result<()> {
    let mut out = String::with_capacity(16 * rows.len() + 16);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{}", r.ts_ms, r.deg);
    }
    sink.write_all(out.as_bytes())
}

/// Pairs prediction and ground-truth rows by position, requiring equal
/// timestamps.
pub fn pair_rows(pred: &[SteeringRow], gt: &[SteeringRow]) -> Result<PredictionSet, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    for (row, (p, g)) in pred.iter().zip(gt).enumerate() {
        if p.ts_ms != g.ts_ms {
            return Err(MetricsError::TimestampMismatch {
                row,
                pred_ms: p.ts_ms,
                gt_ms: g.ts_ms,
            });
        }
    }
    PredictionSet::new(
        pred.iter().map(|r| r.deg).collect(),
        gt.iter().map(|r| r.deg).collect(),
    )
}
