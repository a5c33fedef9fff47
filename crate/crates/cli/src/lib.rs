//! `evdrive` command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use evdrive_core::dataset::{
    export_dataset, prepare, samples_from_recording, ExportInfo, LabeledSample, SplitKind,
};
use evdrive_core::frames::{
    accumulate_dvs, downsample, normalize_aps, normalize_dvs, write_pgm, NormalizedImage,
    SENSOR_HEIGHT, SENSOR_WIDTH,
};
use evdrive_core::metrics::{
    eva, pair_rows, read_steering_csv, rmse, summarize_runs, write_steering_csv, SteeringRow,
};
use evdrive_core::recording::{stream_stats, write_recording};
use evdrive_core::simulator::{generate_scene, ScenarioParams};
use evdrive_core::sync::{
    window_recording_file, LabelMode, SyncPolicy, SyncStats, DEFAULT_MAX_LABEL_GAP_MS,
    DEFAULT_WINDOW_MS,
};

#[derive(Debug, Parser)]
#[command(
    name = "evdrive",
    version,
    about = "Event and frame camera driving data tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct WindowArgs {
    /// DVS accumulation window in milliseconds.
    #[arg(long, default_value_t = DEFAULT_WINDOW_MS)]
    window_ms: u64,
    /// Steering label interpolation: `zoh` or `linear`.
    #[arg(long, default_value = "zoh")]
    label_mode: LabelMode,
    /// Labels older than this are flagged and excluded.
    #[arg(long, default_value_t = DEFAULT_MAX_LABEL_GAP_MS)]
    max_label_gap_ms: u64,
}

impl WindowArgs {
    fn policy(&self) -> Result<SyncPolicy> {
        let policy = SyncPolicy {
            window_ms: self.window_ms,
            label_mode: self.label_mode,
            max_label_gap_ms: self.max_label_gap_ms,
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic drive into a container file.
    Simulate {
        /// key=value scenario file.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the contrast threshold.
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Print per-stream counts and rates of a container.
    Info { file: PathBuf },
    /// Build train/test sample files from containers.
    Prep {
        #[arg(required = true)]
        containers: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Write per-window DVS and APS images as PGM files.
    ExportFrames {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stop after this many windows.
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Score prediction CSVs against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        /// `[mode=]path`, mode one of dvs+aps, dvs, aps. Repeat for runs.
        #[arg(long, required = true)]
        pred: Vec<String>,
        /// Label for the table's first column.
        #[arg(long, default_value = "")]
        tag: String,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("evdrive: {e:#}");
            1
        }
    }
}

fn execute(command: Command) -> Result<String> {
    match command {
        Command::Simulate {
            scenario,
            out,
            seed,
            theta,
        } => simulate(&scenario, &out, seed, theta),
        Command::Info { file } => info(&file),
        Command::Prep {
            containers,
            out,
            seed,
            window,
        } => prep(&containers, &out, seed, &window),
        Command::ExportFrames {
            file,
            out,
            limit,
            window,
        } => export_frames(&file, &out, limit, &window),
        Command::Eval { gt, pred, tag } => evaluate(&gt, &pred, &tag),
    }
}

fn simulate(scenario: &Path, out: &Path, seed: Option<u64>, theta: Option<f64>) -> Result<String> {
    let text =
        fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let mut params = ScenarioParams::from_config(&text)
        .with_context(|| format!("scenario {}", scenario.display()))?;
    if let Some(seed) = seed {
        if params.id == format!("sim-{}", params.seed) {
            params.id = format!("sim-{seed}");
        }
        params.seed = seed;
    }
    if let Some(theta) = theta {
        params.sensor.threshold = theta;
    }
    let scene = generate_scene(&params)?;
    let packets = scene.packets();
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let bytes = write_recording(&scene.meta, &packets, BufWriter::new(file))
        .with_context(|| format!("writing {}", out.display()))?;
    log::info!("wrote {} packets to {}", packets.len(), out.display());
    Ok(format!(
        "out={}\nid={}\nbytes={bytes}\npackets={}\nevents={}\naps_frames={}\nvehicle_samples={}\n",
        out.display(),
        scene.meta.id,
        packets.len(),
        scene.events.len(),
        scene.aps_frames.len(),
        scene.vehicle.len(),
    ))
}

fn info(path: &Path) -> Result<String> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (meta, stats) = stream_stats(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(stats.render(&meta))
}

fn prep(containers: &[PathBuf], out: &Path, seed: u64, window: &WindowArgs) -> Result<String> {
    let policy = window.policy()?;
    let per_file: Vec<(String, Vec<LabeledSample>, SyncStats)> = containers
        .par_iter()
        .map(|path| {
            let (meta, samples, stats) = samples_from_recording(path, &policy)
                .with_context(|| format!("preparing {}", path.display()))?;
            Ok((meta.id, samples, stats))
        })
        .collect::<Result<_>>()?;

    let mut ids = Vec::new();
    let mut sync = SyncStats::default();
    let mut recordings = Vec::new();
    for (id, samples, stats) in per_file {
        ensure!(!ids.contains(&id), "duplicate recording id `{id}`");
        ids.push(id);
        sync.merge(&stats);
        recordings.push(samples);
    }

    let prepared = prepare(recordings, seed);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut report = String::new();
    let _ = writeln!(report, "recordings={}", ids.len());
    report.push_str(&sync.render("sync."));
    for (split, samples, stats) in [
        (SplitKind::Train, &prepared.train, &prepared.train_stats),
        (SplitKind::Test, &prepared.test, &prepared.test_stats),
    ] {
        let name = split.name();
        if samples.is_empty() {
            bail!(
                "{name} split is empty after filtering ({} input windows)",
                stats.input
            );
        }
        let info = ExportInfo {
            split,
            seed,
            stats: stats.clone(),
            recordings: ids.clone(),
            window_ms: policy.window_ms,
            label_mode: window.label_mode.to_string(),
        };
        let manifest = export_dataset(samples, &out.join(format!("{name}.ddsm")), &info)?;
        let gt_path = out.join(format!("{name}.gt.csv"));
        let rows: Vec<SteeringRow> = samples
            .iter()
            .map(|s| SteeringRow {
                ts_ms: s.window_end_ms,
                deg: s.steering_deg as f64,
            })
            .collect();
        let gt =
            File::create(&gt_path).with_context(|| format!("creating {}", gt_path.display()))?;
        write_steering_csv(&rows, BufWriter::new(gt))
            .with_context(|| format!("writing {}", gt_path.display()))?;
        let _ = writeln!(report, "{name}.path={}", manifest.data_path.display());
        let _ = writeln!(report, "{name}.input={}", stats.input);
        let _ = writeln!(report, "{name}.dropped_speed={}", stats.dropped_speed);
        let _ = writeln!(report, "{name}.dropped_outlier={}", stats.dropped_outlier);
        let _ = writeln!(
            report,
            "{name}.dropped_rebalance={}",
            stats.dropped_rebalance
        );
        let _ = writeln!(report, "{name}.retained={}", stats.retained);
    }
    let _ = writeln!(
        report,
        "steering_sigma_deg={:.6}",
        prepared.train_stats.steering_sigma
    );
    Ok(report)
}

fn write_image(img: &NormalizedImage, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut sink = BufWriter::new(file);
    write_pgm(img, &mut sink)?;
    sink.flush()
        .with_context(|| format!("writing {}", path.display()))
}

fn export_frames(
    path: &Path,
    out: &Path,
    limit: Option<usize>,
    window: &WindowArgs,
) -> Result<String> {
    let policy = window.policy()?;
    let (meta, windows, _) = window_recording_file(path, policy)
        .with_context(|| format!("reading {}", path.display()))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let full_sensor = (meta.width, meta.height) == (SENSOR_WIDTH, SENSOR_HEIGHT);
    let mut written = 0;
    for (i, w) in windows.iter().take(limit.unwrap_or(usize::MAX)).enumerate() {
        let mut dvs = normalize_dvs(&accumulate_dvs(&w.events, meta.width, meta.height)?);
        let mut aps = normalize_aps(&w.frame);
        if full_sensor {
            dvs = downsample(&dvs)?;
            aps = downsample(&aps)?;
        }
        write_image(&dvs, &out.join(format!("dvs_{i:05}.pgm")))?;
        write_image(&aps, &out.join(format!("aps_{i:05}.pgm")))?;
        written += 1;
    }
    Ok(format!(
        "windows={}\nwritten={written}\nwidth={}\nheight={}\n",
        windows.len(),
        if full_sensor { 172 } else { meta.width },
        if full_sensor { 128 } else { meta.height },
    ))
}

const MODES: [&str; 3] = ["dvs+aps", "dvs", "aps"];

fn split_pred_arg(arg: &str) -> Result<(usize, &str)> {
    if let Some((mode, path)) = arg.split_once('=') {
        let mode = mode.to_ascii_lowercase();
        match MODES.iter().position(|m| *m == mode) {
            Some(i) => return Ok((i, path)),
            None if !Path::new(arg).exists() => {
                bail!("unknown mode `{mode}` in `{arg}` (expected dvs+aps, dvs or aps)")
            }
            None => {}
        }
    }
    Ok((0, arg))
}

fn read_rows(path: &Path) -> Result<Vec<SteeringRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_steering_csv(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn evaluate(gt: &Path, preds: &[String], tag: &str) -> Result<String> {
    let gt_rows = read_rows(gt)?;
    let mut rmse_runs: [Vec<f64>; 3] = Default::default();
    let mut eva_runs: [Vec<f64>; 3] = Default::default();
    for arg in preds {
        let (mode, path) = split_pred_arg(arg)?;
        let path = Path::new(path);
        let set = pair_rows(&read_rows(path)?, &gt_rows)
            .with_context(|| format!("pairing {} with {}", path.display(), gt.display()))?;
        rmse_runs[mode].push(rmse(&set));
        eva_runs[mode].push(eva(&set).with_context(|| format!("scoring {}", path.display()))?);
    }

    let cells = |runs: &[Vec<f64>; 3]| -> Result<Vec<String>> {
        runs.iter()
            .map(|v| {
                Ok(if v.is_empty() {
                    "-".to_owned()
                } else {
                    summarize_runs(v)?.cell(3)
                })
            })
            .collect()
    };
    let rows = [
        (
            if tag.is_empty() { "metric" } else { tag }.to_owned(),
            vec!["DVS+APS".to_owned(), "DVS".to_owned(), "APS".to_owned()],
        ),
        ("RMSE (deg)".to_owned(), cells(&rmse_runs)?),
        ("EVA".to_owned(), cells(&eva_runs)?),
        (
            "runs".to_owned(),
            rmse_runs.iter().map(|v| v.len().to_string()).collect(),
        ),
    ];
    let first = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..3)
        .map(|c| {
            rows.iter()
                .map(|r| r.1[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (label, cols) in &rows {
        let mut line = format!("{label:<first$}");
        for (cell, w) in cols.iter().zip(&widths) {
            let pad = w - cell.chars().count();
            let _ = write!(line, " | {cell}{}", " ".repeat(pad));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push_str("mean ± std of per-run values\n");
    Ok(out)
}
