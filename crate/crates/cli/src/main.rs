mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "rppg",
    version,
    about = "Remote photoplethysmography: synthesis, heart-rate estimation and scoring"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoiArg {
    Levelset,
    Landmark,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Peak,
    Ad,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbeddingArg {
    Background,
    Chest,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark (clips, landmarks, manifest).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long)]
        clips: Option<usize>,
        #[arg(long)]
        hr_min: Option<f64>,
        #[arg(long)]
        hr_max: Option<f64>,
        /// Gaussian pixel noise, gray levels.
        #[arg(long)]
        noise: Option<f64>,
        /// Illumination flicker rate in bpm (needs --flicker-depth).
        #[arg(long, requires = "flicker_depth")]
        flicker_bpm: Option<f64>,
        #[arg(long, requires = "flicker_bpm")]
        flicker_depth: Option<f64>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        fps: Option<u32>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Dump the per-frame ROI masks of one clip.
    Segment {
        #[arg(long)]
        clip: PathBuf,
        #[arg(long)]
        landmarks: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        roi: Option<RoiArg>,
    },
    /// Estimate heart rates for every clip of a manifest and write a submission.
    Estimate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        roi: Option<RoiArg>,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        /// Enable or disable group median fusion.
        #[arg(long)]
        fuse: Option<bool>,
        #[arg(long)]
        band_low: Option<f64>,
        #[arg(long)]
        band_high: Option<f64>,
        /// Precomputed outlier table for the AD estimator.
        #[arg(long)]
        ad_table: Option<PathBuf>,
    },
    /// Group clips by background colour and write the cluster report.
    Group {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        embedding: Option<EmbeddingArg>,
        #[arg(long)]
        group_size: Option<usize>,
    },
    /// Score a submission against the manifest ground truth.
    Evaluate {
        #[arg(long)]
        submission: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank several evaluation reports.
    Leaderboard {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Team names in report order (defaults to the file stems).
        #[arg(long = "name")]
        names: Vec<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build the AD outlier table and write it as CSV.
    Adtable {
        #[arg(long)]
        out: PathBuf,
        /// Sample rate of the traces the table is meant for.
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        snr_min: Option<f64>,
        #[arg(long)]
        snr_max: Option<f64>,
        #[arg(long)]
        snr_step: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Trace length in seconds.
        #[arg(long)]
        window: Option<f64>,
    },
    /// Time-stretch a clip so its pulse rate scales by `factor`.
    Morph {
        #[arg(long)]
        clip: PathBuf,
        #[arg(long)]
        factor: f64,
        /// Ground-truth heart rate of the input clip.
        #[arg(long)]
        hr: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, requires = "landmarks_out")]
        landmarks: Option<PathBuf>,
        #[arg(long, requires = "landmarks")]
        landmarks_out: Option<PathBuf>,
        /// Also mirror the frames horizontally.
        #[arg(long)]
        flip: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let io = e.downcast_ref::<rppg::Error>().is_some_and(|e| e.is_io());
            ExitCode::from(if io { 2 } else { 1 })
        }
    }
}
