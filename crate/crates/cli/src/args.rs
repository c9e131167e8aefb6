use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vitalcam_core::roi::RoiMode;
use vitalcam_core::vitals::{Spo2Calibration, VitalKind};

#[derive(Debug, Parser)]
#[command(
    name = "vitalcam",
    version,
    about = "Camera-based vital signs and patient triage"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate one vital sign from a directory of frames.
    Estimate(EstimateArgs),
    /// Write a synthetic frame directory plus ground_truth.json.
    Synth(SynthArgs),
    /// Score, rank and edit patients in a JSON store.
    Triage(TriageArgs),
    /// Mean absolute error between reference and camera readings.
    Report(ReportArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Walk a dialog graph interactively on stdin.
    Dialog(DialogArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Hr,
    Rr,
    Spo2,
}

impl From<KindArg> for VitalKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Hr => VitalKind::Hr,
            KindArg::Rr => VitalKind::Rr,
            KindArg::Spo2 => VitalKind::Spo2,
        }
    }
}

fn parse_roi(s: &str) -> Result<RoiMode, String> {
    s.parse()
        .map_err(|e: vitalcam_core::roi::RoiError| e.to_string())
}

fn parse_cal(s: &str) -> Result<Spo2Calibration, String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected A,B, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad A in {s:?}"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad B in {s:?}"))?;
    Spo2Calibration::new(a, b).map_err(|e| e.to_string())
}

fn parse_fps(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("fps must be a positive number, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Directory of frame_NNNNNN.ppm files.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long, value_parser = parse_fps)]
    pub fps: f64,
    /// auto, center:F or box:x,y,w,h.
    #[arg(long, value_parser = parse_roi, default_value = "auto")]
    pub roi: RoiMode,
    /// SpO₂ calibration as A,B in SpO₂ = A - B·R.
    #[arg(long, value_parser = parse_cal)]
    pub cal: Option<Spo2Calibration>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// SynthSpec JSON file.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Calibration used for the SpO₂ ground truth.
    #[arg(long, value_parser = parse_cal)]
    pub cal: Option<Spo2Calibration>,
}

#[derive(Debug, Args)]
pub struct TriageArgs {
    #[command(subcommand)]
    pub action: TriageAction,
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    /// Patient store JSON file; a missing file is an empty store.
    #[arg(long)]
    pub store: PathBuf,
    /// Triage weights and risk rules JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TriageAction {
    /// Score one stored patient (--id) or a record file (--record).
    Score {
        /// Needed with --id.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(
            long,
            conflicts_with = "record",
            requires = "store",
            required_unless_present = "record"
        )]
        id: Option<String>,
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// All stored patients, highest priority first.
    Rank {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Insert or replace a patient from a record file.
    Upsert {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        record: PathBuf,
    },
    Delete {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        id: String,
    },
    /// Case-insensitive name substring and/or exact age.
    Search {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, required_unless_present = "age")]
        name: Option<String>,
        #[arg(long)]
        age: Option<u32>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Reference readings CSV (person,hr,rr,spo2).
    #[arg(long)]
    pub oximeter: PathBuf,
    /// Camera readings CSV (person,hr,rr,spo2).
    #[arg(long)]
    pub televital: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service TOML; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<std::net::IpAddr>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DialogArgs {
    /// Graph JSON; the bundled screening graph when omitted.
    #[arg(long)]
    pub graph: Option<PathBuf>,
}
