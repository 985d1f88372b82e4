//! `nbfec`: experiment runner and measurement analyzer for nonbinary FEC
//! threshold prediction.

mod commands;
mod grid;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "nbfec", version, about = "Nonbinary FEC performance prediction toolkit")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "NBFEC_WORKERS")]
    workers: Option<usize>,
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// AWGN (or hard-decision) sweep: metrics and post-FEC SER per Es/N0.
    Simulate(SimulateArgs),
    /// Calibrate the MI threshold of a code.
    Calibrate(CalibrateArgs),
    /// Metrics of a measurement database.
    Analyze(AnalyzeArgs),
    /// Post-FEC SER from a calibration curve.
    Predict(PredictArgs),
    /// Decode a measurement database with a code.
    DecodeDb(DecodeDbArgs),
    /// Post-FEC SER versus mixing ratio of two equal-MI channels.
    Universality(UniversalityArgs),
    /// Hard-decision experiment: SER against I_hd and pre-FEC SER.
    Dmc(DmcArgs),
    /// Synthesize an AWGN measurement database.
    GenDb(GenDbArgs),
    /// Construct a code and write its preset file.
    BuildCode(BuildCodeArgs),
}

#[derive(Args, Serialize, Clone)]
pub struct CodeArgs {
    /// Preset rate (0.7, 0.75, 0.8, 0.85, 0.9) or a code preset file.
    #[arg(long, default_value = "0.8")]
    pub code: String,
    /// Target block length in symbols for preset rates.
    #[arg(long, default_value_t = nbfec::ldpc::DEFAULT_LENGTH)]
    pub code_length: usize,
    /// Construction seed for preset rates.
    #[arg(long, default_value_t = nbfec::ldpc::DEFAULT_CODE_SEED)]
    pub code_seed: u64,
}

#[derive(Args, Serialize, Clone)]
pub struct SimArgs {
    /// Stop a point after this many post-FEC symbol errors ...
    #[arg(long, default_value_t = 100)]
    pub target_errors: u64,
    /// ... in at least this many erroneous frames ...
    #[arg(long, default_value_t = 10)]
    pub min_frame_errors: u64,
    /// ... or after this many frames.
    #[arg(long, default_value_t = 2000)]
    pub max_frames: u64,
    #[arg(long, default_value_t = 32)]
    pub min_frames: u64,
    /// Decoder iterations.
    #[arg(long, default_value_t = nbfec::ldpc::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Max-product check nodes instead of sum-product.
    #[arg(long)]
    pub min_sum: bool,
    /// Received samples kept per point for the information metrics.
    #[arg(long, default_value_t = 200_000)]
    pub metric_records: usize,
    /// Gaussian metric variance for the analysis (default: channel variance).
    #[arg(long)]
    pub metric_k: Option<f64>,
    /// Search bracket for the metric exponent, `lo:hi`.
    #[arg(long, default_value = "0.001:1000")]
    pub nu_range: String,
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    /// Constellation name (bpsk, qpsk, 4pam, 8psk, c1..c4) or file.
    #[arg(long)]
    pub constellation: String,
    /// Es/N0 grid in dB, `start:step:stop`.
    #[arg(long)]
    pub esn0: String,
    #[arg(long)]
    pub seed: u64,
    /// Hard-decision DMC channel instead of soft AWGN output.
    #[arg(long)]
    pub hard: bool,
    /// Transmissions per symbol for the DMC estimate.
    #[arg(long, default_value_t = 100_000)]
    pub dmc_samples: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub code: CodeArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Args, Serialize)]
pub struct CalibrateArgs {
    /// Comma-separated constellations pooled into one curve.
    #[arg(long, default_value = "8psk")]
    pub constellation: String,
    /// Preset rate; overrides --code.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub target_ser: f64,
    /// Also report the threshold at this SER from a log-linear fit.
    #[arg(long)]
    pub extrapolate_to: Option<f64>,
    /// Fixed Es/N0 grid; an adaptive MI sweep is used when absent.
    #[arg(long)]
    pub esn0: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub code: CodeArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Args, Serialize)]
pub struct AnalyzeArgs {
    /// Measurement database CSV.
    #[arg(long)]
    pub db: PathBuf,
    /// Constellation; defaults to the one named in the database header.
    #[arg(long)]
    pub constellation: Option<String>,
    /// Gaussian metric variance K.
    #[arg(long, default_value_t = 0.5)]
    pub metric_k: f64,
    #[arg(long, default_value = "0.001:1000")]
    pub nu_range: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct PredictArgs {
    /// Calibration curve CSV.
    #[arg(long)]
    pub curve: PathBuf,
    /// Comma-separated MI values in bits/symbol.
    #[arg(long)]
    pub mi: Option<String>,
    /// Measurement database whose I_NB is used instead of --mi.
    #[arg(long)]
    pub db: Option<PathBuf>,
    #[arg(long)]
    pub constellation: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct DecodeDbArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub constellation: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub code: CodeArgs,
    #[arg(long, default_value_t = nbfec::ldpc::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
}

#[derive(Args, Serialize)]
pub struct UniversalityArgs {
    /// First channel's constellation.
    #[arg(long)]
    pub constellation: String,
    /// Second channel's constellation (default: same as the first).
    #[arg(long)]
    pub constellation2: Option<String>,
    /// Second channel is the hard-decision DMC.
    #[arg(long)]
    pub hard2: bool,
    /// Common MI of both channels in bits/symbol.
    #[arg(long)]
    pub mi: f64,
    /// Mixing ratios, `start:step:stop`.
    #[arg(long, default_value = "0:0.25:1")]
    pub gamma: String,
    #[arg(long, default_value_t = 0.01)]
    pub mi_tolerance: f64,
    #[arg(long, default_value_t = 100_000)]
    pub dmc_samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub code: CodeArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Args, Serialize)]
pub struct DmcArgs {
    /// Comma-separated constellations.
    #[arg(long, default_value = "c1,c2,c4")]
    pub constellation: String,
    #[arg(long, default_value_t = 1e-3)]
    pub target_ser: f64,
    #[arg(long)]
    pub esn0: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub dmc_samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub code: CodeArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Args, Serialize)]
pub struct GenDbArgs {
    #[arg(long)]
    pub constellation: String,
    /// Es/N0 in dB.
    #[arg(long)]
    pub esn0: f64,
    /// Number of records.
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct BuildCodeArgs {
    #[arg(long)]
    pub rate: f64,
    /// Field size exponent.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long, default_value_t = nbfec::ldpc::DEFAULT_LENGTH)]
    pub n: usize,
    #[arg(long, default_value_t = nbfec::ldpc::DEFAULT_CODE_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build_global() {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a, workers),
        Command::Calibrate(a) => commands::calibrate(&a, workers),
        Command::Analyze(a) => commands::analyze(&a, workers),
        Command::Predict(a) => commands::predict(&a, workers),
        Command::DecodeDb(a) => commands::decode_db(&a, workers),
        Command::Universality(a) => commands::universality(&a, workers),
        Command::Dmc(a) => commands::dmc(&a, workers),
        Command::GenDb(a) => commands::gen_db(&a, workers),
        Command::BuildCode(a) => commands::build_code(&a, workers),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
