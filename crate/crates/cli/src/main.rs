//! `slr`: synthesize, encode, split, train, evaluate and attend from the
//! command line.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 invalid data, 5 internal error.

mod commands;
mod error;
mod fsio;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slr_core::{EncodingConfig, FlipPolicy, Mode, Split, View};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "slr", version, about = "Pose-landmark sign recognition pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-signer corpus: clip JSON files plus manifest.csv.
    Synth(SynthArgs),
    /// Encode every clip of a manifest into `.rqe` feature matrices.
    Encode(EncodeArgs),
    /// Assign train/val/test splits to a manifest.
    Split(SplitArgs),
    /// Train a classifier from a TOML run config.
    Train(TrainArgs),
    /// Score a checkpoint on a manifest and report word error rate.
    Eval(EvalArgs),
    /// Export the per-frame attention profile of one clip.
    Attend(AttendArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// Number of word classes.
    #[arg(long, default_value_t = 20)]
    pub classes: usize,
    /// Number of signers.
    #[arg(long, default_value_t = 3)]
    pub signers: usize,
    /// Repetitions of every word by every signer.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shortest clip, in frames.
    #[arg(long, default_value_t = 20)]
    pub min_frames: usize,
    /// Longest clip, in frames.
    #[arg(long, default_value_t = 36)]
    pub max_frames: usize,
    /// Smallest signer scale.
    #[arg(long, default_value_t = 0.7)]
    pub scale_min: f64,
    /// Largest signer scale.
    #[arg(long, default_value_t = 1.4)]
    pub scale_max: f64,
    /// Largest signer offset along x and y, in image units.
    #[arg(long, default_value_t = 0.1)]
    pub translation: f64,
    /// Standard deviation of per-landmark Gaussian jitter.
    #[arg(long, default_value_t = 0.005)]
    pub jitter: f64,
    /// Probability that a landmark is missing in a frame.
    #[arg(long, default_value_t = 0.1)]
    pub missing: f64,
    /// Probability that a signer is left-handed.
    #[arg(long, default_value_t = 0.0)]
    pub left_handed: f64,
    #[arg(long, default_value = "front", value_parser = parse_view)]
    pub view: View,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Encoding flags shared by `encode`, `eval` and `attend`.
#[derive(Args, Clone)]
pub struct EncodingArgs {
    /// Feature mode: raw, rqe or rqe-sf.
    #[arg(long, default_value = "rqe", value_parser = parse_mode)]
    pub mode: Mode,
    /// Quantization levels, one value for all axes or three for x,y,d.
    #[arg(long, default_value = "10", value_parser = parse_levels)]
    pub levels: Levels,
    /// Offsets are clamped to [-range, range] before quantization.
    #[arg(long, default_value_t = 1.0)]
    pub range: f64,
    /// Dominant-hand flipping: off, auto or force.
    #[arg(long, default_value = "off", value_parser = parse_flip)]
    pub flip: FlipPolicy,
    /// Hold lower-body channels at zero (rqe modes only).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub lower_body_fixed: bool,
}

#[derive(Clone, Copy)]
pub struct Levels(pub [u32; 3]);

impl EncodingArgs {
    pub fn config(&self) -> Result<EncodingConfig, CliError> {
        let cfg = EncodingConfig {
            mode: self.mode,
            levels: self.levels.0,
            clamp_range: self.range,
            flip_policy: self.flip,
            lower_body_fixed: self.lower_body_fixed,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub encoding: EncodingArgs,
    /// Output directory; receives one `.rqe` file per clip and encoding.toml.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    FixedTestSigners,
    Stratified,
    LeaveOneUserOut,
}

#[derive(Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "fixed-test-signers")]
    pub strategy: StrategyArg,
    /// Comma-separated test signers (fixed-test-signers).
    #[arg(long, value_delimiter = ',', default_value = "S04,S08")]
    pub test_signers: Vec<String>,
    /// Validation trials drawn per (signer, word) pair.
    #[arg(long, default_value_t = 1)]
    pub val_trials: usize,
    /// Signer held out for validation (leave-one-user-out).
    #[arg(long)]
    pub held_out: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output manifest path. Clip paths stay relative to the input manifest,
    /// so write it into the same directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// TOML run config.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SplitFilter {
    Train,
    Val,
    Test,
    All,
}

impl SplitFilter {
    pub fn split(self) -> Option<Split> {
        match self {
            SplitFilter::Train => Some(Split::Train),
            SplitFilter::Val => Some(Split::Val),
            SplitFilter::Test => Some(Split::Test),
            SplitFilter::All => None,
        }
    }
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory written by `slr encode`; without it clips are encoded with
    /// the encoding flags.
    #[arg(long)]
    pub encoded: Option<PathBuf>,
    #[command(flatten)]
    pub encoding: EncodingArgs,
    /// Which manifest entries to score.
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitFilter,
    /// Where to write the JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AttendArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Clip JSON file.
    #[arg(long)]
    pub clip: PathBuf,
    #[command(flatten)]
    pub encoding: EncodingArgs,
    /// Output CSV with columns frame_index,score.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: slr_core::encoding::EncodingError| e.to_string())
}

fn parse_flip(s: &str) -> Result<FlipPolicy, String> {
    s.parse().map_err(|e: slr_core::encoding::EncodingError| e.to_string())
}

fn parse_view(s: &str) -> Result<View, String> {
    s.parse().map_err(|e: slr_core::landmark::ParseError| e.to_string())
}

fn parse_levels(s: &str) -> Result<Levels, String> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|_| format!("bad level {p:?}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [q] => Ok(Levels([*q; 3])),
        [x, y, d] => Ok(Levels([*x, *y, *d])),
        _ => Err("give one level or three comma-separated levels".into()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Encode(a) => commands::encode(&a),
        Command::Split(a) => commands::split(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Attend(a) => commands::attend(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
