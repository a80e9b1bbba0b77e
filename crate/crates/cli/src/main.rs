//! `avdiar`: generate synthetic corpora, train, diarize, score and sweep.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "avdiar", version, about = "Audio-visual speaker diarization")]
struct Cli {
    /// key=value configuration file; missing keys take their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus split by video into train/, val/ and test/
    Generate(GenerateArgs),
    /// Train the relation scorer on <corpus>/train, selecting on <corpus>/val
    Train(TrainArgs),
    /// Diarize a corpus split, or one WAV file, into RTTM hypotheses
    Diarize(DiarizeArgs),
    /// Score hypothesis RTTM against reference RTTM
    Score(ScoreArgs),
    /// Corpus DER at evaluation-time missing rates 0.0, 0.1, ..., 1.0
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    videos: usize,
    /// Maximum speakers per video
    #[arg(long, default_value_t = 8)]
    speakers: usize,
    #[arg(long, default_value_t = 4)]
    min_speakers: usize,
    #[arg(long, default_value_t = 0.25)]
    off_screen: f64,
    #[arg(long, default_value_t = 3)]
    segs: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory holding train/ and val/ splits
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Vad {
    Oracle,
    Energy,
}

#[derive(Args, Debug, Clone)]
struct FusionArgs {
    /// Late-fusion weight of the relation score; enables face-score fusion
    #[arg(long)]
    alpha: Option<f64>,
    /// Temperature of the face-distance score
    #[arg(long, default_value_t = 0.05)]
    face_tau: f64,
}

#[derive(Args, Debug)]
struct DiarizeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Corpus split directory (oracle VAD from its reference RTTMs)
    #[arg(long, conflicts_with = "wav")]
    corpus: Option<PathBuf>,
    /// A 16-bit mono WAV file, diarized from its spectrogram
    #[arg(long)]
    wav: Option<PathBuf>,
    /// Reference RTTM supplying speech regions for --vad oracle with --wav
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Vad::Oracle)]
    vad: Vad,
    /// Probability of hiding each visible face before scoring
    #[arg(long, default_value_t = 0.0)]
    missing_rate: f64,
    #[command(flatten)]
    fusion: FusionArgs,
    /// Output directory for hypothesis RTTM files
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Reference RTTM file or directory of .rttm files
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Hypothesis RTTM file or directory of .rttm files
    #[arg(long)]
    hyp: PathBuf,
    /// Collar in seconds; defaults to the configuration's
    #[arg(long)]
    collar: Option<f64>,
    /// Also write the per-file scores as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    fusion: FusionArgs,
    /// CSV output; the table is printed either way
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
