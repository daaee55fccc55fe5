//! The `nosm` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data
//! validation error, 3 numeric failure.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::streams::StreamVariant;

pub use manifest::{sha256_file, InputDigest, RunManifest};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "NOSM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "nosm",
    version,
    about = "Operation sequence models over word-aligned bitext"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert an aligned corpus into operation sequences, one per line.
    ExtractOps(ExtractOpsArgs),
    /// Split operation sequences into source/target streams.
    Streams(StreamsArgs),
    /// Train an n-gram, neural or orientation model.
    Train(TrainArgs),
    /// Print per-sentence log-probabilities and corpus perplexity.
    Score(ScoreArgs),
    /// Write reordered or operation-augmented parallel text.
    ExportNmt(ExportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorpusArgs {
    /// Source sentences, one per line.
    #[arg(long)]
    pub src: PathBuf,
    /// Target sentences, one per line.
    #[arg(long)]
    pub tgt: PathBuf,
    /// Alignments as `i-j` pairs (0-based source-target), one line per sentence.
    #[arg(long)]
    pub align: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtractOpsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, default_value = "osm")]
    pub variant: StreamVariant,
    /// In the coarse variant, tag adjacent backward swaps as SW.
    #[arg(long)]
    pub swap: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StreamsArgs {
    /// Operation corpus written by `extract-ops`.
    #[arg(long)]
    pub ops: PathBuf,
    #[arg(long, default_value = "osm")]
    pub variant: StreamVariant,
    /// Emit each word of a multi-word cept as its own token.
    #[arg(long)]
    pub split_words: bool,
    #[arg(long)]
    pub out_src: PathBuf,
    #[arg(long)]
    pub out_tgt: PathBuf,
    #[arg(long)]
    pub out_sync: PathBuf,
    /// Also dump training instances (`label<TAB>context`) to this file.
    #[arg(long)]
    pub instances: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub n: usize,
    #[arg(long, default_value_t = 7)]
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Ngram,
    Nn,
    Orientation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothingArg {
    /// Interpolated modified Kneser-Ney.
    Kn,
    /// Unsmoothed relative frequencies.
    Ml,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub backend: Backend,
    /// Model output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log path (default: `<out>.log`).
    #[arg(long)]
    pub log: Option<PathBuf>,

    /// n-gram: operation corpus.
    #[arg(long)]
    pub ops: Option<PathBuf>,
    /// n-gram: model order.
    #[arg(long, default_value_t = 5)]
    pub order: usize,
    #[arg(long, value_enum, default_value = "kn")]
    pub smoothing: SmoothingArg,

    /// orientation: source sentences.
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// orientation: target sentences.
    #[arg(long)]
    pub tgt: Option<PathBuf>,
    /// orientation: alignments.
    #[arg(long)]
    pub align: Option<PathBuf>,
    /// orientation: 3 (M, S, D) or 4 (M, S, FD, BD) classes.
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    /// orientation: additive smoothing.
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,

    /// nn: training streams.
    #[arg(long)]
    pub train_src: Option<PathBuf>,
    #[arg(long)]
    pub train_tgt: Option<PathBuf>,
    #[arg(long)]
    pub train_sync: Option<PathBuf>,
    /// nn: validation streams (default: the training streams).
    #[arg(long)]
    pub valid_src: Option<PathBuf>,
    #[arg(long)]
    pub valid_tgt: Option<PathBuf>,
    #[arg(long)]
    pub valid_sync: Option<PathBuf>,
    /// nn: target order (context of n-1 target-stream tokens).
    #[arg(long, default_value_t = 7)]
    pub n: usize,
    /// nn: source window.
    #[arg(long, default_value_t = 7)]
    pub m: usize,
    #[arg(long, default_value_t = 20_000)]
    pub input_vocab: usize,
    #[arg(long, default_value_t = 40_000)]
    pub output_vocab: usize,
    #[arg(long, default_value_t = 150)]
    pub embedding_dim: usize,
    #[arg(long, default_value_t = 750)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 100)]
    pub noise_samples: usize,
    #[arg(long, default_value_t = 1000)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 25)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lr_decay: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    /// ARPA n-gram model or binary neural model (detected from the file).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "osm")]
    pub variant: StreamVariant,

    /// Aligned corpus to score.
    #[arg(long)]
    pub src: Option<PathBuf>,
    #[arg(long)]
    pub tgt: Option<PathBuf>,
    #[arg(long)]
    pub align: Option<PathBuf>,
    /// Operation corpus to score (n-gram models).
    #[arg(long)]
    pub ops: Option<PathBuf>,
    /// Stream corpus to score (neural models).
    #[arg(long)]
    pub stream_src: Option<PathBuf>,
    #[arg(long)]
    pub stream_tgt: Option<PathBuf>,
    #[arg(long)]
    pub stream_sync: Option<PathBuf>,

    /// Score phrase by phrase through the incremental scorer.
    #[arg(long, requires = "phrases")]
    pub incremental: bool,
    /// One line per sentence of unit indices where a new phrase starts.
    #[arg(long)]
    pub phrases: Option<PathBuf>,

    /// Fail unless the neural model uses this target order.
    #[arg(long)]
    pub n: Option<usize>,
    /// Fail unless the neural model uses this source window.
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportMode {
    /// Source words in target order, paired with the original target.
    Preordered,
    /// Operation source/target streams.
    OsmAugmented,
    /// Coarse-tag source/target streams.
    CoarseAugmented,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_enum)]
    pub mode: ExportMode,
    #[arg(long)]
    pub out_src: PathBuf,
    #[arg(long)]
    pub out_tgt: PathBuf,
    /// Original source side of the auxiliary pair (default: `<out-src>.aux.src`).
    #[arg(long)]
    pub aux_src: Option<PathBuf>,
    /// Transformed source side of the auxiliary pair (default: `<out-src>.aux.tgt`).
    #[arg(long)]
    pub aux_tgt: Option<PathBuf>,
}

/// Sizes the global thread pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))
}

/// Runs one command and returns its exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match commands::execute(&cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
