//! Command-line driver for the learned binary hashing toolkit.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or file
//! error, 4 numerical abort during training.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "dsah",
    version,
    about = "Learned binary hashing: train compact hash codes, encode queries, and evaluate Hamming-space retrieval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train hash codes and encoder networks on a dataset
    Train(TrainArgs),
    /// Encode features into binary codes with a trained checkpoint
    Encode(EncodeArgs),
    /// Evaluate retrieval quality of database codes against query codes
    Eval(EvalArgs),
    /// Run the full mode x variant ablation grid on one dataset
    Ablate(AblateArgs),
    /// Generate a synthetic clustered benchmark with a train/query split
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Configuration file (key = value per line); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Features file (CSV or DSAHFEAT binary)
    #[arg(long)]
    features: PathBuf,
    /// Labels file (one row per sample, semicolon-separated ids)
    #[arg(long)]
    labels: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured code length
    #[arg(long)]
    bits: Option<usize>,
    /// Overrides the configured mode (dsah1 or dsah2)
    #[arg(long)]
    mode: Option<String>,
    /// Overrides the configured variant (full, a, b, c, or d)
    #[arg(long)]
    variant: Option<String>,
    /// Additionally write packed binary codes
    #[arg(long)]
    packed: bool,
}

#[derive(Args)]
struct EncodeArgs {
    /// Trained encoder checkpoint
    #[arg(long)]
    checkpoint: PathBuf,
    /// Features file to encode
    #[arg(long)]
    features: PathBuf,
    /// Output codes file
    #[arg(long)]
    out: PathBuf,
    /// Write packed binary codes instead of text
    #[arg(long)]
    packed: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Database codes file (required in asymmetric mode)
    #[arg(long)]
    db_codes: Option<PathBuf>,
    /// Database labels file
    #[arg(long)]
    db_labels: PathBuf,
    /// Query codes file
    #[arg(long)]
    query_codes: PathBuf,
    /// Query labels file
    #[arg(long)]
    query_labels: PathBuf,
    /// Output directory for metrics.csv and pr_curve.csv
    #[arg(long)]
    out: PathBuf,
    /// asymmetric: database codes come from --db-codes;
    /// symmetric: database codes are recomputed from --db-features through --checkpoint
    #[arg(long, default_value = "asymmetric")]
    mode: String,
    /// Truncate the ranking used for mean average precision
    #[arg(long)]
    topk: Option<usize>,
    /// Encoder checkpoint (symmetric mode)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Database features (symmetric mode)
    #[arg(long)]
    db_features: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    /// Base configuration file; mode and variant fields are overridden per cell
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training features file
    #[arg(long)]
    features: PathBuf,
    /// Training labels file
    #[arg(long)]
    labels: PathBuf,
    /// Query features file
    #[arg(long)]
    query_features: PathBuf,
    /// Query labels file
    #[arg(long)]
    query_labels: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured code length
    #[arg(long)]
    bits: Option<usize>,
    /// Truncate the ranking used for mean average precision
    #[arg(long)]
    topk: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of cluster classes
    #[arg(long, default_value_t = 4)]
    classes: usize,
    /// Samples per class before the split
    #[arg(long, default_value_t = 125)]
    per_class: usize,
    /// Feature dimension
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Isotropic noise scale around each unit-norm center
    #[arg(long, default_value_t = 0.1)]
    spread: f64,
    /// Seed for generation and the split
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Fraction of each class held out as queries
    #[arg(long, default_value_t = 0.2)]
    query_fraction: f64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<dsah_core::Error>() {
        Some(dsah_core::Error::Config(_)) | Some(dsah_core::Error::InvalidArgument(_)) => 2,
        Some(dsah_core::Error::NonFinite(_)) => 4,
        Some(_) => 3,
        None => 3,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::train(args),
        Command::Encode(args) => commands::encode(args),
        Command::Eval(args) => commands::eval(args),
        Command::Ablate(args) => commands::ablate(args),
        Command::Synth(args) => commands::synth(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        for cause in err.chain().skip(1) {
            eprintln!("  caused by: {cause}");
        }
        std::process::exit(exit_code_for(&err));
    }
}
