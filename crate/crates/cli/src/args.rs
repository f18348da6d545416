use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ncode", version, about = "Architecture search over positional digit codes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search-space utilities.
    Space {
        #[command(subcommand)]
        command: SpaceCommand,
    },
    /// Generate an instruction-tuning dataset as JSON lines.
    GenData(GenDataArgs),
    /// Run the ranking search loop and write its trace.
    Search(SearchArgs),
    /// Run random search or regularized evolution over several seeds.
    Baseline(BaselineArgs),
    /// Compare searches with true and shuffled history values.
    AblateShuffle(AblateArgs),
    /// Turn traces into best-so-far and provenance CSV files.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum SpaceCommand {
    /// Check a space file and print its cardinality.
    Validate { file: PathBuf },
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, required_unless_present = "manifest")]
    pub space: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub evaluator: Option<PathBuf>,
    /// Generation config (JSON).
    #[arg(long, conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "manifest")]
    pub n_samples: Option<usize>,
    #[arg(long, conflicts_with = "manifest")]
    pub seed: Option<u64>,
    /// Replay the run recorded in this manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Random,
    Mixed,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, required_unless_present = "manifest")]
    pub space: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub evaluator: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub ranker: Option<PathBuf>,
    /// Search config (JSON).
    #[arg(long, conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "manifest")]
    pub n_iters: Option<usize>,
    #[arg(long, value_enum, conflicts_with = "manifest")]
    pub candidate_mode: Option<ModeArg>,
    #[arg(long, conflicts_with = "manifest")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Random,
    Regevo,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Random => "random",
            Algo::Regevo => "regevo",
        }
    }
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub evaluator: PathBuf,
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Evolution settings (JSON); ignored by random search.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Seed list such as `0-29` or `1,4,9`.
    #[arg(long)]
    pub seeds: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub space: PathBuf,
    #[arg(long)]
    pub evaluator: PathBuf,
    #[arg(long)]
    pub ranker: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_iters: Option<usize>,
    #[arg(long)]
    pub seeds: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Sliding window for the provenance ratio of mixed-mode traces.
    #[arg(long, default_value_t = 20)]
    pub window: usize,
}
