mod commands;
mod config;
mod output;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Group integrated information from interaction logs.
#[derive(Parser, Debug)]
#[command(name = "groupphi", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. A `--config` file supplies any that are not given.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Global {
    /// Input file(s); repeat for several groups.
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// Phi method (empirical|ar|atomic) or sampling method (random_walk|forest_fire|breadth_first|random_nodes).
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Time delay in steps: a value, a list `1,2,5` or a range `1..30`.
    #[arg(long, global = true)]
    pub tau: Option<String>,
    /// Time step size in ms: a value or a list.
    #[arg(long, global = true)]
    pub delta_ms: Option<String>,
    /// Nodes per subsample.
    #[arg(long, global = true)]
    pub goal: Option<usize>,
    /// Number of subsamples.
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Random seed (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Speaking volume threshold for turn encoding.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Silences up to this long inside a turn are filled.
    #[arg(long, global = true)]
    pub merge_gap_ms: Option<f64>,
    /// Days of edits before each quality change.
    #[arg(long, global = true)]
    pub window_days: Option<u32>,
    /// Leave wall-clock timestamps out of every output.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Flat `key = value` file of defaults for the options above.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Encode a log into a binary state matrix CSV.
    #[command(subcommand)]
    Encode(EncodeCommand),
    /// Phi of a state matrix, with the low-variance node correction.
    Phi {
        #[arg(value_enum, value_name = "METHOD")]
        kind: PhiKind,
    },
    /// Subsample nodes of a packet trace's communication graph.
    Sample(SampleArgs),
    /// Sweep phi over the time delay or the packet time step size.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Statistics over columns of a CSV table.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// End-to-end analyses.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum PhiKind {
    Empirical,
    Ar,
    Atomic,
}

#[derive(Subcommand, Debug)]
pub enum EncodeCommand {
    /// Per-speaker volume envelopes (`step,<speaker>...`).
    Turns {
        #[arg(long)]
        crosstalk_margin: Option<f64>,
    },
    /// Chat transcript (`line_index,speaker,text`).
    Chat {
        /// Comma-separated roster; silent members become all-zero columns.
        #[arg(long)]
        roster: Option<String>,
    },
    /// Edit log; writes one matrix per quality-change window into the output directory.
    Edits {
        /// Skip articles with more edits than this.
        #[arg(long)]
        max_edits: Option<usize>,
    },
    /// Packet trace (`timestamp_us,src,dst`).
    Packets {
        /// Comma-separated node ids; defaults to every node of the graph.
        #[arg(long)]
        nodes: Option<String>,
    },
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    /// Id of the node the first sample starts from.
    #[arg(long)]
    pub start: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum SweepCommand {
    /// Phi of one or more state matrices at every τ, averaged across inputs.
    Tau,
    /// Atomic phi of packet subsamples at every δ.
    Delta,
}

#[derive(Args, Debug, Serialize)]
pub struct ColumnArgs {
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub y: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum StatsCommand {
    /// Pearson correlation of `--x` and `--y`.
    Corr(ColumnArgs),
    /// Kendall tau-b of `--x` and `--y`.
    Tau(ColumnArgs),
    /// Rank-sum z of sample `--y` against sample `--x` (empty cells skipped).
    Wilcoxon(ColumnArgs),
    /// Least squares of `--y` on comma-separated `--x` columns and an optional factor.
    Ols {
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long)]
        factor: Option<String>,
        /// Comma-separated factor levels; the first is the reference.
        #[arg(long)]
        levels: Option<String>,
    },
    /// Removes a level shift at `--break-date` from the trend of `--y` over `--date`.
    Adjust {
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long)]
        date: String,
        #[arg(long)]
        break_date: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum PipelineCommand {
    /// Meeting or chat groups: encode, τ sweep, per-group phi at the peak.
    Study1 {
        /// CSV of `group,score` for correlating phi with an outside score.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Reuse state matrices already present in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Article edit histories: quality windows, atomic phi, rank tests and regression.
    Study2 {
        /// Skip articles with more edits than this.
        #[arg(long)]
        max_edits: Option<usize>,
        /// Reuse window matrices already present in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Packet trace: subsampling and δ sweep of atomic phi.
    Study3 {
        /// Reuse node samples already present in the output directory.
        #[arg(long)]
        resume: bool,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] groupphi::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_io() => 1,
            _ => 2,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::json!({
            "error": match self {
                CliError::Core(e) => e.kind(),
                CliError::Usage(_) => "Usage",
            },
            "message": self.to_string(),
        });
        if let CliError::Core(groupphi::Error::File { path, .. }) = self {
            obj["path"] = serde_json::Value::String(path.display().to_string());
        }
        obj
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code())
}
