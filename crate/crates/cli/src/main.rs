//! `gsketch`: plan, build and use Gaussian kernel set sketches.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gsketch_core::apps::ResampleMode;
use gsketch_core::Variant;

#[derive(Debug, Parser)]
#[command(name = "gsketch", version, about = "Sketches for the Gaussian kernel distance between point sets")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Relative error target.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub epsilon: f64,

    /// Additive error target.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub alpha: f64,

    /// Failure probability for the median-of-replicas estimate.
    #[arg(long, global = true, default_value_t = 0.1)]
    pub delta: f64,

    /// L (max |coordinate|) for gs, R (max norm) for hd; estimated from the inputs when absent.
    #[arg(long, global = true)]
    pub radius: Option<f64>,

    #[arg(long, global = true, default_value = "gs", value_parser = parse_variant)]
    pub variant: Variant,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Project embeddings to this many coordinates.
    #[arg(long, global = true)]
    pub jl_dim: Option<usize>,

    /// Median over this many independent sketches.
    #[arg(long, global = true)]
    pub replicas: Option<usize>,

    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// File of `key=value` lines supplying flags not given on the command line.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Kernel bandwidth σ; inputs and --radius are divided by σ.
    #[arg(long, global = true)]
    pub bandwidth: Option<f64>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: gsketch_core::Error| e.to_string())
}

fn parse_resample(s: &str) -> Result<ResampleMode, String> {
    s.parse().map_err(|e: gsketch_core::Error| e.to_string())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Distance,
    Pca,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScheduleArg {
    Linear,
    Geometric,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the planned truncation order and sketch dimensions.
    Plan {
        /// Input dimension.
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value = "distance")]
        task: TaskArg,
        /// Number of points, for the pca task.
        #[arg(long = "n")]
        points: Option<usize>,
    },
    /// Embed every set of an input file and write the binary sketch file.
    Sketch {
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Squared kernel distance between two point sets.
    Dist {
        first: PathBuf,
        second: PathBuf,
        /// Only compute the exact distance.
        #[arg(long, conflicts_with = "sketch_only")]
        exact_only: bool,
        /// Skip the exact distance.
        #[arg(long)]
        sketch_only: bool,
    },
    /// Two-sample test with a resampled threshold.
    Test2 {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        /// iid or permutation.
        #[arg(long, default_value = "iid", value_parser = parse_resample)]
        resample: ResampleMode,
    },
    /// Rank-k kernel PCA basis from sketches; writes V as CSV.
    Kpca {
        input: PathBuf,
        /// Target rank.
        #[arg(long = "k")]
        rank: usize,
        #[arg(long, short)]
        output: PathBuf,
        /// Also print the residual and the exact optimum.
        #[arg(long)]
        verify: bool,
        #[arg(long, value_enum, default_value = "linear")]
        schedule: ScheduleArg,
    },
    /// Nearest indexed set for each query set.
    Nn {
        /// JSONL file of labeled sets to index.
        #[arg(long)]
        index: PathBuf,
        /// Query file: one CSV set or JSONL sets.
        #[arg(long)]
        query: PathBuf,
    },
    /// Per-point sketch latency over a grid of dimensions and truncation orders.
    Bench {
        /// Input dimensions; defaults to 2,4,8,16 for gs and 16,64,512 for hd.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 12])]
        orders: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv = match config::expand_argv(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
