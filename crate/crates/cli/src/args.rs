use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "uspann", version, about = "Learned space partitions for approximate nearest neighbor search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset and write it as CSV or fvecs.
    GenData(GenDataArgs),
    /// Compute the exact k'-NN matrix of the training split and cache it.
    BuildKnn(BuildKnnArgs),
    /// Train a single partitioner and write the model file.
    Train(TrainCmdArgs),
    /// Train a flat, ensemble or hierarchical index and write it.
    BuildIndex(BuildIndexArgs),
    /// Sweep recall against candidate count for a learned index.
    Eval(EvalArgs),
    /// Sweep several methods against one shared ground truth.
    Compare(CompareArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    /// Generator, e.g. `synthetic:moons:n=2000,noise=0.05`.
    #[arg(long)]
    pub format: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; `.fvecs` writes fvecs, anything else CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Dataset file (fvecs or CSV).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// `fvecs`, `csv` or `synthetic:<moons|circles|blobs>[:key=value,...]`.
    #[arg(long)]
    pub format: Option<String>,
    /// Separate query file; when absent queries are split off the dataset.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub query_fraction: f64,
    /// Skip per-dimension standardization (fitted on the training split).
    #[arg(long)]
    pub no_standardize: bool,
    /// Seeds generation, the query split, initialization and batching.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchArg {
    Logreg,
    Mlp,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Number of bins.
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = ArchArg::Mlp)]
    pub arch: ArchArg,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 7.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.04)]
    pub batch_fraction: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 10)]
    pub k_prime: usize,
    /// Use the mean of neighbor distributions as targets instead of argmax counts.
    #[arg(long)]
    pub soft_targets: bool,
    /// k'-NN cache; read if present, otherwise computed and written.
    #[arg(long)]
    pub knn_cache: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IndexArgs {
    /// Number of boosted ensemble members.
    #[arg(long, default_value_t = 1)]
    pub ensemble: usize,
    /// Per-level fanouts for a hierarchical index, e.g. `4,4`.
    #[arg(long, value_delimiter = ',')]
    pub fanouts: Option<Vec<usize>>,
    /// Ensemble queries scan the union of all members' candidates.
    #[arg(long)]
    pub union: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildKnnArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10)]
    pub k_prime: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainCmdArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildIndexArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub index: IndexArgs,
    /// Index file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub index: IndexArgs,
    /// Existing index file; when absent an index is built from the flags.
    #[arg(long = "index")]
    pub index_file: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Probe depths, e.g. `1,2,4`; defaults to the standard grid.
    #[arg(long, value_delimiter = ',')]
    pub m_prime: Option<Vec<usize>>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub index: IndexArgs,
    /// Methods to sweep: usp, usp-hier, kmeans.
    #[arg(long, value_delimiter = ',', default_value = "usp,kmeans")]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_delimiter = ',')]
    pub m_prime: Option<Vec<usize>>,
    #[arg(long, default_value_t = 100)]
    pub kmeans_iters: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
