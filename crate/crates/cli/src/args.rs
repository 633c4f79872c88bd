use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ttembed",
    version,
    about = "Tensor-train compression of token embedding matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress an embedding matrix into a TTEV1 store and print a report.
    Compress(CompressArgs),
    /// Expand a TTEV1 store back into a dense matrix.
    Reconstruct(ReconstructArgs),
    /// Parameter accounting for a TTEV1 store.
    Info(InfoArgs),
    /// Per-row mass/geometric centre diagnostics as CSV.
    Stats(StatsArgs),
    /// Rank tensor sizes and rank caps on a probe of the matrix.
    Search(SearchArgs),
    /// Absolute-error map between two matrices of the same shape.
    Diff(DiffArgs),
    /// Perplexity of scored sequences from a log-probability file.
    Ppl(PplArgs),
    /// Change in log-perplexity between a baseline and a compressed run.
    PplDelta(PplDeltaArgs),
    /// Append rows to an existing TTEV1 store without touching other tokens.
    AddToken(AddTokenArgs),
    /// Per-token latency of decomposition and reconstruction.
    Bench(BenchArgs),
    /// Write a deterministic synthetic embedding matrix.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormat {
    Emb1,
    Csv,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Gaussian,
    Separable,
    Striped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Weighting {
    Signed,
    Absolute,
}

/// How a dense matrix is read. The format defaults to the file extension
/// (`.csv`, `.raw`/`.bin`, anything else EMB1).
#[derive(Debug, Clone, Args)]
pub struct MatrixInput {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
    /// Row count of a headerless raw f32 file.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Row width of a headerless raw f32 file.
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct Threads {
    /// Worker threads for per-token work; never changes output bytes.
    #[arg(long, env = "TTEMBED_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct Decomposition {
    /// Tensor size, e.g. `2,2,2,2,2,2,2,2,3`; the product must equal the row width.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    /// Rank caps `r0,...,rN` with `r0 = rN = 1`. Omit for epsilon-only truncation.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[command(flatten)]
    pub matrix: MatrixInput,
    #[command(flatten)]
    pub decomposition: Decomposition,
    #[command(flatten)]
    pub threads: Threads,
    /// Destination TTEV1 file.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the JSON report here (it is always printed to stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Log-probabilities scored with the compressed embeddings; enables the
    /// perplexity half of the soundness check.
    #[arg(long)]
    pub logp: Option<PathBuf>,
    /// Use per-token perplexity for the soundness check instead of the product form.
    #[arg(long)]
    pub per_token: bool,
    #[arg(long, default_value_t = 0.5)]
    pub min_eta: f64,
    #[arg(long, default_value_t = ttembed::metrics::DEFAULT_PPL_MAX)]
    pub ppl_max: f64,
    /// Rows charged at the mean per-token cost, e.g. position embeddings.
    #[arg(long, default_value_t = 0)]
    pub position_rows: u64,
    /// Total parameter count of the host model, for the whole-model fraction.
    #[arg(long)]
    pub model_total: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Output format; raw writes headerless little-endian f32.
    #[arg(long, value_enum, default_value_t = MatrixFormat::Emb1)]
    pub format: MatrixFormat,
    #[command(flatten)]
    pub threads: Threads,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub position_rows: u64,
    #[arg(long)]
    pub model_total: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub matrix: MatrixInput,
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    /// Centre CSV destination; the summary JSON goes to stdout.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Weighting::Signed)]
    pub weighting: Weighting,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub matrix: MatrixInput,
    /// Ranked plan table as CSV; the JSON report goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Minimum eta_ttd a plan must reach.
    #[arg(long)]
    pub target_ratio: Option<f64>,
    #[arg(long)]
    pub max_rel_error: Option<f64>,
    #[arg(long)]
    pub max_mae: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub max_order: usize,
    #[arg(long, default_value_t = 2)]
    pub min_mode_size: usize,
    /// Number of plans to evaluate, in ranking order.
    #[arg(long, default_value_t = 16)]
    pub budget: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    pub rank_grid: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Rows used as the probe (the first N).
    #[arg(long, default_value_t = 256)]
    pub probe_rows: usize,
    #[arg(long, value_enum, default_value_t = Weighting::Signed)]
    pub weighting: Weighting,
    #[command(flatten)]
    pub threads: Threads,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[command(flatten)]
    pub matrix: MatrixInput,
    /// The matrix compared against `--input` (same format flags).
    #[arg(long)]
    pub other: PathBuf,
    /// Absolute-error grid as CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PplArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = ttembed::metrics::DEFAULT_PPL_MAX)]
    pub ppl_max: f64,
    #[arg(long)]
    pub per_token: bool,
}

#[derive(Debug, Args)]
pub struct PplDeltaArgs {
    /// Baseline log-probabilities.
    #[arg(long)]
    pub input: PathBuf,
    /// Log-probabilities from the compressed model, aligned token for token.
    #[arg(long)]
    pub other: PathBuf,
}

#[derive(Debug, Args)]
pub struct AddTokenArgs {
    /// Existing TTEV1 store.
    #[arg(long)]
    pub input: PathBuf,
    /// Rows to append (EMB1, CSV or raw, chosen like other matrix inputs).
    #[arg(long)]
    pub vector: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Rank caps for the new rows; the store's epsilon is always used.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Matrix to time; without it a synthetic Gaussian matrix is generated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub decomposition: Decomposition,
    /// Tokens timed (synthetic row count, or a cap on the input rows).
    #[arg(long, default_value_t = 1000)]
    pub tokens: usize,
    /// Tokens per text for the per-text reconstruction latency.
    #[arg(long, default_value_t = 128)]
    pub text_len: usize,
    #[arg(long, value_enum, default_value_t = Kind::Gaussian)]
    pub kind: Kind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = Kind::Gaussian)]
    pub kind: Kind,
    #[arg(long)]
    pub rows: usize,
    /// Tensor size of each row; the row width is the product.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Emb1)]
    pub format: MatrixFormat,
}
