use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Infer node strengths of a network choice model from per-node traffic,
/// simulate choice trajectories and score transition estimates.
///
/// All inputs and outputs are whitespace-separated text tables without a
/// header; lines starting with '#' are ignored on input.
///
///   edges        src dst [weight]     (or a CRNK1 binary cache)
///   traffic      node c_in c_out
///   strengths    node lambda
///   transitions  src dst p
///   counts       src dst count
///
/// Exit codes: 0 success, 2 usage, 3 input/parse error, 4 inconsistent
/// model inputs, 5 no convergence.
#[derive(Debug, Parser)]
#[command(name = "netchoice", version, verbatim_doc_comment)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit strengths to traffic and optionally write transition probabilities.
    Rank(RankArgs),
    /// Sample choice trajectories and write per-edge counts.
    Simulate(SimulateArgs),
    /// Write a random strongly connected graph.
    Generate(GenerateArgs),
    /// Write a reference transition table (traffic, pagerank or uniform).
    Baseline(BaselineArgs),
    /// Score transition tables against observed counts.
    Evaluate(EvaluateArgs),
    /// Report whether strengths are identifiable from the given traffic.
    Check(CheckArgs),
    /// Rewrite an edge list in Hilbert or source order.
    Reorder(ReorderArgs),
    /// Translate between string node names and dense ids.
    Remap(RemapArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Edge list (TSV or CRNK1 binary cache).
    #[arg(long, short = 'g')]
    pub graph: PathBuf,
    /// Read the third edge column as weights.
    #[arg(long)]
    pub weighted: bool,
    /// Number of nodes, if larger than the largest id plus one.
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrafficArgs {
    /// Traffic table: node c_in c_out.
    #[arg(long, short = 't')]
    pub traffic: PathBuf,
    /// Allow '-' for a whole column and fill it in from the other one.
    #[arg(long)]
    pub conserve_flow: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub traffic: TrafficArgs,
    /// Gamma prior shape (> 1).
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Gamma prior rate (> 0).
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Stop when the mean absolute change of the strengths falls below this.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Strength output: node lambda.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Transition output: src dst p.
    #[arg(long)]
    pub transitions: Option<PathBuf>,
    /// Exit 0 and keep the last iterate when the tolerance is not reached.
    #[arg(long)]
    pub best_effort: bool,
    /// No per-iteration progress on stderr.
    #[arg(long, short = 'q')]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Ground-truth strengths: node lambda.
    #[arg(
        long,
        conflicts_with = "lambda_dist",
        required_unless_present = "lambda_dist"
    )]
    pub lambda: Option<PathBuf>,
    /// Draw ground-truth strengths instead, e.g. lognormal:1.0.
    #[arg(long)]
    pub lambda_dist: Option<String>,
    /// Where to save drawn strengths.
    #[arg(long)]
    pub lambda_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub trajectories: u64,
    /// Hops per trajectory.
    #[arg(
        long,
        conflicts_with = "stop_prob",
        required_unless_present = "stop_prob"
    )]
    pub length: Option<u64>,
    /// Stop before each hop with this probability instead of a fixed length.
    #[arg(long)]
    pub stop_prob: Option<f64>,
    /// Start node: 'uniform' or a node id.
    #[arg(long, default_value = "uniform")]
    pub start: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Truncate trajectories at nodes without successors instead of failing.
    #[arg(long)]
    pub allow_early_stop: bool,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Count output: src dst count.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Aggregated traffic output: node c_in c_out.
    #[arg(long)]
    pub traffic_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long, default_value_t = 5)]
    pub out_degree: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineMethod {
    Traffic,
    Pagerank,
    Uniform,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Traffic table; needed by the traffic method.
    #[arg(long, short = 't')]
    pub traffic: Option<PathBuf>,
    #[arg(long)]
    pub conserve_flow: bool,
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[arg(long, default_value_t = 0.85)]
    pub damping: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub pagerank_tol: f64,
    /// Transition output: src dst p.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

/// Per-node report columns: node, out_degree, weight (observed departures),
/// then kl_<method> and rank_disp_<method> for each estimate. KL uses the
/// natural log; rank ties go to the smaller node id.
#[derive(Debug, Args)]
#[command(verbatim_doc_comment)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Observed counts: src dst count.
    #[arg(long)]
    pub counts: PathBuf,
    /// NAME=PATH of a transition table; repeat for several methods.
    #[arg(long = "estimate", required = true)]
    pub estimates: Vec<String>,
    /// Per-node report (TSV with header).
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Summary document (JSON).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub traffic: TrafficArgs,
    /// Gamma prior shape used by the MAP existence check (> 1).
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Machine-readable report (JSON).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrderArg {
    Hilbert,
    SrcSorted,
}

#[derive(Debug, Args)]
pub struct ReorderArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, default_value = "hilbert")]
    pub order: OrderArg,
    /// Edge list output.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    /// CRNK1 binary cache output.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RemapDirection {
    /// Names to dense ids; extends the map file with unseen names.
    Encode,
    /// Dense ids back to names.
    Decode,
}

#[derive(Debug, Args)]
pub struct RemapArgs {
    #[arg(value_enum)]
    pub direction: RemapDirection,
    #[arg(long, short = 'i')]
    pub input: PathBuf,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Id map: id name.
    #[arg(long)]
    pub map: PathBuf,
    /// Number of leading id columns (2 for edge lists, 1 for node tables).
    #[arg(long, default_value_t = 2)]
    pub columns: usize,
}
