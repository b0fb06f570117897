use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "circuitflow", version, about = "Probabilistic circuits: learn, prune, grow, compress")]
pub struct Cli {
    /// Worker threads for evaluation and flows (overrides CIRCUITFLOW_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Report wall time per stage and add a wall_secs column to training logs.
    #[arg(long, global = true)]
    pub timings: bool,
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a Chow-Liu tree and compile it into a hidden-tree circuit.
    BuildHclt(BuildHcltArgs),
    /// Fit parameters with mini-batch EM.
    Train(TrainArgs),
    /// Remove a fraction of sum edges ranked by a heuristic.
    Prune(PruneArgs),
    /// Double every unit and perturb the copied parameters.
    Grow(GrowArgs),
    /// Run prune, grow and EM finetuning for several iterations.
    Spgrow(SpgrowArgs),
    /// Prune and finetune in small steps within a likelihood budget.
    Compress(CompressArgs),
    /// Print mean log-likelihood and bits per dimension on a dataset.
    Eval(EvalArgs),
    /// Draw samples from a circuit.
    Sample(SampleArgs),
    /// Bucket sum-edge parameters into equal-width bins on [0, 1].
    Histogram(HistogramArgs),
    /// Check a circuit file and list every structural violation.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelFormat {
    Text,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Heuristic {
    Rand,
    Param,
    Flow,
}

/// Options shared by every command that writes an output directory.
#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory; defaults to `output_dir` from the config, else `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format of the written model.
    #[arg(long, value_enum, default_value_t = ModelFormat::Text)]
    pub format: ModelFormat,
}

/// Experiment config plus the data flags that override it.
#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// TOML experiment config; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Top-level seed; every component seed is derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training data (CSV, or binary for .pcd/.bin).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Validation data.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Test data, evaluated once at the end.
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StructureArgs {
    /// Latent states per tree node.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Pseudo-count for mutual information estimates.
    #[arg(long = "mi-smoothing")]
    pub mi_smoothing: Option<f64>,
    /// Estimate mutual information on columns reduced to this many categories.
    #[arg(long)]
    pub quantize: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct EmArgs {
    /// Rows per mini-batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Laplace pseudo-count added to every flow.
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Replace the schedule by one segment of this many epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Step size at the start of the single segment.
    #[arg(long, requires = "epochs")]
    pub alpha_start: Option<f64>,
    /// Step size at the end of the single segment.
    #[arg(long, requires = "epochs")]
    pub alpha_end: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BuildHcltArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[command(flatten)]
    pub structure: StructureArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Starting circuit; without it a hidden-tree circuit is built from the data.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[command(flatten)]
    pub structure: StructureArgs,
    #[command(flatten)]
    pub em: EmArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PruneArgs {
    /// Circuit to prune.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = Heuristic::Flow)]
    pub heuristic: Heuristic,
    /// Fraction of sum edges to remove, in (0, 1).
    #[arg(long)]
    pub fraction: f64,
    /// Data for flow scores and likelihood-drop reports.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Seed for the random heuristic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add exact per-edge drops and the multi-edge bound to the report.
    #[arg(long, requires = "dataset")]
    pub report_bounds: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GrowArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Variance of the multiplicative parameter noise.
    #[arg(long, default_value_t = 0.1)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SpgrowArgs {
    /// Starting circuit; without it a hidden-tree circuit is built from the data.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[command(flatten)]
    pub structure: StructureArgs,
    #[command(flatten)]
    pub em: EmArgs,
    /// Maximum prune-grow-finetune rounds.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Fraction of sum edges pruned each round.
    #[arg(long)]
    pub prune_fraction: Option<f64>,
    /// Variance of the growing noise.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Rounds without validation improvement before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[command(flatten)]
    pub em: EmArgs,
    /// Fraction of the remaining edges removed per step.
    #[arg(long)]
    pub step_fraction: Option<f64>,
    /// Allowed relative drop of training log-likelihood.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Upper bound on prune-finetune steps.
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Also write metrics.toml and a manifest to this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct HistogramArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Output directory; without it the CSV goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub model: PathBuf,
}
