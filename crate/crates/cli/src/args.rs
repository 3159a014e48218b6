use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "catkit", version, about = "Caption filtering, pseudo-labels, contrastive-loss checks and probe fitting")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output files (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter line-delimited caption records and write per-filter statistics.
    Filter(FilterArgs),
    /// Turn dense teacher predictions into top-k pseudo-labels.
    Pseudolabel(PseudolabelArgs),
    /// Train linear encoders on synthetic pairs under four objectives.
    TrainToy(TrainToyArgs),
    /// Compare analytic loss gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Fit a prompt-initialized linear probe by projected gradient descent.
    Probe(ProbeArgs),
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Kept records; defaults to OUT/filtered.jsonl.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Comma-separated, applied in order: score, c, a, t. Empty keeps everything.
    #[arg(long)]
    pub filters: Option<String>,
    #[arg(long)]
    pub min_complexity: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub spot_conf: Option<f64>,
    #[arg(long)]
    pub spot_chars: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub min_score: Option<f64>,
    /// Defaults to OUT/filter_stats.tsv.
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PseudolabelArgs {
    /// Line-delimited {"id", "obj": [..], "attr": [..]} probability records.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub obj_vocab: Option<PathBuf>,
    #[arg(long)]
    pub attr_vocab: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Defaults to OUT/pseudolabels.jsonl.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub lr: Option<f64>,
    /// small-clean or large-noisy (alpha, beta) defaults.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Initial temperature.
    #[arg(long, allow_negative_numbers = true)]
    pub tau_init: Option<f64>,
    /// Keep the temperature fixed at its initial value.
    #[arg(long)]
    pub fixed_tau: bool,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub noise: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alignment: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub duplicate_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Batch file (`n d tau` header, then image rows, then text rows).
    /// A seeded random batch is used when absent.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// detached, full or both.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub step: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Defaults to OUT/gradcheck.tsv.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Negate the analytic text gradient (harness self-test).
    #[arg(long, hide = true)]
    pub inject_sign_flip: bool,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Class prompt embeddings, one row per class.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta_b: Option<f64>,
    /// Step size; defaults to the inverse of the loss's Lipschitz bound.
    #[arg(long, allow_negative_numbers = true)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub cosine: bool,
    /// Defaults to OUT/probe_trajectory.tsv.
    #[arg(long)]
    pub trajectory_out: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true, value_delimiter = ',')]
    pub delta_grid: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true, value_delimiter = ',')]
    pub delta_b_grid: Option<Vec<f64>>,
    /// Examples per class for the accuracy table.
    #[arg(long, value_delimiter = ',')]
    pub k_shot: Option<Vec<usize>>,
    #[arg(long)]
    pub eval_features: Option<PathBuf>,
    #[arg(long)]
    pub eval_labels: Option<PathBuf>,
}
