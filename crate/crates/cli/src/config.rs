//! Argument surface of the `lazy-spectra` binary.

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "lazy-spectra",
    about = "Top-k generalized eigendecomposition and CCA solvers with a dense validation oracle"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve a k-GenEV problem from Matrix Market files.
    Genev(GenevArgs),
    /// Solve a k-CCA problem from two data files.
    Cca(CcaArgs),
    /// Run the numeric matrix-algebra lemma suite and report violations.
    Validate(ValidateArgs),
    /// Benchmark inner-matvec counts across planted eigengaps.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Accuracy tied to a caller-supplied relative eigengap.
    GapDependent,
    /// Accuracy tied to the epsilon parameter only.
    GapFree,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunBackend {
    Auto,
    Cg,
    Svrg,
}

#[derive(Args, Debug)]
pub struct GenevArgs {
    /// Matrix Market file holding A.
    #[arg(long)]
    pub a: String,
    /// Matrix Market file holding the positive definite metric B.
    #[arg(long)]
    pub b: String,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Relative eigengap (gap-dependent mode).
    #[arg(long)]
    pub gap: Option<f64>,
    /// Accuracy parameter (gap-free mode; also the leakage target).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Override for the multiplicative error handed to the solver.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Override for the per-extraction accuracy.
    #[arg(long)]
    pub eps_pca: Option<f64>,
    /// Confidence parameter.
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = RunBackend::Auto)]
    pub backend: RunBackend,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    pub out: Option<String>,
    /// Strictly sequential execution and zeroed timing fields.
    #[arg(long, default_value_t = false)]
    pub deterministic: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Binary,
}

#[derive(Args, Debug)]
pub struct CcaArgs {
    /// First view (one sample per row).
    #[arg(long)]
    pub x: String,
    /// Second view (same number of rows).
    #[arg(long)]
    pub y: String,
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    pub format: DataFormat,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_x: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_y: f64,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eps_pca: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = RunBackend::Auto)]
    pub backend: RunBackend,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, default_value_t = false)]
    pub deterministic: bool,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Random instances per lemma.
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated relative eigengaps to sweep.
    #[arg(long, value_delimiter = ',')]
    pub gaps: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Problem dimension of the planted instances.
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<String>,
    /// Sequential trials and zeroed wall-clock column.
    #[arg(long, default_value_t = false)]
    pub deterministic: bool,
}
