use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use spkm::data::LabelColumn;

#[derive(Debug, Parser)]
#[command(name = "spkm", version, about = "Sparse pre-image kernel machines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and write model.json and report.json
    Train(TrainArgs),
    /// Score a saved model on a dataset
    Eval(EvalArgs),
    /// Run a benchmark scenario over five seeds
    Bench(BenchArgs),
    /// Compare the Rademacher bound with a Monte-Carlo estimate
    Theory(TheoryArgs),
    /// Generate a synthetic dataset
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Rbf,
    Poly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    Squared,
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Binary,
    Multiclass,
    Regression,
}

/// `auto` or a positive number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaArg {
    Auto,
    Value(f64),
}

impl FromStr for SigmaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(SigmaArg::Auto);
        }
        s.parse::<f64>().map(SigmaArg::Value).map_err(|_| format!("expected a number or 'auto', got '{s}'"))
    }
}

/// `none` or a number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusArg(pub Option<f64>);

impl FromStr for RadiusArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("none") {
            return Ok(RadiusArg(None));
        }
        s.parse::<f64>().map(|v| RadiusArg(Some(v))).map_err(|_| format!("expected a number or 'none', got '{s}'"))
    }
}

#[derive(Clone, Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Label column as a 0-based index or a header name
    #[arg(long = "label-col", value_parser = parse_label_col)]
    pub label_col: LabelColumn,
}

fn parse_label_col(s: &str) -> Result<LabelColumn, String> {
    Ok(s.parse().expect("infallible"))
}

#[derive(Clone, Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Defaults to binary for cosine loss (multiclass with more than two
    /// labels) and regression for squared loss
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long, value_enum, default_value = "rbf")]
    pub kernel: KernelArg,
    #[arg(long, default_value = "auto")]
    pub sigma: SigmaArg,
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// Additive constant of the polynomial kernel
    #[arg(long, default_value_t = 1.0)]
    pub offset: f64,
    /// Map RBF values to [-1, 1]
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub rescale: bool,
    #[arg(long, value_enum, default_value = "cosine")]
    pub loss: LossArg,
    #[arg(long, default_value_t = 5)]
    pub r: usize,
    #[arg(long = "c-norm", default_value_t = 2)]
    pub c_norm: u8,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    #[arg(long = "u-radius", default_value = "none")]
    pub u_radius: RadiusArg,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long = "u-max-iters", default_value_t = 20)]
    pub u_max_iters: usize,
    #[arg(long = "outer-max-iters", default_value_t = 50)]
    pub outer_max_iters: usize,
    #[arg(long = "obj-tol", default_value_t = 1e-5)]
    pub obj_tol: f64,
    /// Standardize features with training statistics
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub standardize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Write the metrics here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Table1,
    Nystrom,
    Scaling,
    Sparsity,
    Mkl,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Table1 => "table1",
            Scenario::Nystrom => "nystrom",
            Scenario::Scaling => "scaling",
            Scenario::Sparsity => "sparsity",
            Scenario::Mkl => "mkl",
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub scenario: Scenario,
    /// First seed; repeats use seed..seed+4
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Breast Cancer Wisconsin CSV with a "diagnosis" column
    #[arg(long = "bcw", default_value = "data/breast_cancer_wisconsin.csv")]
    pub bcw: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct TheoryArgs {
    /// Uses a seeded standard-normal sample when omitted
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long = "label-col", value_parser = parse_label_col)]
    pub label_col: Option<LabelColumn>,
    /// Sample size of the generated data
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Bound on the l1 norm of the weights
    #[arg(long = "lambda-bound", default_value_t = 1.0)]
    pub lambda_bound: f64,
    #[arg(long, default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    Blobs,
    SparseNoise,
    Multiview,
    Regression,
}

#[derive(Clone, Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub generator: Generator,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Blob standard deviation or regression noise level
    #[arg(long, default_value_t = 0.5)]
    pub std: f64,
    /// Blob center distance from the origin or view separation
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,
    #[arg(long = "d-signal", default_value_t = 3)]
    pub d_signal: usize,
    #[arg(long = "d-noise", default_value_t = 27)]
    pub d_noise: usize,
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// Feature count of the regression generator
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; the mask sidecar is written next to it
    #[arg(long)]
    pub out: PathBuf,
}
